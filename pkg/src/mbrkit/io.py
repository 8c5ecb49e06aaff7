"""JSONL reading and writing for instances and decode results.

One JSON object per line, UTF-8, LF endings. Serialization is done by a
small fixed-order emitter rather than :func:`json.dumps` so that float
formatting (17 significant digits) and key order are pinned down; output
bytes must be reproducible across runs, platforms, and worker counts.
"""

from __future__ import annotations

import json
import math
from typing import IO, Iterable, Iterator

from .errors import ParseError, SchemaError
from .types import Candidate, DecodeResult, Instance


def format_float(x: float) -> str:
    """A float as decimal text with 17 significant digits.

    17 digits round-trip any IEEE double exactly, so readers recover the
    same value bit for bit.
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def dumps(value) -> str:
    """Compact JSON text with deterministic key order and float format.

    Dicts keep insertion order; floats go through :func:`format_float`;
    everything else matches standard JSON.
    """
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = ",".join(f"{json.dumps(str(k), ensure_ascii=False)}:{dumps(v)}" for k, v in value.items())
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _parse_candidate(obj, line: int, where: str) -> Candidate:
    if not isinstance(obj, dict):
        raise SchemaError(line, where, "candidate must be an object")
    text = obj.get("text")
    if not isinstance(text, str):
        raise SchemaError(line, f"{where}.text", "required and must be a string")
    tokens = obj.get("tokens")
    if tokens is not None:
        if not isinstance(tokens, list) or any(not isinstance(t, str) for t in tokens):
            raise SchemaError(line, f"{where}.tokens", "must be an array of strings")
        tokens = tuple(tokens)
    score = obj.get("score")
    if score is not None:
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise SchemaError(line, f"{where}.score", "must be a number")
        score = float(score)
    answer = obj.get("answer")
    if answer is not None and not isinstance(answer, str):
        raise SchemaError(line, f"{where}.answer", "must be a string")
    model_id = obj.get("model_id")
    if model_id is not None and not isinstance(model_id, str):
        raise SchemaError(line, f"{where}.model_id", "must be a string")
    return Candidate(text=text, tokens=tokens, score=score, answer=answer, model_id=model_id)


def _parse_candidates(value, line: int, where: str) -> tuple[Candidate, ...]:
    if not isinstance(value, list):
        raise SchemaError(line, where, "must be an array of candidate objects")
    return tuple(_parse_candidate(obj, line, f"{where}[{i}]") for i, obj in enumerate(value))


def parse_instance_line(raw: str, line: int) -> Instance:
    """One JSONL line as an Instance; unknown fields are ignored."""
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(line, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(line, "", "top-level value must be an object")
    inst_id = obj.get("id")
    if not isinstance(inst_id, str):
        raise SchemaError(line, "id", "required and must be a string")
    if "evidence" not in obj:
        raise SchemaError(line, "evidence", "required and must be an array")
    evidence = _parse_candidates(obj["evidence"], line, "evidence")
    hypotheses = None
    if obj.get("hypotheses") is not None:
        hypotheses = _parse_candidates(obj["hypotheses"], line, "hypotheses")
    external = None
    if obj.get("external_gain") is not None:
        rows = obj["external_gain"]
        if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
            raise SchemaError(line, "external_gain", "must be an array of arrays of numbers")
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SchemaError(line, f"external_gain[{i}][{j}]", "must be a number")
        external = tuple(tuple(float(v) for v in row) for row in rows)
    return Instance(id=inst_id, evidence=evidence, hypotheses=hypotheses, external_gain=external)


def read_instances(stream: IO[str]) -> list[Instance]:
    """Parse a whole JSONL stream, raising on the first bad line.

    Blank lines are skipped. Batch tools that want to keep going past bad
    lines should call :func:`parse_instance_line` per line instead.
    """
    out = []
    for line_no, raw in enumerate(stream, start=1):
        if not raw.strip():
            continue
        out.append(parse_instance_line(raw, line_no))
    return out


def _candidate_record(c: Candidate) -> dict:
    record: dict = {"text": c.text}
    if c.tokens is not None:
        record["tokens"] = list(c.tokens)
    if c.score is not None:
        record["score"] = c.score
    if c.answer is not None:
        record["answer"] = c.answer
    if c.model_id is not None:
        record["model_id"] = c.model_id
    return record


def write_instances(instances: Iterable[Instance], stream: IO[str]) -> None:
    """Emit instances in the input schema, omitting absent optional fields."""
    for inst in instances:
        record: dict = {
            "id": inst.id,
            "evidence": [_candidate_record(c) for c in inst.evidence],
        }
        if inst.hypotheses is not None:
            record["hypotheses"] = [_candidate_record(c) for c in inst.hypotheses]
        if inst.external_gain is not None:
            record["external_gain"] = [list(row) for row in inst.external_gain]
        stream.write(dumps(record) + "\n")


def result_record(inst_id: str, result: DecodeResult, config_echo: dict) -> dict:
    return {
        "id": inst_id,
        "selected_index": result.selected_index,
        "selected_text": result.selected_text,
        "gain_estimates": list(result.gain_estimates),
        "weights": list(result.weights),
        "tie_broken": result.tie_broken,
        "config_echo": config_echo,
    }


def write_results(
    results: Iterable[tuple[str, DecodeResult]],
    stream: IO[str],
    config_echo: dict,
) -> None:
    """Emit one result line per (instance id, result) pair, in input order."""
    for inst_id, result in results:
        stream.write(dumps(result_record(inst_id, result, config_echo)) + "\n")


def iter_lines(stream: IO[str]) -> Iterator[tuple[int, str]]:
    """Non-blank lines with their 1-based line numbers."""
    for line_no, raw in enumerate(stream, start=1):
        if raw.strip():
            yield line_no, raw
