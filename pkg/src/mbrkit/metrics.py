"""Tokenization, sparse n-gram counts, and the built-in pairwise gain functions.

Every gain here maps a (evidence, hypothesis) candidate pair into [0, 1].
The n-gram overlap kernel is computed in its signed-difference form,

    K(y, y') = 1 - |T(y) - T(y')|_1 / (|T(y)|_1 + |T(y')|_1)

over sparse count vectors T; by the L1 identity this equals
2 * sum_g min(T[g], T'[g]) / (|T|_1 + |T'|_1), which is what the batched
matrix path exploits. Sentence BLEU follows the sacrebleu conventions:
clipped precisions, effective order, exponential smoothing (the k-th
zero-match order contributes 1 / (2^k * total_n)), and the standard
brevity penalty.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import MbrError, MissingAnswerError, OrderMismatchError
from .types import Candidate, GainSpec, Instance

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str, spec: GainSpec) -> tuple[str, ...]:
    """Split ``text`` into tokens per the spec's tokenizer and casing.

    ``whitespace`` splits on runs of Unicode whitespace; ``unicode_word``
    keeps maximal runs of word characters and discards everything else.
    Deterministic; empty text yields an empty sequence.
    """
    if spec.lowercase:
        text = text.lower()
    if spec.tokenizer == "whitespace":
        return tuple(text.split())
    return tuple(_WORD_RE.findall(text))


def candidate_tokens(c: Candidate, spec: GainSpec) -> tuple[str, ...]:
    """Token sequence of a candidate: its own tokens if present (casing
    still applied), otherwise the tokenized text."""
    if c.tokens is not None:
        if spec.lowercase:
            return tuple(t.lower() for t in c.tokens)
        return tuple(c.tokens)
    return tuple(tokenize(c.text, spec))


@dataclass(frozen=True)
class NgramCounts:
    """Sparse n-gram count vector of a single token sequence."""

    order: int
    counts: dict[tuple[str, ...], int]
    total: int


def ngram_counts(tokens, n: int) -> NgramCounts:
    """Count every contiguous window of ``n`` tokens.

    ``total`` is max(0, len(tokens) - n + 1); sequences shorter than the
    order produce an empty count vector.
    """
    tokens = tuple(tokens)
    counts = Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))
    return NgramCounts(order=n, counts=dict(counts), total=max(0, len(tokens) - n + 1))


def rouge_kernel(a: NgramCounts, b: NgramCounts) -> float:
    """N-gram overlap kernel in [0, 1] between two count vectors.

    Two empty vectors are identical (1.0); an empty vector against a
    nonempty one shares nothing (0.0). Symmetric, and 1.0 exactly on
    identical sequences.
    """
    if a.order != b.order:
        raise OrderMismatchError(f"cannot compare order-{a.order} with order-{b.order} counts")
    denom = a.total + b.total
    if denom == 0:
        return 1.0
    l1 = 0
    for gram, count in a.counts.items():
        l1 += abs(count - b.counts.get(gram, 0))
    for gram, count in b.counts.items():
        if gram not in a.counts:
            l1 += count
    return 1.0 - l1 / denom


def gain_exact_match(y: Candidate, y_prime: Candidate, spec: GainSpec) -> float:
    """1.0 iff the two token sequences are equal after normalization."""
    return 1.0 if candidate_tokens(y, spec) == candidate_tokens(y_prime, spec) else 0.0


def _stripped_answer(c: Candidate, context: str) -> str:
    if c.answer is None:
        raise MissingAnswerError(f"{context} has no extracted answer")
    return c.answer.strip()


def gain_answer_match(y: Candidate, y_prime: Candidate) -> float:
    """1.0 iff the extracted answers agree after trimming whitespace."""
    a = _stripped_answer(y, "evidence candidate")
    b = _stripped_answer(y_prime, "hypothesis candidate")
    return 1.0 if a == b else 0.0


def _order_counters(tokens: tuple[str, ...], max_order: int) -> list[Counter]:
    return [
        Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))
        for n in range(1, max_order + 1)
    ]


def _clipped_matches(hyp_counter: Counter, ref_counter: Counter) -> int:
    if len(hyp_counter) > len(ref_counter):
        hyp_counter, ref_counter = ref_counter, hyp_counter
    return sum(min(count, ref_counter.get(gram, 0)) for gram, count in hyp_counter.items())


def _sentence_bleu_from_counts(
    ref_len: int,
    ref_counters: list[Counter],
    hyp_len: int,
    hyp_counters: list[Counter],
    max_order: int,
) -> float:
    if hyp_len == 0:
        return 0.0
    log_prec_sum = 0.0
    effective_order = 0
    smooth = 1.0
    for n in range(1, max_order + 1):
        total = hyp_len - n + 1
        if total <= 0:
            break
        effective_order = n
        correct = _clipped_matches(hyp_counters[n - 1], ref_counters[n - 1])
        if correct == 0:
            smooth *= 2.0
            precision = 1.0 / (smooth * total)
        else:
            precision = correct / total
        log_prec_sum += math.log(precision)
    score = math.exp(log_prec_sum / effective_order)
    if hyp_len < ref_len:
        score *= math.exp(1.0 - ref_len / hyp_len)
    return score


def gain_sentence_bleu(y: Candidate, y_prime: Candidate, spec: GainSpec) -> float:
    """Sentence BLEU of hypothesis ``y_prime`` against single reference ``y``.

    Geometric mean of clipped n-gram precisions for orders 1..max_order
    (truncated to the effective order the hypothesis can support), with
    exponential smoothing of zero-match orders and brevity penalty
    min(1, exp(1 - ref_len/hyp_len)). An empty hypothesis scores 0.
    Not symmetric in its arguments.
    """
    ref = candidate_tokens(y, spec)
    hyp = candidate_tokens(y_prime, spec)
    return _sentence_bleu_from_counts(
        len(ref),
        _order_counters(ref, spec.max_order),
        len(hyp),
        _order_counters(hyp, spec.max_order),
        spec.max_order,
    )


def pair_gain(y: Candidate, y_prime: Candidate, spec: GainSpec) -> float:
    """Scalar gain G(y, y') under the spec; evidence first, hypothesis second."""
    if spec.kind == "exact_match":
        return gain_exact_match(y, y_prime, spec)
    if spec.kind == "answer_match":
        return gain_answer_match(y, y_prime)
    if spec.kind == "rouge_n_kernel":
        a = ngram_counts(candidate_tokens(y, spec), spec.n)
        b = ngram_counts(candidate_tokens(y_prime, spec), spec.n)
        return rouge_kernel(a, b)
    if spec.kind == "sentence_bleu":
        return gain_sentence_bleu(y, y_prime, spec)
    raise MbrError(f"gain kind {spec.kind!r} has no pairwise scalar form")


# ---------------------------------------------------------------------------
# Batched gain matrix
# ---------------------------------------------------------------------------


def _sparse_counts(count_maps: list[dict], vocab: dict) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for counts in count_maps:
        for gram, count in counts.items():
            indices.append(vocab[gram])
            data.append(count)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), indices, indptr),
        shape=(len(count_maps), len(vocab)),
    )


def _pairwise_min_sum(ev: sp.csr_matrix, hyp: sp.csr_matrix) -> np.ndarray:
    """sum_g min(ev[i, g], hyp[j, g]) for all pairs, as exact integers.

    Decomposes each count c into indicator layers c >= t, so the pairwise
    minimum becomes a sum of boolean matrix products. All arithmetic is
    integer-valued in float64, hence exact and independent of evaluation
    order or row partitioning.
    """
    out = np.zeros((ev.shape[0], hyp.shape[0]), dtype=np.float64)
    max_ev = int(ev.data.max()) if ev.nnz else 0
    max_hyp = int(hyp.data.max()) if hyp.nnz else 0
    for t in range(1, min(max_ev, max_hyp) + 1):
        ev_t = ev.copy()
        ev_t.data = (ev.data >= t).astype(np.float64)
        hyp_t = hyp.copy()
        hyp_t.data = (hyp.data >= t).astype(np.float64)
        out += (ev_t @ hyp_t.T).toarray()
    return out


def _rouge_matrix_block(
    ev_counts: list[NgramCounts],
    hyp_counts: list[NgramCounts],
    vocab: dict,
) -> np.ndarray:
    ev_sparse = _sparse_counts([c.counts for c in ev_counts], vocab)
    hyp_sparse = _sparse_counts([c.counts for c in hyp_counts], vocab)
    inter = _pairwise_min_sum(ev_sparse, hyp_sparse)
    ev_tot = np.array([c.total for c in ev_counts], dtype=np.float64)
    hyp_tot = np.array([c.total for c in hyp_counts], dtype=np.float64)
    denom = ev_tot[:, None] + hyp_tot[None, :]
    l1 = denom - 2.0 * inter
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, 1.0 - l1 / safe, 1.0)


def _row_blocks(n_rows: int, jobs: int) -> list[slice]:
    jobs = max(1, min(jobs, n_rows))
    bounds = np.linspace(0, n_rows, jobs + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def gain_matrix(inst: Instance, spec: GainSpec, jobs: int = 1) -> np.ndarray:
    """Pairwise gain table: entry (i, j) = G(evidence_i, hypothesis_j).

    Tokenization and n-gram counting happen once per candidate, never per
    pair. With ``jobs`` > 1 the evidence rows are partitioned across a
    worker pool; every cell's arithmetic is identical to the sequential
    evaluation, so the result does not depend on the partitioning.
    ``kind='external'`` returns the instance's precomputed matrix as-is.
    """
    hyps = inst.hypotheses if inst.hypotheses is not None else inst.evidence
    if spec.kind == "external":
        return np.asarray(inst.external_gain, dtype=np.float64)

    if spec.kind == "answer_match":
        ev_ans = [_stripped_answer(c, f"evidence[{i}]") for i, c in enumerate(inst.evidence)]
        hyp_ans = [_stripped_answer(c, f"hypotheses[{j}]") for j, c in enumerate(hyps)]
        ids: dict[str, int] = {}
        ev_ids = np.array([ids.setdefault(a, len(ids)) for a in ev_ans])
        hyp_ids = np.array([ids.setdefault(a, len(ids)) for a in hyp_ans])
        return np.equal.outer(ev_ids, hyp_ids).astype(np.float64)

    ev_tokens = [candidate_tokens(c, spec) for c in inst.evidence]
    hyp_tokens = [candidate_tokens(c, spec) for c in hyps]

    if spec.kind == "exact_match":
        ids = {}
        ev_ids = np.array([ids.setdefault(t, len(ids)) for t in ev_tokens])
        hyp_ids = np.array([ids.setdefault(t, len(ids)) for t in hyp_tokens])
        return np.equal.outer(ev_ids, hyp_ids).astype(np.float64)

    if spec.kind == "rouge_n_kernel":
        ev_counts = [ngram_counts(t, spec.n) for t in ev_tokens]
        hyp_counts = [ngram_counts(t, spec.n) for t in hyp_tokens]
        vocab: dict = {}
        for counts in ev_counts + hyp_counts:
            for gram in counts.counts:
                vocab.setdefault(gram, len(vocab))
        blocks = _row_blocks(len(ev_counts), jobs)
        if len(blocks) == 1:
            return _rouge_matrix_block(ev_counts, hyp_counts, vocab)
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(
                pool.map(lambda s: _rouge_matrix_block(ev_counts[s], hyp_counts, vocab), blocks)
            )
        return np.vstack(parts)

    if spec.kind == "sentence_bleu":
        order = spec.max_order
        ev_pre = [(len(t), _order_counters(t, order)) for t in ev_tokens]
        hyp_pre = [(len(t), _order_counters(t, order)) for t in hyp_tokens]

        def bleu_block(rows: slice) -> np.ndarray:
            block = np.empty((len(ev_pre[rows]), len(hyp_pre)), dtype=np.float64)
            for bi, (ref_len, ref_counters) in enumerate(ev_pre[rows]):
                for j, (hyp_len, hyp_counters) in enumerate(hyp_pre):
                    block[bi, j] = _sentence_bleu_from_counts(
                        ref_len, ref_counters, hyp_len, hyp_counters, order
                    )
            return block

        blocks = _row_blocks(len(ev_pre), jobs)
        if len(blocks) == 1:
            return bleu_block(blocks[0])
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(pool.map(bleu_block, blocks))
        return np.vstack(parts)

    raise MbrError(f"unsupported gain kind {spec.kind!r}")
