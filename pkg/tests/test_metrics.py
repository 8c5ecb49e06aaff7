"""Tests for tokenization, n-gram counts, and the built-in gain functions."""

import math
from collections import Counter

import numpy as np
import pytest

from mbrkit import (
    Candidate,
    GainSpec,
    Instance,
    MissingAnswerError,
    OrderMismatchError,
    WeightSpec,
    gain_matrix,
    ngram_counts,
    pair_gain,
    rouge_kernel,
    tokenize,
    validate_instance,
)

ROUGE1 = GainSpec(kind="rouge_n_kernel", n=1)
EXACT = GainSpec(kind="exact_match")
BLEU4 = GainSpec(kind="sentence_bleu", max_order=4)


def cand(text, **kwargs):
    return Candidate(text=text, **kwargs)


def token_cand(tokens):
    return Candidate(text=" ".join(tokens), tokens=tuple(tokens))


def random_tokens(rng, vocab_size=20, max_len=30):
    length = int(rng.integers(0, max_len + 1))
    return tuple(f"t{int(i)}" for i in rng.integers(0, vocab_size, size=length))


def kernel_by_overlap(a_tokens, b_tokens, n):
    """Independent kernel route: clipped overlap, 2 * sum(min) / totals."""
    a_grams = Counter(tuple(a_tokens[i:i + n]) for i in range(len(a_tokens) - n + 1))
    b_grams = Counter(tuple(b_tokens[i:i + n]) for i in range(len(b_tokens) - n + 1))
    total = sum(a_grams.values()) + sum(b_grams.values())
    if total == 0:
        return 1.0
    return 2.0 * sum((a_grams & b_grams).values()) / total


def reference_sentence_bleu(hyp, ref, max_order):
    """Independent sentence BLEU: clipped precisions over the orders the
    hypothesis supports, exponential smoothing on zero-match orders, and a
    brevity penalty for short hypotheses."""
    if not hyp:
        return 0.0
    log_total = 0.0
    orders_used = 0
    smoothing = 1.0
    for n in range(1, max_order + 1):
        h_grams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
        if not h_grams:
            break
        r_counts = {}
        for i in range(len(ref) - n + 1):
            g = tuple(ref[i:i + n])
            r_counts[g] = r_counts.get(g, 0) + 1
        h_counts = {}
        for g in h_grams:
            h_counts[g] = h_counts.get(g, 0) + 1
        matched = sum(min(c, r_counts.get(g, 0)) for g, c in h_counts.items())
        if matched == 0:
            smoothing *= 2.0
            precision = 1.0 / (smoothing * len(h_grams))
        else:
            precision = matched / len(h_grams)
        log_total += math.log(precision)
        orders_used += 1
    geo_mean = math.exp(log_total / orders_used)
    if len(hyp) >= len(ref):
        return geo_mean
    return geo_mean * math.exp(1.0 - len(ref) / len(hyp))


class TestTokenize:
    def test_lowercase_whitespace(self):
        assert tokenize("The cat sat", GainSpec()) == ("the", "cat", "sat")

    def test_empty_text(self):
        assert tokenize("", GainSpec()) == ()

    def test_whitespace_runs_collapse(self):
        assert tokenize("a  b\tc", GainSpec()) == ("a", "b", "c")

    def test_no_lowercase(self):
        assert tokenize("The Cat", GainSpec(lowercase=False)) == ("The", "Cat")

    def test_unicode_word_mode(self):
        spec = GainSpec(tokenizer="unicode_word")
        assert tokenize("a,b!c", spec) == ("a", "b", "c")
        assert tokenize("x9 -- y", spec) == ("x9", "y")


class TestNgramCounts:
    def test_unigrams(self):
        counts = ngram_counts(("the", "cat", "sat"), 1)
        assert counts.counts == {("the",): 1, ("cat",): 1, ("sat",): 1}
        assert counts.total == 3

    def test_overlapping_bigrams(self):
        counts = ngram_counts(("a", "a", "a"), 2)
        assert counts.counts == {("a", "a"): 2}
        assert counts.total == 2

    def test_short_sequence(self):
        counts = ngram_counts(("a",), 2)
        assert counts.counts == {}
        assert counts.total == 0

    def test_total_matches_count_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            tokens = random_tokens(rng, vocab_size=5, max_len=12)
            for n in (1, 2, 3):
                counts = ngram_counts(tokens, n)
                assert counts.total == sum(counts.counts.values())
                assert all(v > 0 for v in counts.counts.values())


class TestRougeKernel:
    def test_identity(self):
        counts = ngram_counts(("the", "cat", "sat"), 1)
        assert rouge_kernel(counts, counts) == 1.0

    def test_disjoint(self):
        a = ngram_counts(("a", "b"), 1)
        b = ngram_counts(("c", "d"), 1)
        assert rouge_kernel(a, b) == 0.0

    def test_hand_derived_value(self):
        a = ngram_counts(("the", "cat", "sat"), 1)
        b = ngram_counts(("the", "cat"), 1)
        assert rouge_kernel(a, b) == 0.8

    def test_order_mismatch(self):
        with pytest.raises(OrderMismatchError):
            rouge_kernel(ngram_counts(("a",), 1), ngram_counts(("a", "b"), 2))

    def test_empty_cases(self):
        empty = ngram_counts((), 1)
        full = ngram_counts(("a",), 1)
        assert rouge_kernel(empty, empty) == 1.0
        assert rouge_kernel(empty, full) == 0.0
        assert rouge_kernel(full, empty) == 0.0

    def test_matches_overlap_form_on_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            n = int(rng.integers(1, 4))
            a = random_tokens(rng, vocab_size=6, max_len=15)
            b = random_tokens(rng, vocab_size=6, max_len=15)
            got = rouge_kernel(ngram_counts(a, n), ngram_counts(b, n))
            assert abs(got - kernel_by_overlap(a, b, n)) <= 1e-12
            assert 0.0 <= got <= 1.0

    def test_symmetry_and_self_maximality(self):
        rng = np.random.default_rng(5)
        spec = GainSpec(kind="rouge_n_kernel", n=2)
        for _ in range(100):
            a = token_cand(random_tokens(rng, vocab_size=4, max_len=10))
            b = token_cand(random_tokens(rng, vocab_size=4, max_len=10))
            assert pair_gain(a, b, spec) == pair_gain(b, a, spec)
            assert pair_gain(a, a, spec) == 1.0
            assert pair_gain(a, a, spec) >= pair_gain(a, b, spec)


class TestMatchGains:
    def test_exact_match_normalizes_whitespace(self):
        assert pair_gain(cand("a b"), cand("a  b"), EXACT) == 1.0

    def test_exact_match_distinct(self):
        assert pair_gain(cand("a"), cand("b"), EXACT) == 0.0

    def test_exact_match_casing(self):
        assert pair_gain(cand("A"), cand("a"), EXACT) == 1.0
        assert pair_gain(cand("A"), cand("a"), GainSpec(kind="exact_match", lowercase=False)) == 0.0

    def test_answer_match(self):
        spec = GainSpec(kind="answer_match")
        assert pair_gain(cand("x", answer="4"), cand("y", answer="4"), spec) == 1.0
        assert pair_gain(cand("x", answer="4"), cand("y", answer="7"), spec) == 0.0
        assert pair_gain(cand("x", answer=" 4 "), cand("y", answer="4"), spec) == 1.0

    def test_answer_match_requires_answers(self):
        spec = GainSpec(kind="answer_match")
        with pytest.raises(MissingAnswerError):
            pair_gain(cand("x", answer="4"), cand("y"), spec)


class TestSentenceBleu:
    def test_identity_long_enough(self):
        long = cand("w1 w2 w3 w4 w5")
        assert pair_gain(long, long, BLEU4) == 1.0

    def test_empty_hypothesis(self):
        assert pair_gain(cand("a b"), cand(""), BLEU4) == 0.0

    def test_frozen_truncation_case(self):
        # Hypothesis is a strict prefix: precisions are all 1 over the
        # three supported orders, so the score reduces to the brevity
        # penalty exp(1 - 6/3).
        ref = cand("the cat sat on the mat")
        hyp = cand("the cat sat")
        got = pair_gain(ref, hyp, BLEU4)
        assert got == pytest.approx(math.exp(-1.0), abs=1e-15)
        assert got == pytest.approx(
            reference_sentence_bleu(("the", "cat", "sat"),
                                    ("the", "cat", "sat", "on", "the", "mat"), 4),
            abs=1e-15,
        )

    def test_smoothing_on_zero_match_orders(self):
        # Single shared unigram, no shared bigrams: p1 = 1/2, p2 smoothed
        # to 1/(2*1), equal lengths so no brevity penalty.
        ref = cand("a c")
        hyp = cand("a d")
        want = math.exp((math.log(0.5) + math.log(0.5)) / 2.0)
        assert pair_gain(ref, hyp, GainSpec(kind="sentence_bleu", max_order=2)) == pytest.approx(
            want, abs=1e-15
        )

    def test_not_symmetric(self):
        a = cand("the cat sat on the mat")
        b = cand("the cat sat")
        assert pair_gain(a, b, BLEU4) != pair_gain(b, a, BLEU4)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(6)
        for _ in range(400):
            ref = random_tokens(rng, vocab_size=8, max_len=12)
            hyp = random_tokens(rng, vocab_size=8, max_len=12)
            order = int(rng.integers(1, 5))
            got = pair_gain(token_cand(ref), token_cand(hyp),
                            GainSpec(kind="sentence_bleu", max_order=order))
            want = reference_sentence_bleu(hyp, ref, order)
            assert got == pytest.approx(want, abs=1e-12)
            assert 0.0 <= got <= 1.0

    def test_self_gain_is_one(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            tokens = random_tokens(rng, vocab_size=5, max_len=10)
            if not tokens:
                continue
            c = token_cand(tokens)
            assert pair_gain(c, c, BLEU4) == 1.0


class TestGainMatrix:
    def test_exact_match_identity_matrix(self):
        inst = validate_instance(
            Instance(id="t", evidence=(cand("a"), cand("b"))), EXACT, WeightSpec()
        )
        assert np.array_equal(gain_matrix(inst, EXACT), np.eye(2))

    def test_external_passthrough(self):
        matrix = ((0.1, 0.9), (0.7, 0.3))
        inst = validate_instance(
            Instance(id="t", evidence=(cand("a"), cand("b")), external_gain=matrix),
            GainSpec(kind="external"),
            WeightSpec(),
        )
        assert np.array_equal(gain_matrix(inst, GainSpec(kind="external")), np.array(matrix))

    def test_hand_derived_rouge_cell(self):
        inst = validate_instance(
            Instance(
                id="t",
                evidence=(cand("the cat sat"),),
                hypotheses=(cand("the cat"),),
            ),
            ROUGE1,
            WeightSpec(),
        )
        assert gain_matrix(inst, ROUGE1).tolist() == [[0.8]]

    def test_matrix_equals_scalar_gains(self):
        rng = np.random.default_rng(8)
        specs = [
            ROUGE1,
            GainSpec(kind="rouge_n_kernel", n=3),
            EXACT,
            BLEU4,
            GainSpec(kind="answer_match"),
        ]
        for spec in specs:
            evidence = tuple(
                Candidate(
                    text=" ".join(t),
                    tokens=t,
                    answer=(t[0] if t else "none"),
                )
                for t in (random_tokens(rng, vocab_size=4, max_len=8) for _ in range(7))
            )
            hypotheses = evidence[:4]
            inst = validate_instance(
                Instance(id="t", evidence=evidence, hypotheses=hypotheses), spec, WeightSpec()
            )
            matrix = gain_matrix(inst, spec)
            for i, ev in enumerate(inst.evidence):
                for j, hyp in enumerate(inst.hypotheses):
                    assert matrix[i, j] == pair_gain(ev, hyp, spec)

    def test_jobs_do_not_change_values(self):
        rng = np.random.default_rng(9)
        evidence = tuple(token_cand(random_tokens(rng, vocab_size=6, max_len=20))
                         for _ in range(60))
        inst = validate_instance(Instance(id="t", evidence=evidence), ROUGE1, WeightSpec())
        sequential = gain_matrix(inst, ROUGE1, jobs=1)
        for jobs in (2, 3, 8):
            assert np.array_equal(gain_matrix(inst, ROUGE1, jobs=jobs), sequential)

    def test_tokens_absent_falls_back_to_text(self):
        inst = validate_instance(
            Instance(id="t", evidence=(cand("The  cat"), cand("the cat"))),
            EXACT,
            WeightSpec(),
        )
        assert np.array_equal(gain_matrix(inst, EXACT), np.ones((2, 2)))
