import functools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import reference_bleu, reference_self_bleu
from phrasetree.entailment import CacheBackend, EntailmentBackend, OverlapStubBackend
from phrasetree.errors import ConfigError, ProtocolError
from phrasetree.metrics import (MetricId, MetricRegistry, TemplateSet, corpus_bleu,
                                entailment_score, jaccard_distance, quantize,
                                self_bleu, string_similarity)

words = st.text(alphabet="abcdefgh ", min_size=0, max_size=30)


# --------------------------------------------------------------------------
# Jaccard
# --------------------------------------------------------------------------

def test_jaccard_identity(normalizer):
    assert jaccard_distance("Date of the journey", "Date of the journey", normalizer) == 0.0


def test_jaccard_two_of_three(normalizer):
    # token sets {alpha, beta} vs {beta, gamma}: 1 - 1/3
    val = jaccard_distance("alpha beta", "beta gamma", normalizer)
    assert val == pytest.approx(2 / 3, abs=1e-9)


def test_jaccard_both_empty(normalizer):
    assert jaccard_distance("", "", normalizer) == 0.0
    assert jaccard_distance("the of", "a an", normalizer) == 0.0  # all stopwords


@settings(max_examples=200)
@given(words, words)
def test_jaccard_symmetric_and_bounded(a, b):
    n = _plain_normalizer()
    d1, d2 = jaccard_distance(a, b, n), jaccard_distance(b, a, n)
    assert d1 == d2
    assert 0.0 <= d1 <= 1.0


@functools.lru_cache(maxsize=1)
def _plain_normalizer():
    from phrasetree.textnorm import TokenNormalizer
    return TokenNormalizer()


# --------------------------------------------------------------------------
# string similarity
# --------------------------------------------------------------------------

def _oracle_levenshtein(a, b):
    """Independent full-matrix edit distance."""
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dp[i][0] = i
    for j in range(n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            dp[i][j] = min(dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return dp[m][n]


def test_string_similarity_identity():
    assert string_similarity("Fare per ticket", "fare per ticket") == 100.0


def test_string_similarity_disjoint():
    assert string_similarity("ab", "cd") == 0.0


def test_string_similarity_kitten_sitting():
    expected = 100.0 * (1 - _oracle_levenshtein("kitten", "sitting") / 7)
    assert string_similarity("kitten", "sitting") == pytest.approx(expected)
    assert string_similarity("kitten", "sitting") == pytest.approx(57.142857, abs=1e-4)


def test_string_similarity_both_empty():
    assert string_similarity("", "") == 100.0


@settings(max_examples=150)
@given(st.text(max_size=12), st.text(max_size=12))
def test_string_similarity_matches_oracle(a, b):
    la, lb = a.lower(), b.lower()
    longest = max(len(la), len(lb))
    expected = 100.0 if longest == 0 else 100.0 * (1 - _oracle_levenshtein(la, lb) / longest)
    assert string_similarity(a, b) == pytest.approx(expected)
    assert string_similarity(a, b) == string_similarity(b, a)


# --------------------------------------------------------------------------
# BLEU
# --------------------------------------------------------------------------

FIXTURE_CANDS = [
    "the quick brown fox jumps over the lazy dog",
    "fare per ticket for the journey",
    "number of people for the reservation",
]
FIXTURE_REFS = [
    ["the quick brown fox jumped over the lazy dog"],
    ["fare per ticket for journey", "price per ticket for the journey"],
    ["number of persons for the reservation"],
]


def test_bleu_identical_is_100():
    cands = ["a small cat sat here", "the dog barked loudly today"]
    assert corpus_bleu(cands, [[c] for c in cands]) == pytest.approx(100.0)


def test_bleu_disjoint_is_zero_up_to_epsilon():
    val = corpus_bleu(["aa bb cc dd"], [["xx yy zz ww"]])
    assert 0.0 <= val < 1e-3


def test_bleu_matches_reference_fixture():
    mine = corpus_bleu(FIXTURE_CANDS, FIXTURE_REFS)
    ref = reference_bleu(FIXTURE_CANDS, FIXTURE_REFS)
    assert mine == pytest.approx(ref, abs=1e-4)
    # frozen value computed with the reference implementation
    assert mine == pytest.approx(64.7638206, abs=1e-4)


def test_bleu_matches_reference_random_corpora():
    rng = random.Random(7)
    vocab = ["fare", "ticket", "journey", "price", "hotel", "city", "date", "for",
             "the", "of", "a", "to"]
    for _ in range(50):
        cands, refs = [], []
        for _ in range(rng.randrange(1, 5)):
            cands.append(" ".join(rng.choices(vocab, k=rng.randrange(1, 9))))
            refs.append([" ".join(rng.choices(vocab, k=rng.randrange(1, 9)))
                         for _ in range(rng.randrange(1, 3))])
        assert corpus_bleu(cands, refs) == pytest.approx(
            reference_bleu(cands, refs), abs=1e-6)


def test_bleu_length_mismatch_raises():
    with pytest.raises(ValueError):
        corpus_bleu(["a"], [["a"], ["b"]])


# --------------------------------------------------------------------------
# self-BLEU
# --------------------------------------------------------------------------

def test_self_bleu_identical_variants():
    descs = ["fare per ticket", "name of the hotel"]
    result = self_bleu({1: descs, 2: list(descs), 3: list(descs)})
    assert set(result) == {2, 3}
    for val in result.values():
        assert val == pytest.approx(100.0)


def test_self_bleu_disjoint_vocab_near_zero():
    result = self_bleu({1: ["aa bb cc"], 2: ["xx yy zz"]})
    assert result[2] < 1e-3


def test_self_bleu_matches_reference():
    fixture = {
        1: ["fare per ticket for journey", "name of the hotel"],
        2: ["price per ticket for a trip", "title of the hotel"],
        3: ["ticket price for the journey", "what the hotel is called"],
    }
    mine = self_bleu(fixture)
    ref = reference_self_bleu(fixture)
    assert set(mine) == set(ref)
    for idx in mine:
        assert mine[idx] == pytest.approx(ref[idx], abs=1e-6)


def test_self_bleu_misaligned_raises():
    with pytest.raises(ValueError):
        self_bleu({1: ["a"], 2: ["a", "b"]})


# --------------------------------------------------------------------------
# entailment
# --------------------------------------------------------------------------

class ConstantBackend(EntailmentBackend):
    def __init__(self, value):
        self.value = value

    def score_pairs(self, pairs):
        return [self.value] * len(pairs)


class RecordingBackend(EntailmentBackend):
    """Returns a distinct score per call and records what it was asked."""

    def __init__(self, scores):
        self.scores = list(scores)
        self.calls = []

    def score_pairs(self, pairs):
        self.calls.extend(pairs)
        return [self.scores[len(self.calls) - len(pairs) + i] for i in range(len(pairs))]


def test_default_templates_are_four():
    ts = TemplateSet.default()
    assert len(ts) == 4
    assert ts.fill("x")[0] == "x"
    assert all(f.count("x") >= 1 for f in ts.fill("x"))


def test_template_validation():
    with pytest.raises(ConfigError):
        TemplateSet(("no placeholder",))


def test_entailment_constant_stub():
    assert entailment_score("p", "c", scorer=ConstantBackend(0.5)) == pytest.approx(0.5)


def test_entailment_is_mean_of_template_calls():
    backend = RecordingBackend([0.2, 0.4, 0.6, 0.8])
    templates = TemplateSet.default()
    score = entailment_score("premise text", "candidate text", templates, backend)
    assert score == pytest.approx((0.2 + 0.4 + 0.6 + 0.8) / 4)
    assert len(backend.calls) == 4
    assert [h for _, h in backend.calls] == templates.fill("candidate text")
    assert all(p == "premise text" for p, _ in backend.calls)


def test_entailment_out_of_range_is_protocol_error():
    with pytest.raises(ProtocolError):
        entailment_score("p", "c", scorer=ConstantBackend(1.5))


def test_entailment_cache_backend(tmp_path):
    templates = TemplateSet.default()
    path = tmp_path / "cache.jsonl"
    rows = [("premise", h, 0.1 * (i + 1))
            for i, h in enumerate(templates.fill("cand"))]
    CacheBackend.write(path, rows)
    backend = CacheBackend(path)
    expected = sum(s for _, _, s in rows) / 4
    assert entailment_score("premise", "cand", templates, backend) == pytest.approx(expected)
    with pytest.raises(KeyError):
        backend.score("premise", "unknown hypothesis")


def test_overlap_stub_is_deterministic_and_sane():
    stub = OverlapStubBackend()
    assert stub.score("fare per ticket", "this example is fare per ticket.") == 1.0
    low = stub.score("fare per ticket", "completely unrelated words")
    assert low < 0.5
    assert stub.score("", "anything") == 1.0


# --------------------------------------------------------------------------
# quantization and registry
# --------------------------------------------------------------------------

def test_quantize_idempotent():
    for v in [0.66449, 0.5, 77.49, 0.0, 1.0]:
        for d in (0, 1, 2):
            assert quantize(quantize(v, d), d) == quantize(v, d)


def test_standard_registry(normalizer):
    reg = MetricRegistry.standard(normalizer, scorer=ConstantBackend(0.75))
    j, e, s = reg.resolve(["J", "E", "S"])
    assert j.evaluate("fare per ticket", "fare per ticket") == 0.0
    assert e.evaluate("fare", "anything") == pytest.approx(0.75)
    assert s.evaluate("ab", "ab") == 100.0
    assert s.quantization == 0 and j.quantization == 2
    with pytest.raises(ConfigError):
        reg.get("B")
    reg.register(MetricId("B", lambda i, c: 0.5, 2))
    assert reg.get("B").evaluate("x", "y") == 0.5
    with pytest.raises(ConfigError):
        reg.register(MetricId("J", lambda i, c: 0.0, 2))
