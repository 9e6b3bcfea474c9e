"""Distance and similarity metrics: Jaccard, string similarity, BLEU,
self-BLEU, template-averaged entailment, plus the metric registry that the
ranking tree is built from.

Conventions (documented here because both the implementations and the test
oracles target them):

* jaccard_distance  -- 1 - |A & B| / |A | B| over normalized token sets,
                       0.0 when both sets are empty.
* string_similarity -- 100 * (1 - levenshtein(a, b) / max(len(a), len(b)))
                       over characters of the lowercased raw strings,
                       100.0 when both are empty.
* corpus_bleu       -- corpus-level 4-gram BLEU x100 with brevity penalty;
                       an order with zero matches gets an epsilon numerator;
                       orders with zero candidate n-grams are dropped from
                       the geometric mean (effective order).
* self_bleu         -- variant i >= 2 scored against the element-aligned
                       descriptions of variants 1..i-1 as references.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .entailment import EntailmentBackend
from .errors import ConfigError
from .textnorm import TokenNormalizer

BLEU_EPSILON = 1e-9

_BLEU_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


# --------------------------------------------------------------------------
# lexical metrics
# --------------------------------------------------------------------------

def jaccard_distance(a: str, b: str, normalizer: TokenNormalizer) -> float:
    """Jaccard distance between the normalized token sets of a and b."""
    ta, tb = normalizer.content_set(a), normalizer.content_set(b)
    union = ta | tb
    if not union:
        return 0.0
    return 1.0 - len(ta & tb) / len(union)


def levenshtein(a: str, b: str) -> int:
    """Character edit distance, single-row dynamic programming."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        curr = [i]
        for j, cb in enumerate(b, 1):
            curr.append(min(prev[j] + 1, curr[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = curr
    return prev[-1]


def string_similarity(a: str, b: str) -> float:
    """Normalized character-level similarity on a 0-100 scale."""
    a, b = a.lower(), b.lower()
    longest = max(len(a), len(b))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - levenshtein(a, b) / longest)


# --------------------------------------------------------------------------
# BLEU
# --------------------------------------------------------------------------

def bleu_tokenize(text: str) -> list[str]:
    """Lowercased word tokens with punctuation split off."""
    return _BLEU_TOKEN_RE.findall(text.lower())


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(candidates: list[str], references: list[list[str]],
                max_order: int = 4) -> float:
    """Corpus BLEU x100 of candidates against per-candidate reference lists."""
    if len(candidates) != len(references):
        raise ValueError(
            f"{len(candidates)} candidates vs {len(references)} reference lists"
        )
    if not candidates:
        raise ValueError("corpus_bleu needs at least one candidate")

    matches = [0] * max_order
    totals = [0] * max_order
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        cand_tokens = bleu_tokenize(cand)
        ref_token_lists = [bleu_tokenize(r) for r in refs]
        cand_len += len(cand_tokens)
        if ref_token_lists:
            # closest reference length; ties resolved to the shorter one
            ref_len += min(
                (abs(len(r) - len(cand_tokens)), len(r)) for r in ref_token_lists
            )[1]
        for n in range(1, max_order + 1):
            cand_counts = _ngrams(cand_tokens, n)
            if not cand_counts:
                continue
            max_ref = Counter()
            for ref_tokens in ref_token_lists:
                for gram, count in _ngrams(ref_tokens, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            totals[n - 1] += sum(cand_counts.values())
            matches[n - 1] += sum(
                min(count, max_ref[gram]) for gram, count in cand_counts.items()
            )

    log_sum = 0.0
    effective_orders = 0
    for m, t in zip(matches, totals):
        if t == 0:
            continue
        effective_orders += 1
        log_sum += math.log((m if m > 0 else BLEU_EPSILON) / t)
    if effective_orders == 0:
        return 0.0
    geo_mean = math.exp(log_sum / effective_orders)
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    return 100.0 * bp * geo_mean


def self_bleu(variant_descriptions: dict[int, list[str]]) -> dict[int, float]:
    """BLEU of each variant (index >= 2) against all earlier variants.

    Keys are 1-based variant indices; values for v1 are the reference pool
    only, so the result starts at index 2.
    """
    indices = sorted(variant_descriptions)
    lengths = {len(variant_descriptions[i]) for i in indices}
    if len(lengths) > 1:
        raise ValueError(f"variants not aligned: lengths {sorted(lengths)}")
    out = {}
    for pos, idx in enumerate(indices):
        if pos == 0:
            continue
        earlier = indices[:pos]
        cands = variant_descriptions[idx]
        refs = [
            [variant_descriptions[e][j] for e in earlier] for j in range(len(cands))
        ]
        out[idx] = corpus_bleu(cands, refs)
    return out


# --------------------------------------------------------------------------
# entailment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TemplateSet:
    """Hypothesis templates, each with exactly one {} placeholder."""

    templates: tuple[str, ...]

    def __post_init__(self):
        for t in self.templates:
            if t.count("{}") != 1:
                raise ConfigError(f"template {t!r} must contain exactly one {{}}")

    def __len__(self):
        return len(self.templates)

    def fill(self, candidate: str) -> list[str]:
        return [t.format(candidate) for t in self.templates]

    @classmethod
    def default(cls) -> "TemplateSet":
        return cls((
            "{}",
            "This example has the same meaning as {}.",
            "This text is about {}.",
            "This example implies that {}.",
        ))


def entailment_score(premise: str, candidate: str,
                     templates: TemplateSet | None = None,
                     scorer: EntailmentBackend | None = None) -> float:
    """Mean entailment probability of the templated candidate given premise."""
    if scorer is None:
        raise ConfigError("entailment_score needs a scorer backend")
    templates = templates or TemplateSet.default()
    hyps = templates.fill(candidate)
    scores = scorer.score_pairs([(premise, h) for h in hyps])
    for s in scores:
        if not 0.0 <= s <= 1.0:
            from .errors import ProtocolError
            raise ProtocolError(f"backend returned entailment score {s!r} outside [0, 1]")
    return sum(scores) / len(scores)


# --------------------------------------------------------------------------
# metric registry
# --------------------------------------------------------------------------

def quantize(value: float, decimals: int) -> float:
    """Round to the node-key granularity; idempotent."""
    return round(float(value), decimals)


@dataclass(frozen=True)
class MetricId:
    """A named metric plus the decimal granularity used for tree node keys."""

    name: str
    fn: Callable[[str, str], float]
    quantization: int = 2

    def __post_init__(self):
        if self.quantization < 0:
            raise ConfigError("quantization must be >= 0")

    def evaluate(self, input_text: str, candidate: str) -> float:
        return quantize(self.fn(input_text, candidate), self.quantization)


@dataclass
class MetricRegistry:
    """Registry of metrics addressable by name (J, E, S plus user entries)."""

    metrics: dict[str, MetricId] = field(default_factory=dict)

    def register(self, metric: MetricId):
        if metric.name in self.metrics:
            raise ConfigError(f"metric {metric.name!r} already registered")
        self.metrics[metric.name] = metric

    def get(self, name: str) -> MetricId:
        try:
            return self.metrics[name]
        except KeyError:
            raise ConfigError(f"unknown metric {name!r}") from None

    def resolve(self, names: list[str]) -> list[MetricId]:
        return [self.get(n) for n in names]

    @classmethod
    def standard(cls, normalizer: TokenNormalizer,
                 scorer: EntailmentBackend | None = None,
                 templates: TemplateSet | None = None) -> "MetricRegistry":
        """J/E/S with the granularities the tree uses by default."""
        reg = cls()
        reg.register(MetricId(
            "J", lambda inp, cand: jaccard_distance(inp, cand, normalizer), 2))
        if scorer is not None:
            reg.register(MetricId(
                "E", lambda inp, cand: entailment_score(inp, cand, templates, scorer), 2))
        reg.register(MetricId("S", lambda inp, cand: string_similarity(inp, cand), 0))
        return reg
