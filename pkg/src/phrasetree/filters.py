"""Heuristic candidate filters: reject malformed, hallucinated, unsafe or
stylistically invalid paraphrases before tree construction.

Every filter is a pure predicate (candidate, input) -> fires?. Verdicts are
computed with no short-circuit so the audit log attributes each rejection
to every firing filter, and rejected_by is sorted so verdicts are
independent of filter order.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

from .entailment import EntailmentBackend
from .errors import ConfigError
from .metrics import TemplateSet, entailment_score
from .textnorm import TokenNormalizer, _data_path, read_lines

_WORD_RE = re.compile(r"[A-Za-z0-9']+")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+(?:\s+|$)")
_TITLECASE_RE = re.compile(r"^[A-Z][a-z]+$")
_DIGIT_RE = re.compile(r"\d")


def _words(text: str) -> list[str]:
    return [w.strip("'") for w in _WORD_RE.findall(text) if w.strip("'")]


def _lower_words(text: str) -> list[str]:
    return [w.lower() for w in _words(text)]


@dataclass(frozen=True)
class FilterSpec:
    """A named filter with its parameters (lexicons, thresholds)."""

    name: str
    predicate: Callable[[str, str], bool]
    parameters: dict = field(default_factory=dict)
    enabled: bool = True

    def fires(self, candidate: str, input_text: str) -> bool:
        return bool(self.predicate(candidate, input_text))


@dataclass(frozen=True)
class FilterVerdict:
    kept: bool
    rejected_by: tuple[str, ...]


@dataclass
class CandidatePool:
    """One input description plus its generated paraphrase candidates."""

    element: object  # SchemaElementRef, or any hashable tag in tests
    input: str
    candidates: list[tuple[str, dict]]
    provenance: str = "unknown"

    def __post_init__(self):
        if not self.input:
            raise ValueError("candidate pool needs a non-empty input description")

    def texts(self) -> list[str]:
        return [c for c, _ in self.candidates]

    @classmethod
    def from_texts(cls, element, input_text, texts, provenance="unknown"):
        return cls(element, input_text, [(t, {}) for t in texts], provenance)


# --------------------------------------------------------------------------
# the filter battery
# --------------------------------------------------------------------------

def make_is_question(interrogatives: frozenset[str]) -> Callable[[str, str], bool]:
    def fires(candidate, _input):
        stripped = candidate.strip()
        if stripped.endswith("?"):
            return True
        words = _lower_words(stripped)
        return bool(words) and words[0] in interrogatives
    return fires


def has_consecutive_repeated_words(candidate: str, _input: str) -> bool:
    words = _lower_words(candidate)
    return any(a == b for a, b in zip(words, words[1:]))


def has_alphanumeric_words(candidate: str, _input: str) -> bool:
    return any(_DIGIT_RE.search(w) for w in _words(candidate))


def discard_multiple_sentences(candidate: str, _input: str) -> bool:
    parts = [p for p in _SENTENCE_SPLIT_RE.split(candidate.strip()) if p.strip()]
    return len(parts) > 1


def has_repeated_ngrams(candidate: str, _input: str) -> bool:
    words = _lower_words(candidate)
    for n in (2, 3):
        seen = set()
        for i in range(len(words) - n + 1):
            gram = tuple(words[i:i + n])
            if gram in seen:
                return True
            seen.add(gram)
    return False


def make_has_repeated_similar_bigrams(normalizer: TokenNormalizer):
    def fires(candidate, _input):
        lemmas = normalizer.normalize(candidate)
        bigrams = list(zip(lemmas, lemmas[1:]))
        for i, a in enumerate(bigrams):
            for b in bigrams[i + 1:]:
                if a[0] == b[0] or a[1] == b[1]:
                    return True
        return False
    return fires


def make_is_past_tense(past_forms: frozenset[str], be_aux: frozenset[str]):
    def fires(candidate, _input):
        words = _lower_words(candidate)
        for i, w in enumerate(words):
            if w in past_forms and (i == 0 or words[i - 1] not in be_aux):
                return True
        return False
    return fires


def make_is_passive_voice(participles: frozenset[str], be_aux: frozenset[str]):
    def fires(candidate, _input):
        words = _lower_words(candidate)
        return any(
            a in be_aux and b in participles for a, b in zip(words, words[1:])
        )
    return fires


def make_has_low_frequency_words(common: frozenset[str], min_len: int = 3):
    def fires(candidate, _input):
        for w in _lower_words(candidate):
            if len(w) >= min_len and w.isalpha() and w not in common:
                return True
        return False
    return fires


def make_has_named_entities(gazetteer: frozenset[str]):
    def fires(candidate, _input):
        words = _words(candidate)
        if any(w.lower() in gazetteer for w in words):
            return True
        return any(_TITLECASE_RE.match(w) for w in words[1:])
    return fires


_PREPOSITIONS = frozenset({"of", "per", "for", "in", "on", "at", "to", "from",
                           "with", "by", "until", "between"})


def make_contains_advice(markers: tuple[str, ...], base_verbs: frozenset[str]):
    def fires(candidate, _input):
        words = _lower_words(candidate)
        lowered = " ".join(words)
        for marker in markers:
            if (marker in lowered) if " " in marker else (marker in words):
                return True
        # bare imperative: leading verb not read as a noun-of-... phrase
        return (len(words) >= 2 and words[0] in base_verbs
                and words[1] not in _PREPOSITIONS)
    return fires


def make_describes_action(normalizer: TokenNormalizer,
                          pronouns: frozenset[str] = frozenset({"they", "these", "those"})):
    def fires(candidate, input_text):
        words = _lower_words(candidate)
        if not words or words[0] not in pronouns:
            return False
        overlap = normalizer.content_set(candidate) & normalizer.content_set(input_text)
        return not overlap
    return fires


def make_sensitive_words(lexicon: frozenset[str]):
    def fires(candidate, _input):
        if not lexicon:
            return False
        return any(w in lexicon for w in _lower_words(candidate))
    return fires


FILTER_NAMES = (
    "contains_advice",
    "describes_action",
    "has_named_entities",
    "has_low_frequency_words",
    "discard_multiple_sentences",
    "has_repeated_ngrams",
    "has_repeated_similar_bigrams",
    "has_consecutive_repeated_words",
    "is_past_tense_sentence",
    "is_passive_voice_sentence",
    "is_question",
    "has_alphanumeric_words",
    "sensitive_words",
)

_BE_AUX = frozenset({"is", "are", "was", "were", "be", "been", "being", "am"})


def default_filters(normalizer: TokenNormalizer | None = None,
                    sensitive_lexicon=None,
                    enabled: set[str] | None = None,
                    data_dir=None) -> list[FilterSpec]:
    """The full battery, parameterized from the shipped data files.

    `data_dir` points the lexicon files somewhere else wholesale (same file
    names); `sensitive_lexicon` overrides just the sensitive-word list.
    """
    from pathlib import Path

    normalizer = normalizer or TokenNormalizer.default()
    lexicon = (lambda name: Path(data_dir) / name) if data_dir else _data_path
    interrogatives = frozenset(read_lines(lexicon("interrogatives.txt")))
    past = frozenset(read_lines(lexicon("verbs_past.txt")))
    participles = frozenset(read_lines(lexicon("verbs_participle.txt")))
    base_verbs = frozenset(read_lines(lexicon("verbs_base.txt")))
    common = frozenset(read_lines(lexicon("wordlist_common.txt")))
    gazetteer = frozenset(read_lines(lexicon("gazetteer.txt")))
    advice = tuple(read_lines(lexicon("advice_markers.txt")))
    if sensitive_lexicon is None:
        sensitive = frozenset(read_lines(lexicon("sensitive_words.txt")))
    else:
        sensitive = frozenset(w.lower() for w in sensitive_lexicon)

    specs = [
        FilterSpec("contains_advice", make_contains_advice(advice, base_verbs)),
        FilterSpec("describes_action", make_describes_action(normalizer)),
        FilterSpec("has_named_entities", make_has_named_entities(gazetteer)),
        FilterSpec("has_low_frequency_words", make_has_low_frequency_words(common)),
        FilterSpec("discard_multiple_sentences", discard_multiple_sentences),
        FilterSpec("has_repeated_ngrams", has_repeated_ngrams),
        FilterSpec("has_repeated_similar_bigrams",
                   make_has_repeated_similar_bigrams(normalizer)),
        FilterSpec("has_consecutive_repeated_words", has_consecutive_repeated_words),
        FilterSpec("is_past_tense_sentence", make_is_past_tense(past, _BE_AUX)),
        FilterSpec("is_passive_voice_sentence",
                   make_is_passive_voice(participles, _BE_AUX)),
        FilterSpec("is_question", make_is_question(interrogatives)),
        FilterSpec("has_alphanumeric_words", has_alphanumeric_words),
        FilterSpec("sensitive_words", make_sensitive_words(sensitive)),
    ]
    if enabled is not None:
        unknown = enabled - set(FILTER_NAMES)
        if unknown:
            raise ConfigError(f"unknown filter name(s): {sorted(unknown)}")
        specs = [
            FilterSpec(s.name, s.predicate, s.parameters, enabled=s.name in enabled)
            for s in specs
        ]
    return specs


# --------------------------------------------------------------------------
# application
# --------------------------------------------------------------------------

def apply_filters(candidate: str, input_text: str,
                  filters: list[FilterSpec]) -> FilterVerdict:
    """Evaluate every enabled filter; kept iff none fire."""
    names = [f.name for f in filters]
    if len(set(names)) != len(names):
        raise ConfigError("filter names must be unique")
    fired = sorted(
        f.name for f in filters if f.enabled and f.fires(candidate, input_text)
    )
    return FilterVerdict(kept=not fired, rejected_by=tuple(fired))


def element_key(element) -> str:
    key = getattr(element, "key", None)
    return key() if callable(key) else str(element)


def filter_pool(pool: CandidatePool,
                filters: list[FilterSpec]) -> tuple[CandidatePool, list[dict]]:
    """Partition a pool into kept candidates (order preserved) + audit rows."""
    kept = []
    audit = []
    for text, params in pool.candidates:
        verdict = apply_filters(text, pool.input, filters)
        if verdict.kept:
            kept.append((text, params))
        else:
            audit.append({
                "element": element_key(pool.element),
                "candidate": text,
                "rejected_by": list(verdict.rejected_by),
            })
    return CandidatePool(pool.element, pool.input, kept, pool.provenance), audit


def entailment_prefilter(pool: CandidatePool, threshold: float,
                         scorer: EntailmentBackend,
                         templates: TemplateSet | None = None) -> CandidatePool:
    """Keep candidates whose template-averaged entailment is >= threshold."""
    kept = [
        (text, params) for text, params in pool.candidates
        if entailment_score(pool.input, text, templates, scorer) >= threshold
    ]
    return CandidatePool(pool.element, pool.input, kept, pool.provenance)
