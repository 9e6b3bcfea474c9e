"""EDA-style schema perturbation baseline: synonym replacement plus random
insertion, swap and deletion over description tokens.
"""
from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import SchemaDocument, extract_descriptions
from .textnorm import TokenNormalizer, read_lines
from .variants import VariantSet, order_variants


def load_synonyms(path) -> dict[str, list[str]]:
    """`word<TAB>syn1,syn2,...` lexicon."""
    table: dict[str, list[str]] = {}
    for line in read_lines(path):
        word, _, rest = line.partition("\t")
        syns = [s.strip() for s in rest.split(",") if s.strip()]
        if word and syns:
            table[word.strip().lower()] = syns
    return table


def default_synonyms() -> dict[str, list[str]]:
    return load_synonyms(Path(str(resources.files("phrasetree") / "data" / "synonyms.tsv")))


@dataclass
class EdaConfig:
    p_sr: float = 0.25
    p_ri: float = 0.05
    p_rs: float = 0.05
    p_rd: float = 0.05
    synonyms: dict[str, list[str]] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p_sr", "p_ri", "p_rs", "p_rd"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")


def _synonym_of(token: str, config: EdaConfig, rng: random.Random) -> str | None:
    options = config.synonyms.get(token.lower())
    return rng.choice(options) if options else None


def eda_augment(text: str, config: EdaConfig, rng: random.Random) -> str:
    """One perturbation pass: SR, then insertion, swap and deletion passes.

    Deletion keeps at least one token, so output is never empty for
    non-empty input.
    """
    tokens = text.split()
    if not tokens:
        return text

    # synonym replacement, independent per token
    tokens = [
        (_synonym_of(t, config, rng) or t) if rng.random() < config.p_sr else t
        for t in tokens
    ]

    # random insertion: a synonym of a random lexicon-covered token
    insertions = sum(1 for _ in tokens if rng.random() < config.p_ri)
    for _ in range(insertions):
        covered = [t for t in tokens if t.lower() in config.synonyms]
        if not covered:
            break
        new_word = _synonym_of(rng.choice(covered), config, rng)
        tokens.insert(rng.randrange(len(tokens) + 1), new_word)

    # random swap
    for i in range(len(tokens)):
        if rng.random() < config.p_rs and len(tokens) > 1:
            j = rng.randrange(len(tokens))
            tokens[i], tokens[j] = tokens[j], tokens[i]

    # random deletion, guarded to keep one token
    kept = [t for t in tokens if not (rng.random() < config.p_rd and len(tokens) > 1)]
    if not kept:
        kept = [tokens[rng.randrange(len(tokens))]]

    return " ".join(kept)


def _derived_seed(base_seed: int, key: str, index: int) -> int:
    return base_seed ^ zlib.crc32(f"{key}#{index}".encode("utf-8"))


def generate_eda_variants(schemas: list[SchemaDocument], m: int, config: EdaConfig,
                          normalizer: TokenNormalizer) -> VariantSet:
    """m independent perturbations per description, Jaccard-ordered into
    v1..vm via the shared variant assembly."""
    if m == 0:
        return VariantSet(base=list(schemas), variants=[], selections={})
    selections = {}
    for ref, description in extract_descriptions(schemas):
        key = ref.key()
        cands = []
        for i in range(m):
            rng = random.Random(_derived_seed(config.rng_seed, key, i))
            text = eda_augment(description, config, rng)
            cands.append((text, {"metrics": {}, "path": [], "perturbation": i}))
        selections[key] = cands
    return order_variants(selections, schemas, normalizer)
