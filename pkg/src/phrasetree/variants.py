"""Per-description pipeline (filter -> build -> prune -> rank) and assembly
of complete synthetic schema variants ordered by Jaccard distance to the
originals: position i of each element's ascending-sorted candidate list
forms variant v(i+1), so v1 is closest to the source schema and vk the most
dissimilar.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import ranktree
from .corpus import SchemaDocument, extract_descriptions, replace_descriptions, write_schemas
from .errors import ConfigError, EmptyTreeError, ExhaustionError
from .filters import CandidatePool, FilterSpec, entailment_prefilter, filter_pool
from .metrics import MetricId, MetricRegistry, jaccard_distance
from .ranktree import DecisionSpec, RankingConfig
from .textnorm import TokenNormalizer

PROFILES = {
    # k diverse picks, entailment-guided descent, moderate hallucination pruning
    "pegasus_bart": dict(
        metrics=["J", "E", "S"],
        decisions=["none", "max", "min"],
        prune_threshold=0.75,
        entailment_prefilter_threshold=None,
    ),
    # tighter pruning + entailment prefilter; maximise J while minimising S
    "pegasus_b_bart": dict(
        metrics=["J", "S"],
        decisions=["none", "min"],
        prune_threshold=0.5,
        entailment_prefilter_threshold=0.58,
    ),
}


@dataclass
class PipelineConfig:
    k: int = 5
    metrics: list[str] = field(default_factory=lambda: ["J", "E", "S"])
    decisions: list[str] = field(default_factory=lambda: ["none", "max", "min"])
    ranking: RankingConfig = field(default_factory=RankingConfig)
    filters: list[FilterSpec] = field(default_factory=list)
    entailment_prefilter_threshold: float | None = None
    profile: str | None = None

    def __post_init__(self):
        if len(self.metrics) != len(self.decisions):
            raise ConfigError("metrics and decisions must have the same length")
        self.ranking = replace(self.ranking, k=self.k)

    @classmethod
    def from_profile(cls, name: str, k: int = 5, rng_seed: int = 0,
                     filters: list[FilterSpec] | None = None) -> "PipelineConfig":
        if name not in PROFILES:
            raise ConfigError(f"unknown profile {name!r} (have {sorted(PROFILES)})")
        p = PROFILES[name]
        return cls(
            k=k,
            metrics=list(p["metrics"]),
            decisions=list(p["decisions"]),
            ranking=RankingConfig(
                k=k,
                prune_threshold_level0=p["prune_threshold"],
                rng_seed=rng_seed,
            ),
            filters=filters or [],
            entailment_prefilter_threshold=p["entailment_prefilter_threshold"],
            profile=name,
        )

    def decision_spec(self) -> DecisionSpec:
        return DecisionSpec.parse(self.decisions)


@dataclass
class VariantSet:
    """k full schema variants plus per-element selection provenance."""

    base: list[SchemaDocument]
    variants: list[list[SchemaDocument]]  # variants[0] is v1
    selections: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.variants)


def rank_element(element_input: str, pool: CandidatePool, config: PipelineConfig,
                 registry: MetricRegistry) -> list[tuple[str, dict]]:
    """Rank one filtered pool; echoes the input for any unfillable position.

    Metric values are computed once per distinct candidate text and reused
    for tree construction and the returned provenance records.
    """
    metric_ids = registry.resolve(config.metrics)
    texts = pool.texts()
    value_map: dict[str, tuple] = {}
    for text in dict.fromkeys([*texts, element_input]):
        value_map[text] = tuple(m.evaluate(element_input, text) for m in metric_ids)

    lookup_metrics = [
        MetricId(
            name=m.name,
            fn=lambda _inp, cand, idx=i: value_map[cand][idx],
            quantization=m.quantization,
        )
        for i, m in enumerate(metric_ids)
    ]

    ranked: list[str] = []
    fallback_from = None
    if texts:
        tree = ranktree.build(element_input, texts, lookup_metrics)
        try:
            ranked = ranktree.rank(tree, config.ranking, config.decision_spec())
        except (ExhaustionError, EmptyTreeError) as exc:
            ranked = list(getattr(exc, "ranked", []))
            fallback_from = len(ranked)
    else:
        fallback_from = 0
    if len(ranked) < config.k and fallback_from is None:
        fallback_from = len(ranked)  # lenient ranking returned fewer than k
    while len(ranked) < config.k:
        ranked.append(element_input)

    out = []
    for pos, cand in enumerate(ranked):
        record = {
            "candidate": cand,
            "metrics": dict(zip(config.metrics, value_map[cand])),
            "path": list(value_map[cand]),
        }
        if fallback_from is not None and pos >= fallback_from:
            record["fallback"] = True
        out.append((cand, record))
    return out


def order_variants(selections: dict[str, list[tuple[str, dict]]],
                   base_schemas: list[SchemaDocument],
                   normalizer: TokenNormalizer) -> VariantSet:
    """Sort each element's candidates by Jaccard distance to the original and
    slice across elements into v1..vk."""
    originals = {ref.key(): desc for ref, desc in extract_descriptions(base_schemas)}
    ks = {len(cands) for cands in selections.values()}
    if len(ks) > 1:
        raise ConfigError(f"elements have unequal candidate counts: {sorted(ks)}")
    k = ks.pop() if ks else 0

    ordered: dict[str, list[dict]] = {}
    for key, cands in selections.items():
        if key not in originals:
            raise ConfigError(f"selection for unknown element {key!r}")
        original = originals[key]
        decorated = []
        for pos, (text, record) in enumerate(cands):
            dist = jaccard_distance(original, text, normalizer)
            decorated.append((dist, pos, text, dict(record)))
        decorated.sort(key=lambda item: (item[0], item[1]))
        rows = []
        for variant_idx, (dist, _pos, text, record) in enumerate(decorated, 1):
            record["candidate"] = text
            record["J_to_base"] = dist
            record["variant"] = variant_idx
            rows.append(record)
        ordered[key] = rows

    variants = []
    for i in range(k):
        replacements = {
            key: rows[i]["candidate"] for key, rows in ordered.items()
        }
        variants.append([replace_descriptions(doc, replacements) for doc in base_schemas])
    return VariantSet(base=list(base_schemas), variants=variants, selections=ordered)


def assemble(pools: dict[str, CandidatePool], base_schemas: list[SchemaDocument],
             config: PipelineConfig, registry: MetricRegistry,
             normalizer: TokenNormalizer, scorer=None, jobs: int = 1,
             ) -> tuple[VariantSet, list[dict]]:
    """Full pipeline over every schema element; deterministic merge order."""
    elements = extract_descriptions(base_schemas)
    audit: list[dict] = []

    def run_one(item):
        ref, description = item
        key = ref.key()
        pool = pools.get(key) or CandidatePool.from_texts(ref, description, [])
        rows: list[dict] = []
        if config.filters:
            pool, rows = filter_pool(pool, config.filters)
        if config.entailment_prefilter_threshold is not None and scorer is not None:
            pool = entailment_prefilter(pool, config.entailment_prefilter_threshold, scorer)
        return key, rank_element(description, pool, config, registry), rows

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool_exec:
            results = list(pool_exec.map(run_one, elements))
    else:
        results = [run_one(item) for item in elements]

    selections = {}
    for key, ranked, rows in results:
        selections[key] = ranked
        audit.extend(rows)
        for text, record in ranked:
            if record.get("fallback"):
                audit.append({"element": key, "candidate": text,
                              "rejected_by": [], "fallback": True})
    return order_variants(selections, base_schemas, normalizer), audit


def emit_variants(vs: VariantSet, out_dir, seed: int | None = None,
                  profile: str | None = None) -> Path:
    """Write v1/..vk/schema.json plus a provenance manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, docs in enumerate(vs.variants, 1):
        vdir = out / f"v{i}"
        vdir.mkdir(exist_ok=True)
        write_schemas(docs, vdir / "schema.json")

    rows = []
    for key, per_variant in vs.selections.items():
        for record in per_variant:
            rows.append({
                "element": key,
                "variant": record["variant"],
                "candidate": record["candidate"],
                **record.get("metrics", {}),
                "path": record.get("path", []),
                "J_to_base": record.get("J_to_base"),
                "fallback": record.get("fallback", False),
            })
    manifest = {"seed": seed, "profile": profile, "k": vs.k, "rows": rows}
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return out
