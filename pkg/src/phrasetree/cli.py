"""Command-line entry point.

Subcommands cover the whole pipeline: `filter` a candidate pool, `rank` it
into schema variants, `eda` baseline variants, `prompts` serialization,
`eval` robustness reports and `schema-table` diversity tables. Every
subcommand is deterministic given --seed and re-runnable (byte-identical
outputs on unchanged inputs).

Exit codes: 0 ok; 2 configuration/usage; 3 input parse/validation/data;
4 scorer transport/protocol; 5 candidate exhaustion/empty tree;
1 unexpected failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus, eda, evaluate, prompts, report, variants
from .entailment import ENDPOINT_ENV_VAR, make_backend
from .errors import (ConfigError, CoverageError, DataError, EmptyTreeError,
                     ExhaustionError, ParseError, PhrasetreeError, ProtocolError,
                     TransportError, ValidationError)
from .filters import CandidatePool, default_filters, filter_pool
from .metrics import MetricRegistry, TemplateSet
from .ranktree import RankingConfig
from .textnorm import TokenNormalizer

EXIT_CODES = [
    ((ConfigError,), 2),
    ((ParseError, ValidationError, DataError, CoverageError), 3),
    ((TransportError, ProtocolError), 4),
    ((ExhaustionError, EmptyTreeError), 5),
]


def load_config(path) -> dict:
    """JSON config; TOML is accepted when a toml parser is available."""
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".toml"):
        try:
            import tomllib  # Python >= 3.11
        except ImportError:
            try:
                import tomli as tomllib  # type: ignore
            except ImportError:
                raise ConfigError(
                    "TOML config needs Python >= 3.11 or the tomli package; "
                    "use a JSON config instead")
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc


def _read_pool_jsonl(path) -> dict[str, CandidatePool]:
    """Group flat {element, input, candidate, params} rows into pools."""
    pools: dict[str, CandidatePool] = {}
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad pool row: {exc.msg}", path=f"{path}:{n}") from exc
            key = row["element"]
            pool = pools.get(key)
            if pool is None:
                pool = pools[key] = CandidatePool(
                    element=key, input=row["input"], candidates=[],
                    provenance=row.get("provenance", "unknown"))
            pool.candidates.append((row["candidate"], row.get("params", {})))
    return pools


def _write_pool_jsonl(pools: dict[str, CandidatePool], path):
    with open(path, "w", encoding="utf-8") as f:
        for key, pool in pools.items():
            for text, params in pool.candidates:
                f.write(json.dumps({
                    "element": key, "input": pool.input, "candidate": text,
                    "params": params, "provenance": pool.provenance,
                }, ensure_ascii=False) + "\n")


def _write_jsonl(rows, path):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def _build_normalizer(args) -> TokenNormalizer:
    if args.stopwords or args.lemmas:
        from .textnorm import _data_path
        return TokenNormalizer.from_files(
            args.stopwords or _data_path("stopwords.txt"),
            args.lemmas or _data_path("lemmas.tsv"))
    return TokenNormalizer.default()


def _build_filters(cfg, normalizer):
    filter_cfg = cfg.get("filters", {})
    sensitive = None
    if filter_cfg.get("sensitive_words_file"):
        from .textnorm import read_lines
        sensitive = read_lines(filter_cfg["sensitive_words_file"])
    enabled = set(filter_cfg["enabled"]) if "enabled" in filter_cfg else None
    return default_filters(normalizer, sensitive_lexicon=sensitive, enabled=enabled,
                           data_dir=filter_cfg.get("data_dir"))


def _build_scorer(args, cfg):
    scorer_cfg = cfg.get("scorer", {})
    kind = args.scorer or scorer_cfg.get("kind", "stub")
    url = args.scorer_url or scorer_cfg.get("url") or os.environ.get(ENDPOINT_ENV_VAR)
    cache = getattr(args, "scorer_cache", None) or scorer_cfg.get("cache")
    try:
        return make_backend(kind, url=url, cache_path=cache)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_filter(args):
    cfg = load_config(args.config)
    normalizer = _build_normalizer(args)
    filters = _build_filters(cfg, normalizer)
    pools = _read_pool_jsonl(args.pool)
    kept: dict[str, CandidatePool] = {}
    audit = []
    for key, pool in pools.items():
        kept_pool, rows = filter_pool(pool, filters)
        kept[key] = kept_pool
        audit.extend(rows)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_pool_jsonl(kept, out / "kept.jsonl")
    _write_jsonl(audit, out / "audit.jsonl")
    report.write_json({
        "seed": args.seed,
        "pools": len(pools),
        "kept": sum(len(p.candidates) for p in kept.values()),
        "rejected": len(audit),
    }, out / "manifest.json")
    print(f"kept {sum(len(p.candidates) for p in kept.values())} candidates, "
          f"rejected {len(audit)} (audit in {out / 'audit.jsonl'})")
    return 0


def cmd_rank(args):
    cfg = load_config(args.config)
    normalizer = _build_normalizer(args)
    scorer = _build_scorer(args, cfg)
    config = variants.PipelineConfig.from_profile(
        args.profile or cfg.get("profile", "pegasus_bart"),
        k=args.k or cfg.get("k", 5),
        rng_seed=args.seed,
    )
    config.ranking = RankingConfig(
        k=config.k,
        prune_threshold_level0=config.ranking.prune_threshold_level0,
        rng_seed=args.seed,
        lenient=not args.strict,
    )
    registry = MetricRegistry.standard(normalizer, scorer, TemplateSet.default())
    schemas = corpus.load_schemas(args.schemas, strict=args.strict)
    pools = _read_pool_jsonl(args.pool)
    vs, audit = variants.assemble(
        pools, schemas, config, registry, normalizer, scorer=scorer, jobs=args.jobs)
    out = variants.emit_variants(vs, args.out_dir, seed=args.seed, profile=config.profile)
    _write_jsonl(audit, out / "audit.jsonl")
    print(f"wrote {vs.k} variants for {len(schemas)} services to {out}")
    return 0


def cmd_eda(args):
    cfg = load_config(args.config)
    eda_cfg = cfg.get("eda", {})
    normalizer = _build_normalizer(args)
    synonyms = (eda.load_synonyms(args.synonyms) if args.synonyms
                else eda.default_synonyms())
    config = eda.EdaConfig(
        p_sr=eda_cfg.get("p_sr", 0.25),
        p_ri=eda_cfg.get("p_ri", 0.05),
        p_rs=eda_cfg.get("p_rs", 0.05),
        p_rd=eda_cfg.get("p_rd", 0.05),
        synonyms=synonyms,
        rng_seed=args.seed,
    )
    schemas = corpus.load_schemas(args.schemas, strict=args.strict)
    vs = eda.generate_eda_variants(schemas, args.m, config, normalizer)
    out = variants.emit_variants(vs, args.out_dir, seed=args.seed, profile="eda")
    print(f"wrote {vs.k} EDA variants for {len(schemas)} services to {out}")
    return 0


def _load_schema_source(args) -> list:
    if args.variant_dir:
        return corpus.load_schemas(Path(args.variant_dir) / "schema.json",
                                   strict=args.strict)
    return corpus.load_schemas(args.schemas, strict=args.strict)


def cmd_prompts(args):
    dialogues = corpus.load_dialogues(args.dialogues, strict=args.strict)
    base_schemas = corpus.load_schemas(args.schemas, strict=args.strict)

    def serialize(schemas, variant_id):
        if args.format == "d3st":
            return prompts.build_d3st(dialogues, schemas, variant=variant_id,
                                      turn_mode=args.turn_mode)
        return prompts.build_t5dst(dialogues, schemas, variant=variant_id)

    base = serialize(base_schemas, "orig")
    variant_lists = []
    if args.multiplier > 1:
        if not args.variants_dir:
            raise ConfigError("--variants-dir is required for multiplier > 1")
        for i in range(1, args.multiplier):
            vdir = Path(args.variants_dir) / f"v{i}"
            if not vdir.exists():
                raise ConfigError(f"multiplier {args.multiplier} needs {vdir}")
            vschemas = corpus.load_schemas(vdir / "schema.json", strict=args.strict)
            variant_lists.append(serialize(vschemas, f"v{i}"))
    dataset = prompts.compose_augmented_dataset(
        base, variant_lists, args.multiplier, seed=args.seed)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.tsv:
        prompts.write_examples_tsv(dataset, out / "dataset.tsv")
    else:
        prompts.write_examples_jsonl(dataset, out / "dataset.jsonl")
    report.write_json({
        "seed": args.seed, "format": args.format, "multiplier": args.multiplier,
        "turn_mode": args.turn_mode, "examples": len(dataset),
        "base_examples": len(base),
    }, out / "manifest.json")
    if args.dump_normalized:
        corpus.dump_normalized(base_schemas, dialogues, out / "normalized.jsonl")
    print(f"wrote {len(dataset)} examples ({args.format}, {args.multiplier}x) to {out}")
    return 0


def cmd_eval(args):
    preds = evaluate.PredictionSet.load_jsonl(args.predictions)
    dialogues = corpus.load_dialogues(args.gold, strict=args.strict)
    seen_map = None
    if args.train_schemas:
        train = corpus.load_schemas(args.train_schemas, strict=args.strict)
        if args.test_schemas:
            seen_map = corpus.mark_seen_services(
                train, corpus.load_schemas(args.test_schemas, strict=args.strict))
        else:
            # seen <=> the service of a gold dialogue appears in training
            train_names = {doc.service_name for doc in train}
            services = {s for d in dialogues for s in d.services}
            services |= {f.service for d in dialogues for t in d.turns for f in t.frames}
            seen_map = {svc: svc in train_names for svc in services}
    result = evaluate.evaluate_all(preds, dialogues, seen_map, ss_mode=args.ss_mode)
    payload = result.to_dict()
    payload["seed"] = args.seed

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(payload, out / "report.json")
    rows = [payload]
    text = report.render_aligned_table(rows, report.EVAL_COLUMNS)
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    report.write_tsv(rows, report.EVAL_COLUMNS, out / "report.tsv")
    if args.figures:
        report.eval_report_figure(payload, out / "report.png")
    if args.dump_normalized:
        corpus.dump_normalized([], dialogues, out / "normalized.jsonl")
    print(text)
    return 0


def cmd_schema_table(args):
    cfg = load_config(args.config)
    base = corpus.load_schemas(args.schemas, strict=args.strict)
    variant_lists = []
    i = 1
    while True:
        vpath = Path(args.variants_dir) / f"v{i}" / "schema.json"
        if not vpath.exists():
            break
        variant_lists.append(corpus.load_schemas(vpath, strict=args.strict))
        i += 1
    if not variant_lists:
        raise ConfigError(f"no v1/schema.json under {args.variants_dir}")
    scorer = _build_scorer(args, cfg) if args.scorer != "none" else None
    normalizer = _build_normalizer(args)
    rows = evaluate.schema_metric_table(variant_lists, base, scorer, normalizer)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json({"seed": args.seed, "rows": rows}, out / "schema_table.json")
    report.write_tsv(rows, report.SCHEMA_TABLE_COLUMNS, out / "schema_table.tsv")
    text = report.render_aligned_table(rows, report.SCHEMA_TABLE_COLUMNS)
    (out / "schema_table.txt").write_text(text + "\n", encoding="utf-8")
    if args.figures:
        report.schema_metric_figure(rows, out / "schema_table.png")
    print(text)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phrasetree",
        description="Paraphrase ranking, synthetic schema assembly, DST prompt "
                    "serialization and robustness evaluation.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON (or TOML) config file")
    common.add_argument("--seed", type=int, default=0, help="run seed, recorded in manifests")
    common.add_argument("--jobs", type=int, default=1, help="worker pool size")
    common.add_argument("--scorer", choices=["remote", "cache", "stub", "none"],
                        default="stub", help="entailment backend")
    common.add_argument("--scorer-url", help=f"remote scorer endpoint (or ${ENDPOINT_ENV_VAR})")
    common.add_argument("--scorer-cache", help="JSONL cache file for --scorer cache")
    common.add_argument("--stopwords", help="override the shipped stopword list")
    common.add_argument("--lemmas", help="override the shipped wordform<TAB>lemma table")
    strictness = common.add_mutually_exclusive_group()
    strictness.add_argument("--strict", dest="strict", action="store_true", default=True)
    strictness.add_argument("--lenient", dest="strict", action="store_false",
                            help="downgrade validation errors to warnings")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", parents=[common], help="filter a candidate pool")
    p.add_argument("pool", help="pool JSONL ({element, input, candidate, params})")
    p.add_argument("out_dir")
    p.set_defaults(fn=cmd_filter)

    p = sub.add_parser("rank", parents=[common], help="rank a pool into schema variants")
    p.add_argument("pool", help="kept-pool JSONL")
    p.add_argument("schemas", help="base schema.json")
    p.add_argument("out_dir")
    p.add_argument("--profile", choices=sorted(variants.PROFILES))
    p.add_argument("--k", type=int, help="variants per element (default 5)")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("eda", parents=[common], help="EDA baseline schema variants")
    p.add_argument("schemas")
    p.add_argument("out_dir")
    p.add_argument("-m", type=int, default=5, help="number of variants")
    p.add_argument("--synonyms", help="word<TAB>syn1,syn2 lexicon file")
    p.set_defaults(fn=cmd_eda)

    p = sub.add_parser("prompts", parents=[common], help="serialize DST examples")
    p.add_argument("dialogues", help="directory of dialogues_*.json")
    p.add_argument("schemas", help="base schema.json")
    p.add_argument("out_dir")
    p.add_argument("--format", choices=["d3st", "t5dst"], default="d3st")
    p.add_argument("--turn-mode", choices=["frame", "dialogue"], default="frame")
    p.add_argument("--multiplier", type=int, default=1, help="dataset size multiplier (1..6)")
    p.add_argument("--variants-dir", help="directory holding v1/..vk/schema.json")
    p.add_argument("--tsv", action="store_true", help="TSV instead of JSONL")
    p.add_argument("--dump-normalized", action="store_true")
    p.set_defaults(fn=cmd_prompts)

    p = sub.add_parser("eval", parents=[common], help="robustness report from predictions")
    p.add_argument("predictions", help="JSONL {dialogue_id, turn, variant, state}")
    p.add_argument("gold", help="directory of gold dialogues")
    p.add_argument("out_dir")
    p.add_argument("--train-schemas", help="training split schema.json (for seen/unseen)")
    p.add_argument("--test-schemas", help="test split schema.json (for seen/unseen)")
    p.add_argument("--ss-mode", choices=["turn", "corpus"], default="turn")
    p.add_argument("--figures", action="store_true", help="also render report.png")
    p.add_argument("--dump-normalized", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("schema-table", parents=[common],
                       help="automatic schema diversity/faithfulness table")
    p.add_argument("variants_dir", help="directory holding v1/..vk/schema.json")
    p.add_argument("schemas", help="base schema.json")
    p.add_argument("out_dir")
    p.add_argument("--figures", action="store_true", help="also render schema_table.png")
    p.set_defaults(fn=cmd_schema_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PhrasetreeError as exc:
        for classes, code in EXIT_CODES:
            if isinstance(exc, classes):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
