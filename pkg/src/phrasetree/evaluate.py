"""Robustness metrics over prediction files, plus the automatic schema
diversity table.

Evaluation unit: the user turn. SGD frames carry the full cumulative state
at each user turn, so gold states here are the per-turn union of frame
states (values unioned on slot collisions) and the turn's active service
is the frame with a non-NONE active intent (first frame as fallback).
Value comparison is case-insensitive with list-membership for multi-value
annotations; no fuzzy matching.

Schema sensitivity is the per-turn coefficient of variation of the
correctness indicator across variants, averaged over turns with nonzero
mean correctness and scaled by 100. A corpus-level alternative
(std/mean of the per-variant accuracies) is available via ss_mode.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .corpus import Dialogue, SchemaDocument, extract_descriptions
from .errors import CoverageError, ParseError, TransportError, ValidationError
from .metrics import corpus_bleu, entailment_score, jaccard_distance, self_bleu
from .textnorm import TokenNormalizer

DEFAULT_VARIANTS = ("v1", "v2", "v3", "v4", "v5")


@dataclass
class PredictionSet:
    """Rows of (dialogue_id, turn, variant) -> predicted state."""

    rows: dict[tuple[str, int, str], dict[str, list[str]]] = field(default_factory=dict)

    def add(self, dialogue_id: str, turn: int, variant: str,
            state: dict[str, list[str]]):
        key = (dialogue_id, turn, variant)
        if key in self.rows:
            raise ValidationError(f"duplicate prediction row for {key}")
        self.rows[key] = state

    def variants(self) -> set[str]:
        return {variant for _, _, variant in self.rows}

    @classmethod
    def load_jsonl(cls, path) -> "PredictionSet":
        ps = cls()
        with open(path, encoding="utf-8") as f:
            for n, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad prediction row: {exc.msg}",
                                     path=f"{path}:{n}") from exc
                state = {
                    slot: [str(v) for v in (values if isinstance(values, list) else [values])]
                    for slot, values in row.get("state", {}).items()
                }
                ps.add(row["dialogue_id"], int(row["turn"]), str(row["variant"]), state)
        return ps

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for (did, turn, variant), state in self.rows.items():
                f.write(json.dumps({
                    "dialogue_id": did, "turn": turn, "variant": variant,
                    "state": state,
                }, ensure_ascii=False) + "\n")


@dataclass
class EvalReport:
    jga_orig: float | None = None
    jga_variant_mean: float | None = None
    jga_seen: float | None = None
    jga_unseen: float | None = None
    ss_jga: float | None = None
    per_variant: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "JGA_orig": self.jga_orig,
            "JGA_v1-5": self.jga_variant_mean,
            "JGA_seen": self.jga_seen,
            "JGA_unseen": self.jga_unseen,
            "SS_JGA": self.ss_jga,
            "per_variant": dict(self.per_variant),
        }


# --------------------------------------------------------------------------
# gold extraction and state comparison
# --------------------------------------------------------------------------

def gold_turns(dialogues: list[Dialogue]) -> list[tuple[str, int, dict, str]]:
    """(dialogue_id, turn_index, merged gold state, active service) per user turn."""
    out = []
    for d in dialogues:
        for i in d.user_turn_indices():
            turn = d.turns[i]
            state: dict[str, list[str]] = {}
            for frame in turn.frames:
                for slot, values in frame.state.items():
                    merged = state.setdefault(slot, [])
                    for v in values:
                        if v not in merged:
                            merged.append(v)
            service = ""
            if turn.frames:
                service = turn.frames[0].service
                for frame in turn.frames:
                    if frame.active_intent not in ("", "NONE"):
                        service = frame.service
                        break
            out.append((d.dialogue_id, i, state, service))
    return out


def states_match(pred: dict[str, list[str]], gold: dict[str, list[str]]) -> bool:
    """Exact-match joint state: same slot set; per slot a case-insensitive
    overlap between predicted and gold value lists."""
    if set(pred) != set(gold):
        return False
    for slot, gold_values in gold.items():
        pred_values = {v.lower() for v in pred[slot]}
        if not pred_values & {v.lower() for v in gold_values}:
            return False
    return True


def _correctness(preds: PredictionSet, gold: list[tuple[str, int, dict, str]],
                 variant: str) -> list[bool]:
    missing = [
        (did, turn, variant) for did, turn, _, _ in gold
        if (did, turn, variant) not in preds.rows
    ]
    if missing:
        raise CoverageError(missing)
    return [
        states_match(preds.rows[(did, turn, variant)], state)
        for did, turn, state, _ in gold
    ]


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def joint_goal_accuracy(preds: PredictionSet, dialogues: list[Dialogue],
                        variant: str = "orig") -> float:
    """Percentage of user turns whose predicted state equals gold exactly."""
    gold = gold_turns(dialogues)
    if not gold:
        raise ValidationError("no user turns to evaluate")
    correct = _correctness(preds, gold, variant)
    return 100.0 * sum(correct) / len(correct)


def split_seen_unseen(preds: PredictionSet, dialogues: list[Dialogue],
                      seen_map: dict[str, bool],
                      variants: tuple[str, ...] = DEFAULT_VARIANTS,
                      ) -> tuple[float | None, float | None]:
    """JGA over the seen / unseen partition of turns, averaged over variants."""
    gold = gold_turns(dialogues)
    for _, _, _, service in gold:
        if service and service not in seen_map:
            raise ValidationError(f"service {service!r} missing from the seen map")

    def partition_jga(keep_seen: bool) -> float | None:
        totals, corrects = 0, 0
        for variant in variants:
            correct = _correctness(preds, gold, variant)
            for ok, (_, _, _, service) in zip(correct, gold):
                if seen_map.get(service, False) == keep_seen:
                    totals += 1
                    corrects += ok
        return 100.0 * corrects / totals if totals else None

    return partition_jga(True), partition_jga(False)


def schema_sensitivity(preds: PredictionSet, dialogues: list[Dialogue],
                       variants: tuple[str, ...] = DEFAULT_VARIANTS,
                       ss_mode: str = "turn") -> float:
    """Coefficient of variation of correctness across schema variants, x100."""
    if len(variants) < 2:
        raise ValidationError("schema sensitivity needs at least 2 variants")
    gold = gold_turns(dialogues)
    per_variant = [_correctness(preds, gold, v) for v in variants]

    if ss_mode == "corpus":
        jgas = [sum(c) / len(c) for c in per_variant]
        mean = sum(jgas) / len(jgas)
        if mean == 0:
            return 0.0
        var = sum((x - mean) ** 2 for x in jgas) / len(jgas)
        return 100.0 * math.sqrt(var) / mean
    if ss_mode != "turn":
        raise ValidationError(f"unknown ss_mode {ss_mode!r}")

    cvs = []
    for turn_idx in range(len(gold)):
        indicators = [float(c[turn_idx]) for c in per_variant]
        mu = sum(indicators) / len(indicators)
        if mu == 0:
            continue
        sigma = math.sqrt(sum((x - mu) ** 2 for x in indicators) / len(indicators))
        cvs.append(sigma / mu)
    if not cvs:
        return 0.0
    return 100.0 * sum(cvs) / len(cvs)


def evaluate_all(preds: PredictionSet, dialogues: list[Dialogue],
                 seen_map: dict[str, bool] | None = None,
                 variants: tuple[str, ...] = DEFAULT_VARIANTS,
                 ss_mode: str = "turn") -> EvalReport:
    """Full report; variant-dependent fields stay None when rows are absent."""
    report = EvalReport()
    available = preds.variants()
    if "orig" in available:
        report.jga_orig = joint_goal_accuracy(preds, dialogues, "orig")
    present = tuple(v for v in variants if v in available)
    if present:
        report.per_variant = {
            v: joint_goal_accuracy(preds, dialogues, v) for v in present
        }
        report.jga_variant_mean = sum(report.per_variant.values()) / len(present)
        if seen_map is not None:
            report.jga_seen, report.jga_unseen = split_seen_unseen(
                preds, dialogues, seen_map, present)
        if len(present) >= 2:
            report.ss_jga = schema_sensitivity(preds, dialogues, present, ss_mode)
    return report


# --------------------------------------------------------------------------
# automatic schema evaluation
# --------------------------------------------------------------------------

def schema_metric_table(variants: list[list[SchemaDocument]],
                        base: list[SchemaDocument],
                        scorer=None, normalizer: TokenNormalizer | None = None,
                        templates=None) -> list[dict]:
    """Per-variant corpus diversity/faithfulness metrics against the base.

    Returns one row per variant: Jaccard x100, entailment x100 (None when
    the scorer is unavailable), BLEU vs base, self-BLEU vs earlier variants.
    """
    normalizer = normalizer or TokenNormalizer.default()
    base_pairs = extract_descriptions(base)
    base_keys = [ref.key() for ref, _ in base_pairs]
    base_descs = [desc for _, desc in base_pairs]

    aligned: dict[int, list[str]] = {}
    for i, docs in enumerate(variants, 1):
        pairs = extract_descriptions(docs)
        keys = [ref.key() for ref, _ in pairs]
        if keys != base_keys:
            raise ValidationError(
                f"variant v{i} is not element-aligned with the base schemas")
        aligned[i] = [desc for _, desc in pairs]

    self_bleus = self_bleu(aligned) if len(aligned) >= 2 else {}

    rows = []
    for i in sorted(aligned):
        descs = aligned[i]
        jac = sum(
            jaccard_distance(b, d, normalizer) for b, d in zip(base_descs, descs)
        ) / len(descs)
        entail = None
        if scorer is not None:
            try:
                entail = 100.0 * sum(
                    entailment_score(b, d, templates, scorer)
                    for b, d in zip(base_descs, descs)
                ) / len(descs)
            except (TransportError, KeyError):
                entail = None  # column marked unavailable, table still emitted
        rows.append({
            "variant": f"v{i}",
            "jaccard_x100": 100.0 * jac,
            "entailment_x100": entail,
            "bleu": corpus_bleu(descs, [[b] for b in base_descs]),
            "self_bleu": self_bleus.get(i),
        })
    return rows
