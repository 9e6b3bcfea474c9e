"""Report rendering: aligned text tables, TSV, JSON and matplotlib figures.

The figure paths mirror the delimited output so a report directory holds
both machine-readable rows and a chart of the same numbers.
"""
from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

SCHEMA_TABLE_COLUMNS = ("variant", "jaccard_x100", "entailment_x100", "bleu", "self_bleu")
EVAL_COLUMNS = ("JGA_orig", "JGA_v1-5", "JGA_seen", "JGA_unseen", "SS_JGA")


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.1f}"
    return str(value)


def render_aligned_table(rows: list[dict], columns: tuple[str, ...]) -> str:
    """Fixed-width text table with a header row."""
    cells = [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [
        max(len(col), *(len(row[i]) for row in cells)) if cells else len(col)
        for i, col in enumerate(columns)
    ]
    lines = ["  ".join(col.ljust(widths[i]) for i, col in enumerate(columns))]
    for row in cells:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def write_tsv(rows: list[dict], columns: tuple[str, ...], path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(columns) + "\n")
        for r in rows:
            f.write("\t".join(_fmt(r.get(c)) for c in columns) + "\n")


def write_json(payload, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")


def schema_metric_figure(rows: list[dict], path):
    """Line chart of each diversity/faithfulness metric across variants."""
    variants = [r["variant"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for column, label in (
        ("jaccard_x100", "Jaccard dist x100"),
        ("entailment_x100", "Entailment x100"),
        ("bleu", "BLEU"),
        ("self_bleu", "self-BLEU"),
    ):
        points = [(v, r[column]) for v, r in zip(variants, rows) if r.get(column) is not None]
        if points:
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    marker="o", label=label)
    ax.set_xlabel("variant")
    ax.set_ylabel("score")
    ax.set_title("Synthetic schema evaluation")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def eval_report_figure(report_dict: dict, path):
    """Bar chart of the state-tracking report columns."""
    labels, values = [], []
    for column in EVAL_COLUMNS:
        if report_dict.get(column) is not None:
            labels.append(column)
            values.append(report_dict[column])
    for variant, value in sorted(report_dict.get("per_variant", {}).items()):
        labels.append(f"JGA_{variant}")
        values.append(value)
    fig, ax = plt.subplots(figsize=(max(6.5, 1.1 * len(labels)), 4))
    ax.bar(range(len(labels)), values, color="#4878b0")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("percent")
    ax.set_title("State tracking robustness")
    ax.grid(axis="y", alpha=0.3)
    for i, v in enumerate(values):
        ax.annotate(f"{v:.1f}", (i, v), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
