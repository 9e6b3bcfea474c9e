"""Metric-split n-ary tree over a candidate pool, and constrained ranking.

Build: every candidate's sequence of quantized metric values is a root-to-
leaf path; candidates sharing all values share a leaf; child order is the
insertion order of first occurrence. Leaves hold the candidate multiset,
intermediate nodes only their split value.

Rank: repeated sweeps collect k candidates. A sweep walks the first level's
buckets ordered by value (descending by default, the diversity level), and
descends each bucket one level at a time:

* MAX / MIN pick the child with the largest / smallest value (values of
  siblings are pairwise distinct, so the pick is unique; a user-supplied
  rule breaking that gets earliest-insertion tie-breaking),
* NONE enumerates the children exhaustively in insertion order, extending
  the sweep below this bucket.

At the leaf, the most common candidate wins if any text repeats, otherwise
one is drawn with the run's seeded RNG. The selected occurrence is removed
and emptied nodes are deleted bottom-up, then the sweep continues; sweeps
restart from the top of the order until k candidates are ranked. An
optional syntactic pick runs first: from the zero-valued first-level
bucket, the normal descent with the final level forced to MIN (the least
string-identical same-content candidate); it counts toward k.

`rank` consumes the tree it is given.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .errors import ConfigError, EmptyTreeError, ExhaustionError, MetricError
from .metrics import MetricId

NONE, MAX, MIN = "none", "max", "min"

DESCENDING, ASCENDING = "descending", "ascending"

DecisionFn = Callable[[Sequence["TreeNode"]], "TreeNode"]


@dataclass
class TreeNode:
    """One split node: quantized metric value, children, leaf candidates."""

    val: float | None = None
    sents: list[str] = field(default_factory=list)
    children: list["TreeNode"] = field(default_factory=list)
    parent: "TreeNode | None" = None

    def child_by_val(self, val) -> "TreeNode | None":
        for ch in self.children:
            if ch.val == val:
                return ch
        return None

    def add_child(self, node: "TreeNode") -> "TreeNode":
        node.parent = self
        self.children.append(node)
        return node

    def remove_child(self, node: "TreeNode"):
        self.children.remove(node)
        node.parent = None

    def leaves(self) -> Iterator["TreeNode"]:
        if not self.children:
            yield self
        else:
            for ch in self.children:
                yield from ch.leaves()

    def candidate_count(self) -> int:
        return sum(len(leaf.sents) for leaf in self.leaves())

    def path_values(self) -> list[float]:
        vals: list[float] = []
        node = self
        while node.parent is not None:
            vals.append(node.val)
            node = node.parent
        return vals[::-1]


@dataclass(frozen=True)
class DecisionSpec:
    """Per-level traversal rules; entry 0 must be NONE (the diversity level)."""

    levels: tuple

    def __post_init__(self):
        if not self.levels:
            raise ConfigError("decision spec must cover at least one level")
        if self.levels[0] != NONE:
            raise ConfigError("level 0 must use the NONE decision (swept exhaustively)")
        for entry in self.levels:
            if entry not in (NONE, MAX, MIN) and not callable(entry):
                raise ConfigError(f"unknown decision {entry!r}")

    def __len__(self):
        return len(self.levels)

    @classmethod
    def parse(cls, names: Sequence) -> "DecisionSpec":
        parsed = tuple(
            n if callable(n) else str(n).lower() for n in names
        )
        return cls(parsed)


@dataclass
class RankingConfig:
    k: int = 5
    prune_threshold_level0: float | None = None
    level0_order: str = DESCENDING
    syntactic_first: bool = True
    rng_seed: int = 0
    lenient: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.level0_order not in (DESCENDING, ASCENDING):
            raise ConfigError(f"unknown level0_order {self.level0_order!r}")


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def build(input_text: str, candidates: Sequence[str],
          metrics: Sequence[MetricId]) -> TreeNode:
    """Split candidates into a tree keyed by their quantized metric values."""
    if not candidates:
        raise ValueError("cannot build a tree from an empty candidate pool")
    if not metrics:
        raise ValueError("at least one metric is required")
    root = TreeNode()
    for cand in candidates:
        curr = root
        for metric in metrics:
            try:
                val = metric.evaluate(input_text, cand)
            except Exception as exc:
                raise MetricError(
                    f"metric {metric.name!r} failed for candidate {cand!r}: {exc}"
                ) from exc
            nxt = curr.child_by_val(val)
            if nxt is None:
                nxt = curr.add_child(TreeNode(val=val))
            curr = nxt
        curr.sents.append(cand)
    return root


def prune_level0(tree: TreeNode, predicate: Callable[[float], bool]) -> TreeNode:
    """Drop first-level subtrees (and their candidates) where predicate(val)."""
    for child in [c for c in tree.children if predicate(c.val)]:
        tree.remove_child(child)
    if not tree.children:
        raise EmptyTreeError("pruning removed every candidate")
    return tree


# --------------------------------------------------------------------------
# selection
# --------------------------------------------------------------------------

def leaf_select(sents: Sequence[str], rng: random.Random) -> str:
    """Most common text when any repeats (earliest-inserted on ties),
    otherwise a uniform seeded draw."""
    if not sents:
        raise ValueError("cannot select from an empty leaf")
    counts: dict[str, int] = {}
    for s in sents:
        counts[s] = counts.get(s, 0) + 1
    top = max(counts.values())
    if top > 1:
        return next(s for s in sents if counts[s] == top)
    return rng.choice(list(counts))


def _pick_child(node: TreeNode, decision) -> TreeNode:
    if decision == MAX:
        best = max(ch.val for ch in node.children)
    elif decision == MIN:
        best = min(ch.val for ch in node.children)
    else:  # user-supplied rule
        chosen = decision(list(node.children))
        if chosen not in node.children:
            raise ConfigError("decision rule returned a non-child node")
        return chosen
    return next(ch for ch in node.children if ch.val == best)


def _descend(node: TreeNode, level: int, decisions: DecisionSpec,
             final_override: str | None = None) -> TreeNode:
    """Single-leaf descent; NONE below the sweep level takes the earliest child."""
    d = len(decisions)
    while level < d:
        decision = decisions.levels[level]
        if level == d - 1 and final_override is not None:
            decision = final_override
        node = node.children[0] if decision == NONE else _pick_child(node, decision)
        level += 1
    return node


def select_syntactic(tree: TreeNode, decisions: DecisionSpec,
                     rng: random.Random | None = None,
                     zero_val: float = 0.0) -> str | None:
    """Candidate from the val=0 first-level subtree, final level forced to MIN."""
    bucket = tree.child_by_val(zero_val)
    if bucket is None:
        return None
    if len(decisions) == 1:
        leaf = bucket
    else:
        leaf = _descend(bucket, 1, decisions, final_override=MIN)
    return leaf_select(leaf.sents, rng or random.Random(0))


def _remove_occurrence(leaf: TreeNode, text: str):
    leaf.sents.remove(text)
    node = leaf
    while node.parent is not None and not node.sents and not node.children:
        parent = node.parent
        parent.remove_child(node)
        node = parent


def _sweep_leaves(node: TreeNode, level: int, decisions: DecisionSpec) -> Iterator[TreeNode]:
    """Leaves selected below one first-level bucket during a single sweep."""
    d = len(decisions)
    if level == d:
        yield node
        return
    if decisions.levels[level] == NONE:
        for val in [ch.val for ch in node.children]:
            ch = node.child_by_val(val)
            if ch is not None:
                yield from _sweep_leaves(ch, level + 1, decisions)
    else:
        yield from _sweep_leaves(_pick_child(node, decisions.levels[level]),
                                 level + 1, decisions)


def rank(tree: TreeNode, config: RankingConfig, decisions: DecisionSpec) -> list[str]:
    """Collect k candidates by repeated ordered sweeps. Consumes the tree."""
    rng = random.Random(config.rng_seed)
    ranked: list[str] = []

    first_leaf = next(tree.leaves(), None)
    if first_leaf is not None and first_leaf is not tree:
        depth = len(first_leaf.path_values())
        if depth != len(decisions):
            raise ConfigError(
                f"decision spec covers {len(decisions)} levels, tree has {depth}")

    if config.prune_threshold_level0 is not None:
        threshold = config.prune_threshold_level0
        prune_level0(tree, lambda v: v > threshold)

    if config.syntactic_first and len(ranked) < config.k:
        bucket = tree.child_by_val(0.0)
        if bucket is not None:
            leaf = bucket if len(decisions) == 1 else _descend(
                bucket, 1, decisions, final_override=MIN)
            cand = leaf_select(leaf.sents, rng)
            _remove_occurrence(leaf, cand)
            ranked.append(cand)

    while len(ranked) < config.k:
        progressed = False
        order = sorted((ch.val for ch in tree.children),
                       reverse=config.level0_order == DESCENDING)
        for val in order:
            bucket = tree.child_by_val(val)
            if bucket is None:
                continue
            for leaf in _sweep_leaves(bucket, 1, decisions):
                cand = leaf_select(leaf.sents, rng)
                _remove_occurrence(leaf, cand)
                ranked.append(cand)
                progressed = True
                if len(ranked) == config.k:
                    return ranked
        if not progressed:
            break

    if len(ranked) < config.k and not config.lenient:
        raise ExhaustionError(config.k, ranked)
    return ranked


# --------------------------------------------------------------------------
# debug rendering
# --------------------------------------------------------------------------

def dump_tree(node: TreeNode, fmt: str = "text") -> str:
    """Indented text or JSON rendering of vals and leaf sents."""
    if fmt == "json":
        return json.dumps(_as_dict(node), indent=2, ensure_ascii=False)

    lines: list[str] = []

    def walk(n: TreeNode, depth: int):
        label = "root" if n.val is None else f"val={n.val:g}"
        if n.sents:
            label += " sents=" + json.dumps(n.sents, ensure_ascii=False)
        lines.append("  " * depth + label)
        for ch in n.children:
            walk(ch, depth + 1)

    walk(node, 0)
    return "\n".join(lines)


def _as_dict(node: TreeNode) -> dict:
    out: dict = {}
    if node.val is not None:
        out["val"] = node.val
    if node.sents:
        out["sents"] = list(node.sents)
    if node.children:
        out["children"] = [_as_dict(ch) for ch in node.children]
    return out
