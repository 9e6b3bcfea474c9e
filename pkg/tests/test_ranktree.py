import json
import random

import pytest

from oracles import SimExhausted, brute_force_leaf_partition, simulate_rank
from phrasetree import ranktree
from phrasetree.entailment import OverlapStubBackend
from phrasetree.errors import (ConfigError, EmptyTreeError, ExhaustionError,
                               MetricError)
from phrasetree.metrics import MetricId, MetricRegistry
from phrasetree.ranktree import (DecisionSpec, RankingConfig, build, dump_tree,
                                 leaf_select, prune_level0, rank, select_syntactic)


def fixed_metrics(value_map, quantizations=None):
    """Metric list reading values from a per-text table."""
    d = len(next(iter(value_map.values())))
    quantizations = quantizations or [2] * d
    return [
        MetricId(f"m{i}", lambda _inp, cand, i=i: value_map[cand][i], quantizations[i])
        for i in range(d)
    ]


FIG_VALUES = {
    "echo":      (0.0, 0.95, 100),
    "reorder":   (0.0, 0.95, 77),
    "div_best":  (0.66, 0.77, 77),
    "div_high":  (0.66, 0.77, 90),
    "div_low_e": (0.66, 0.60, 55),
}
FIG_DECISIONS = DecisionSpec.parse(["none", "max", "min"])


def fig_tree():
    return build("inp", list(FIG_VALUES), fixed_metrics(FIG_VALUES, [2, 2, 0]))


# --------------------------------------------------------------------------
# build
# --------------------------------------------------------------------------

def test_build_single_candidate_single_path():
    tree = build("inp", ["only"], fixed_metrics({"only": (0.5, 42)}, [2, 0]))
    assert len(tree.children) == 1
    level1 = tree.children[0]
    assert level1.val == 0.5 and len(level1.children) == 1
    leaf = level1.children[0]
    assert leaf.val == 42 and leaf.sents == ["only"] and not leaf.children


def test_build_identical_candidates_share_leaf():
    tree = build("inp", ["same", "same"], fixed_metrics({"same": (0.1, 5)}))
    leaves = list(tree.leaves())
    assert len(leaves) == 1 and leaves[0].sents == ["same", "same"]


def test_build_empty_pool_or_metrics_rejected():
    with pytest.raises(ValueError):
        build("inp", [], fixed_metrics({"x": (1,)}))
    with pytest.raises(ValueError):
        build("inp", ["x"], [])


def test_build_metric_failure_names_candidate(normalizer):
    def boom(_inp, cand):
        if cand == "bad apple":
            raise RuntimeError("backend down")
        return 0.5

    with pytest.raises(MetricError) as err:
        build("inp", ["ok", "bad apple"], [MetricId("m0", boom, 2)])
    assert "bad apple" in str(err.value)


def test_build_real_metrics_partition_matches_brute_force(normalizer):
    registry = MetricRegistry.standard(normalizer, OverlapStubBackend())
    metrics = registry.resolve(["J", "E", "S"])
    inp = "Fare per ticket for journey"
    cands = ["Fare per ticket for journey", "Price per ticket for the trip",
             "Fare per journey ticket", "Price per ticket for the trip",
             "The cost of travelling"]
    tree = build(inp, cands, metrics)
    tuples = [tuple(m.evaluate(inp, c) for m in metrics) for c in cands]
    expected = brute_force_leaf_partition(tuples, cands)
    got = [leaf.sents for leaf in tree.leaves()]
    assert sorted(map(tuple, got)) == sorted(map(tuple, expected))


def test_build_invariants_fuzzed():
    rng = random.Random(5)
    for _ in range(200):
        d = rng.randrange(1, 4)
        n = rng.randrange(1, 12)
        texts = [f"cand{rng.randrange(6)}" for _ in range(n)]
        value_map = {
            t: tuple(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(d))
            for t in set(texts)
        }
        metrics = fixed_metrics(value_map)
        tree = build("inp", texts, metrics)
        leaves = list(tree.leaves())
        # partition property
        assert sum(len(l.sents) for l in leaves) == n
        # depth and path-recomputation properties
        for leaf in leaves:
            path = leaf.path_values()
            assert len(path) == d
            for text in leaf.sents:
                assert tuple(path) == value_map[text]
        # children of any node have pairwise distinct vals
        stack = [tree]
        while stack:
            node = stack.pop()
            vals = [c.val for c in node.children]
            assert len(vals) == len(set(vals))
            stack.extend(node.children)


# --------------------------------------------------------------------------
# prune
# --------------------------------------------------------------------------

def test_prune_false_everywhere_is_identity():
    tree = fig_tree()
    before = dump_tree(tree)
    assert dump_tree(prune_level0(tree, lambda v: False)) == before


def test_prune_everything_raises():
    with pytest.raises(EmptyTreeError):
        prune_level0(fig_tree(), lambda v: True)


def test_prune_threshold_fixture():
    values = {"a": (0.0,), "b": (0.40,), "c": (0.80,)}
    tree = build("inp", list(values), fixed_metrics(values))
    prune_level0(tree, lambda v: v > 0.75)
    assert [c.val for c in tree.children] == [0.0, 0.40]
    assert tree.candidate_count() == 2


# --------------------------------------------------------------------------
# syntactic selection and leaf_select
# --------------------------------------------------------------------------

def test_select_syntactic_absent_bucket():
    values = {"a": (0.5, 10), "b": (0.75, 20)}
    tree = build("inp", list(values), fixed_metrics(values, [2, 0]))
    assert select_syntactic(tree, DecisionSpec.parse(["none", "min"])) is None


def test_select_syntactic_min_string_similarity():
    tree = fig_tree()
    assert select_syntactic(tree, FIG_DECISIONS) == "reorder"  # S=77 under val=0


def test_select_syntactic_matches_bucket_argmin():
    rng = random.Random(9)
    for _ in range(100):
        texts = [f"t{i}" for i in range(rng.randrange(2, 8))]
        value_map = {
            t: (rng.choice([0.0, 0.5]), rng.choice([0.2, 0.8]),
                float(rng.randrange(0, 101)))
            for t in texts
        }
        tree = build("inp", texts, fixed_metrics(value_map, [2, 2, 0]))
        got = select_syntactic(tree, FIG_DECISIONS, random.Random(1))
        zero = [t for t in texts if value_map[t][0] == 0.0]
        if not zero:
            assert got is None
            continue
        # oracle: max of level 1 among the zero bucket, then min of level 2
        best_e = max(value_map[t][1] for t in zero)
        pool = [t for t in zero if value_map[t][1] == best_e]
        best_s = min(value_map[t][2] for t in pool)
        finalists = [t for t in pool if value_map[t][2] == best_s]
        assert got in finalists


def test_leaf_select_majority_and_singleton():
    rng = random.Random(0)
    assert leaf_select(["a", "a", "b"], rng) == "a"
    assert leaf_select(["a"], rng) == "a"
    assert leaf_select(["b", "a", "b", "a", "a"], rng) == "a"


def test_leaf_select_seeded_uniform_choice_is_stable():
    first = leaf_select(["a", "b", "c"], random.Random(7))
    for _ in range(5):
        assert leaf_select(["a", "b", "c"], random.Random(7)) == first


# --------------------------------------------------------------------------
# rank
# --------------------------------------------------------------------------

def test_rank_single_candidate():
    values = {"one": (0.3, 5)}
    tree = build("inp", ["one"], fixed_metrics(values, [2, 0]))
    cfg = RankingConfig(k=1, syntactic_first=True)
    assert rank(tree, cfg, DecisionSpec.parse(["none", "min"])) == ["one"]


def test_rank_figure_golden_order():
    """The 5-candidate fixture reproduces the documented selection order:
    syntactic pick from the val=0 subtree first (minimal string similarity
    77), then the 0.66 -> 0.77 -> 77 path."""
    tree = fig_tree()
    cfg = RankingConfig(k=5, syntactic_first=True, rng_seed=7)
    got = rank(tree, cfg, FIG_DECISIONS)
    assert got[:2] == ["reorder", "div_best"]
    assert got == ["reorder", "div_best", "echo", "div_high", "div_low_e"]


def test_rank_exhaustion_reports_partial():
    values = {"a": (0.2, 1), "b": (0.4, 2)}
    tree = build("inp", list(values), fixed_metrics(values, [2, 0]))
    with pytest.raises(ExhaustionError) as err:
        rank(tree, RankingConfig(k=5), DecisionSpec.parse(["none", "min"]))
    assert len(err.value.ranked) == 2 and err.value.requested == 5


def test_rank_lenient_returns_fewer():
    values = {"a": (0.2, 1)}
    tree = build("inp", ["a"], fixed_metrics(values, [2, 0]))
    got = rank(tree, RankingConfig(k=3, lenient=True), DecisionSpec.parse(["none", "min"]))
    assert got == ["a"]


def test_rank_determinism():
    values = {f"t{i}": (random.Random(i).choice([0.0, 0.33, 0.66]),
                        random.Random(i + 99).choice([0.5, 0.9]),
                        float(i * 7 % 101)) for i in range(9)}
    cfg = RankingConfig(k=6, rng_seed=123)
    runs = []
    for _ in range(3):
        tree = build("inp", list(values), fixed_metrics(values, [2, 2, 0]))
        runs.append(rank(tree, cfg, FIG_DECISIONS))
    assert runs[0] == runs[1] == runs[2]


def test_rank_sweep_vals_non_increasing_within_sweep():
    rng = random.Random(21)
    for _ in range(50):
        texts = [f"c{i}" for i in range(rng.randrange(2, 9))]
        value_map = {t: (rng.choice([0.0, 0.2, 0.4, 0.6]),
                         rng.choice([0.1, 0.9]), float(rng.randrange(101)))
                     for t in texts}
        tree = build("inp", texts, fixed_metrics(value_map, [2, 2, 0]))
        k = len(texts)
        got = rank(tree, RankingConfig(k=k, syntactic_first=False, rng_seed=1),
                   FIG_DECISIONS)
        # within each sweep over distinct level-0 vals, vals never increase
        vals = [value_map[t][0] for t in got]
        sweep_start = 0
        for i in range(1, len(vals)):
            if vals[i] > vals[i - 1]:
                sweep_start = i  # a new sweep restarted from the top
        assert all(vals[i] >= vals[i + 1]
                   for i in range(sweep_start, len(vals) - 1))


def test_rank_no_occurrence_reused():
    values = {"dup": (0.5, 3), "solo": (0.25, 4)}
    texts = ["dup", "dup", "solo"]
    tree = build("inp", texts, fixed_metrics(values, [2, 0]))
    got = rank(tree, RankingConfig(k=3, syntactic_first=False),
               DecisionSpec.parse(["none", "min"]))
    assert sorted(got) == sorted(texts)


def test_decision_spec_validation():
    with pytest.raises(ConfigError):
        DecisionSpec.parse(["max", "min"])  # level 0 must be none
    with pytest.raises(ConfigError):
        DecisionSpec.parse(["none", "sideways"])
    spec = DecisionSpec.parse(["none", "MAX", "Min"])
    assert spec.levels == ("none", "max", "min")


def test_user_decision_rule():
    values = {"a": (0.5, 1), "b": (0.5, 2)}
    tree = build("inp", list(values), fixed_metrics(values, [2, 0]))

    def second_child(children):
        return children[-1]

    got = rank(tree, RankingConfig(k=1, syntactic_first=False),
               DecisionSpec.parse(["none", second_child]))
    assert got == ["b"]


# --------------------------------------------------------------------------
# oracle equivalence (the acceptance suite fuzzes 1,000 pools; this is the
# fast development slice)
# --------------------------------------------------------------------------

def random_pool(rng):
    d = rng.randrange(1, 4)
    n = rng.randrange(1, 11)
    texts = [f"cand{rng.randrange(7)}" for _ in range(n)]
    value_map = {
        t: tuple(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(d))
        for t in set(texts)
    }
    decisions = ["none"] + [rng.choice(["none", "max", "min"]) for _ in range(d - 1)]
    cfg = RankingConfig(
        k=rng.randrange(1, n + 3),
        prune_threshold_level0=rng.choice([None, None, None, 0.5, 0.75]),
        level0_order=rng.choice([ranktree.DESCENDING, ranktree.ASCENDING]),
        syntactic_first=rng.random() < 0.7,
        rng_seed=rng.randrange(10_000),
        lenient=True,
    )
    return texts, value_map, decisions, cfg


def assert_rank_matches_oracle(texts, value_map, decisions, cfg):
    tuples = [value_map[t] for t in texts]
    tree_error = sim_error = None
    got = expected = None
    try:
        tree = build("inp", texts, fixed_metrics(value_map))
        got = rank(tree, cfg, DecisionSpec.parse(decisions))
    except EmptyTreeError as exc:
        tree_error = exc
    try:
        expected = simulate_rank(
            tuples, texts, cfg.k, decisions,
            descending=cfg.level0_order == ranktree.DESCENDING,
            syntactic_first=cfg.syntactic_first,
            prune_gt=cfg.prune_threshold_level0,
            seed=cfg.rng_seed, lenient=True)
    except SimExhausted as exc:
        sim_error = exc
    if tree_error is not None or sim_error is not None:
        assert tree_error is not None and sim_error is not None
        assert sim_error.ranked == []
        return
    assert got == expected, (texts, value_map, decisions, cfg)


def test_rank_matches_brute_force_oracle_fuzz():
    rng = random.Random(2024)
    for _ in range(300):
        assert_rank_matches_oracle(*random_pool(rng))


# --------------------------------------------------------------------------
# debug dump
# --------------------------------------------------------------------------

def test_dump_tree_text_and_json():
    tree = fig_tree()
    text = dump_tree(tree)
    assert text.splitlines()[0] == "root"
    assert "val=0.66" in text and 'sents=["reorder"]' in text
    payload = json.loads(dump_tree(tree, fmt="json"))
    assert len(payload["children"]) == 2
    assert payload["children"][0]["val"] == 0.0
