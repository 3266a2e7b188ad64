import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fctnrank.errors import InvalidRank, ProposalFailed, SpaceTooLarge
from fctnrank.fctn import AlsOptions, RankAssignment, compose, init_cores
from fctnrank.search import (
    ExhaustiveStrategy,
    RandomStrategy,
    ScriptedStrategy,
    SearchConfig,
    SmboStrategy,
    clamp,
    early_stop_check,
    exhaustive_search,
    random_propose,
    rank_upper_bounds,
    run_search,
    smbo_propose,
)

DECREASING_333 = [(3, 3, 3), (3, 3, 2), (3, 2, 2), (3, 3, 1), (2, 2, 2), (3, 2, 1), (2, 2, 1), (3, 1, 1), (2, 1, 1), (1, 1, 1)]


def rank_one_tensors(shape, count, seed=0):
    return [compose(init_cores(shape, RankAssignment.uniform(len(shape), 1), seed + s)) for s in range(count)]


@pytest.fixture(scope="module")
def data333():
    t = rank_one_tensors((3, 3, 3), 3)
    return t[:2], t[2:]


def test_bounds_examples():
    shape = (3, 6, 3, 4, 5)
    assert rank_upper_bounds(shape)[(1, 2)] == 6
    assert rank_upper_bounds(shape, "min_of_modes")[(1, 2)] == 3
    assert rank_upper_bounds(shape)[(1, 3)] == rank_upper_bounds(shape, "min_of_modes")[(1, 3)] == 3


def test_clamp_examples():
    bounds = rank_upper_bounds((3, 6, 3, 4, 5))
    proposal = bounds.replace((1, 2), 7)
    out, clamped = clamp(proposal, bounds)
    assert out[(1, 2)] == 6 and clamped == [(1, 2)]
    same, none = clamp(RankAssignment.uniform(5, 2), bounds)
    assert same == RankAssignment.uniform(5, 2) and none == []
    with pytest.raises(InvalidRank):
        clamp({(1, 2): 0, (1, 3): 1, (2, 3): 1}, rank_upper_bounds((3, 6, 3)))


@settings(max_examples=50, deadline=None)
@given(shape=st.lists(st.integers(1, 6), min_size=2, max_size=5), data=st.data())
def test_clamp_respects_bounds(shape, data):
    bounds = rank_upper_bounds(shape)
    m = len(bounds.values)
    vals = data.draw(st.lists(st.integers(1, 10), min_size=m, max_size=m))
    out, clamped = clamp(RankAssignment(len(shape), tuple(vals)), bounds)
    for e, v in out.items():
        assert 1 <= v <= bounds[e]
        assert (e in clamped) == (RankAssignment(len(shape), tuple(vals))[e] > bounds[e])


def test_early_stop_examples():
    # six entries hold only four non-improvements after the best is set
    assert early_stop_check([-1.4, -1.5, -1.5, -1.5, -1.5, -1.5], 5, 0.0) is False
    assert early_stop_check([-1.4, -1.5, -1.5, -1.5, -1.5, -1.5, -1.5], 5, 0.0) is True
    assert early_stop_check([-1.4, -1.5, -1.6], 5) is False
    assert early_stop_check([-1.4, -1.4, -1.4, -1.4, -1.4, -1.39], 5, 0.0) is True


def test_early_stop_min_delta():
    assert early_stop_check([1.0, 0.95, 0.9], 2, min_delta=0.1) is True
    assert early_stop_check([1.0, 0.85, 0.7], 2, min_delta=0.1) is False


@settings(max_examples=60, deadline=None)
@given(losses=st.lists(st.floats(-5, 5), min_size=1, max_size=15), patience=st.integers(1, 6))
def test_early_stop_matches_definition(losses, patience):
    best, since = losses[0], 0
    for v in losses[1:]:
        if v < best:
            best, since = v, 0
        else:
            since += 1
    assert early_stop_check(losses, patience) == (since >= patience)


def test_random_propose_examples():
    assert random_propose(RankAssignment.uniform(3, 1), np.random.default_rng(0)) == RankAssignment.uniform(3, 1)
    bounds = rank_upper_bounds((3, 6, 3, 4, 5))
    a = [random_propose(bounds, np.random.default_rng(9)) for _ in range(2)]
    assert a[0] == a[1]
    g = np.random.default_rng(1)
    for _ in range(100):
        r = random_propose(bounds, g)
        assert all(1 <= v <= b for v, b in zip(r.values, bounds.values))


def test_smbo_bootstrap_is_random():
    bounds = rank_upper_bounds((3, 6, 3))
    assert smbo_propose([], bounds, 3, np.random.default_rng(4)) == random_propose(bounds, np.random.default_rng(4))


def test_smbo_proposes_only_remaining_point():
    bounds = RankAssignment.uniform(3, 2)
    points = [RankAssignment(3, v) for v in itertools.product((1, 2), repeat=3)]
    for missing in points:
        hist = [(p, float(sum(p.values))) for p in points if p != missing]
        assert smbo_propose(hist, bounds, 3, np.random.default_rng(0)) == missing


def test_smbo_in_box_large_space():
    bounds = rank_upper_bounds((3, 6, 3, 4, 5))
    g = np.random.default_rng(0)
    hist = [(random_propose(bounds, g), float(i)) for i in range(4)]
    r = smbo_propose(hist, bounds, 3, g)
    assert all(1 <= v <= b for v, b in zip(r.values, bounds.values))
    assert r not in {h[0] for h in hist}


def test_exhaustive_rank_one_optimum():
    data = rank_one_tensors((2, 2, 2), 2)
    bounds = rank_upper_bounds((2, 2, 2), "min_of_modes")
    res = exhaustive_search(bounds, data)
    assert len(res.table) == 8
    assert res.best_ranks == RankAssignment.uniform(3, 1)
    assert all(res.best_loss <= r.loss for _, r in res.table)
    with pytest.raises(SpaceTooLarge):
        exhaustive_search(rank_upper_bounds((3, 6, 3, 4, 5)), data, cap=100)


def test_run_search_three_scripted(data333):
    train, test = data333
    props = [RankAssignment(3, v) for v in [(2, 2, 2), (1, 1, 1), (3, 1, 1)]]
    log = run_search(ScriptedStrategy(props), train, test, SearchConfig(max_iterations=3))
    assert [r.index for r in log.iterations] == [1, 2, 3]
    assert [r.ranks for r in log.iterations] == props
    assert log.best_index == 2 and not log.stopped_early
    assert log.iterations[0].test.log10_cr == log.iterations[0].train.log10_cr


def test_run_search_repeat_forever_stops_after_six(data333):
    train, test = data333
    log = run_search(ScriptedStrategy([RankAssignment.uniform(3, 2)]), train, test, SearchConfig(max_iterations=10))
    assert len(log.iterations) == 6 and log.stopped_early
    assert log.best_index == 1
    assert [r.repeated for r in log.iterations] == [False] + [True] * 5


def test_run_search_always_improving(data333):
    train, test = data333
    props = [RankAssignment(3, v) for v in DECREASING_333]
    log = run_search(ScriptedStrategy(props), train, test, SearchConfig(max_iterations=10))
    losses = [r.train.loss for r in log.iterations]
    assert len(log.iterations) == 10 and not log.stopped_early
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert log.best_index == 10


def test_run_search_skips_failed_proposal(data333):
    train, _ = data333
    props = [RankAssignment.uniform(3, 1), None, RankAssignment.uniform(3, 2)]
    log = run_search(ScriptedStrategy(props), train, None, SearchConfig(max_iterations=3))
    assert [r.index for r in log.iterations] == [1, 2]
    assert log.errors and log.errors[0][0] == 2
    assert log.iterations[0].test is None


def test_run_search_first_failure_raises(data333):
    with pytest.raises(ProposalFailed):
        run_search(ScriptedStrategy([None]), data333[0], None, SearchConfig(max_iterations=3))


def test_run_search_clamps_and_logs(data333):
    train, _ = data333
    prop = {(1, 2): 9, (1, 3): 1, (2, 3): 1}
    log = run_search(ScriptedStrategy([prop]), train, None, SearchConfig(max_iterations=1))
    rec = log.iterations[0]
    assert rec.ranks[(1, 2)] == 3 and rec.clamped_edges == [(1, 2)]


def test_random_and_smbo_deterministic(data333):
    train, test = data333
    cfg = SearchConfig(max_iterations=4)
    for make in (lambda: RandomStrategy(3), lambda: SmboStrategy(3)):
        a = run_search(make(), train, test, cfg)
        b = run_search(make(), train, test, cfg)
        assert [r.ranks for r in a.iterations] == [r.ranks for r in b.iterations]
        assert [r.train.loss for r in a.iterations] == [r.train.loss for r in b.iterations]


def test_best_loss_non_increasing(data333):
    train, test = data333
    log = run_search(RandomStrategy(5), train, test, SearchConfig(max_iterations=8, patience=8))
    running = np.minimum.accumulate([r.train.loss for r in log.iterations])
    assert log.iterations[log.best_index - 1].train.loss == running[-1]


def test_exhaustive_strategy_walks_space():
    data = rank_one_tensors((2, 2, 2), 1)
    log = run_search(ExhaustiveStrategy(), data, None, SearchConfig(max_iterations=8, patience=8))
    assert len({r.ranks for r in log.iterations}) == 8
    assert log.best.ranks == RankAssignment.uniform(3, 1)
