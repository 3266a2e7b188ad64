"""Iterative rank search: bounds, clamping, early stopping and proposers.

The loop is propose -> clamp -> evaluate(train) -> evaluate(test) -> log.
Only the training loss drives best-tracking and early stopping; the test
evaluation is recorded for reporting and never shown to a strategy.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .errors import InvalidRank, ProposalFailed, SpaceTooLarge, StrategyError
from .fctn import AlsOptions, RankAssignment, edges
from .objective import DEFAULT_LAMBDA, EvalResult, evaluate

logger = logging.getLogger(__name__)

BOUND_POLICIES = ("max_of_modes", "min_of_modes")


@dataclass
class SearchConfig:
    max_iterations: int = 10
    patience: int = 5
    min_delta: float = 0.0
    bound_policy: str = "max_of_modes"
    lam: float = DEFAULT_LAMBDA
    als: AlsOptions = field(default_factory=AlsOptions)
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.min_delta < 0:
            raise ValueError("min_delta must be nonnegative")
        if self.bound_policy not in BOUND_POLICIES:
            raise ValueError(f"bound_policy must be one of {BOUND_POLICIES}")


@dataclass
class IterationRecord:
    index: int
    ranks: RankAssignment
    train: EvalResult
    test: EvalResult | None
    reasoning: str | None = None
    clamped_edges: list[tuple[int, int]] = field(default_factory=list)
    repeated: bool = False
    wall_time_ms: int = 0
    retried: bool = False


@dataclass
class RunLog:
    iterations: list[IterationRecord] = field(default_factory=list)
    best_index: int | None = None
    stopped_early: bool = False
    strategy_name: str = ""
    aborted: str | None = None
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def best(self) -> IterationRecord | None:
        if self.best_index is None:
            return None
        return self.iterations[self.best_index - 1]


@dataclass
class Proposal:
    ranks: RankAssignment | Mapping
    reasoning: str | None = None
    retried: bool = False


# bounds, clamping, stopping ------------------------------------------------

def rank_upper_bounds(shape: Sequence[int], policy: str = "max_of_modes") -> RankAssignment:
    """Per-edge upper bound from the sizes of the two modes the edge joins."""
    if policy not in BOUND_POLICIES:
        raise ValueError(f"unknown bound policy {policy!r}")
    pick = max if policy == "max_of_modes" else min
    n = len(shape)
    return RankAssignment(n, tuple(pick(shape[i - 1], shape[j - 1]) for i, j in edges(n)))


def clamp(ranks: RankAssignment | Mapping, bounds: RankAssignment) -> tuple[RankAssignment, list[tuple[int, int]]]:
    """Reduce every rank above its bound to the bound.

    Accepts a :class:`RankAssignment` or a plain ``{(i, j): rank}`` mapping.
    Returns the clamped assignment and the edges that were reduced.
    """
    raw = ranks.as_dict() if isinstance(ranks, RankAssignment) else {
        (min(i, j), max(i, j)): int(v) for (i, j), v in ranks.items()
    }
    if set(raw) != set(bounds.edges()):
        raise InvalidRank("proposal and bounds cover different edges")
    out, clamped = {}, []
    for e in bounds.edges():
        v = raw[e]
        if v < 1:
            raise InvalidRank(f"proposed rank R{e} = {v} is below 1")
        if v > bounds[e]:
            clamped.append(e)
            v = bounds[e]
        out[e] = v
    return RankAssignment.from_dict(bounds.order, out), clamped


def early_stop_check(train_losses: Sequence[float], patience: int, min_delta: float = 0.0) -> bool:
    """True once the last ``patience`` losses all failed to beat the running best.

    An entry improves when it is below the best of the earlier entries by
    more than ``min_delta``. The first entry only initializes the best.
    """
    best = math.inf
    stale = 0
    for i, value in enumerate(train_losses):
        if i == 0 or value < best - min_delta:
            stale = 0
        else:
            stale += 1
        best = min(best, value)
    return stale >= patience


def detect_repeat(ranks: RankAssignment, history: Sequence[RankAssignment]) -> bool:
    return any(ranks == h for h in history)


# proposers -----------------------------------------------------------------

def random_propose(bounds: RankAssignment, rng: np.random.Generator) -> RankAssignment:
    """Each edge uniform on ``1..bound``."""
    return RankAssignment(bounds.order, tuple(int(rng.integers(1, b + 1)) for b in bounds.values))


def _space_size(bounds: RankAssignment) -> int:
    return math.prod(bounds.values)


def _enumerate(bounds: RankAssignment):
    for vals in itertools.product(*(range(1, b + 1) for b in bounds.values)):
        yield RankAssignment(bounds.order, vals)


def _encode(assignments: Sequence[RankAssignment], bounds: RankAssignment) -> np.ndarray:
    span = np.array([max(b - 1, 1) for b in bounds.values], dtype=float)
    return (np.array([a.values for a in assignments], dtype=float) - 1.0) / span


def _squash(y: np.ndarray) -> np.ndarray:
    # diverging fits produce losses in the hundreds; keep the surrogate sane
    return np.sign(y) * np.log1p(np.abs(y))


def smbo_propose(
    history: Sequence[tuple[RankAssignment, float]],
    bounds: RankAssignment,
    n_init: int,
    rng: np.random.Generator,
    pool_size: int = 512,
) -> RankAssignment:
    """Sequential model-based proposal with a Gaussian-process surrogate.

    Below ``n_init`` observations this is :func:`random_propose`. Afterwards
    a GP is fit to the (squashed) losses and the candidate maximizing
    expected improvement is returned. The candidate pool is the whole space
    when it has at most ``pool_size`` points, otherwise ``pool_size`` random
    draws. Evaluated points are excluded while unevaluated ones remain.
    """
    if len(history) < n_init:
        return random_propose(bounds, rng)

    from sklearn.exceptions import ConvergenceWarning
    from sklearn.gaussian_process import GaussianProcessRegressor
    from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel

    seen = {h[0] for h in history}
    total = _space_size(bounds)
    if total <= pool_size:
        pool = [a for a in _enumerate(bounds) if a not in seen]
    else:
        pool = list(dict.fromkeys(random_propose(bounds, rng) for _ in range(pool_size)))
        pool = [a for a in pool if a not in seen]
    if not pool:
        if len(seen) >= total:
            return random_propose(bounds, rng)
        for _ in range(100 * pool_size):
            a = random_propose(bounds, rng)
            if a not in seen:
                return a
        return random_propose(bounds, rng)

    x = _encode([h[0] for h in history], bounds)
    y = _squash(np.array([h[1] for h in history], dtype=float))
    d = x.shape[1]
    kernel = ConstantKernel(1.0, (1e-3, 1e3)) * Matern(
        length_scale=np.ones(d), length_scale_bounds=(1e-2, 1e2), nu=2.5
    ) + WhiteKernel(1e-4, (1e-8, 1e-1))
    gp = GaussianProcessRegressor(
        kernel=kernel,
        normalize_y=True,
        n_restarts_optimizer=2,
        random_state=int(rng.integers(2**31 - 1)),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        gp.fit(x, y)
    mu, sigma = gp.predict(_encode(pool, bounds), return_std=True)
    best = y.min()
    sigma = np.maximum(sigma, 1e-12)
    z = (best - mu) / sigma
    ei = (best - mu) * norm.cdf(z) + sigma * norm.pdf(z)
    return pool[int(np.argmax(ei))]


class Strategy:
    """Proposer interface used by :func:`run_search`."""

    name = "strategy"

    def propose(self, history: Sequence[IterationRecord], bounds: RankAssignment) -> Proposal:
        raise NotImplementedError

    def observe(self, record: IterationRecord, best: IterationRecord) -> None:
        """Called after each evaluated iteration."""


class RandomStrategy(Strategy):
    """Uniform random search.

    With ``avoid_repeats`` the draw is repeated (up to ``max_draws`` times)
    while it matches an already evaluated assignment.
    """

    name = "random"

    def __init__(self, seed: int = 0, avoid_repeats: bool = True, max_draws: int = 1000):
        self.rng = np.random.default_rng(seed)
        self.avoid_repeats = avoid_repeats
        self.max_draws = max_draws

    def propose(self, history, bounds):
        seen = {r.ranks for r in history}
        cand = random_propose(bounds, self.rng)
        if self.avoid_repeats and len(seen) < _space_size(bounds):
            for _ in range(self.max_draws):
                if cand not in seen:
                    break
                cand = random_propose(bounds, self.rng)
        return Proposal(cand)


class SmboStrategy(Strategy):
    name = "bayes"

    def __init__(self, seed: int = 0, n_init: int = 3, pool_size: int = 512):
        self.rng = np.random.default_rng(seed)
        self.n_init = n_init
        self.pool_size = pool_size

    def propose(self, history, bounds):
        obs = [(r.ranks, r.train.loss) for r in history]
        return Proposal(smbo_propose(obs, bounds, self.n_init, self.rng, self.pool_size))


class ScriptedStrategy(Strategy):
    """Replays a fixed list of proposals, cycling the last one when exhausted."""

    name = "scripted"

    def __init__(self, proposals: Sequence[RankAssignment | Mapping | None]):
        self.proposals = list(proposals)
        self.calls = 0

    def propose(self, history, bounds):
        item = self.proposals[min(self.calls, len(self.proposals) - 1)]
        self.calls += 1
        if item is None:
            raise ProposalFailed("scripted failure")
        return Proposal(item)


class ExhaustiveStrategy(Strategy):
    """Walks the whole bounded space in lexicographic order."""

    name = "exhaustive"

    def __init__(self):
        self._it = None

    def propose(self, history, bounds):
        if self._it is None:
            self._it = _enumerate(bounds)
        try:
            return Proposal(next(self._it))
        except StopIteration:
            raise ProposalFailed("search space exhausted") from None


# exhaustive oracle ---------------------------------------------------------

@dataclass
class ExhaustiveResult:
    best_ranks: RankAssignment
    best_loss: float
    table: list[tuple[RankAssignment, EvalResult]]


def exhaustive_search(
    bounds: RankAssignment,
    tensors: Sequence[np.ndarray],
    config: SearchConfig | None = None,
    cap: int = 4096,
) -> ExhaustiveResult:
    """Evaluate every assignment in the bounded box; ties go to the lexicographically smallest."""
    config = config or SearchConfig()
    size = _space_size(bounds)
    if size > cap:
        raise SpaceTooLarge(f"search space has {size} assignments, cap is {cap}")
    table = []
    best = None
    for ranks in _enumerate(bounds):
        res = evaluate(ranks, tensors, config.als, config.lam)
        table.append((ranks, res))
        if best is None or res.loss < best[1]:
            best = (ranks, res.loss)
    return ExhaustiveResult(best[0], best[1], table)


# main loop -----------------------------------------------------------------

def run_search(
    strategy: Strategy,
    tensors_train: Sequence[np.ndarray],
    tensors_test: Sequence[np.ndarray] | None,
    config: SearchConfig | None = None,
    on_iteration: Callable[[IterationRecord], None] | None = None,
) -> RunLog:
    """Run the propose/evaluate cycle until early stopping or ``max_iterations``.

    Every attempt counts toward ``max_iterations``. A :class:`ProposalFailed`
    attempt is logged and skipped, except on the first attempt where it is
    re-raised. Any other :class:`StrategyError` ends the run (recorded in
    ``RunLog.aborted``), or propagates if nothing was evaluated yet.
    """
    config = config or SearchConfig()
    if len(tensors_train) == 0:
        raise ValueError("training set is empty")
    bounds = rank_upper_bounds(np.shape(tensors_train[0]), config.bound_policy)
    log = RunLog(strategy_name=strategy.name)
    best_loss = math.inf

    for attempt in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        try:
            proposal = strategy.propose(log.iterations, bounds)
        except ProposalFailed as exc:
            logger.error("iteration %d: proposal failed: %s", attempt, exc)
            log.errors.append((attempt, str(exc)))
            if attempt == 1:
                raise
            continue
        except StrategyError as exc:
            logger.error("iteration %d: strategy error, stopping: %s", attempt, exc)
            log.errors.append((attempt, str(exc)))
            if not log.iterations:
                raise
            log.aborted = f"{type(exc).__name__}: {exc}"
            break

        ranks, clamped = clamp(proposal.ranks, bounds)
        repeated = detect_repeat(ranks, [r.ranks for r in log.iterations])
        train = evaluate(ranks, tensors_train, config.als, config.lam)
        test = evaluate(ranks, tensors_test, config.als, config.lam) if tensors_test else None
        rec = IterationRecord(
            index=len(log.iterations) + 1,
            ranks=ranks,
            train=train,
            test=test,
            reasoning=proposal.reasoning,
            clamped_edges=clamped,
            repeated=repeated,
            wall_time_ms=int(round((time.perf_counter() - t0) * 1000)),
            retried=proposal.retried,
        )
        log.iterations.append(rec)
        if train.loss < best_loss:
            best_loss = train.loss
            log.best_index = rec.index
        strategy.observe(rec, log.best)
        if on_iteration is not None:
            on_iteration(rec)
        logger.info(
            "iteration %d: train %.4f test %s log10CR %.4f",
            rec.index, train.loss, "n/a" if test is None else f"{test.loss:.4f}", train.log10_cr,
        )
        if early_stop_check([r.train.loss for r in log.iterations], config.patience, config.min_delta):
            log.stopped_early = attempt < config.max_iterations
            break
    return log
