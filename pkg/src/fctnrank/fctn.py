"""Fully connected tensor network (FCTN) representation and ALS fitting.

An order-N FCTN has one core per mode. Core ``k`` is itself order-N with
the data mode at axis ``k`` and, at every other axis ``m``, the rank of
the edge joining modes ``k`` and ``m``. Every pair of cores shares exactly
one contracted edge; an edge of rank 1 is equivalent to no edge at all.

Edges are labelled with 1-based mode pairs ``(i, j)``, ``i < j``, matching
the ``R(i,j)`` notation used in prompts and run logs. Core and axis indices
are 0-based like everything else in numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import DegenerateReference, InvalidMode, InvalidRank, ShapeMismatch, SingularSystem
from .tensor_core import DTYPE, contract, frobenius_norm, refold, unfold

Edge = tuple[int, int]

# below this reciprocal condition number the normal matrix counts as singular
RCOND_MIN = 1e-14
RIDGE_FLOOR = 1e-10
RIDGE_CAP = 1e-4


def edges(order: int) -> list[Edge]:
    """All 1-based mode pairs ``(i, j)`` with ``i < j`` in lexicographic order."""
    return [(i, j) for i in range(1, order + 1) for j in range(i + 1, order + 1)]


def _norm_edge(edge) -> Edge:
    i, j = (int(v) for v in edge)
    if i == j:
        raise KeyError(f"no edge joins mode {i} to itself")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class RankAssignment:
    """Symmetric edge ranks of an order-``order`` FCTN.

    ``values`` holds one rank per edge in the order given by :func:`edges`.
    Index with ``ranks[i, j]`` (1-based, either orientation).
    """

    order: int
    values: tuple[int, ...]

    def __post_init__(self):
        if self.order < 1:
            raise InvalidRank(f"order must be >= 1, got {self.order}")
        vals = tuple(int(v) for v in self.values)
        if len(vals) != self.order * (self.order - 1) // 2:
            raise InvalidRank(
                f"order {self.order} needs {self.order * (self.order - 1) // 2} ranks, got {len(vals)}"
            )
        for e, v in zip(edges(self.order), vals):
            if v < 1:
                raise InvalidRank(f"rank R{e} = {v} is below 1")
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, order: int, rank: int) -> "RankAssignment":
        return cls(order, (rank,) * (order * (order - 1) // 2))

    @classmethod
    def from_dict(cls, order: int, mapping: Mapping[Edge, int]) -> "RankAssignment":
        norm = {_norm_edge(e): int(v) for e, v in mapping.items()}
        missing = [e for e in edges(order) if e not in norm]
        extra = sorted(set(norm) - set(edges(order)))
        if missing or extra:
            raise InvalidRank(f"edge set mismatch: missing {missing}, unexpected {extra}")
        return cls(order, tuple(norm[e] for e in edges(order)))

    def __getitem__(self, edge) -> int:
        e = _norm_edge(edge)
        try:
            return self.values[edges(self.order).index(e)]
        except ValueError:
            raise KeyError(f"edge {e} does not exist in an order-{self.order} network") from None

    def edges(self) -> list[Edge]:
        return edges(self.order)

    def items(self) -> Iterator[tuple[Edge, int]]:
        return iter(zip(edges(self.order), self.values))

    def as_dict(self) -> dict[Edge, int]:
        return dict(self.items())

    def replace(self, edge, value: int) -> "RankAssignment":
        e = _norm_edge(edge)
        vals = list(self.values)
        vals[edges(self.order).index(e)] = int(value)
        return RankAssignment(self.order, tuple(vals))

    def to_matrix(self) -> np.ndarray:
        """Symmetric 0-based ``(N, N)`` matrix of ranks with ones on the diagonal."""
        m = np.ones((self.order, self.order), dtype=int)
        for (i, j), v in self.items():
            m[i - 1, j - 1] = m[j - 1, i - 1] = v
        return m

    def __str__(self) -> str:
        return ", ".join(f"R({i},{j})={v}" for (i, j), v in self.items())


@dataclass
class AlsOptions:
    max_sweeps: int = 100
    rel_tol: float = 1e-8
    ridge: float = 1e-10
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.rel_tol < 0 or self.ridge < 0:
            raise ValueError("rel_tol and ridge must be nonnegative")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class FitResult:
    """Outcome of :func:`decompose` (best run over restarts)."""

    cores: list[np.ndarray]
    rel_error: float
    sweeps: int
    history: list[float] = field(default_factory=list)
    regularized: list[bool] = field(default_factory=list)
    restart: int = 0

    def __iter__(self):
        # allows ``cores, err, sweeps = decompose(...)``
        return iter((self.cores, self.rel_error, self.sweeps))


def _check_ranks(shape: Sequence[int], ranks: RankAssignment) -> None:
    if ranks.order != len(shape):
        raise ShapeMismatch(f"ranks are for order {ranks.order} but the tensor has order {len(shape)}")


def core_shape(shape: Sequence[int], ranks: RankAssignment, k: int) -> tuple[int, ...]:
    """Shape of core ``k`` (0-based): data mode at axis ``k``, edge ranks elsewhere."""
    rm = ranks.to_matrix()
    return tuple(int(shape[k]) if m == k else int(rm[m, k]) for m in range(len(shape)))


def param_count(shape: Sequence[int], ranks: RankAssignment) -> int:
    """Total number of entries over all cores."""
    _check_ranks(shape, ranks)
    return sum(math.prod(core_shape(shape, ranks, k)) for k in range(len(shape)))


def init_cores(shape: Sequence[int], ranks: RankAssignment, seed: int) -> list[np.ndarray]:
    """Seeded standard-normal cores, each scaled by ``1/sqrt(prod of its edge ranks)``."""
    _check_ranks(shape, ranks)
    rng = np.random.default_rng(seed)
    cores = []
    for k in range(len(shape)):
        cs = core_shape(shape, ranks, k)
        scale = 1.0 / math.sqrt(math.prod(cs) // cs[k])
        cores.append(rng.standard_normal(cs) * scale)
    return cores


def _labels(n: int, k: int) -> list[tuple]:
    return [("i", k) if m == k else ("r", min(m, k), max(m, k)) for m in range(n)]


def _check_cores(cores: Sequence[np.ndarray]) -> int:
    n = len(cores)
    if n == 0:
        raise ShapeMismatch("no cores given")
    for k, g in enumerate(cores):
        if g.ndim != n:
            raise ShapeMismatch(f"core {k} has order {g.ndim}, expected {n}")
    for a in range(n):
        for b in range(a + 1, n):
            if cores[a].shape[b] != cores[b].shape[a]:
                raise ShapeMismatch(
                    f"edge ({a + 1},{b + 1}) has size {cores[a].shape[b]} in core {a} "
                    f"but {cores[b].shape[a]} in core {b}"
                )
    return n


def _contract_chain(cores: Sequence[np.ndarray], ks: Sequence[int]) -> tuple[np.ndarray, list[tuple]]:
    # left-to-right accumulation; each edge label occurs in exactly two cores
    n = len(cores)
    acc, lab = cores[ks[0]], _labels(n, ks[0])
    for k in ks[1:]:
        lk = _labels(n, k)
        shared = [l for l in lab if l in lk]
        acc = contract(acc, [lab.index(l) for l in shared], cores[k], [lk.index(l) for l in shared])
        lab = [l for l in lab if l not in shared] + [l for l in lk if l not in shared]
    return acc, lab


def compose(cores: Sequence[np.ndarray]) -> np.ndarray:
    """Contract all cores into the full tensor of shape ``(I_1, ..., I_N)``."""
    n = _check_cores(cores)
    full, lab = _contract_chain(cores, list(range(n)))
    return np.transpose(full, [lab.index(("i", k)) for k in range(n)])


def all_but_one(cores: Sequence[np.ndarray], k: int) -> np.ndarray:
    """Matricized contraction of every core except ``k``.

    Shape is ``(prod_j R_jk, prod_j I_j)`` over ``j != k``; rows run over
    the edges incident to ``k`` and columns over the other data modes, both
    ascending and first-fastest. Then
    ``unfold(compose(cores), k) == unfold(cores[k], k) @ all_but_one(cores, k)``.
    """
    n = _check_cores(cores)
    if not isinstance(k, (int, np.integer)) or not 0 <= k < n:
        raise InvalidMode(f"core index {k} out of range for {n} cores")
    others = [j for j in range(n) if j != k]
    if not others:
        return np.ones((1, 1), dtype=DTYPE)
    acc, lab = _contract_chain(cores, others)
    rank_labels = [("r", min(j, k), max(j, k)) for j in others]
    mode_labels = [("i", j) for j in others]
    acc = np.transpose(acc, [lab.index(l) for l in rank_labels + mode_labels])
    n_rows = math.prod(cores[j].shape[k] for j in others)
    return acc.reshape(n_rows, -1, order="F")


def _solve_core(x, cores, k, ridge):
    """Least-squares core update; returns ``(new_core, residual_norm)``."""
    m = all_but_one(cores, k)
    xk = unfold(x, k)
    gram = m @ m.T
    if ridge > 0:
        gram[np.diag_indices_from(gram)] += ridge
    rhs = xk @ m.T
    try:
        c, lower = scipy.linalg.cho_factor(gram, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"normal matrix for core {k} is not positive definite") from exc
    anorm = np.abs(gram).sum(axis=0).max()
    rcond, info = lapack.dpocon(c, anorm, uplo="L" if lower else "U")
    if info != 0 or not rcond >= RCOND_MIN:
        raise SingularSystem(f"normal matrix for core {k} has rcond {rcond:.3g}")
    g_unf = scipy.linalg.cho_solve((c, lower), rhs.T, check_finite=False).T
    return _finish(x, cores, k, g_unf, m, xk)


def _finish(x, cores, k, g_unf, m, xk):
    new_core = refold(g_unf, k, cores[k].shape)
    resid = frobenius_norm(xk - g_unf @ m)
    return new_core, resid


def _solve_core_lstsq(x, cores, k):
    m = all_but_one(cores, k)
    xk = unfold(x, k)
    g_unf = np.linalg.lstsq(m.T, xk.T, rcond=None)[0].T
    return _finish(x, cores, k, g_unf, m, xk)


def als_update_core(x: np.ndarray, cores: Sequence[np.ndarray], k: int, ridge: float = 0.0) -> list[np.ndarray]:
    """Replace core ``k`` by the least-squares optimum with the others fixed.

    Solves the ridge-stabilized normal equations. Raises
    :class:`SingularSystem` when the normal matrix is numerically singular;
    the caller may retry with a larger ``ridge``.
    """
    x = np.asarray(x, dtype=DTYPE)
    new_core, _ = _solve_core(x, cores, k, ridge)
    out = list(cores)
    out[k] = new_core
    return out


def _robust_update(x, cores, k, ridge):
    """Core update with ridge escalation; returns ``(core, resid, escalated)``."""
    r = ridge
    while True:
        try:
            core, resid = _solve_core(x, cores, k, r)
            return core, resid, r != ridge
        except SingularSystem:
            if r >= RIDGE_CAP:
                break
            r = RIDGE_FLOOR if r < RIDGE_FLOOR else r * 100
            r = min(r, RIDGE_CAP)
    core, resid = _solve_core_lstsq(x, cores, k)
    return core, resid, True


def decompose(x: np.ndarray, ranks: RankAssignment, opts: AlsOptions | None = None) -> FitResult:
    """Fit an FCTN with the given edge ranks to ``x`` by alternating least squares.

    Each sweep updates cores ``0..N-1`` in turn. A run stops when the change
    in relative error between sweeps is at most ``rel_tol * max(1, err_prev)``
    or after ``max_sweeps``. Restart ``r`` starts from seed ``opts.seed + r``;
    the run with the lowest final error wins (earliest on ties).
    """
    opts = opts or AlsOptions()
    x = np.asarray(x, dtype=DTYPE)
    _check_ranks(x.shape, ranks)
    norm_x = frobenius_norm(x)
    if norm_x == 0.0:
        raise DegenerateReference()

    best = None
    for restart in range(opts.restarts):
        cores = init_cores(x.shape, ranks, opts.seed + restart)
        history, flags = [], []
        for sweep in range(1, opts.max_sweeps + 1):
            escalated = False
            for k in range(x.ndim):
                core, resid, esc = _robust_update(x, cores, k, opts.ridge)
                cores[k] = core
                escalated |= esc
            err = resid / norm_x
            history.append(err)
            flags.append(escalated)
            if sweep > 1 and abs(history[-2] - err) <= opts.rel_tol * max(1.0, history[-2]):
                break
        run = FitResult(cores, history[-1], len(history), history, flags, restart)
        if best is None or run.rel_error < best.rel_error:
            best = run
    return best
