"""Shared brute-force oracles and fixtures.

The oracles here are deliberately naive (explicit loops over index tuples)
and share no code with the implementation they check.
"""

import itertools
import math

import numpy as np
import pytest


def nested_loop_contract(a, axes_a, b, axes_b):
    """Contraction by enumerating every output index and every matched index."""
    a = np.asarray(a)
    b = np.asarray(b)
    free_a = [d for d in range(a.ndim) if d not in axes_a]
    free_b = [d for d in range(b.ndim) if d not in axes_b]
    out_shape = [a.shape[d] for d in free_a] + [b.shape[d] for d in free_b]
    summed = [a.shape[d] for d in axes_a]
    out = np.zeros(out_shape)
    for out_idx in itertools.product(*(range(s) for s in out_shape)):
        ia = [0] * a.ndim
        ib = [0] * b.ndim
        for d, v in zip(free_a, out_idx[: len(free_a)]):
            ia[d] = v
        for d, v in zip(free_b, out_idx[len(free_a):]):
            ib[d] = v
        total = 0.0
        for s_idx in itertools.product(*(range(s) for s in summed)):
            for da, db, v in zip(axes_a, axes_b, s_idx):
                ia[da] = v
                ib[db] = v
            total += a[tuple(ia)] * b[tuple(ib)]
        out[out_idx] = total
    return out


def fctn_nested_sum(cores):
    """Evaluate an FCTN entry by entry as an explicit sum over every edge index."""
    n = len(cores)
    shape = [cores[k].shape[k] for k in range(n)]
    edge_list = [(a, b) for a in range(n) for b in range(a + 1, n)]
    edge_sizes = [cores[a].shape[b] for a, b in edge_list]
    out = np.zeros(shape)
    for idx in itertools.product(*(range(s) for s in shape)):
        total = 0.0
        for r in itertools.product(*(range(s) for s in edge_sizes)):
            rv = dict(zip(edge_list, r))
            prod = 1.0
            for k in range(n):
                pos = tuple(idx[k] if m == k else rv[(min(m, k), max(m, k))] for m in range(n))
                prod *= cores[k][pos]
            total += prod
        out[idx] = total
    return out


def brute_unfold(t, mode):
    """Mode unfolding by enumeration: columns over remaining modes, smallest fastest."""
    t = np.asarray(t)
    rest = [d for d in range(t.ndim) if d != mode]
    n_cols = math.prod(t.shape[d] for d in rest)
    out = np.zeros((t.shape[mode], n_cols))
    for idx in itertools.product(*(range(s) for s in t.shape)):
        col, stride = 0, 1
        for d in rest:
            col += idx[d] * stride
            stride *= t.shape[d]
        out[idx[mode], col] = t[idx]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, filled by test_acceptance.py and echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_verdict(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
