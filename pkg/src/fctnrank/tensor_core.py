"""Dense tensor primitives: unfolding, pairwise contraction and norms.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Modes are
0-based, like numpy axes. Every flattening in the package uses a single
linearization in which the first mode varies fastest (Fortran order), so
``unfold`` and the FCTN routines agree on column ordering.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DegenerateReference, InvalidAxes, InvalidMode, ShapeMismatch

DTYPE = np.float64


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Coerce ``data`` to a float64 tensor.

    When ``shape`` is given, ``data`` is read as a flat sequence in
    first-mode-fastest order and reshaped accordingly.
    """
    arr = np.asarray(data, dtype=DTYPE)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in shape):
            raise ShapeMismatch(f"mode sizes must be >= 1, got {shape}")
        if arr.size != int(np.prod(shape)):
            raise ShapeMismatch(
                f"data has {arr.size} entries but shape {shape} needs {int(np.prod(shape))}"
            )
        arr = arr.reshape(shape, order="F")
    return arr


def flatten(t: np.ndarray) -> np.ndarray:
    """Flat view of ``t`` in the package linearization (first mode fastest)."""
    return np.asarray(t).ravel(order="F")


def _check_mode(ndim: int, mode: int) -> int:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < ndim:
        raise InvalidMode(f"mode {mode} out of range for an order-{ndim} tensor")
    return int(mode)


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization.

    Returns a matrix of shape ``(I_mode, prod of the other sizes)``. Columns
    run over the remaining modes in ascending order with the smallest
    remaining mode varying fastest.
    """
    t = np.asarray(t)
    mode = _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1, order="F")


def refold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(int(s) for s in shape)
    mode = _check_mode(len(shape), mode)
    m = np.asarray(m)
    if m.shape != (shape[mode], int(np.prod(shape)) // shape[mode]):
        raise ShapeMismatch(f"matrix of shape {m.shape} cannot refold to {shape} at mode {mode}")
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    return np.moveaxis(m.reshape(moved, order="F"), 0, mode)


def contract(a: np.ndarray, axes_a: Sequence[int], b: np.ndarray, axes_b: Sequence[int]) -> np.ndarray:
    """Sum products of ``a`` and ``b`` over matched axes.

    The result carries the unmatched modes of ``a`` in ascending order,
    followed by the unmatched modes of ``b``. Empty axis lists give the
    outer product; matching every axis gives an order-0 array.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [int(x) for x in axes_a]
    axes_b = [int(x) for x in axes_b]
    if len(axes_a) != len(axes_b):
        raise InvalidAxes(f"axis lists differ in length: {axes_a} vs {axes_b}")
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise InvalidAxes(f"repeated axis in {axes_a} / {axes_b}")
    for ax, nd in [(x, a.ndim) for x in axes_a] + [(x, b.ndim) for x in axes_b]:
        if not 0 <= ax < nd:
            raise InvalidAxes(f"axis {ax} out of range for an order-{nd} tensor")
    for xa, xb in zip(axes_a, axes_b):
        if a.shape[xa] != b.shape[xb]:
            raise ShapeMismatch(
                f"axis {xa} of a has size {a.shape[xa]} but axis {xb} of b has size {b.shape[xb]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def frobenius_norm(t: np.ndarray) -> float:
    t = np.asarray(t, dtype=DTYPE)
    return float(np.sqrt(np.sum(t * t)))


def relative_error(x: np.ndarray, approx: np.ndarray) -> float:
    """``||x - approx||_F / ||x||_F``."""
    x = np.asarray(x, dtype=DTYPE)
    approx = np.asarray(approx, dtype=DTYPE)
    if x.shape != approx.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {approx.shape}")
    ref = frobenius_norm(x)
    if ref == 0.0:
        raise DegenerateReference()
    return frobenius_norm(x - approx) / ref
