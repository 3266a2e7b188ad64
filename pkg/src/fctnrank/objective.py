"""Compression-vs-accuracy loss for a rank assignment over a tensor collection.

    loss = log10(CR) + lambda * mean_n ||X_n - X_n,approx||_F / ||X_n||_F

CR is the number of core parameters divided by the number of entries of
one tensor, so it depends on the shape and ranks only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateReference, EmptyCollection, ShapeMismatch
from .fctn import AlsOptions, RankAssignment, decompose, param_count

DEFAULT_LAMBDA = 1e3


@dataclass
class EvalResult:
    cr: float
    log10_cr: float
    per_tensor_errors: list[float]
    mean_error: float
    loss: float
    lam: float = DEFAULT_LAMBDA
    sweeps_per_tensor: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "log10_cr": self.log10_cr,
            "mean_error": self.mean_error,
            "per_tensor_errors": list(self.per_tensor_errors),
        }


def compression_ratio(shape: Sequence[int], ranks: RankAssignment) -> float:
    return param_count(shape, ranks) / math.prod(shape)


def loss(log10_cr: float, per_tensor_errors: Sequence[float], lam: float = DEFAULT_LAMBDA) -> float:
    if len(per_tensor_errors) == 0:
        raise EmptyCollection("loss needs at least one approximation error")
    return log10_cr + lam * float(np.mean(per_tensor_errors))


def evaluate(
    ranks: RankAssignment,
    tensors: Sequence[np.ndarray],
    opts: AlsOptions | None = None,
    lam: float = DEFAULT_LAMBDA,
) -> EvalResult:
    """Fit every tensor independently at ``ranks`` and score the collection.

    All tensors must share one shape. Each fit uses the same ALS options
    (hence the same seed), so identical tensors get identical errors.
    """
    if len(tensors) == 0:
        raise EmptyCollection("cannot evaluate an empty tensor collection")
    opts = opts or AlsOptions()
    shape = tuple(np.shape(tensors[0]))
    for n, t in enumerate(tensors):
        if tuple(np.shape(t)) != shape:
            raise ShapeMismatch(f"tensor {n} has shape {np.shape(t)}, expected {shape}")

    errors, sweeps = [], []
    for n, t in enumerate(tensors):
        try:
            fit = decompose(t, ranks, opts)
        except DegenerateReference:
            raise DegenerateReference(index=n) from None
        errors.append(float(fit.rel_error))
        sweeps.append(fit.sweeps)

    cr = compression_ratio(shape, ranks)
    log_cr = math.log10(cr)
    mean_err = float(np.mean(errors))
    return EvalResult(
        cr=cr,
        log10_cr=log_cr,
        per_tensor_errors=errors,
        mean_error=mean_err,
        loss=log_cr + lam * mean_err,
        lam=lam,
        sweeps_per_tensor=sweeps,
    )
