"""Time-series panels and their delay embedding into rolling-window tensors.

A panel holds one dense block of shape ``base`` (e.g. types x assets x
features x intervals) per time step, stored time-last as an array of shape
``(*base, T)``. Delay embedding cuts consecutive windows of ``window`` time
steps, giving tensors of shape ``(*base, window)`` in temporal order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, DegenerateSplit, DuplicateCell, MissingCell, SeriesTooShort, UnknownColumn
from .fctn import RankAssignment, compose, init_cores

DEFAULT_SCHEMA = {
    "timestamp": "timestamp",
    "modes": ["type", "asset", "feature", "interval"],
    "value": "value",
}

STRUCTURES = ("low_rank", "noise", "mixed")


@dataclass
class SeriesPanel:
    values: np.ndarray
    timestamps: list[str]
    coords: list[list[str]] = field(default_factory=list)
    mode_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.timestamps = [str(t) for t in self.timestamps]
        if self.values.ndim < 2:
            raise ValueError("panel values need at least one base mode plus time")
        if self.values.shape[-1] != len(self.timestamps):
            raise ValueError(f"{len(self.timestamps)} timestamps for {self.values.shape[-1]} time steps")
        if not self.coords:
            self.coords = [[str(i) for i in range(n)] for n in self.base_shape]
        if not self.mode_names:
            self.mode_names = [f"mode{k + 1}" for k in range(len(self.base_shape))]
        if [len(c) for c in self.coords] != list(self.base_shape):
            raise ValueError("coordinate labels do not match the base shape")

    @property
    def base_shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @property
    def n_steps(self) -> int:
        return self.values.shape[-1]


@dataclass
class DatasetSplit:
    train: list[np.ndarray]
    test: list[np.ndarray]
    train_indices: list[int]
    test_indices: list[int]
    dropped_indices: list[int]
    window: int
    stride: int = 1

    def time_steps(self, indices: Sequence[int]) -> set[int]:
        """0-based time steps covered by the given windows."""
        return {i * self.stride + d for i in indices for d in range(self.window)}


def window_count(n_steps: int, window: int, stride: int = 1) -> int:
    return (n_steps - window) // stride + 1


def delay_embed(panel: SeriesPanel, window: int, stride: int = 1) -> list[np.ndarray]:
    """Rolling windows starting at time steps ``0, stride, 2*stride, ...``."""
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")
    if panel.n_steps < window:
        raise SeriesTooShort(f"series has {panel.n_steps} steps, window needs {window}")
    return [
        np.ascontiguousarray(panel.values[..., s:s + window])
        for s in range(0, panel.n_steps - window + 1, stride)
    ]


def split_counts(count: int, fraction: float, window: int, non_overlapping: bool, stride: int = 1) -> tuple[int, int, int]:
    """``(n_train, n_dropped, n_test)`` for a temporal split."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n_train = math.floor(fraction * count)
    n_drop = (math.ceil(window / stride) - 1) if non_overlapping else 0
    n_drop = min(n_drop, count - n_train)
    n_test = count - n_train - n_drop
    if n_train < 1 or n_test < 1:
        raise DegenerateSplit(
            f"{count} windows split at {fraction} leave {n_train} train and {n_test} test tensors"
        )
    return n_train, n_drop, n_test


def split(
    tensors: Sequence[np.ndarray],
    fraction: float = 0.8,
    window: int = 1,
    non_overlapping: bool = True,
    stride: int = 1,
) -> DatasetSplit:
    """First ``floor(fraction * count)`` windows train, the rest test.

    With ``non_overlapping`` the windows that still share a time step with
    the last training window are dropped.
    """
    n_train, n_drop, _ = split_counts(len(tensors), fraction, window, non_overlapping, stride)
    idx = list(range(len(tensors)))
    tr, dr, te = idx[:n_train], idx[n_train:n_train + n_drop], idx[n_train + n_drop:]
    return DatasetSplit(
        train=[tensors[i] for i in tr],
        test=[tensors[i] for i in te],
        train_indices=tr,
        test_indices=te,
        dropped_indices=dr,
        window=window,
        stride=stride,
    )


def standardize(panel: SeriesPanel, n_fit_steps: int) -> SeriesPanel:
    """Z-score every base channel using statistics of the first ``n_fit_steps`` steps."""
    ref = panel.values[..., :n_fit_steps]
    mean = ref.mean(axis=-1, keepdims=True)
    std = ref.std(axis=-1, keepdims=True)
    std = np.where(std > 0, std, 1.0)
    return SeriesPanel((panel.values - mean) / std, panel.timestamps, panel.coords, panel.mode_names)


def build_dataset(
    panel: SeriesPanel,
    window: int,
    stride: int = 1,
    fraction: float = 0.8,
    non_overlapping: bool = True,
    zscore: bool = False,
) -> DatasetSplit:
    """Embed and split a panel, optionally standardizing on the training span."""
    if panel.n_steps < window:
        raise SeriesTooShort(f"series has {panel.n_steps} steps, window needs {window}")
    if zscore:
        n_train, _, _ = split_counts(window_count(panel.n_steps, window, stride), fraction, window, non_overlapping, stride)
        panel = standardize(panel, (n_train - 1) * stride + window)
    return split(delay_embed(panel, window, stride), fraction, window, non_overlapping, stride)


# csv io --------------------------------------------------------------------

def _ordered_unique(values) -> list[str]:
    return list(dict.fromkeys(values))


def _parse_times(labels: list[str]):
    try:
        return pd.to_numeric(pd.Series(labels)).to_numpy()
    except (ValueError, TypeError):
        return pd.to_datetime(pd.Series(labels)).to_numpy()


def load_panel(path: str | Path, schema: Mapping | None = None) -> SeriesPanel:
    """Read a long-format CSV (one row per timestamp and coordinate) into a panel.

    Coordinate labels keep their order of first appearance. Distinct
    timestamps must be strictly increasing in file order.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    ts_col, mode_cols, val_col = schema["timestamp"], list(schema["modes"]), schema["value"]
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    wanted = [ts_col, *mode_cols, val_col]
    absent = [c for c in wanted if c not in df.columns]
    if absent:
        raise UnknownColumn(f"{path}: columns {absent} not found (file has {list(df.columns)})")
    key_cols = [ts_col, *mode_cols]

    dup_mask = df.duplicated(subset=key_cols, keep="first")
    if dup_mask.any():
        raise DuplicateCell([tuple(r) for r in df.loc[dup_mask, key_cols].itertuples(index=False)])

    times = _ordered_unique(df[ts_col])
    parsed = _parse_times(times)
    if len(parsed) > 1 and not np.all(parsed[1:] > parsed[:-1]):
        raise DataError(f"{path}: timestamps are not strictly increasing")
    coords = [_ordered_unique(df[c]) for c in mode_cols]
    base = tuple(len(c) for c in coords)

    expected = math.prod(base) * len(times)
    if len(df) != expected:
        have = set(df[key_cols].itertuples(index=False, name=None))
        missing = []
        for t in times:
            for combo in np.ndindex(*base):
                cell = (t, *(coords[k][i] for k, i in enumerate(combo)))
                if cell not in have:
                    missing.append(cell)
        raise MissingCell(missing)

    pos = [df[ts_col].map({t: i for i, t in enumerate(times)}).to_numpy()]
    pos += [df[c].map({lab: i for i, lab in enumerate(coords[k])}).to_numpy() for k, c in enumerate(mode_cols)]
    values = np.empty(base + (len(times),), dtype=np.float64)
    values[tuple(pos[1:]) + (pos[0],)] = df[val_col].astype(np.float64).to_numpy()
    return SeriesPanel(values, times, coords, mode_cols)


def save_panel(panel: SeriesPanel, path: str | Path) -> None:
    rows = []
    for t_idx, t in enumerate(panel.timestamps):
        for combo in np.ndindex(*panel.base_shape):
            labels = [panel.coords[k][i] for k, i in enumerate(combo)]
            rows.append([t, *labels, repr(float(panel.values[combo + (t_idx,)]))])
    df = pd.DataFrame(rows, columns=["timestamp", *panel.mode_names, "value"])
    df.to_csv(path, index=False)


# synthetic data ------------------------------------------------------------

def synth_panel(
    shape_base: Sequence[int],
    n_steps: int,
    seed: int = 0,
    structure: str = "mixed",
    latent_rank: int = 2,
    noise_level: float = 0.05,
) -> SeriesPanel:
    """Deterministic synthetic panel.

    ``low_rank`` draws an FCTN of the full ``(*base, T)`` array with every
    edge at ``latent_rank``; any time window of it is exactly representable
    at those ranks. ``noise`` is i.i.d. standard normal. ``mixed`` adds
    noise scaled to ``noise_level`` times the RMS of the low-rank part.
    """
    if structure not in STRUCTURES:
        raise ValueError(f"structure must be one of {STRUCTURES}")
    shape = tuple(int(s) for s in shape_base) + (int(n_steps),)
    rng = np.random.default_rng(seed)
    if structure == "noise":
        values = rng.standard_normal(shape)
    else:
        ranks = RankAssignment.uniform(len(shape), latent_rank)
        values = compose(init_cores(shape, ranks, int(rng.integers(2**31 - 1))))
        if structure == "mixed":
            rms = np.sqrt(np.mean(values**2))
            values = values + noise_level * rms * rng.standard_normal(shape)
    mode_names = ["type", "asset", "feature", "interval"] if len(shape_base) == 4 else []
    return SeriesPanel(values, [str(t) for t in range(n_steps)], mode_names=mode_names)
