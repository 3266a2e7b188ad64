import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fctnrank.data import (
    SeriesPanel,
    build_dataset,
    delay_embed,
    load_panel,
    save_panel,
    split,
    split_counts,
    synth_panel,
    window_count,
)
from fctnrank.errors import DataError, DegenerateSplit, DuplicateCell, MissingCell, SeriesTooShort, UnknownColumn
from fctnrank.fctn import AlsOptions, RankAssignment, decompose


def ramp_panel(base, n_steps):
    values = np.arange(np.prod(base) * n_steps, dtype=float).reshape(*base, n_steps)
    return SeriesPanel(values, [str(t) for t in range(n_steps)])


def test_embed_counts_and_shape():
    panel = ramp_panel((3, 6, 3, 4), 146)
    windows = delay_embed(panel, 5)
    assert len(windows) == 142 == window_count(146, 5)
    assert windows[0].shape == (3, 6, 3, 4, 5)
    np.testing.assert_array_equal(windows[7], panel.values[..., 7:12])


def test_embed_edge_cases():
    assert len(delay_embed(ramp_panel((2,), 5), 5)) == 1
    w1 = delay_embed(ramp_panel((2, 2), 6), 1)
    assert len(w1) == 6 and w1[0].shape == (2, 2, 1)
    with pytest.raises(SeriesTooShort):
        delay_embed(ramp_panel((2,), 4), 5)
    assert len(delay_embed(ramp_panel((2,), 10), 3, stride=2)) == window_count(10, 3, 2) == 4


def test_consecutive_windows_share_window_minus_one_steps():
    w = delay_embed(ramp_panel((2,), 9), 4)
    for a, b in zip(w, w[1:]):
        np.testing.assert_array_equal(a[..., 1:], b[..., :-1])


def test_split_counts_for_142_windows():
    windows = list(range(142))
    ds = split(windows, 0.8, window=5, non_overlapping=True)
    assert (len(ds.train), len(ds.dropped_indices), len(ds.test)) == (113, 4, 25)
    assert ds.test_indices[0] == 117
    assert not ds.time_steps(ds.train_indices) & ds.time_steps(ds.test_indices)
    ov = split(windows, 0.8, window=5, non_overlapping=False)
    assert (len(ov.train), len(ov.dropped_indices), len(ov.test)) == (113, 0, 29)


def test_split_degenerate():
    with pytest.raises(DegenerateSplit):
        split(list(range(3)), 0.2, window=1)
    with pytest.raises(DegenerateSplit):
        split(list(range(10)), 0.8, window=5)


@settings(max_examples=80, deadline=None)
@given(count=st.integers(2, 300), fraction=st.floats(0.05, 0.95), window=st.integers(1, 8))
def test_split_disjoint_and_ordered(count, fraction, window):
    try:
        ds = split(list(range(count)), fraction, window=window)
    except DegenerateSplit:
        n_train = int(fraction * count)
        assert n_train < 1 or count - n_train - min(window - 1, count - n_train) < 1
        return
    assert ds.train_indices + ds.dropped_indices + ds.test_indices == list(range(count))
    assert max(ds.train_indices) < min(ds.test_indices)
    assert not ds.time_steps(ds.train_indices) & ds.time_steps(ds.test_indices)
    assert split_counts(count, fraction, window, True) == (len(ds.train), len(ds.dropped_indices), len(ds.test))


def test_build_dataset_zscore_uses_train_span():
    panel = synth_panel((2, 2), 40, seed=1, structure="noise")
    ds = build_dataset(panel, 4, zscore=True)
    train_steps = sorted(ds.time_steps(ds.train_indices))
    covered = np.concatenate([ds.train[0]] + [t[..., -1:] for t in ds.train[1:]], axis=-1)
    assert covered.shape[-1] == len(train_steps)
    np.testing.assert_allclose(covered.mean(axis=-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(covered.std(axis=-1), 1.0, atol=1e-12)


def test_csv_roundtrip(tmp_path):
    panel = synth_panel((3, 6, 3, 4), 2, seed=3)
    p = tmp_path / "panel.csv"
    save_panel(panel, p)
    back = load_panel(p)
    assert back.n_steps == 2 and back.base_shape == (3, 6, 3, 4)
    np.testing.assert_array_equal(back.values, panel.values)


def _small_csv(tmp_path, rows):
    df = pd.DataFrame(rows, columns=["timestamp", "type", "asset", "feature", "interval", "value"])
    p = tmp_path / "x.csv"
    df.to_csv(p, index=False)
    return p


def _full_rows():
    return [[t, ty, "a", "f", "d", 1.0] for t in ("2024-01-01", "2024-01-02") for ty in ("eq", "fx")]


def test_missing_cell(tmp_path):
    rows = _full_rows()[:-1]
    with pytest.raises(MissingCell) as info:
        load_panel(_small_csv(tmp_path, rows))
    assert ("2024-01-02", "fx", "a", "f", "d") in info.value.cells


def test_duplicate_cell(tmp_path):
    rows = _full_rows() + [_full_rows()[0]]
    with pytest.raises(DuplicateCell):
        load_panel(_small_csv(tmp_path, rows))


def test_unknown_column(tmp_path):
    p = _small_csv(tmp_path, _full_rows())
    with pytest.raises(UnknownColumn):
        load_panel(p, {"value": "price"})


def test_non_increasing_timestamps(tmp_path):
    rows = _full_rows()
    rows = rows[2:] + rows[:2]
    with pytest.raises(DataError):
        load_panel(_small_csv(tmp_path, rows))


def test_synth_deterministic():
    a = synth_panel((2, 3), 10, seed=5)
    b = synth_panel((2, 3), 10, seed=5)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, synth_panel((2, 3), 10, seed=6).values)


def test_synth_low_rank_windows_fit_exactly():
    panel = synth_panel((2, 3, 2), 12, seed=0, structure="low_rank", latent_rank=1)
    for w in delay_embed(panel, 4)[:3]:
        fit = decompose(w, RankAssignment.uniform(4, 1), AlsOptions(max_sweeps=100, ridge=0.0))
        assert fit.rel_error < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_synth_noise_is_not_rank_one(seed):
    panel = synth_panel((2, 3, 2), 12, seed=seed, structure="noise")
    w = delay_embed(panel, 4)[0]
    assert decompose(w, RankAssignment.uniform(4, 1)).rel_error > 0.1
