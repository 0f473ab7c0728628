import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chatterdtw.dtw import (
    DtwConfig,
    WarpingPath,
    coarsen,
    dtw_distance,
    dtw_exact,
    fastdtw,
    local_distance,
)
from chatterdtw.errors import InfeasibleWindow
from oracles import brute_dtw, enumerate_paths, slope_ok

series = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=7)

EXACT = DtwConfig(mode="exact")
SLOPE = DtwConfig(mode="exact", slope_steps=(1, 1))


def test_local_distance():
    assert local_distance(3.0, 3.0) == 0.0
    assert local_distance(1.0, -2.0) == 3.0
    rng = np.random.default_rng(0)
    for x, y in rng.normal(size=(50, 2)):
        assert local_distance(x, y) == local_distance(y, x)
    with pytest.raises(ValueError):
        local_distance(float("nan"), 1.0)


def test_coarsen():
    assert coarsen([1, 3, 5, 7]).tolist() == [2, 6]
    assert coarsen([1, 3, 5]).tolist() == [2, 5]
    for n in range(2, 12):
        assert len(coarsen(np.arange(n))) == -(-n // 2)
    with pytest.raises(ValueError):
        coarsen([1.0])


def test_identity_is_zero_with_diagonal_path():
    x = np.random.default_rng(1).normal(size=17)
    res = dtw_exact(x, x, return_path=True)
    assert res.distance == 0.0
    assert res.path.as_tuples() == [(i, i) for i in range(17)]
    assert fastdtw(x, x, 1).distance == 0.0


def test_repeated_element_aligns_at_zero_cost():
    # brute force over the 3x4 grid agrees
    assert brute_dtw([1, 2, 3], [1, 2, 2, 3]) == 0.0
    assert dtw_exact([1, 2, 3], [1, 2, 2, 3]).distance == 0.0


def test_constant_offset():
    assert brute_dtw([0, 0, 0], [1, 1, 1]) == 3.0
    for cfg in (EXACT, SLOPE, DtwConfig(mode="exact", window_radius=0)):
        res = dtw_exact([0, 0, 0], [1, 1, 1], cfg, return_path=True)
        assert res.distance == 3.0
        assert res.path.as_tuples() == [(0, 0), (1, 1), (2, 2)]


def test_path_count_matches_delannoy():
    # Delannoy numbers D(m-1, n-1)
    assert sum(1 for _ in enumerate_paths(3, 3)) == 13
    assert sum(1 for _ in enumerate_paths(4, 4)) == 63


@settings(max_examples=200, deadline=None)
@given(series, series)
def test_exact_matches_brute_force(x, y):
    assert dtw_exact(x, y).distance == pytest.approx(brute_dtw(x, y), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(series, series, st.integers(0, 7))
def test_band_matches_brute_force(x, y, r):
    cfg = DtwConfig(mode="exact", window_radius=r)
    if r < abs(len(x) - len(y)):
        with pytest.raises(InfeasibleWindow):
            dtw_exact(x, y, cfg)
        return
    assert dtw_exact(x, y, cfg).distance == pytest.approx(brute_dtw(x, y, band=r), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(series, series, st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 3)]))
def test_slope_matches_brute_force(x, y, steps):
    cfg = DtwConfig(mode="exact", slope_steps=steps)
    expected = brute_dtw(x, y, slope=steps)
    if expected == np.inf:
        with pytest.raises(InfeasibleWindow):
            dtw_exact(x, y, cfg)
        return
    res = dtw_exact(x, y, cfg, return_path=True)
    assert res.distance == pytest.approx(expected, rel=1e-12, abs=1e-12)
    res.path.check(len(x), len(y))
    assert slope_ok(res.path.as_tuples(), *steps)
    path_cost = sum(abs(x[i] - y[j]) for i, j in res.path.as_tuples())
    assert path_cost == pytest.approx(res.distance, rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(series, series)
def test_returned_paths_are_valid_and_optimal(x, y):
    res = dtw_exact(x, y, return_path=True)
    res.path.check(len(x), len(y))
    cost = sum(abs(x[i] - y[j]) for i, j in res.path.as_tuples())
    assert cost == pytest.approx(res.distance, rel=1e-12, abs=1e-12)


def test_path_check_rejects_bad_paths():
    with pytest.raises(ValueError, match="boundary"):
        WarpingPath(np.array([[0, 0], [1, 1]])).check(3, 3)
    with pytest.raises(ValueError, match="continuity"):
        WarpingPath(np.array([[0, 0], [2, 2]])).check(3, 3)
    with pytest.raises(ValueError, match="monotonicity"):
        WarpingPath(np.array([[0, 0], [1, 1], [0, 1], [1, 1]])).check(2, 2)


def test_symmetry_of_exact_recurrence():
    rng = np.random.default_rng(2)
    for _ in range(50):
        x = rng.normal(size=rng.integers(1, 40))
        y = rng.normal(size=rng.integers(1, 40))
        assert dtw_exact(x, y).distance == dtw_exact(y, x).distance


def test_tie_break_prefers_diagonal():
    # every path through the constant grid costs the same per cell; the
    # diagonal is shortest, and on the square grid the backtracker must pick it
    res = dtw_exact(np.zeros(5), np.zeros(5), return_path=True)
    assert res.path.as_tuples() == [(i, i) for i in range(5)]


def test_tie_break_vertical_before_horizontal():
    # 3x2 of zeros: the only tie is between the two non-diagonal moves
    res = dtw_exact(np.zeros(3), np.zeros(2), return_path=True)
    assert res.path.as_tuples() == [(0, 0), (1, 0), (2, 1)]


def test_fastdtw_full_radius_is_exact():
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.normal(size=rng.integers(1, 65))
        y = rng.normal(size=rng.integers(1, 65))
        r = max(len(x), len(y))
        assert fastdtw(x, y, r).distance == pytest.approx(dtw_exact(x, y).distance, rel=1e-12)


def test_fastdtw_never_undercuts_exact():
    rng = np.random.default_rng(4)
    for _ in range(300):
        x = rng.normal(size=rng.integers(8, 129))
        y = rng.normal(size=rng.integers(8, 129))
        exact = dtw_exact(x, y).distance
        for r in (0, 1, 2):
            res = fastdtw(x, y, r, return_path=True)
            assert res.distance >= exact - 1e-9 * max(1.0, exact)
            res.path.check(len(x), len(y))
            cost = np.abs(x[res.path.pairs[:, 0]] - y[res.path.pairs[:, 1]]).sum()
            assert cost == pytest.approx(res.distance, rel=1e-12)


def test_fastdtw_is_cheaper_than_exact_on_long_series():
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=2000), rng.normal(size=2000)
    fast = fastdtw(x, y, 1)
    assert fast.cells_evaluated < dtw_exact(x, y).cells_evaluated / 50


def test_fastdtw_close_to_exact_on_smooth_series():
    t = np.linspace(0, 6 * np.pi, 400)
    x, y = np.sin(t), np.sin(t + 0.4)
    exact = dtw_exact(x, y).distance
    assert fastdtw(x, y, 10).distance <= 1.05 * exact


def test_infeasible_band():
    with pytest.raises(InfeasibleWindow):
        dtw_exact(np.zeros(5), np.zeros(8), DtwConfig(mode="exact", window_radius=2))


def test_band_consistency_and_monotonicity():
    rng = np.random.default_rng(6)
    for _ in range(30):
        x = rng.normal(size=rng.integers(5, 30))
        y = rng.normal(size=rng.integers(5, 30))
        full = dtw_exact(x, y).distance
        r0 = abs(len(x) - len(y))
        ds = [dtw_exact(x, y, DtwConfig(mode="exact", window_radius=r)).distance
              for r in range(r0, max(len(x), len(y)) + 1)]
        assert ds[-1] == full
        assert all(a >= b for a, b in zip(ds, ds[1:]))


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        dtw_exact([], [1.0])
    with pytest.raises(ValueError):
        fastdtw([1.0], [])


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        DtwConfig(mode="fastdtw", slope_steps=(1, 1))
    with pytest.raises(ValueError):
        DtwConfig(mode="exact", slope_steps=(0, 1))
    cfg = DtwConfig(mode="exact", window_radius=4, slope_steps=(1, 1))
    assert cfg.slope_intensity == 1.0
    assert DtwConfig.from_dict(cfg.to_dict()) == cfg
    assert DtwConfig.from_dict(DtwConfig().to_dict()) == DtwConfig()


def test_dispatch():
    x, y = [0.0, 1.0, 2.0], [0.0, 2.0]
    assert dtw_distance(x, y, EXACT).distance == dtw_exact(x, y).distance
    assert dtw_distance(x, y, DtwConfig(fastdtw_radius=3)).distance == dtw_exact(x, y).distance
