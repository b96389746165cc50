import math

import numpy as np
import pytest

from tourmap import _backend
from tourmap.errors import NumericError
from tourmap.spatial_stats import (
    build_weights,
    build_weights_from_points,
    global_moran,
    local_moran,
    read_lisa,
    write_lisa,
)

from .helpers import grid_points

BACKENDS = ["python"] + (["compiled"] if _backend.compiled_available() else [])


def dense_oracle(values, wd):
    """Moran's I and local I_i evaluated straight from the definitions."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    z = x - x.mean()
    s0 = wd.sum()
    num = sum(wd[i, j] * z[i] * z[j] for i in range(n) for j in range(n))
    big_i = n / s0 * num / (z @ z)
    m2 = (z @ z) / n
    local = np.array([z[i] / m2 * sum(wd[i, j] * z[j] for j in range(n)) for i in range(n)])
    return big_i, local


def test_pair_weights():
    w = build_weights_from_points([(0, 0), (250, 0), (850, 0)])
    d = w.dense()
    assert d[0, 1] == d[1, 0] == 1 / 250
    assert d[0, 2] == 0.0 and d[1, 2] == 0.0
    assert np.all(np.diag(d) == 0)


def test_coincident_clamped_to_one_metre():
    w = build_weights_from_points([(5, 5), (5, 5)])
    assert w.dense()[0, 1] == 1.0


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        build_weights_from_points([(0, 0), (1, 1)], threshold_m=0)


def test_band_is_inclusive_and_row_standardized():
    pts = [(0, 0), (500, 0), (0, 300), (5000, 5000)]
    w = build_weights_from_points(pts, row_standardize=True)
    d = w.dense()
    assert d[0, 1] > 0
    rows = d.sum(axis=1)
    assert rows[:3] == pytest.approx(1.0) and rows[3] == 0.0
    assert w.cardinalities.tolist() == [2, 1, 1, 0]


def test_geographic_weights_use_haversine():
    # ~333.6 m and ~667 m east at the equator
    pts = [(0.0, 0.0), (0.003, 0.0), (0.006, 0.0)]
    w = build_weights_from_points(pts, crs_mode="geographic")
    d = w.dense()
    assert 1 / d[0, 1] == pytest.approx(6_371_000 * math.radians(0.003), rel=1e-9)
    assert d[0, 2] == 0.0


def test_build_from_zones(grid_zones):
    w = build_weights(grid_zones, threshold_m=100.0)
    assert w.cardinalities[5] == 4 and w.cardinalities[0] == 2


def test_two_zones_give_minus_one():
    w = build_weights_from_points([(0, 0), (250, 0)])
    assert global_moran([0, 1], w, permutations=0).I == pytest.approx(-1.0, abs=1e-15)


def test_errors():
    w = build_weights_from_points([(0, 0), (100, 0), (200, 0)])
    with pytest.raises(NumericError, match="zero variance"):
        global_moran([3, 3, 3], w)
    with pytest.raises(NumericError, match="zero variance"):
        local_moran([3, 3, 3], w)
    far = build_weights_from_points([(0, 0), (1000, 0), (2000, 0)])
    with pytest.raises(NumericError, match="empty weights"):
        global_moran([1, 2, 3], far)


@pytest.mark.parametrize("row_std", [False, True])
def test_brute_force_and_sum_identity(rng, row_std):
    for _ in range(20):
        n = int(rng.integers(3, 30))
        pts = rng.uniform(0, 1500, (n, 2))
        w = build_weights_from_points(pts, row_standardize=row_std)
        if w.s0 == 0:
            continue
        x = rng.normal(size=n)
        if np.ptp(x) == 0:
            continue
        big_i, local = dense_oracle(x, w.dense())
        g = global_moran(x, w, permutations=0)
        lisa = local_moran(x, w, permutations=0)
        assert g.I == pytest.approx(big_i, abs=1e-10)
        assert np.allclose(lisa.I, local, atol=1e-10, rtol=0)
        assert lisa.I.sum() == pytest.approx(w.s0 * g.I, abs=1e-9)


def test_randomization_variance_matches_permutation_spread(grid_weights, rng):
    x = rng.normal(size=25)
    g = global_moran(x, grid_weights, permutations=4000, seed=3)
    assert g.expected == -1 / 24
    assert math.sqrt(g.variance) == pytest.approx(g.sim_sd, rel=0.08)
    assert 0 <= g.p_value <= 1 and 0 < g.perm_p <= 1


def test_permutation_seed_reproducible(grid_weights, rng):
    x = rng.normal(size=25)
    a = global_moran(x, grid_weights, permutations=99, seed=5, keep_simulations=True)
    b = global_moran(x, grid_weights, permutations=99, seed=5, keep_simulations=True)
    assert np.array_equal(a.simulations, b.simulations)


def test_center_block_is_hh(grid_weights):
    v = np.zeros(25)
    for r in range(1, 4):
        v[r * 5 + 1:r * 5 + 4] = 10
    res = local_moran(v, grid_weights, permutations=999, seed=0)
    assert res.quadrant[12] == "HH" and res.pseudo_p[12] <= 0.05 and res.significant[12]


def test_single_spike_is_hl(grid_weights):
    v = np.zeros(25)
    v[12] = 10
    assert local_moran(v, grid_weights, permutations=0).quadrant[12] == "HL"


def test_isolated_zone():
    pts = np.vstack([grid_points(3, 3), [[5000, 5000]]])
    v = np.arange(10.0)
    res = local_moran(v, build_weights_from_points(pts), permutations=99)
    assert res.quadrant[-1] == "isolated" and not res.significant[-1]
    assert math.isnan(res.pseudo_p[-1]) and res.labels()[-1] == "isolated"


def test_quadrant_signs(rng):
    pts = rng.uniform(0, 1000, (40, 2))
    w = build_weights_from_points(pts)
    x = rng.normal(size=40)
    res = local_moran(x, w, permutations=0)
    z = x - x.mean()
    for zi, lag, q, k in zip(z, res.lag, res.quadrant, w.cardinalities):
        if k == 0:
            assert q == "isolated"
        else:
            assert q == ("H" if zi > 0 else "L") + ("H" if lag > 0 else "L")


def test_pseudo_p_bounds_and_reproducible(grid_weights, rng):
    x = rng.normal(size=25)
    a = local_moran(x, grid_weights, permutations=99, seed=1)
    b = local_moran(x, grid_weights, permutations=99, seed=1)
    assert np.array_equal(a.pseudo_p, b.pseudo_p)
    assert np.all((a.pseudo_p >= 1 / 100) & (a.pseudo_p <= 1))
    assert np.array_equal(a.significant, a.pseudo_p <= 0.05)


@pytest.mark.parametrize("backend", BACKENDS)
def test_jobs_do_not_change_results(backend, rng):
    pts = rng.uniform(0, 3000, (300, 2))
    w = build_weights_from_points(pts)
    x = rng.gamma(1.0, size=300)
    one = local_moran(x, w, permutations=199, seed=9, jobs=1, backend=backend)
    many = local_moran(x, w, permutations=199, seed=9, jobs=4, backend=backend)
    assert np.array_equal(one.pseudo_p, many.pseudo_p, equal_nan=True)
    assert np.array_equal(one.I, many.I)


def test_backends_bit_identical(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    pts = rng.uniform(0, 3000, (400, 2))
    w = build_weights_from_points(pts)
    x = rng.gamma(1.0, size=400)
    a = local_moran(x, w, permutations=499, seed=2, backend="python")
    b = local_moran(x, w, permutations=499, seed=2, backend="compiled")
    assert np.array_equal(a.pseudo_p, b.pseudo_p, equal_nan=True)
    assert np.array_equal(a.I, b.I)


def test_lisa_csv_roundtrip(tmp_path, grid_weights, rng):
    x = rng.normal(size=25)
    res = local_moran(x, grid_weights, permutations=99, seed=1)
    ids = [f"z{i}" for i in range(25)]
    write_lisa(tmp_path / "l.csv", ids, res)
    back = read_lisa(tmp_path / "l.csv", 0.05)
    assert back.quadrant == res.quadrant
    assert np.array_equal(back.significant, res.significant)
    assert back.zone_ids == ids
