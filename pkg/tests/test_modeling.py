import numpy as np
import pytest

from tourmap.errors import NumericError
from tourmap.modeling import group_profiles, kmeans, ols_bivariate


def normal_equations(x, y):
    X = np.column_stack([np.ones_like(x), x])
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    e = y - X @ beta
    r2 = 1 - (e @ e) / ((y - y.mean()) @ (y - y.mean()))
    n = len(x)
    return beta, e, 1 - (1 - r2) * (n - 1) / (n - 2)


def test_exact_fit():
    x = np.arange(10.0)
    res = ols_bivariate(x, 2 * x + 1)
    assert (res.r2, res.adj_r2) == (1.0, 1.0)
    assert np.all(res.residuals == 0) and np.all(res.std_residuals == 0)
    assert res.slope == 2.0 and res.intercept == 1.0


def test_flat_case():
    res = ols_bivariate([1, 2, 3], [1, -2, 1])
    assert res.slope == 0.0 and res.r2 == 0.0


def test_errors():
    with pytest.raises(NumericError):
        ols_bivariate([1, 1, 1], [1, 2, 3])
    with pytest.raises(NumericError):
        ols_bivariate([1, 2], [1, 2])


def test_normal_equation_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(3, 200))
        x = rng.normal(size=n) * 100
        y = 0.3 * x + rng.normal(size=n) * 40
        beta, e, adj = normal_equations(x, y)
        res = ols_bivariate(x, y)
        assert res.intercept == pytest.approx(beta[0], abs=1e-9)
        assert res.slope == pytest.approx(beta[1], abs=1e-9)
        assert np.allclose(res.residuals, e, atol=1e-9, rtol=0)
        assert res.adj_r2 == pytest.approx(adj, abs=1e-9)
        assert res.adj_r2 <= res.r2
        assert abs(res.std_residuals.sum()) <= 1e-9
        assert res.std_residuals == pytest.approx(e / np.sqrt(e @ e / (n - 2)))


def test_constant_y_has_zero_r2():
    res = ols_bivariate([1, 2, 3, 4], [5, 5, 5, 5])
    assert res.r2 == 0.0 and res.slope == 0.0


def test_kmeans_two_points():
    pts = np.vstack([np.zeros((10, 3)), np.full((10, 3), 100.0)])
    m = kmeans(pts, k=2, seed=1, restarts=3)
    assert m.inertia == 0.0
    assert m.centers.tolist() == [[100.0] * 3, [0.0] * 3]
    assert m.assignments.tolist() == [2] * 10 + [1] * 10


def test_kmeans_k_equals_n(rng):
    pts = rng.normal(size=(7, 2))
    m = kmeans(pts, k=7, seed=0, restarts=5)
    assert m.inertia == 0.0 and sorted(m.assignments.tolist()) == list(range(1, 8))


def test_kmeans_too_few_distinct():
    with pytest.raises(NumericError):
        kmeans(np.zeros((10, 3)), k=2)


def test_kmeans_assignments_are_nearest(rng):
    pts = rng.uniform(0, 1000, (300, 3))
    m = kmeans(pts, k=6, seed=3, restarts=4)
    d = ((pts[:, None, :] - m.centers[None]) ** 2).sum(axis=2)
    assert np.array_equal(m.assignments, d.argmin(axis=1) + 1)
    assert m.inertia == pytest.approx(d.min(axis=1).sum(), rel=1e-12)
    assert all(a >= b for a, b in zip(m.inertia_history, m.inertia_history[1:]))
    sums = m.centers.sum(axis=1)
    assert np.all(np.diff(sums) <= 0)


def test_kmeans_jobs_identical(rng):
    pts = rng.uniform(0, 1000, (200, 3))
    a = kmeans(pts, k=4, seed=8, restarts=6, jobs=1)
    b = kmeans(pts, k=4, seed=8, restarts=6, jobs=3)
    assert np.array_equal(a.centers, b.centers) and np.array_equal(a.assignments, b.assignments)


def test_group_profiles():
    groups = np.array([1, 1, 2, 2, 2, 3])
    v = np.array([1.0, 3.0, 2.0, 4.0, 6.0, 9.0])
    rows = group_profiles(groups, {"photo": v})
    assert [r["count"] for r in rows] == [2, 3, 1, 6]
    assert rows[0]["photo_mean"] == 2.0 and rows[1]["photo_sd"] == 2.0
    assert rows[2]["photo_sd"] == 0.0
    assert rows[-1]["group"] == "Total" and rows[-1]["photo_mean"] == pytest.approx(v.mean())
    single = group_profiles(np.ones(6, dtype=int), {"photo": v})
    assert single[0]["photo_mean"] == single[-1]["photo_mean"]
