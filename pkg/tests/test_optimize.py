import numpy as np
import pytest

from mobo.optimize import EvaluationError, GpsConfig, pattern_search


def test_quadratic_minimizer():
    c = np.array([0.3, 0.7, 0.5])
    res = pattern_search(lambda x: float(np.sum((x - c) ** 2)), np.zeros(3), GpsConfig(0.25, 1e-4))
    assert np.linalg.norm(res.x - c) < 1e-3
    assert res.evals <= 2000


def test_linear_reaches_lower_bound_exactly():
    res = pattern_search(lambda x: float(x[0]), np.array([0.5]))
    assert res.x[0] == 0.0
    assert res.f == 0.0


def test_budget_respected():
    calls = []

    def f(x):
        calls.append(x.copy())
        return float(np.sum((x - 0.123) ** 2))

    res = pattern_search(f, np.full(3, 0.9), GpsConfig(max_evals=10))
    assert res.evals <= 10
    assert len(calls) == res.evals


def test_trajectory_feasible_monotone_deterministic():
    c = np.array([1.2, -0.3, 0.4])  # minimizer outside the cube
    seen = []
    best = []

    def f(x):
        seen.append(x.copy())
        v = float(np.sum((x - c) ** 2))
        best.append(min(v, best[-1]) if best else v)
        return v

    x0 = np.array([0.5, 0.5, 0.5])
    res = pattern_search(f, x0)
    assert all(np.all((p >= 0) & (p <= 1)) for p in seen)
    assert res.f <= f(x0)
    assert res.f == pytest.approx(min(best[:-1]))
    np.testing.assert_allclose(res.x, [1.0, 0.0, 0.4], atol=1e-3)

    seen2 = []
    res2 = pattern_search(lambda x: seen2.append(x.copy()) or float(np.sum((x - c) ** 2)), x0)
    assert res2.x.tobytes() == res.x.tobytes()
    assert [p.tobytes() for p in seen2] == [p.tobytes() for p in seen[: len(seen2)]]


def test_non_finite_value_raises_with_point():
    def f(x):
        return float("nan") if x[0] > 0.6 else float(x[0])

    with pytest.raises(EvaluationError) as info:
        pattern_search(lambda x: -f(x), np.array([0.5]))
    assert info.value.point[0] > 0.6


def test_config_validation():
    with pytest.raises(ValueError):
        GpsConfig(mesh0=0.1, mesh_tol=0.2)
    with pytest.raises(ValueError):
        GpsConfig(contract=1.0)
