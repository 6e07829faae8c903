import numpy as np
import pytest

from mobo.doe import LhsConfig, latin_hypercube


def strata_counts(pts):
    n = len(pts)
    return np.stack([np.bincount(np.floor(pts[:, k] * n).astype(int), minlength=n) for k in range(pts.shape[1])])


def test_single_point():
    pts = latin_hypercube(LhsConfig(1, 1, seed=99))
    assert pts.shape == (1, 1)
    assert 0 <= pts[0, 0] < 1


def test_fifteen_points_stratified():
    pts = latin_hypercube(LhsConfig(15, 3, seed=7))
    assert pts.shape == (15, 3)
    assert np.all(strata_counts(pts) == 1)


def test_deterministic():
    a = latin_hypercube(LhsConfig(15, 3, seed=7))
    b = latin_hypercube(LhsConfig(15, 3, seed=7))
    assert a.tobytes() == b.tobytes()
    c = latin_hypercube(LhsConfig(15, 3, seed=8))
    assert a.tobytes() != c.tobytes()


@pytest.mark.parametrize("n,d", [(2, 5), (37, 2), (100, 4)])
def test_range_and_histogram(n, d):
    pts = latin_hypercube(LhsConfig(n, d, seed=n * d))
    assert np.all((pts >= 0) & (pts < 1))
    assert np.all(strata_counts(pts) == 1)


def test_config_validation():
    with pytest.raises(ValueError):
        LhsConfig(0, 3)
    with pytest.raises(ValueError):
        LhsConfig(3, 3, seed=-1)
