"""Gaussian radial-basis-function interpolants over the unit cube.

One model is fitted per simulation output channel. The kernel is
``phi(r) = exp(-r**2 / (2 * shape**2))`` with ``shape`` set to the median
pairwise distance between centers.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist, pdist

DEFAULT_NUGGET = 1e-8
DUPLICATE_TOL = 1e-10
_REFINE_RTOL = 1e-10
_REFINE_MAXITER = 100


class DuplicatePointError(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class RbfModel:
    centers: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)
    shape: float
    nugget: float = DEFAULT_NUGGET
    values: np.ndarray | None = None  # training outputs, kept for refit

    @property
    def npts(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    def __call__(self, x):
        return predict(self, x)

    def to_dict(self):
        return {
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
            "shape": self.shape,
            "nugget": self.nugget,
            "values": None if self.values is None else self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        values = d.get("values")
        return cls(
            centers=np.array(d["centers"], dtype=float).reshape(len(d["weights"]), -1),
            weights=np.array(d["weights"], dtype=float),
            shape=float(d["shape"]),
            nugget=float(d["nugget"]),
            values=None if values is None else np.array(values, dtype=float),
        )


def kernel_matrix(X, Y, shape):
    return np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * shape * shape))


def median_shape(X) -> float:
    if len(X) < 2:
        return 0.5
    return float(np.median(pdist(X)))


def fit(inputs, outputs, nugget: float = DEFAULT_NUGGET) -> RbfModel:
    """Fit an interpolant through ``(inputs[i], outputs[i])``.

    The nugget-shifted kernel system ``(Phi + nugget*I) w = y`` is factored
    once and used to precondition iterative refinement toward ``Phi w = y``,
    so training residuals end up far below the nugget's own bias.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(outputs, dtype=float).ravel()
    if X.shape[0] < 1:
        raise ValueError("need at least one training point")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
    if X.shape[0] > 1:
        d = pdist(X)
        if d.min() < DUPLICATE_TOL:
            raise DuplicatePointError(
                f"training inputs closer than {DUPLICATE_TOL} (min distance {d.min():.3g})"
            )
    shape = median_shape(X)
    Phi = kernel_matrix(X, X, shape)
    A = Phi + nugget * np.eye(len(y))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        try:
            lu = la.lu_factor(A, check_finite=True)
        except (ValueError, la.LinAlgError) as exc:
            raise NumericalFailure(f"kernel factorization failed: {exc}") from exc
        if np.any(np.diag(lu[0]) == 0.0):
            raise NumericalFailure("kernel system is singular after nugget")
        w = la.lu_solve(lu, y)
        target = _REFINE_RTOL * max(1.0, float(np.abs(y).max()))
        best_w, best_r = w, np.abs(y - Phi @ w).max()
        for _ in range(_REFINE_MAXITER):
            if best_r <= target:
                break
            w = w + la.lu_solve(lu, y - Phi @ w)
            r = np.abs(y - Phi @ w).max()
            if not r < best_r:
                break
            best_w, best_r = w, r
    if not np.all(np.isfinite(best_w)):
        raise NumericalFailure("non-finite RBF weights")
    return RbfModel(centers=X.copy(), weights=best_w, shape=shape, nugget=nugget, values=y.copy())


def predict(m: RbfModel, x):
    """Evaluate the interpolant at one point (scalar) or at rows of an array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        d2 = np.sum((m.centers - x) ** 2, axis=1)
        return float(np.exp(-d2 / (2.0 * m.shape * m.shape)) @ m.weights)
    return kernel_matrix(x, m.centers, m.shape) @ m.weights


def refit(m: RbfModel, new_inputs, new_outputs) -> RbfModel:
    """Full refit on the old training data plus the new points."""
    new_X = np.asarray(new_inputs, dtype=float).reshape(-1, m.dim)
    new_y = np.asarray(new_outputs, dtype=float).ravel()
    if m.values is None:
        raise ValueError("model does not carry its training outputs")
    X = np.vstack([m.centers, new_X])
    y = np.concatenate([m.values, new_y])
    return fit(X, y, nugget=m.nugget)
