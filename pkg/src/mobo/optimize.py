"""Coordinate generalized pattern search on the unit cube."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class EvaluationError(ArithmeticError):
    def __init__(self, point, value):
        super().__init__(f"objective returned {value!r} at {np.asarray(point).tolist()}")
        self.point = np.asarray(point).copy()
        self.value = value


@dataclass(frozen=True)
class GpsConfig:
    mesh0: float = 0.25
    mesh_tol: float = 1e-4
    max_evals: int = 2000
    expand: float = 1.0
    contract: float = 0.5

    def __post_init__(self):
        if not (self.mesh0 > 0 and self.mesh_tol > 0 and self.mesh_tol < self.mesh0):
            raise ValueError("need 0 < mesh_tol < mesh0")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.expand < 1 or not 0 < self.contract < 1:
            raise ValueError("need expand >= 1 and 0 < contract < 1")


@dataclass
class GpsResult:
    x: np.ndarray
    f: float
    evals: int
    mesh: float


def pattern_search(
    f: Callable[[np.ndarray], float], x0, cfg: GpsConfig = GpsConfig()
) -> GpsResult:
    """Minimize ``f`` over ``[0, 1]^d`` starting from ``x0``.

    Polls ``x + mesh*e_i`` then ``x - mesh*e_i`` for i = 0..d-1, projected onto
    the cube, and moves to the first improving point. A poll without
    improvement contracts the mesh.
    """
    x = np.clip(np.asarray(x0, dtype=float).copy(), 0.0, 1.0)
    d = x.size
    evals = 0

    def evaluate(p):
        nonlocal evals
        evals += 1
        v = float(f(p))
        if not math.isfinite(v):
            raise EvaluationError(p, v)
        return v

    fx = evaluate(x)
    mesh = cfg.mesh0
    while mesh >= cfg.mesh_tol and evals < cfg.max_evals:
        improved = False
        for i in range(d):
            for sign in (1.0, -1.0):
                if evals >= cfg.max_evals:
                    break
                p = x.copy()
                p[i] = min(1.0, max(0.0, p[i] + sign * mesh))
                if p[i] == x[i]:
                    continue
                fp = evaluate(p)
                if fp < fx:
                    x, fx, improved = p, fp, True
                    break
            if improved:
                break
        mesh = mesh * cfg.expand if improved else mesh * cfg.contract
    return GpsResult(x=x, f=fx, evals=evals, mesh=mesh)
