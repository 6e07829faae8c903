"""Scalarized acquisitions, the Pareto archive and batch generation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .optimize import GpsConfig, pattern_search
from .problem import REACTOR_VARIABLES, DesignPoint, embed, unembed
from .surrogate import RbfModel, predict

DEDUPE_RADIUS = 1e-3
MAX_PERTURB_ATTEMPTS = 100


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str  # "fixed-weight" or "epsilon-constraint"
    weights: tuple[float, ...] | None = None
    target_index: int | None = None
    penalty: float = 100.0

    def __post_init__(self):
        if self.kind == "fixed-weight":
            if self.weights is None or self.target_index is not None:
                raise ValueError("fixed-weight acquisition takes weights only")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise ValueError("weights must be nonnegative and sum to 1")
        elif self.kind == "epsilon-constraint":
            if self.target_index is None or self.weights is not None:
                raise ValueError("epsilon-constraint acquisition takes target_index only")
            if self.penalty <= 0:
                raise ValueError("penalty must be positive")
        else:
            raise ValueError(f"unknown acquisition kind {self.kind!r}")


DEFAULT_ACQUISITIONS = (
    AcquisitionSpec("epsilon-constraint", target_index=0),
    AcquisitionSpec("epsilon-constraint", target_index=1),
    AcquisitionSpec("fixed-weight", weights=(0.5, 0.5)),
)


def scalarize_fixed(f, w) -> float:
    f = np.asarray(f, dtype=float)
    w = np.asarray(w, dtype=float)
    if f.shape != w.shape:
        raise ValueError(f"objective length {f.size} != weight length {w.size}")
    return float(w @ f)


def scalarize_epsilon(f, target: int, eps, rho: float = 100.0) -> float:
    """``f[target]`` plus a quadratic penalty on every other objective exceeding its cap."""
    f = np.asarray(f, dtype=float)
    eps = np.asarray(eps, dtype=float)
    excess = np.maximum(0.0, f - eps)
    excess[target] = 0.0
    return float(f[target] + rho * np.sum(excess**2))


def dominates(u, v) -> bool:
    u = np.asarray(u)
    v = np.asarray(v)
    return bool(np.all(u <= v) and np.any(u != v))


@dataclass(frozen=True)
class ArchiveEntry:
    design: DesignPoint
    objectives: tuple[float, ...]
    index: int


@dataclass(frozen=True)
class ParetoArchive:
    entries: tuple[ArchiveEntry, ...] = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def objectives(self) -> np.ndarray:
        return np.array([e.objectives for e in self.entries], dtype=float).reshape(len(self), -1)

    def indices(self) -> list[int]:
        return [e.index for e in self.entries]


def pareto_update(a: ParetoArchive, e: ArchiveEntry) -> ParetoArchive:
    """Insert ``e`` unless dominated; drop whatever ``e`` dominates.

    Equal objective vectors keep the entry with the smaller experiment index,
    which makes the result independent of insertion order.
    """
    fe = np.asarray(e.objectives, dtype=float)
    if not np.all(np.isfinite(fe)):
        raise ValueError(f"non-finite objectives {e.objectives}")
    kept = []
    for old in a.entries:
        fo = np.asarray(old.objectives)
        if dominates(fo, fe):
            return a
        if np.array_equal(fo, fe):
            if old.index <= e.index:
                return a
            continue
        if not dominates(fe, fo):
            kept.append(old)
    kept.append(e)
    kept.sort(key=lambda entry: entry.index)
    return ParetoArchive(tuple(kept))


def nondominated_filter(objectives) -> list[int]:
    """Positions of rows not dominated by any other row; among equal rows the first survives."""
    F = np.asarray(objectives, dtype=float)
    keep = []
    for i in range(len(F)):
        ok = True
        for j in range(len(F)):
            if i == j:
                continue
            if dominates(F[j], F[i]) or (j < i and np.array_equal(F[j], F[i])):
                ok = False
                break
        if ok:
            keep.append(i)
    return keep


def surrogate_objectives(models: tuple[RbfModel, RbfModel], x) -> np.ndarray:
    product, byproduct = models
    return np.array([-predict(product, x), predict(byproduct, x)])


def _scalarizer(spec: AcquisitionSpec, eps):
    if spec.kind == "fixed-weight":
        w = np.asarray(spec.weights, dtype=float)
        return lambda f: scalarize_fixed(f, w)
    return lambda f: scalarize_epsilon(f, spec.target_index, eps, spec.penalty)


def _separate(x, others, rng, radius, max_attempts):
    """Random-walk ``x`` in radius-sized steps until it is ``radius`` away from ``others``."""
    if len(others) == 0:
        return x
    others = np.asarray(others)
    d = x.size
    for _ in range(max_attempts):
        if np.min(np.linalg.norm(others - x, axis=1)) >= radius:
            return x
        step = rng.standard_normal(d)
        step *= radius * rng.random() ** (1.0 / d) / np.linalg.norm(step)
        x = np.clip(x + step, 0.0, 1.0)
    return x


def generate_batch(
    models: tuple[RbfModel, RbfModel],
    archive: ParetoArchive,
    acqs: Sequence[AcquisitionSpec],
    rng: np.random.Generator,
    evaluated=(),
    specs=REACTOR_VARIABLES,
    gps: GpsConfig = GpsConfig(),
    radius: float = DEDUPE_RADIUS,
) -> list[DesignPoint]:
    """Propose one design per acquisition by pattern search on the surrogate pair.

    ``evaluated`` holds embedded points already run (or requested); proposals
    are kept at least ``radius`` away from those and from each other.
    """
    if len(archive) == 0:
        raise ValueError("generate_batch needs a nonempty Pareto archive")
    F = archive.objectives()
    starts = np.array([embed(e.design, specs) for e in archive.entries])
    # one child stream per acquisition so solves are independent of each other
    child_seeds = rng.integers(0, 2**63, size=len(acqs))

    taken = [np.asarray(p, dtype=float) for p in evaluated]
    batch = []
    for spec, seed in zip(acqs, child_seeds):
        crng = np.random.default_rng(int(seed))
        eps = None
        if spec.kind == "epsilon-constraint":
            eps = F[crng.integers(len(archive))].copy()
        score = _scalarizer(spec, eps)
        x0 = starts[int(np.argmin([score(f) for f in F]))]
        res = pattern_search(lambda x: score(surrogate_objectives(models, x)), x0, gps)
        x = _separate(res.x, taken, crng, radius, MAX_PERTURB_ATTEMPTS)
        taken.append(x)
        batch.append(unembed(x, specs))
    return batch
