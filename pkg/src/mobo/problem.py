"""Design space and objectives for the TFMC flow-synthesis campaign.

Design points live in physical units (degrees C, seconds, molar ratio) and are
mapped affinely onto the unit cube for modeling and search. Both objectives are
stored in minimization sense: ``f = (-product_area, byproduct_area)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class BoundsError(ValueError):
    """A value lies outside the bound constraints of its variable."""


@dataclass(frozen=True)
class VariableSpec:
    name: str
    lower: float
    upper: float
    units: str = ""

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be < upper bound")


# Order is fixed everywhere: (temperature, time, ratio).
REACTOR_VARIABLES = (
    VariableSpec("temperature_C", 40.0, 150.0, "degC"),
    VariableSpec("time_s", 60.0, 300.0, "s"),
    VariableSpec("equivalence_ratio", 0.9, 2.0, ""),
)


def check_specs(specs: Sequence[VariableSpec]) -> None:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate variable names in {names}")


class DesignPoint(Mapping[str, float]):
    """Immutable ordered mapping of variable name to physical value."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, float] | Sequence[tuple[str, float]]):
        items = values.items() if isinstance(values, Mapping) else values
        self._values = {str(k): float(v) for k, v in items}

    def __getitem__(self, name):
        return self._values[name]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        if isinstance(other, DesignPoint):
            return list(self._values.items()) == list(other._values.items())
        return NotImplemented

    def __hash__(self):
        return hash(tuple(self._values.items()))

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self._values.items())
        return f"DesignPoint({inner})"

    def as_array(self, specs: Sequence[VariableSpec] = REACTOR_VARIABLES) -> np.ndarray:
        return np.array([self._values[s.name] for s in specs], dtype=float)

    @classmethod
    def from_array(cls, values, specs: Sequence[VariableSpec] = REACTOR_VARIABLES):
        return cls([(s.name, float(v)) for s, v in zip(specs, values)])

    def validate(self, specs: Sequence[VariableSpec] = REACTOR_VARIABLES) -> None:
        expected = [s.name for s in specs]
        if sorted(self._values) != sorted(expected):
            raise ValueError(f"design keys {list(self._values)} != variables {expected}")
        for s in specs:
            v = self._values[s.name]
            if not (s.lower <= v <= s.upper) or math.isnan(v):
                raise BoundsError(f"{s.name}={v!r} outside [{s.lower}, {s.upper}]")


@dataclass(frozen=True)
class SimulationOutput:
    product_area: float
    byproduct_area: float
    samples_to_steady: int = 1

    def __post_init__(self):
        for name in ("product_area", "byproduct_area"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if self.samples_to_steady < 1:
            raise ValueError("samples_to_steady must be >= 1")


def embed(p: DesignPoint, specs: Sequence[VariableSpec] = REACTOR_VARIABLES) -> np.ndarray:
    """Map a physical design point onto the unit cube."""
    p.validate(specs)
    x = p.as_array(specs)
    lo = np.array([s.lower for s in specs])
    hi = np.array([s.upper for s in specs])
    return (x - lo) / (hi - lo)


def unembed(x, specs: Sequence[VariableSpec] = REACTOR_VARIABLES) -> DesignPoint:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(specs),):
        raise ValueError(f"expected {len(specs)} coordinates, got shape {x.shape}")
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise ValueError(f"embedded point {x.tolist()} outside the unit cube")
    lo = np.array([s.lower for s in specs])
    hi = np.array([s.upper for s in specs])
    # clip guards against the last-ulp overshoot of lo + 1.0 * (hi - lo)
    vals = np.clip(lo + x * (hi - lo), lo, hi)
    return DesignPoint.from_array(vals, specs)


def evaluate_objectives(out: SimulationOutput) -> np.ndarray:
    return np.array([-out.product_area, out.byproduct_area], dtype=float)
