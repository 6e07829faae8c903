"""Payload schemas for the request, result and control topics.

Payloads are compact JSON objects with a fixed key order so that identical
values always serialize to identical bytes.

``experiment.requests``::

    {"experiment_index": int, "temperature_C": float, "time_s": float,
     "equivalence_ratio": float}

``experiment.results``::

    {"experiment_index": int, "product_area": float, "byproduct_area": float,
     "samples_to_steady": int}
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .problem import DesignPoint, SimulationOutput

REQUEST_FIELDS = ("experiment_index", "temperature_C", "time_s", "equivalence_ratio")
RESULT_FIELDS = ("experiment_index", "product_area", "byproduct_area", "samples_to_steady")


class PayloadError(ValueError):
    pass


def dumps(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")


def _load(payload: bytes, fields) -> dict:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PayloadError(f"payload is not JSON: {exc}") from None
    if not isinstance(obj, dict) or list(obj) != list(fields):
        raise PayloadError(f"expected fields {list(fields)}")
    idx = obj["experiment_index"]
    if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
        raise PayloadError("experiment_index must be a nonnegative integer")
    return obj


def _number(obj, name) -> float:
    v = obj[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise PayloadError(f"{name} must be a finite number")
    return float(v)


@dataclass(frozen=True)
class ExperimentRequest:
    experiment_index: int
    design: DesignPoint

    def to_payload(self) -> bytes:
        d = self.design
        return dumps({
            "experiment_index": self.experiment_index,
            "temperature_C": d["temperature_C"],
            "time_s": d["time_s"],
            "equivalence_ratio": d["equivalence_ratio"],
        })

    @classmethod
    def from_payload(cls, payload: bytes) -> "ExperimentRequest":
        obj = _load(payload, REQUEST_FIELDS)
        design = DesignPoint([(k, _number(obj, k)) for k in REQUEST_FIELDS[1:]])
        return cls(obj["experiment_index"], design)


@dataclass(frozen=True)
class ExperimentResult:
    experiment_index: int
    output: SimulationOutput
    steady: bool = True

    @property
    def product_area(self):
        return self.output.product_area

    @property
    def byproduct_area(self):
        return self.output.byproduct_area

    def to_payload(self) -> bytes:
        o = self.output
        return dumps({
            "experiment_index": self.experiment_index,
            "product_area": o.product_area,
            "byproduct_area": o.byproduct_area,
            "samples_to_steady": o.samples_to_steady,
        })

    @classmethod
    def from_payload(cls, payload: bytes) -> "ExperimentResult":
        obj = _load(payload, RESULT_FIELDS)
        steps = obj["samples_to_steady"]
        if not isinstance(steps, int) or isinstance(steps, bool):
            raise PayloadError("samples_to_steady must be an integer")
        try:
            out = SimulationOutput(
                _number(obj, "product_area"), _number(obj, "byproduct_area"), steps
            )
        except ValueError as exc:
            raise PayloadError(str(exc)) from None
        return cls(obj["experiment_index"], out)
