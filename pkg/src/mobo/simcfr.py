"""Simulated continuous-flow reactor with an NMR-style steady-state monitor.

The kinetics are a toy Arrhenius model: the product forms with rate
``k_p = exp(a_p - b_p/T)`` and is consumed by a side reaction with rate
``k_s = exp(a_s - b_s/T)`` that only wakes up at high temperature. Each run
emits a relaxing, noisy peak-area trace per channel until the rolling
standard deviation drops below a threshold.
"""
from __future__ import annotations

import json
import logging
import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .messages import ExperimentRequest, ExperimentResult, PayloadError, dumps
from .problem import REACTOR_VARIABLES, BoundsError, DesignPoint, SimulationOutput

log = logging.getLogger(__name__)

RELAXATION_SAMPLES = 5.0


@dataclass(frozen=True)
class ReactionModel:
    a_p: float = 8.0
    b_p: float = 4000.0
    a_s: float = 20.0
    b_s: float = 10000.0
    scale: float = 100.0
    ratio_knee: float = 1.2

    def __post_init__(self):
        if not self.b_s > self.b_p:
            raise ValueError("side-reaction activation b_s must exceed b_p")

    def ground_truth(self, T: float, t: float, r: float) -> tuple[float, float]:
        return ground_truth(T, t, r, self)


@dataclass(frozen=True)
class FlatModel:
    """Ground truth replaced by constants; nothing to optimize."""

    product: float = 50.0
    byproduct: float = 10.0

    def ground_truth(self, T, t, r):
        _check_bounds(T, t, r)
        return self.product, self.byproduct


@dataclass(frozen=True)
class SteadyStateDetector:
    window: int = 5
    threshold: float = 0.75
    max_samples: int = 200

    def __post_init__(self):
        if self.window < 2 or self.threshold <= 0 or self.max_samples < self.window:
            raise ValueError("need window >= 2, threshold > 0, max_samples >= window")


def _check_bounds(T, t, r):
    DesignPoint(zip([s.name for s in REACTOR_VARIABLES], (T, t, r))).validate()


def ground_truth(T: float, t: float, r: float, model: ReactionModel = ReactionModel()):
    """Asymptotic (product, byproduct) peak areas at temperature T (C), time t (s), ratio r."""
    _check_bounds(T, t, r)
    TK = T + 273.15
    k_p = math.exp(model.a_p - model.b_p / TK)
    k_s = math.exp(model.a_s - model.b_s / TK)
    x = 1.0 - math.exp(-k_p * t)
    s = 1.0 - math.exp(-k_s * t)
    g = min(1.0, r / model.ratio_knee)
    return model.scale * x * (1.0 - s) * g, model.scale * x * s


def detect_steady(window, threshold: float = 0.75, size: int = 5) -> bool:
    """True iff the sample standard deviation of the last ``size`` values is below ``threshold``."""
    w = np.asarray(window, dtype=float)
    if w.shape[-1] < size:
        raise ValueError(f"need at least {size} samples, got {w.shape[-1]}")
    return bool(np.std(w[..., -size:], ddof=1) < threshold)


@dataclass
class SimulatedRun:
    result: ExperimentResult
    trace: np.ndarray  # (samples, 2): product, byproduct


def simulate_timeseries(
    request: ExperimentRequest,
    model=ReactionModel(),
    detector: SteadyStateDetector = SteadyStateDetector(),
    noise_sigma: float = 0.5,
    seed: int = 0,
    throttle: float = 0.0,
) -> SimulatedRun:
    d = request.design
    A = np.array(model.ground_truth(d["temperature_C"], d["time_s"], d["equivalence_ratio"]))
    rng = np.random.default_rng([seed, request.experiment_index])
    w = detector.window
    samples = []
    steady = False
    for k in range(1, detector.max_samples + 1):
        v = A * (1.0 - math.exp(-k / RELAXATION_SAMPLES))
        if noise_sigma > 0:
            v = v + rng.normal(0.0, noise_sigma, size=2)
        samples.append(v)
        if throttle:
            time.sleep(throttle)
        if k >= w:
            tail = np.array(samples[-w:])
            if all(detect_steady(tail[:, c], detector.threshold, w) for c in range(2)):
                steady = True
                break
    trace = np.array(samples)
    area = trace[-w:].mean(axis=0)
    # noise can push a near-zero window mean below zero; peak areas are nonnegative
    area = np.maximum(area, 0.0)
    out = SimulationOutput(float(area[0]), float(area[1]), len(samples))
    if not steady:
        log.warning("experiment %d did not reach steady state", request.experiment_index)
    return SimulatedRun(ExperimentResult(request.experiment_index, out, steady), trace)


REQUESTS_TOPIC = "experiment.requests"
RESULTS_TOPIC = "experiment.results"
CONTROL_TOPIC = "experiment.control"
DEADLETTER_TOPIC = "experiment.deadletter"


def serve(
    broker,
    model=ReactionModel(),
    detector: SteadyStateDetector = SteadyStateDetector(),
    noise_sigma: float = 0.5,
    seed: int = 0,
    throttle: float = 0.0,
    stop: threading.Event | None = None,
    requests_topic: str = REQUESTS_TOPIC,
    results_topic: str = RESULTS_TOPIC,
    control_topic: str = CONTROL_TOPIC,
    deadletter_topic: str = DEADLETTER_TOPIC,
    group: str = "simcfr",
    poll_ms: int = 50,
) -> int:
    """Run experiments for every request until a stop event arrives.

    Requests are processed one at a time in offset order. The loop exits when
    ``stop`` is set or a ``{"event": "stop"}`` message appears on the control
    topic, but only once the request topic is drained. Returns the number of
    results published.
    """
    for name in (requests_topic, results_topic, control_topic, deadletter_topic):
        broker.create_topic(name)
    done = 0
    stopping = False
    while True:
        batch = broker.poll(requests_topic, group, max_messages=16, timeout_ms=poll_ms)
        for env in batch:
            try:
                req = ExperimentRequest.from_payload(env.payload)
                run = simulate_timeseries(req, model, detector, noise_sigma, seed, throttle)
            except (PayloadError, BoundsError) as exc:
                log.warning("dead-lettering request at offset %d: %s", env.offset, exc)
                broker.publish(
                    deadletter_topic,
                    dumps({"source_topic": requests_topic, "offset": env.offset, "error": str(exc)}),
                    key=env.key,
                )
                continue
            key = "steady" if run.result.steady else "nonsteady"
            broker.publish(results_topic, run.result.to_payload(), key=key)
            done += 1
        if batch:
            continue
        if stopping or (stop is not None and stop.is_set()):
            return done
        for env in broker.poll(control_topic, group, max_messages=16, timeout_ms=0):
            if _is_stop(env.payload):
                stopping = True


def _is_stop(payload: bytes) -> bool:
    try:
        return json.loads(payload).get("event") == "stop"
    except (ValueError, AttributeError):
        return False
