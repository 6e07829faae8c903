"""Closed-loop campaign driver.

The controller publishes experiment requests, waits for the whole batch of
results, refits one surrogate per simulation output, and asks the acquisition
layer for the next batch. It keeps a transcript of every envelope it publishes
or consumes; with a fixed seed and a deterministic experiment client the
transcript is byte-identical from run to run and across transports.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import surrogate
from .acquisition import (
    DEFAULT_ACQUISITIONS,
    AcquisitionSpec,
    ArchiveEntry,
    ParetoArchive,
    generate_batch,
    pareto_update,
    scalarize_fixed,
)
from .doe import LhsConfig, latin_hypercube
from .messages import ExperimentRequest, ExperimentResult, PayloadError, dumps
from .optimize import GpsConfig
from .problem import (
    REACTOR_VARIABLES,
    DesignPoint,
    SimulationOutput,
    VariableSpec,
    check_specs,
    embed,
    evaluate_objectives,
    unembed,
)
from .stream.frames import Envelope, encode_envelope

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "mobo-campaign-checkpoint"
CHECKPOINT_VERSION = 1
STOP_WEIGHTS = (0.5, 0.5)


class ProtocolError(RuntimeError):
    """A result arrived that does not belong to the outstanding batch."""


class CheckpointError(ValueError):
    """Checkpoint file is truncated, corrupt or fails its digest."""


class CheckpointVersionError(CheckpointError):
    pass


@dataclass(frozen=True)
class StoppingRule:
    patience: int = 3
    improvement_tol: float = 0.5

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass(frozen=True)
class CampaignConfig:
    variables: tuple[VariableSpec, ...] = REACTOR_VARIABLES
    n_initial: int = 15
    n_iterations: int = 9
    batch_size: int = 3
    seed: int = 7
    stopping: StoppingRule = StoppingRule()
    gps: GpsConfig = GpsConfig()
    acquisitions: tuple[AcquisitionSpec, ...] = DEFAULT_ACQUISITIONS
    broker_addr: str | None = None
    requests_topic: str = "experiment.requests"
    results_topic: str = "experiment.results"
    control_topic: str = "experiment.control"
    group: str = "controller"
    result_timeout_s: float = 600.0

    def __post_init__(self):
        if self.n_initial < 1 or self.batch_size < 1 or self.n_iterations < 0:
            raise ValueError("need n_initial >= 1, batch_size >= 1, n_iterations >= 0")
        check_specs(self.variables)
        if not self.acquisitions:
            raise ValueError("at least one acquisition is required")

    @property
    def budget(self) -> int:
        return self.n_initial + self.n_iterations * self.batch_size

    def batch_acquisitions(self) -> tuple[AcquisitionSpec, ...]:
        acqs = self.acquisitions
        return tuple(acqs[i % len(acqs)] for i in range(self.batch_size))

    def to_dict(self) -> dict:
        return {
            "variables": [vars(v).copy() for v in self.variables],
            "n_initial": self.n_initial,
            "n_iterations": self.n_iterations,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "stopping": vars(self.stopping).copy(),
            "gps": vars(self.gps).copy(),
            "acquisitions": [
                {"kind": a.kind, "weights": None if a.weights is None else list(a.weights),
                 "target_index": a.target_index, "penalty": a.penalty}
                for a in self.acquisitions
            ],
            "broker_addr": self.broker_addr,
            "requests_topic": self.requests_topic,
            "results_topic": self.results_topic,
            "control_topic": self.control_topic,
            "group": self.group,
            "result_timeout_s": self.result_timeout_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        d = dict(d)
        if "variables" in d:
            d["variables"] = tuple(VariableSpec(**v) for v in d["variables"])
        if "stopping" in d:
            d["stopping"] = StoppingRule(**d["stopping"])
        if "gps" in d:
            d["gps"] = GpsConfig(**d["gps"])
        if "acquisitions" in d:
            d["acquisitions"] = tuple(
                AcquisitionSpec(
                    a["kind"],
                    weights=None if a.get("weights") is None else tuple(a["weights"]),
                    target_index=a.get("target_index"),
                    penalty=a.get("penalty", 100.0),
                )
                for a in d["acquisitions"]
            )
        return cls(**d)


@dataclass(frozen=True)
class HistoryRecord:
    index: int
    design: DesignPoint
    output: SimulationOutput
    objectives: tuple[float, float]
    steady: bool = True

    def to_dict(self):
        return {
            "index": self.index,
            "design": list(self.design.items()),
            "output": [self.output.product_area, self.output.byproduct_area, self.output.samples_to_steady],
            "steady": self.steady,
        }

    @classmethod
    def from_dict(cls, d):
        out = SimulationOutput(float(d["output"][0]), float(d["output"][1]), int(d["output"][2]))
        return cls(d["index"], DesignPoint(d["design"]), out,
                   tuple(evaluate_objectives(out).tolist()), bool(d["steady"]))


@dataclass
class CampaignState:
    history: list[HistoryRecord] = field(default_factory=list)
    archive: ParetoArchive = ParetoArchive()
    iteration: int = 0
    rng_state: dict | None = None
    phase: str = "initial"  # initial | iterating | stopped
    pending: list[ExperimentRequest] = field(default_factory=list)
    best_trace: list[float] = field(default_factory=list)
    stop_reason: str | None = None
    models: tuple | None = None

    @property
    def next_index(self) -> int:
        return len(self.history) + len(self.pending)

    def to_dict(self) -> dict:
        return {
            "history": [h.to_dict() for h in self.history],
            "archive": [e.index for e in self.archive.entries],
            "iteration": self.iteration,
            "rng_state": self.rng_state,
            "phase": self.phase,
            "pending": [[r.experiment_index, list(r.design.items())] for r in self.pending],
            "best_trace": list(self.best_trace),
            "stop_reason": self.stop_reason,
            "models": None if self.models is None else [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignState":
        history = [HistoryRecord.from_dict(h) for h in d["history"]]
        by_index = {h.index: h for h in history}
        entries = tuple(
            ArchiveEntry(by_index[i].design, by_index[i].objectives, i) for i in d["archive"]
        )
        models = d.get("models")
        return cls(
            history=history,
            archive=ParetoArchive(entries),
            iteration=int(d["iteration"]),
            rng_state=d["rng_state"],
            phase=d["phase"],
            pending=[ExperimentRequest(i, DesignPoint(v)) for i, v in d["pending"]],
            best_trace=[float(v) for v in d["best_trace"]],
            stop_reason=d["stop_reason"],
            models=None if models is None else tuple(surrogate.RbfModel.from_dict(m) for m in models),
        )


def history_digest(history: Sequence[HistoryRecord]) -> str:
    blob = json.dumps([h.to_dict() for h in history], separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def best_scalarized(history: Sequence[HistoryRecord]) -> float:
    return min(scalarize_fixed(h.objectives, STOP_WEIGHTS) for h in history)


def check_stop(state: CampaignState, rule: StoppingRule, budget: int) -> tuple[bool, str | None]:
    """Return ``(True, reason)`` when the campaign should stop.

    Stops on an exhausted budget, or when each of the last ``rule.patience``
    completed batches lowered the best 50-50 scalarized value by less than
    ``rule.improvement_tol``. ``best_trace[0]`` is the value after the initial
    design; each later entry follows one iterative batch.
    """
    if len(state.history) >= budget:
        return True, "budget"
    trace = state.best_trace
    if len(trace) > rule.patience:
        gains = [trace[i - 1] - trace[i] for i in range(len(trace) - rule.patience, len(trace))]
        if all(g < rule.improvement_tol for g in gains):
            return True, "no-improvement"
    return False, None


def fit_models(history: Sequence[HistoryRecord], specs=REACTOR_VARIABLES):
    X = np.array([embed(h.design, specs) for h in history])
    product = surrogate.fit(X, [h.output.product_area for h in history])
    byproduct = surrogate.fit(X, [h.output.byproduct_area for h in history])
    return product, byproduct


class Campaign:
    """Controller bound to a broker (in-process :class:`Broker` or :class:`RemoteBroker`)."""

    def __init__(self, cfg: CampaignConfig, broker, state: CampaignState | None = None):
        self.cfg = cfg
        self.broker = broker
        self.state = state
        self.transcript: list[bytes] = []
        self.rule = cfg.stopping

    # -- broker plumbing -------------------------------------------------
    def _record(self, env: Envelope):
        self.transcript.append(encode_envelope(env))

    def _publish(self, topic, payload: bytes, key: str | None):
        offset = self.broker.publish(topic, payload, key)
        self._record(Envelope(topic, offset, 0, key, payload))
        return offset

    def _publish_batch(self, designs: Sequence[DesignPoint]):
        start = self.state.next_index
        # ramp the reactor upward through the batch
        ordered = sorted(designs, key=lambda p: p["temperature_C"])
        for i, design in enumerate(ordered):
            req = ExperimentRequest(start + i, design)
            self.state.pending.append(req)
            self._publish(self.cfg.requests_topic, req.to_payload(), str(req.experiment_index))

    def _rng(self) -> np.random.Generator:
        rng = np.random.default_rng()
        rng.bit_generator.state = self.state.rng_state
        return rng

    # -- campaign operations ---------------------------------------------
    def initialize(self) -> CampaignState:
        cfg = self.cfg
        for name in (cfg.requests_topic, cfg.results_topic, cfg.control_topic):
            self.broker.create_topic(name)
        # results already on a reused broker belong to someone else
        self.broker.seek(cfg.results_topic, cfg.group, self.broker.end_offset(cfg.results_topic))
        rng = np.random.default_rng([cfg.seed, 1])
        self.state = CampaignState(rng_state=rng.bit_generator.state)
        pts = latin_hypercube(LhsConfig(cfg.n_initial, len(cfg.variables), cfg.seed))
        self._publish_batch([unembed(x, cfg.variables) for x in pts])
        return self.state

    def collect(self, timeout_s: float | None = None) -> list[ExperimentResult]:
        """Poll the result topic until every outstanding request has a result."""
        st = self.state
        timeout_s = self.cfg.result_timeout_s if timeout_s is None else timeout_s
        deadline = time.monotonic() + timeout_s
        wanted = {r.experiment_index for r in st.pending}
        got: dict[int, ExperimentResult] = {}
        while len(got) < len(wanted):
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(f"waiting for results {sorted(wanted - set(got))}")
            envs = self.broker.poll(
                self.cfg.results_topic, self.cfg.group, max_messages=64,
                timeout_ms=int(min(remaining, 1.0) * 1000) + 1,
            )
            for env in envs:
                self._record(env)
                res = ExperimentResult.from_payload(env.payload)
                if env.key == "nonsteady":
                    res = replace(res, steady=False)
                idx = res.experiment_index
                if idx in got or any(h.index == idx for h in st.history):
                    log.warning("duplicate result for experiment %d ignored", idx)
                elif idx in wanted:
                    got[idx] = res
                else:
                    raise ProtocolError(f"result for unknown experiment index {idx}")
        return [got[r.experiment_index] for r in st.pending]

    def step(self, results: Sequence[ExperimentResult]) -> CampaignState:
        """Ingest a full batch of results, then publish the next batch or stop."""
        st = self.state
        if st.phase == "stopped":
            raise RuntimeError("campaign already stopped")
        by_index = {}
        pending = {r.experiment_index: r for r in st.pending}
        for res in results:
            idx = res.experiment_index
            if idx not in pending:
                if any(h.index == idx for h in st.history):
                    log.warning("duplicate result for experiment %d ignored", idx)
                    continue
                raise ProtocolError(f"result for unknown experiment index {idx}")
            if idx in by_index:
                log.warning("duplicate result for experiment %d ignored", idx)
                continue
            by_index[idx] = res
        missing = sorted(set(pending) - set(by_index))
        if missing:
            raise ProtocolError(f"batch incomplete, missing results {missing}")

        for req in st.pending:
            res = by_index[req.experiment_index]
            f = tuple(evaluate_objectives(res.output).tolist())
            st.history.append(HistoryRecord(req.experiment_index, req.design, res.output, f, res.steady))
            st.archive = pareto_update(st.archive, ArchiveEntry(req.design, f, req.experiment_index))
        st.pending = []
        st.best_trace.append(best_scalarized(st.history))
        if st.phase == "iterating":
            st.iteration += 1

        stop, reason = check_stop(st, self.rule, self.cfg.budget)
        st.models = fit_models(st.history, self.cfg.variables)
        if stop:
            self._stop(reason)
            return st

        st.phase = "iterating"
        rng = self._rng()
        evaluated = [embed(h.design, self.cfg.variables) for h in st.history]
        batch = generate_batch(
            st.models, st.archive, self.cfg.batch_acquisitions(), rng,
            evaluated=evaluated, specs=self.cfg.variables, gps=self.cfg.gps,
        )
        st.rng_state = rng.bit_generator.state
        self._publish_batch(batch)
        return st

    def _stop(self, reason: str):
        st = self.state
        st.phase = "stopped"
        st.stop_reason = reason
        payload = dumps({
            "event": "stop",
            "reason": reason,
            "experiments": len(st.history),
            "best_scalarized": st.best_trace[-1] if st.best_trace else None,
            "history_sha256": history_digest(st.history),
        })
        self._publish(self.cfg.control_topic, payload, "stop")
        log.info("campaign stopped (%s) after %d experiments", reason, len(st.history))

    def run(self) -> CampaignState:
        if self.state is None:
            self.initialize()
        while self.state.phase != "stopped":
            self.step(self.collect())
        return self.state

    # -- checkpointing ----------------------------------------------------
    def save_checkpoint(self, path) -> None:
        save_checkpoint(self.state, path, self.cfg)

    @classmethod
    def resume(cls, path, broker) -> "Campaign":
        state, cfg = load_checkpoint(path)
        return cls(cfg, broker, state)


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def save_checkpoint(state: CampaignState, path, cfg: CampaignConfig | None = None) -> None:
    body = {"config": None if cfg is None else cfg.to_dict(), "state": state.to_dict()}
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "sha256": _digest(body),
        "body": body,
    }
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[CampaignState, CampaignConfig | None]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a campaign checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {doc.get('version')!r}, this build reads {CHECKPOINT_VERSION}"
        )
    body = doc.get("body")
    if not isinstance(body, dict) or _digest(body) != doc.get("sha256"):
        raise CheckpointError(f"checkpoint {path} fails its integrity digest")
    try:
        state = CampaignState.from_dict(body["state"])
        cfg = None if body.get("config") is None else CampaignConfig.from_dict(body["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint {path} has an invalid body: {exc}") from None
    return state, cfg
