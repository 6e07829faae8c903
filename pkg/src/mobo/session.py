"""Wire a controller, a broker and the simulated reactor into one campaign run."""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace
from typing import Sequence

from . import simcfr
from .controller import Campaign, CampaignConfig, CampaignState
from .messages import ExperimentResult
from .stream import Broker, RemoteBroker, serve_tcp
from .stream.frames import FrameError, decode, envelope_from

log = logging.getLogger(__name__)


@dataclass
class SimSettings:
    model: object = simcfr.ReactionModel()
    detector: simcfr.SteadyStateDetector = simcfr.SteadyStateDetector()
    noise_sigma: float = 0.5
    seed: int = 0
    throttle: float = 0.0


@dataclass
class CampaignRun:
    state: CampaignState
    transcript: list[bytes]
    broker_addr: str | None = None


def _serve_sim(broker, cfg: CampaignConfig, sim: SimSettings, errors: list):
    try:
        simcfr.serve(
            broker, sim.model, sim.detector, sim.noise_sigma, sim.seed, sim.throttle,
            requests_topic=cfg.requests_topic, results_topic=cfg.results_topic,
            control_topic=cfg.control_topic,
        )
    except BaseException as exc:  # surfaced by the supervisor
        errors.append(exc)


def run_campaign(
    cfg: CampaignConfig,
    sim: SimSettings = SimSettings(),
    transport: str = "inprocess",
    bind: str = "127.0.0.1:0",
    broker_addr: str | None = None,
) -> CampaignRun:
    """Run a campaign to completion with the simulated reactor on a worker thread.

    ``transport`` is ``"inprocess"`` (shared :class:`Broker`) or ``"tcp"``
    (broker behind a TCP listener, both clients connect over the wire). An
    explicit ``broker_addr`` uses an already-running remote broker instead.
    """
    server = None
    clients = []
    if broker_addr is None and transport == "inprocess":
        ctl_broker = sim_broker = Broker()
    else:
        if broker_addr is None:
            if transport != "tcp":
                raise ValueError(f"unknown transport {transport!r}")
            server = serve_tcp(Broker(), bind)
            broker_addr = server.address
        ctl_broker = RemoteBroker(broker_addr)
        sim_broker = RemoteBroker(broker_addr)
        clients = [ctl_broker, sim_broker]

    errors: list = []
    campaign = Campaign(cfg, ctl_broker)
    try:
        campaign.initialize()
        worker = threading.Thread(target=_serve_sim, args=(sim_broker, cfg, sim, errors),
                                  name="simcfr", daemon=True)
        worker.start()
        while campaign.state.phase != "stopped":
            if errors:
                raise RuntimeError("simulated reactor failed") from errors[0]
            campaign.step(campaign.collect())
        # shutdown order: controller, reactor, broker
        worker.join(timeout=30)
        if errors:
            raise RuntimeError("simulated reactor failed") from errors[0]
    finally:
        for c in clients:
            c.close()
        if server is not None:
            server.close()
    return CampaignRun(campaign.state, campaign.transcript, broker_addr)


@dataclass
class ReplayReport:
    ok: bool
    lines_checked: int
    mismatch_line: int | None = None
    mismatch_offset: int | None = None
    expected: bytes | None = None
    actual: bytes | None = None
    error: str | None = None


def replay(cfg: CampaignConfig, recorded: Sequence[bytes]) -> ReplayReport:
    """Re-drive a controller from the recorded results and compare transcripts.

    Needs neither the simulated reactor nor a network: recorded result
    envelopes are injected into a private in-process broker one batch at a time.
    """
    recorded = [line if line.endswith(b"\n") else line + b"\n" for line in recorded]
    try:
        records = [decode(line) for line in recorded]
        envs = [envelope_from(r) for r in records]
    except FrameError as exc:
        return ReplayReport(False, 0, error=f"unreadable transcript: {exc}")

    broker = Broker()
    campaign = Campaign(cfg, broker)
    pos = 0
    error = None
    try:
        campaign.initialize()
        while campaign.state.phase != "stopped":
            pos = len(campaign.transcript)
            # inject the recorded results that the controller consumed at this point
            n = 0
            while pos + n < len(envs) and envs[pos + n].topic == cfg.results_topic:
                broker.publish(cfg.results_topic, envs[pos + n].payload, envs[pos + n].key)
                n += 1
            if n == 0:
                break
            campaign.step(campaign.collect(timeout_s=5.0))
    except Exception as exc:
        error = f"{type(exc).__name__}: {exc}"

    produced = campaign.transcript
    for i, (want, got) in enumerate(zip(recorded, produced)):
        if want != got:
            return ReplayReport(False, i, i, envs[i].offset, want, got, error)
    if len(produced) != len(recorded) or error:
        i = min(len(produced), len(recorded))
        return ReplayReport(
            False, i, i, envs[i].offset if i < len(envs) else None,
            recorded[i] if i < len(recorded) else None,
            produced[i] if i < len(produced) else None, error,
        )
    return ReplayReport(True, len(recorded))
