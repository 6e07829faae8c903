import json

import numpy as np
import pytest

from mobo import simcfr
from mobo.acquisition import nondominated_filter
from mobo.controller import (
    Campaign,
    CampaignConfig,
    CampaignState,
    CheckpointError,
    CheckpointVersionError,
    ProtocolError,
    StoppingRule,
    check_stop,
    load_checkpoint,
    save_checkpoint,
)
from mobo.messages import ExperimentRequest, ExperimentResult
from mobo.problem import SimulationOutput
from mobo.stream import Broker

from conftest import design


class Lab:
    """Synchronous noiseless experiment client for driving a campaign by hand."""

    def __init__(self, broker, cfg, model=simcfr.ReactionModel()):
        self.broker, self.cfg, self.model = broker, cfg, model

    def answer(self):
        for env in self.broker.poll(self.cfg.requests_topic, "lab", 1000):
            req = ExperimentRequest.from_payload(env.payload)
            run = simcfr.simulate_timeseries(req, self.model, noise_sigma=0.0)
            self.broker.publish(self.cfg.results_topic, run.result.to_payload(), "steady")


def drive(cfg, steps=None, model=simcfr.ReactionModel()):
    broker = Broker()
    camp = Campaign(cfg, broker)
    camp.initialize()
    lab = Lab(broker, cfg, model)
    n = 0
    while camp.state.phase != "stopped" and (steps is None or n < steps):
        lab.answer()
        camp.step(camp.collect(timeout_s=5))
        n += 1
    return camp, broker, lab


def requests(broker, cfg):
    return [ExperimentRequest.from_payload(e.payload) for e in broker.poll(cfg.requests_topic, "audit", 1000)]


def test_initialize_publishes_doe():
    cfg = CampaignConfig(seed=7)
    broker = Broker()
    Campaign(cfg, broker).initialize()
    reqs = requests(broker, cfg)
    assert [r.experiment_index for r in reqs] == list(range(15))
    temps = [r.design["temperature_C"] for r in reqs]
    assert temps == sorted(temps)


def test_initialize_single_point():
    cfg = CampaignConfig(n_initial=1)
    broker = Broker()
    Campaign(cfg, broker).initialize()
    assert len(requests(broker, cfg)) == 1


def test_initialize_deterministic_bytes():
    def payloads():
        b = Broker()
        Campaign(CampaignConfig(seed=3), b).initialize()
        return [e.payload for e in b.poll("experiment.requests", "x", 100)]

    assert payloads() == payloads()


def test_batch_sorted_by_temperature():
    cfg = CampaignConfig()
    broker = Broker()
    camp = Campaign(cfg, broker)
    for t in ("experiment.requests", "experiment.results", "experiment.control"):
        broker.create_topic(t)
    camp.state = CampaignState()
    camp._publish_batch([design(120, 100, 1), design(45, 100, 1), design(80, 100, 1)])
    reqs = requests(broker, cfg)
    assert [r.design["temperature_C"] for r in reqs] == [45, 80, 120]
    assert [r.experiment_index for r in reqs] == [0, 1, 2]


def test_first_step_trains_on_doe():
    cfg = CampaignConfig(seed=7)
    camp, broker, _ = drive(cfg, steps=1)
    assert [m.npts for m in camp.state.models] == [15, 15]
    assert len(camp.state.pending) == 3
    assert camp.state.phase == "iterating"


def test_archive_matches_history_after_every_step():
    cfg = CampaignConfig(seed=2, stopping=StoppingRule(patience=9))
    broker = Broker()
    camp = Campaign(cfg, broker)
    camp.initialize()
    lab = Lab(broker, cfg)
    while camp.state.phase != "stopped":
        lab.answer()
        camp.step(camp.collect(timeout_s=5))
        F = [h.objectives for h in camp.state.history]
        expect = sorted(camp.state.history[i].index for i in nondominated_filter(F))
        assert camp.state.archive.indices() == expect
    assert len(camp.state.history) == cfg.budget == 42
    assert camp.state.stop_reason == "budget"
    assert broker.end_offset(cfg.requests_topic) <= cfg.budget


def test_unknown_result_is_protocol_error():
    cfg = CampaignConfig(n_initial=2)
    broker = Broker()
    camp = Campaign(cfg, broker)
    camp.initialize()
    broker.publish(cfg.results_topic, ExperimentResult(99, SimulationOutput(1, 1, 5)).to_payload())
    with pytest.raises(ProtocolError):
        camp.collect(timeout_s=1)


def test_duplicate_result_first_wins():
    cfg = CampaignConfig(n_initial=2, n_iterations=0)
    broker = Broker()
    camp = Campaign(cfg, broker)
    camp.initialize()
    for idx, area in ((0, 10.0), (0, 99.0), (1, 20.0)):
        broker.publish(cfg.results_topic, ExperimentResult(idx, SimulationOutput(area, 1, 5)).to_payload())
    camp.step(camp.collect(timeout_s=1))
    assert [h.output.product_area for h in camp.state.history] == [10.0, 20.0]


def test_incomplete_batch_rejected():
    cfg = CampaignConfig(n_initial=2)
    broker = Broker()
    camp = Campaign(cfg, broker)
    camp.initialize()
    with pytest.raises(ProtocolError):
        camp.step([ExperimentResult(0, SimulationOutput(1, 1, 5))])


def _state_with_trace(trace, n_hist):
    st = CampaignState(best_trace=list(trace))
    st.history = [None] * n_hist
    return st


def test_check_stop_budget():
    st = _state_with_trace([-10, -20, -30], 42)
    assert check_stop(st, StoppingRule(), 42) == (True, "budget")


def test_check_stop_strictly_improving():
    trace = [-10.0 - 5 * k for k in range(10)]
    for k in range(1, 10):
        assert check_stop(_state_with_trace(trace[:k], 15 + 3 * (k - 1)), StoppingRule(3, 0.5), 42) == (False, None)


def test_check_stop_constant_objective():
    # Hand ledger, patience 3: gains per batch are (0,), (0,0), (0,0,0) -> stop after third batch.
    rule = StoppingRule(3, 0.5)
    assert check_stop(_state_with_trace([-5.0, -5.0], 18), rule, 42) == (False, None)
    assert check_stop(_state_with_trace([-5.0, -5.0, -5.0], 21), rule, 42) == (False, None)
    assert check_stop(_state_with_trace([-5.0] * 4, 24), rule, 42) == (True, "no-improvement")
    # one good batch resets the streak
    assert check_stop(_state_with_trace([-5.0, -5.0, -9.0, -9.0], 24), rule, 42) == (False, None)


def test_flat_campaign_stops_early():
    cfg = CampaignConfig(seed=1)
    camp, _, _ = drive(cfg, model=simcfr.FlatModel())
    assert camp.state.stop_reason == "no-improvement"
    assert len(camp.state.history) == 15 + 3 * 3


def test_full_transcript_deterministic():
    cfg = CampaignConfig(seed=5)
    a, _, _ = drive(cfg)
    b, _, _ = drive(cfg)
    assert a.transcript == b.transcript
    last = json.loads(a.transcript[-1])
    assert last["topic"] == "experiment.control"


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    cfg = CampaignConfig(seed=9, stopping=StoppingRule(patience=9))
    full, full_broker, _ = drive(cfg, steps=4)

    part, broker, lab = drive(cfg, steps=2)
    path = tmp_path / "ck.json"
    part.save_checkpoint(path)
    resumed = Campaign.resume(path, broker)
    assert resumed.state.to_dict() == part.state.to_dict()
    for _ in range(2):
        lab.answer()
        resumed.step(resumed.collect(timeout_s=5))
    assert requests(broker, cfg) == requests(full_broker, cfg)
    assert resumed.state.to_dict() == full.state.to_dict()


def test_checkpoint_empty_state_roundtrip(tmp_path):
    st = CampaignState()
    save_checkpoint(st, tmp_path / "c.json")
    back, cfg = load_checkpoint(tmp_path / "c.json")
    assert back.to_dict() == st.to_dict() and cfg is None


def test_checkpoint_truncated(tmp_path):
    camp, _, _ = drive(CampaignConfig(seed=1), steps=1)
    path = tmp_path / "c.json"
    camp.save_checkpoint(path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_tampered_and_version(tmp_path):
    camp, _, _ = drive(CampaignConfig(seed=1), steps=1)
    path = tmp_path / "c.json"
    camp.save_checkpoint(path)
    doc = json.loads(path.read_text())
    doc["body"]["state"]["iteration"] += 1
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="digest"):
        load_checkpoint(path)
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_config_roundtrip():
    cfg = CampaignConfig(seed=11, n_iterations=4)
    assert CampaignConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
