"""TOML campaign configuration.

Every key is optional; omitted keys take the defaults
(15-point initial design, 9 iterations of 3, the reactor bounds). Layout::

    [campaign]      n_initial, n_iterations, batch_size, seed, result_timeout_s
    [stopping]      patience, improvement_tol
    [optimizer]     mesh0, mesh_tol, max_evals
    [broker]        transport ("tcp" | "inprocess"), bind, address,
                    requests_topic, results_topic, control_topic
    [simulator]     model ("kinetics" | "flat"), noise_sigma, seed, throttle,
                    window, threshold, max_samples
    [[variables]]   name, lower, upper, units
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import simcfr
from .controller import CampaignConfig, StoppingRule
from .optimize import GpsConfig
from .problem import REACTOR_VARIABLES, VariableSpec
from .session import SimSettings


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "campaign": {"n_initial", "n_iterations", "batch_size", "seed", "result_timeout_s"},
    "stopping": {"patience", "improvement_tol"},
    "optimizer": {"mesh0", "mesh_tol", "max_evals"},
    "broker": {"transport", "bind", "address", "requests_topic", "results_topic", "control_topic"},
    "simulator": {"model", "noise_sigma", "seed", "throttle", "window", "threshold", "max_samples"},
    "variables": None,
}


@dataclass
class LabConfig:
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    sim: SimSettings = field(default_factory=SimSettings)
    transport: str = "tcp"
    bind: str = "127.0.0.1:0"
    sim_seed_explicit: bool = False


def parse(doc: dict) -> LabConfig:
    for name, section in doc.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        allowed = _SECTIONS[name]
        if allowed is not None:
            if not isinstance(section, dict):
                raise ConfigError(f"[{name}] must be a table")
            extra = set(section) - allowed
            if extra:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")

    camp = doc.get("campaign", {})
    stop = doc.get("stopping", {})
    opt = doc.get("optimizer", {})
    brk = doc.get("broker", {})
    sim = doc.get("simulator", {})
    try:
        variables = REACTOR_VARIABLES
        if "variables" in doc:
            variables = tuple(VariableSpec(**v) for v in doc["variables"])
            if [v.name for v in variables] != [v.name for v in REACTOR_VARIABLES]:
                raise ConfigError(
                    f"variables must be {[v.name for v in REACTOR_VARIABLES]} in that order"
                )
        topics = {k: brk[k] for k in ("requests_topic", "results_topic", "control_topic") if k in brk}
        cc = CampaignConfig(
            variables=variables,
            stopping=StoppingRule(**stop),
            gps=GpsConfig(**opt),
            broker_addr=brk.get("address") or None,
            **camp,
            **topics,
        )
        model_name = sim.get("model", "kinetics")
        if model_name == "kinetics":
            model = simcfr.ReactionModel()
        elif model_name == "flat":
            model = simcfr.FlatModel()
        else:
            raise ConfigError(f"unknown simulator model {model_name!r}")
        detector = simcfr.SteadyStateDetector(
            **{k: sim[k] for k in ("window", "threshold", "max_samples") if k in sim}
        )
        ss = SimSettings(
            model=model,
            detector=detector,
            noise_sigma=float(sim.get("noise_sigma", 0.5)),
            seed=int(sim.get("seed", cc.seed)),
            throttle=float(sim.get("throttle", 0.0)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    transport = brk.get("transport", "tcp")
    if transport not in ("tcp", "inprocess"):
        raise ConfigError(f"unknown broker transport {transport!r}")
    return LabConfig(cc, ss, transport, brk.get("bind", "127.0.0.1:0"), "seed" in sim)


def load(path) -> LabConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse(doc)
