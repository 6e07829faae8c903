"""Command-line entry points: run, replay, export-plot, broker, simcfr."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from . import simcfr
from .controller import CampaignConfig
from .messages import ExperimentResult, PayloadError
from .session import SimSettings, replay, run_campaign
from .stream import Broker, BrokerConnectionError, BrokerServer, RemoteBroker, serve_tcp
from .stream.frames import FrameError, decode_envelope
from .stream.tcp import parse_address

log = logging.getLogger("mobo")

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
RESULTS_COLUMNS = (
    "experiment_index", "temperature_C", "time_s", "equivalence_ratio",
    "product_area", "byproduct_area", "samples_to_steady", "steady",
)
PLOT_COLUMNS = ("experiment_index", "product_area", "byproduct_area")
DEFAULT_THROTTLE = 3.0  # s per sample: 200 samples ~ the 10-minute experiments


class UsageError(Exception):
    def __init__(self, msg, code=2):
        super().__init__(msg)
        self.code = code


def _seed_override(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MOBO_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"MOBO_SEED={env!r} is not an integer") from None
    return None


def _resolve_config(args) -> config_mod.LabConfig:
    try:
        lab = config_mod.load(args.config) if args.config else config_mod.LabConfig()
    except FileNotFoundError:
        raise UsageError(f"config file {args.config} not found") from None
    except config_mod.ConfigError as exc:
        raise UsageError(f"config error: {exc}") from None
    cc, sim = lab.campaign, lab.sim
    seed = _seed_override(args)
    try:
        if seed is not None:
            cc = replace(cc, seed=seed)
            if not lab.sim_seed_explicit:
                sim = replace(sim, seed=seed)
        if args.iterations is not None:
            cc = replace(cc, n_iterations=args.iterations)
    except ValueError as exc:
        raise UsageError(f"config error: {exc}") from None
    if args.noise_sigma is not None:
        sim = replace(sim, noise_sigma=args.noise_sigma)
    if args.throttle is not None:
        sim = replace(sim, throttle=args.throttle)
    lab.campaign, lab.sim = cc, sim
    if args.transport:
        lab.transport = args.transport
    return lab


def write_results_table(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_COLUMNS)
        for h in history:
            d = h.design
            w.writerow([
                h.index, repr(d["temperature_C"]), repr(d["time_s"]), repr(d["equivalence_ratio"]),
                repr(h.output.product_area), repr(h.output.byproduct_area),
                h.output.samples_to_steady, int(h.steady),
            ])


def cmd_run(args) -> int:
    lab = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    broker_addr = args.broker_addr or lab.campaign.broker_addr
    server = None
    try:
        if broker_addr is None and lab.transport == "tcp":
            try:
                server = serve_tcp(Broker(), lab.bind)
            except OSError as exc:
                print(f"error: cannot bind broker on {lab.bind}: {exc}", file=sys.stderr)
                return 3
            broker_addr = server.address
        try:
            run = run_campaign(lab.campaign, lab.sim, transport="inprocess", broker_addr=broker_addr)
        except BrokerConnectionError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
    finally:
        if server is not None:
            server.close()

    (out / "transcript.jsonl").write_bytes(b"".join(run.transcript))
    write_results_table(out / "results.csv", run.state.history)
    manifest = {
        "version": MANIFEST_VERSION,
        "config_path": os.path.abspath(args.config) if args.config else None,
        "output_dir": str(out.resolve()),
        "transcript": "transcript.jsonl",
        "results_table": "results.csv",
        "campaign": lab.campaign.to_dict(),
        "simulator": {"noise_sigma": lab.sim.noise_sigma, "seed": lab.sim.seed},
        "stop_reason": run.state.stop_reason,
        "experiments": len(run.state.history),
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"{len(run.state.history)} experiments, stopped: {run.state.stop_reason}; manifest {out / MANIFEST_NAME}")
    return 0


def load_manifest(path) -> tuple[dict, Path]:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_NAME
    try:
        manifest = json.loads(p.read_text())
    except FileNotFoundError:
        raise UsageError(f"manifest {p} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"manifest {p} is not valid JSON: {exc}") from None
    if manifest.get("version") != MANIFEST_VERSION:
        raise UsageError(f"unsupported manifest version {manifest.get('version')!r}")
    return manifest, p.parent


def _transcript_lines(manifest, base: Path) -> list[bytes]:
    path = base / manifest["transcript"]
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise UsageError(f"transcript {path} not found") from None
    return data.splitlines(keepends=True)


def export_plot_rows(lines, results_topic="experiment.results") -> list[tuple]:
    rows = {}
    for line in lines:
        env = decode_envelope(line)
        if env.topic != results_topic:
            continue
        res = ExperimentResult.from_payload(env.payload)
        rows.setdefault(res.experiment_index, (res.experiment_index, res.product_area, res.byproduct_area))
    return [rows[i] for i in sorted(rows)]


def cmd_export_plot(args) -> int:
    manifest, base = load_manifest(args.manifest)
    lines = _transcript_lines(manifest, base)
    topic = manifest.get("campaign", {}).get("results_topic", "experiment.results")
    try:
        rows = export_plot_rows(lines, topic)
    except (FrameError, PayloadError) as exc:
        raise UsageError(f"corrupt transcript: {exc}") from None
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for idx, prod, byp in rows:
            w.writerow([idx, repr(prod), repr(byp)])
    finally:
        if args.output:
            fh.close()
    return 0


def cmd_replay(args) -> int:
    manifest, base = load_manifest(args.manifest)
    lines = _transcript_lines(manifest, base)
    cfg = CampaignConfig.from_dict(manifest["campaign"])
    report = replay(cfg, lines)
    if report.ok:
        print(f"replay ok: {report.lines_checked} transcript records reproduced")
        return 0
    print(f"replay diverged at transcript line {report.mismatch_line} "
          f"(topic offset {report.mismatch_offset})", file=sys.stderr)
    if report.expected is not None:
        print(f"  recorded:    {report.expected.decode(errors='replace').rstrip()}", file=sys.stderr)
    if report.actual is not None:
        print(f"  regenerated: {report.actual.decode(errors='replace').rstrip()}", file=sys.stderr)
    if report.error:
        print(f"  error: {report.error}", file=sys.stderr)
    return 1


def cmd_broker(args) -> int:
    try:
        host, port = parse_address(args.bind)
        server = BrokerServer(Broker(log_dir=args.log_dir), host, port)
    except OSError as exc:
        print(f"error: cannot bind {args.bind}: {exc}", file=sys.stderr)
        return 3
    print(f"broker listening on {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_simcfr(args) -> int:
    try:
        broker = RemoteBroker(args.broker_addr)
    except BrokerConnectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    model = simcfr.FlatModel() if args.flat else simcfr.ReactionModel()
    with broker:
        n = simcfr.serve(broker, model, noise_sigma=args.noise_sigma, seed=args.seed,
                         throttle=args.throttle or 0.0)
    print(f"served {n} experiments")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mobo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a brokered campaign against the simulated reactor")
    run.add_argument("--config", metavar="PATH")
    run.add_argument("--seed", type=int)
    run.add_argument("--broker-addr", metavar="HOST:PORT", help="use a running broker")
    run.add_argument("--out", metavar="DIR", default="campaign-out")
    run.add_argument("--noise-sigma", type=float)
    run.add_argument("--throttle", type=float, nargs="?", const=DEFAULT_THROTTLE, metavar="S",
                     help=f"sleep S seconds per sample (default {DEFAULT_THROTTLE})")
    run.add_argument("--iterations", type=int, help="override the number of model-driven batches")
    run.add_argument("--transport", choices=("tcp", "inprocess"))
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("export-plot", help="CSV of product vs byproduct areas per experiment")
    exp.add_argument("manifest")
    exp.add_argument("-o", "--output", metavar="CSV")
    exp.set_defaults(func=cmd_export_plot)

    rep = sub.add_parser("replay", help="re-drive the controller from a transcript and verify it")
    rep.add_argument("manifest")
    rep.set_defaults(func=cmd_replay)

    brk = sub.add_parser("broker", help="serve a standalone TCP broker")
    brk.add_argument("--bind", default="127.0.0.1:7070")
    brk.add_argument("--log-dir")
    brk.set_defaults(func=cmd_broker)

    sim = sub.add_parser("simcfr", help="serve the simulated reactor against a remote broker")
    sim.add_argument("--broker-addr", required=True, metavar="HOST:PORT")
    sim.add_argument("--noise-sigma", type=float, default=0.5)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--throttle", type=float, nargs="?", const=DEFAULT_THROTTLE, metavar="S")
    sim.add_argument("--flat", action="store_true", help="constant ground truth")
    sim.set_defaults(func=cmd_simcfr)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
