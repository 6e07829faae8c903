"""The TCP broker, transport equivalence and transcript replay.

Runs the same seeded campaign in-process and over TCP, confirms the two
transcripts match byte for byte, then replays the transcript with no reactor
and shows that tampering with one result is caught.
"""
import json

from mobo import CampaignConfig
from mobo.session import SimSettings, replay, run_campaign
from mobo.stream import Broker, RemoteBroker, serve_tcp
from mobo.stream.frames import b64, decode, encode, unb64

server = serve_tcp(Broker(), "127.0.0.1:0")
with RemoteBroker(server.address) as client:
    client.create_topic("demo")
    client.publish("demo", b'{"hello":1}', key="k")
    env = client.poll("demo", group="g")[0]
    print(f"broker at {server.address}: offset {env.offset} key {env.key} payload {env.payload}")
server.close()

cfg, sim = CampaignConfig(seed=11), SimSettings(noise_sigma=0.5, seed=11)
local = run_campaign(cfg, sim, transport="inprocess")
remote = run_campaign(cfg, sim, transport="tcp")
print(f"\nin-process vs TCP transcripts identical: {local.transcript == remote.transcript}"
      f" ({len(local.transcript)} records)")

report = replay(cfg, local.transcript)
print(f"replay of the recorded transcript: ok={report.ok}, {report.lines_checked} records checked")

lines = list(local.transcript)
for i, line in enumerate(lines):
    rec = decode(line)
    if rec["topic"] == cfg.results_topic:
        body = json.loads(unb64(rec["payload"]))
        body["product_area"] += 1.0
        rec["payload"] = b64(json.dumps(body, separators=(",", ":")).encode())
        lines[i] = encode(rec)
        break
report = replay(cfg, lines)
print(f"replay after editing result line {i}: ok={report.ok}, first divergence at line {report.mismatch_line}")
