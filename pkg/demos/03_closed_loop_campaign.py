"""A full closed-loop campaign against the simulated reactor.

The controller and the reactor only talk through broker topics. The initial
design is followed by model-driven batches of three until the budget runs out
or the best 50-50 value stops improving.
"""
from mobo import CampaignConfig
from mobo.session import SimSettings, run_campaign

run = run_campaign(CampaignConfig(seed=7), SimSettings(noise_sigma=0.5, seed=7))
st = run.state

print(f"stopped after {len(st.history)} experiments: {st.stop_reason}")
print(f"best 50-50 value after each batch: {[round(v, 2) for v in st.best_trace]}")

best = max(st.history, key=lambda h: h.output.product_area)
d = best.design
print(f"\nhighest product area {best.output.product_area:.2f} (experiment {best.index})")
print(f"  at T={d['temperature_C']:.1f} C, t={d['time_s']:.1f} s, r={d['equivalence_ratio']:.2f}")

print(f"\nPareto front ({len(st.archive)} points):")
for e in sorted(st.archive.entries, key=lambda e: e.objectives[0]):
    print(f"  #{e.index:2d}  product {-e.objectives[0]:6.2f}  byproduct {e.objectives[1]:6.2f}")
print(f"\ntranscript holds {len(run.transcript)} records; the last one:")
print(" ", run.transcript[-1].decode().strip()[:100], "...")
