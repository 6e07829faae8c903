"""Pattern search, scalarizations and the Pareto archive.

Shows the three acquisitions that make up one batch: two epsilon-constraint
problems and the fixed 50-50 weighting, each minimized by coordinate pattern
search on the surrogates.
"""
import numpy as np

from mobo import (
    ArchiveEntry, GpsConfig, LhsConfig, ParetoArchive, fit, generate_batch,
    latin_hypercube, pareto_update, pattern_search, unembed,
)
from mobo.acquisition import DEFAULT_ACQUISITIONS
from mobo.simcfr import ground_truth

# pattern search on a bowl recovers its center
c = np.array([0.3, 0.71, 0.55])
res = pattern_search(lambda x: float(np.sum((x - c) ** 2)), np.full(3, 0.5), GpsConfig())
print(f"bowl minimum {c} -> found {np.round(res.x, 5)} in {res.evals} evaluations (mesh {res.mesh:.1e})")

X = latin_hypercube(LhsConfig(15, 3, seed=3))
archive = ParetoArchive()
F = []
for i, x in enumerate(X):
    d = unembed(x)
    p, s = ground_truth(d["temperature_C"], d["time_s"], d["equivalence_ratio"])
    F.append((-p, s))
    archive = pareto_update(archive, ArchiveEntry(d, (-p, s), i))
F = np.array(F)
print(f"\n{len(archive)} of 15 initial experiments are nondominated: {list(archive.indices())}")
for e in archive.entries:
    print(f"  #{e.index:2d}  product {-e.objectives[0]:6.2f}  byproduct {e.objectives[1]:6.2f}")

models = (fit(X, F[:, 0]), fit(X, F[:, 1]))
batch = generate_batch(models, archive, DEFAULT_ACQUISITIONS, np.random.default_rng(1), evaluated=X)
print("\nproposed batch")
for spec, d in zip(DEFAULT_ACQUISITIONS, batch):
    label = f"{spec.kind}" + (f" (target {spec.target_index})" if spec.kind == "epsilon-constraint" else "")
    print(f"  {label:<33} T={d['temperature_C']:6.1f}  t={d['time_s']:5.1f}  r={d['equivalence_ratio']:.2f}")
