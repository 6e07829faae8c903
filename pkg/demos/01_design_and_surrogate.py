"""Space-filling design and an interpolating RBF surrogate.

Draw a 15-point Latin hypercube over the three reactor variables, run the
noiseless kinetics at each point, and fit one RBF per objective. The fitted
surrogate reproduces its training data and is then queried at a fresh point.
"""
import numpy as np

from mobo import LhsConfig, REACTOR_VARIABLES, fit, latin_hypercube, predict, unembed
from mobo.simcfr import ground_truth

X = latin_hypercube(LhsConfig(n_points=15, dimension=3, seed=7))

# each column hits every one of the 15 strata exactly once
for k, spec in enumerate(REACTOR_VARIABLES):
    strata = np.sort(np.floor(X[:, k] * 15).astype(int))
    print(f"{spec.name:>18}: strata {strata.tolist()}")

designs = [unembed(x) for x in X]
Y = np.array([ground_truth(d["temperature_C"], d["time_s"], d["equivalence_ratio"]) for d in designs])
print("\nfirst three experiments")
for d, (p, s) in zip(designs[:3], Y[:3]):
    print(f"  T={d['temperature_C']:6.1f} C  t={d['time_s']:5.1f} s  r={d['equivalence_ratio']:.2f}"
          f"  ->  product {p:6.2f}  byproduct {s:6.2f}")

product, byproduct = fit(X, Y[:, 0]), fit(X, Y[:, 1])
print(f"\nkernel width (median pairwise distance): {product.shape:.4f}")
print(f"max training residual, product:   {np.max(np.abs(predict(product, X) - Y[:, 0])):.2e}")
print(f"max training residual, byproduct: {np.max(np.abs(predict(byproduct, X) - Y[:, 1])):.2e}")

x_new = np.array([0.18, 0.95, 0.3])
d = unembed(x_new)
truth = ground_truth(d["temperature_C"], d["time_s"], d["equivalence_ratio"])
print(f"\nat unseen point {dict(d)}")
print(f"  surrogate product {predict(product, x_new):6.2f}  vs kinetics {truth[0]:6.2f}")
