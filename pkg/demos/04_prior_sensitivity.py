"""Sensitivity of the variance partition to the covariate-split concentration.

The symmetric Dirichlet concentration q on the covariate split controls how
strongly the prior favors sparse variance allocations. Refitting the same
data while lowering q shrinks covariates that carry no signal. One covariate
below (x4) is pure noise; watch its realized variance fall across the sweep.
"""

import numpy as np

from hdsdm import (
    Dataset,
    EffectDecl,
    McmcSettings,
    ModelSpec,
    PriorSpec,
    UniformInterval,
)
from hdsdm.partition import sensitivity_sweep

rng = np.random.default_rng(11)
n = 800

effects = [
    EffectDecl(f"x{i}", "linear", f"x{i}", UniformInterval(-1, 1), side="abiotic")
    for i in range(1, 5)
]
priors = {
    "total_variance": PriorSpec("total_variance", "jeffreys"),
    "covariates": PriorSpec("covariates", "dirichlet", {"q": 1.0}),
}
model = ModelSpec(effects=effects, priors=priors)

cols = {f"x{i}": rng.uniform(-1, 1, n) for i in range(1, 5)}
sd = UniformInterval(-1, 1).sd()
eta = 0.9 * cols["x1"] / sd + 0.7 * cols["x2"] / sd + 0.5 * cols["x3"] / sd
y = (rng.uniform(size=n) < 1 / (1 + np.exp(-eta))).astype(int)
data = Dataset.from_arrays(y=y, **cols)

settings = McmcSettings(chains=2, iterations=5000, burn_in=2000, thinning=3, seed=13)
entries = sensitivity_sweep(model, data, [1.0, 0.5, 1.0 / 6.0], settings)

print("posterior mean variance shares by concentration q:")
header = "  ".join(f"{g:>8s}" for g in entries[0].partition.group_names)
print(f"{'q':>6s}  {header}")
for entry in entries:
    shares = "  ".join(f"{v:8.3f}" for v in entry.partition.phi_mean)
    print(f"{entry.q:6.3f}  {shares}")

print("\nposterior mean realized variance of the null covariate x4:")
for entry in entries:
    j = entry.partition.group_names.index("x4")
    print(f"  q = {entry.q:5.3f}: {entry.partition.s2[:, j].mean():.4f}")

print("\ncentered posterior-mean trend range per covariate at each q:")
for entry in entries:
    spans = {g: float(np.ptp(curve)) for g, (grid, curve) in entry.trends.items()}
    print(f"  q = {entry.q:5.3f}: " + ", ".join(f"{g}={v:.3f}" for g, v in spans.items()))
