# The benchmark's two target families probe different failure modes:
# per-dimension Gaussian mixtures test multimodality, correlated Gaussians
# test dependence between dimensions. Both sample exactly and expose exact
# log densities, so trained flows can be scored without approximation.

import numpy as np

from flowbench import CorrelatedGaussian, MixtureOfGaussians, make_target

# ---------------------------------------------------------------------------
# 1. mixture of Gaussians: independent dimensions, three modes each

mog = MixtureOfGaussians.random(dim=2, seed=11)
print("per-dimension component means:")
print(np.round(mog.means, 3))
print("component weights (rows sum to 1):")
print(np.round(mog.weights, 3))

samples = mog.sample(50_000, seed=0)
print("sample shape:", samples.data.shape, "provenance:", samples.provenance)

# the empirical mean of each dimension matches the mixture mean
mix_mean = (mog.weights * mog.means).sum(axis=1)
print("mixture mean:", np.round(mix_mean, 3))
print("sample mean: ", np.round(samples.data.mean(axis=0), 3))

# log_prob is exact: integrate exp(log_prob) over a 1-D slice numerically
mog1 = MixtureOfGaussians.random(dim=1, seed=5)
grid = np.linspace(-30, 30, 200_001)
density = np.exp(mog1.log_prob(grid[:, None]))
print("1-D density integrates to:", np.trapezoid(density, grid))

# ---------------------------------------------------------------------------
# 2. correlated Gaussian: dependence without multimodality

cg = CorrelatedGaussian.random(dim=4, seed=3)
print("\ncorrelation matrix:")
print(np.round(cg.correlation, 3))
print("eigenvalues (all positive):", np.round(np.linalg.eigvalsh(cg.correlation), 4))

draws = cg.sample(200_000, seed=1)
emp_corr = np.corrcoef(draws.data, rowvar=False)
print("largest |empirical - true| correlation entry:",
      np.abs(emp_corr - cg.correlation).max())

# ---------------------------------------------------------------------------
# 3. the factory used by the benchmark harness
#
# Targets are keyed by (kind, dim, seed); the same seed always rebuilds the
# same target, which is what makes benchmark runs reproducible.

a = make_target("mog", 3, seed=99)
b = make_target("mog", 3, seed=99)
print("\nsame seed, same target:",
      np.array_equal(a.sample(5, seed=0).data, b.sample(5, seed=0).data))

# targets serialize, so a benchmark record can state exactly what it ran on
blob = a.to_json()
print("serialized target keys:", sorted(blob))
