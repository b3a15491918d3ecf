"""Toy target densities with exact log-densities and seeded samplers.

Two families: per-dimension mixtures of Gaussians (independent dimensions,
multimodal marginals) and correlated Gaussians built from random
correlation matrices (unimodal, dense dependence structure). Both expose
exact log_prob, deterministic sampling (same seed, bit-identical draws),
and a JSON round trip that captures every parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import ContractError, GenerationError, ShapeError
from .rng import derive_seed, make_rng

Array = np.ndarray

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class SampleSet:
    """A batch of draws plus where they came from."""

    data: Array
    provenance: str
    seed: int

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise ContractError(
                f"samples must be a non-empty (M, D) array, got {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ContractError("samples must be finite")
        if self.provenance not in ("target", "flow"):
            raise ContractError(
                f"provenance must be 'target' or 'flow', got {self.provenance!r}"
            )

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _check_points(x: Array, dim: int) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"expected (N, {dim}) points, got {x.shape}")
    return x


class StandardNormal:
    """Isotropic unit Gaussian; the flow's base and a trivial target."""

    kind = "normal"

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise ContractError(f"dim must be >= 1, got {dim}")
        self.dim = dim

    def log_prob(self, x: Array) -> Array:
        x = _check_points(x, self.dim)
        return -0.5 * (x * x).sum(axis=1) - 0.5 * self.dim * _LOG_2PI

    def sample(self, n: int, seed: int) -> SampleSet:
        data = make_rng(seed).standard_normal((n, self.dim))
        return SampleSet(data, "target", seed)


@dataclass
class MixtureOfGaussians:
    """Independent per-dimension mixtures: p(x) = prod_d sum_c w N(m, v).

    means/variances/weights all have shape (dim, n_components); weights sum
    to one along the component axis.
    """

    kind = "mog"

    means: Array
    variances: Array
    weights: Array
    seed: int | None = None

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        shape = self.means.shape
        if len(shape) != 2 or shape[0] < 1 or shape[1] < 1:
            raise ContractError(f"means must be (dim, n_components), got {shape}")
        if self.variances.shape != shape or self.weights.shape != shape:
            raise ContractError("means, variances, weights must share a shape")
        if np.any(self.variances <= 0.0):
            raise ContractError("variances must be positive")
        if np.any(self.weights < 0.0) or not np.allclose(
            self.weights.sum(axis=1), 1.0, rtol=0.0, atol=1e-12
        ):
            raise ContractError("weights must be non-negative and sum to 1 per dim")

    @property
    def dim(self) -> int:
        return self.means.shape[0]

    @property
    def n_components(self) -> int:
        return self.means.shape[1]

    @classmethod
    def random(
        cls,
        dim: int,
        seed: int,
        n_components: int = 3,
        mean_range: tuple[float, float] = (-8.0, 8.0),
        sigma_range: tuple[float, float] = (0.3, 1.5),
    ) -> "MixtureOfGaussians":
        """Means uniform, stds log-uniform, weights Dirichlet(1,..,1)."""
        rng = make_rng(seed)
        shape = (dim, n_components)
        means = rng.uniform(*mean_range, size=shape)
        sigmas = np.exp(rng.uniform(np.log(sigma_range[0]), np.log(sigma_range[1]), shape))
        weights = rng.dirichlet(np.ones(n_components), size=dim)
        return cls(means, sigmas**2, weights, seed=seed)

    def log_prob(self, x: Array) -> Array:
        x = _check_points(x, self.dim)
        # (N, dim, n_components) component log densities
        diff = x[:, :, None] - self.means[None, :, :]
        comp = -0.5 * (diff * diff) / self.variances - 0.5 * (
            np.log(self.variances) + _LOG_2PI
        )
        per_dim = logsumexp(comp + np.log(self.weights), axis=2)
        return per_dim.sum(axis=1)

    def sample(self, n: int, seed: int) -> SampleSet:
        rng = make_rng(seed)
        data = np.empty((n, self.dim))
        for d in range(self.dim):
            comps = rng.choice(self.n_components, size=n, p=self.weights[d])
            data[:, d] = rng.normal(
                self.means[d, comps], np.sqrt(self.variances[d, comps])
            )
        return SampleSet(data, "target", seed)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "weights": self.weights.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MixtureOfGaussians":
        return cls(
            np.array(obj["means"]),
            np.array(obj["variances"]),
            np.array(obj["weights"]),
            seed=obj.get("seed"),
        )


def random_correlation_matrix(
    dim: int, seed: int, min_eigenvalue: float = 1e-6, max_tries: int = 64
) -> Array:
    """Random full correlation matrix via a rescaled Gaussian Gram matrix.

    Draw A with iid standard normal entries, form AA^T, rescale to unit
    diagonal; reject and redraw while the smallest eigenvalue is at or
    below min_eigenvalue.
    """
    if dim < 1:
        raise ContractError(f"dim must be >= 1, got {dim}")
    rng = make_rng(seed)
    for _ in range(max_tries):
        a = rng.standard_normal((dim, dim))
        gram = a @ a.T
        scale = np.sqrt(np.diag(gram))
        corr = gram / np.outer(scale, scale)
        corr = 0.5 * (corr + corr.T)
        np.fill_diagonal(corr, 1.0)
        if np.linalg.eigvalsh(corr).min() > min_eigenvalue:
            return corr
    raise GenerationError(
        f"no correlation matrix with min eigenvalue > {min_eigenvalue} "
        f"in {max_tries} tries (dim={dim}, seed={seed})"
    )


@dataclass
class CorrelatedGaussian:
    """Full-covariance Gaussian with unit marginal variances."""

    kind = "cg"

    mean: Array
    correlation: Array
    seed: int | None = None
    _chol: Array = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.correlation = np.asarray(self.correlation, dtype=np.float64)
        d = self.mean.shape[0] if self.mean.ndim == 1 else -1
        if d < 1 or self.correlation.shape != (d, d):
            raise ContractError(
                f"need mean (D,) and correlation (D, D), got "
                f"{self.mean.shape} and {self.correlation.shape}"
            )
        if not np.allclose(self.correlation, self.correlation.T, atol=1e-12):
            raise ContractError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(self.correlation), 1.0, atol=1e-12):
            raise ContractError("correlation matrix must have unit diagonal")
        try:
            self._chol = np.linalg.cholesky(self.correlation)
        except np.linalg.LinAlgError as exc:
            raise ContractError("correlation matrix must be positive definite") from exc

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def random(
        cls,
        dim: int,
        seed: int,
        mean_range: tuple[float, float] = (-3.0, 3.0),
        min_eigenvalue: float = 1e-6,
    ) -> "CorrelatedGaussian":
        corr = random_correlation_matrix(dim, derive_seed(seed, "corr"), min_eigenvalue)
        mean = make_rng(derive_seed(seed, "mean")).uniform(*mean_range, size=dim)
        return cls(mean, corr, seed=seed)

    def log_prob(self, x: Array) -> Array:
        x = _check_points(x, self.dim)
        w = solve_triangular(self._chol, (x - self.mean).T, lower=True)
        log_det = np.log(np.diag(self._chol)).sum()
        return -0.5 * (w * w).sum(axis=0) - 0.5 * self.dim * _LOG_2PI - log_det

    def sample(self, n: int, seed: int) -> SampleSet:
        z = make_rng(seed).standard_normal((n, self.dim))
        return SampleSet(self.mean + z @ self._chol.T, "target", seed)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "mean": self.mean.tolist(),
            "correlation": self.correlation.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorrelatedGaussian":
        return cls(
            np.array(obj["mean"]), np.array(obj["correlation"]), seed=obj.get("seed")
        )


TARGET_KINDS = ("mog", "cg")


def make_target(kind: str, dim: int, seed: int):
    """Instantiate a named target family with its own generator seed."""
    if kind == "mog":
        return MixtureOfGaussians.random(dim, seed)
    if kind == "cg":
        return CorrelatedGaussian.random(dim, seed)
    if kind == "normal":
        return StandardNormal(dim)
    raise ContractError(f"unknown target kind {kind!r}")


def target_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "mog":
        return MixtureOfGaussians.from_json(obj)
    if kind == "cg":
        return CorrelatedGaussian.from_json(obj)
    raise ContractError(f"unknown target kind {kind!r}")
