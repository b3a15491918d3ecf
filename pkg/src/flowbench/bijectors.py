"""Invertible transforms and their composition.

Direction convention: forward is the generative direction (latent z toward
data y) and returns log|det dy/dz|; inverse is the normalizing direction
(data toward latent) and returns log|det dz/dy|. The two log-dets are exact
negatives of each other at corresponding points.

All methods exchange tape Vars so a single code path serves training
(inverse direction, differentiated) and sampling (forward direction, run on
constant Vars with no active tape). Autoregressive forward passes rebuild
the output dimension by dimension, so they cost dim conditioner
evaluations; their normalizing passes are single evaluations.
"""

from __future__ import annotations

import numpy as np

from . import engine
from .engine import Var
from .errors import ContractError, NumericError, ShapeError
from .nn import MLP, MaskedMLP, ParamStore
from .splines import decode_spline_params, spline_apply

Array = np.ndarray

SCALE_CLAMP = 7.0


def _check_input(x: Var, dim: int, who: str) -> None:
    if x.data.ndim != 2 or x.data.shape[1] != dim:
        raise ShapeError(f"{who} expects (N, {dim}) input, got {x.data.shape}")


class Bijector:
    """Interface: forward/inverse mapping (N, dim) batches, with log-dets."""

    dim: int

    def forward(self, z: Var) -> tuple[Var, Var]:
        raise NotImplementedError

    def inverse(self, y: Var) -> tuple[Var, Var]:
        raise NotImplementedError


class Permutation(Bijector):
    """Fixed reordering of dimensions; log-det is zero."""

    def __init__(self, dim: int, perm: Array) -> None:
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(dim)):
            raise ContractError(f"not a permutation of 0..{dim - 1}: {perm}")
        self.dim = dim
        self.perm = perm
        self.inv_perm = np.argsort(perm)

    def forward(self, z: Var) -> tuple[Var, Var]:
        _check_input(z, self.dim, "permutation")
        out = engine.permute_cols(z, self.perm)
        return out, Var(np.zeros(z.data.shape[0]))

    def inverse(self, y: Var) -> tuple[Var, Var]:
        _check_input(y, self.dim, "permutation")
        out = engine.permute_cols(y, self.inv_perm)
        return out, Var(np.zeros(y.data.shape[0]))


class AffineCoupling(Bijector):
    """Coupling transform: one block passes through, the other is scaled
    and shifted by a conditioner fed with the pass-through block.

    Split index d = floor(dim/2) by default; dim 1 degenerates to d = 0,
    where the conditioner has no inputs and its biases provide trainable
    constant scale and shift. Scales are clamped to [-SCALE_CLAMP,
    SCALE_CLAMP] before exponentiation.
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        dim: int,
        hidden_sizes: list[int],
        rng: np.random.Generator,
        split: int | None = None,
    ) -> None:
        if dim < 1:
            raise ContractError(f"dim must be >= 1, got {dim}")
        if split is None:
            split = dim // 2 if dim > 1 else 0
        if not (0 <= split <= dim - 1) or (dim > 1 and split == 0):
            raise ContractError(
                f"split must satisfy 1 <= split <= dim-1 (0 only when dim == 1),"
                f" got split={split}, dim={dim}"
            )
        self.dim = dim
        self.split = split
        self.n_out = dim - split
        sizes = [split] + list(hidden_sizes) + [2 * self.n_out]
        self.net = MLP(store, name, sizes, rng, zero_final=True)

    def _scale_shift(self, passthrough: Var) -> tuple[Var, Var]:
        st = self.net(passthrough)
        s = engine.clip(
            engine.take_range_last(st, 0, self.n_out), -SCALE_CLAMP, SCALE_CLAMP
        )
        t = engine.take_range_last(st, self.n_out, 2 * self.n_out)
        return s, t

    def forward(self, z: Var) -> tuple[Var, Var]:
        _check_input(z, self.dim, "coupling")
        z1 = engine.take_range_last(z, 0, self.split)
        z2 = engine.take_range_last(z, self.split, self.dim)
        s, t = self._scale_shift(z1)
        y2 = z2 * engine.exp(s) + t
        y = engine.concat([z1, y2], axis=-1)
        return y, engine.vsum(s, axis=1)

    def inverse(self, y: Var) -> tuple[Var, Var]:
        _check_input(y, self.dim, "coupling")
        y1 = engine.take_range_last(y, 0, self.split)
        y2 = engine.take_range_last(y, self.split, self.dim)
        s, t = self._scale_shift(y1)
        z2 = (y2 - t) * engine.exp(-s)
        z = engine.concat([y1, z2], axis=-1)
        return z, engine.vsum(-s, axis=1)


class AffineAutoregressive(Bijector):
    """Masked affine autoregressive transform.

    The conditioner reads the data-side vector, so normalizing is a single
    masked forward pass and the generative direction needs dim passes.
    Dimension 1 gets trainable constant scale/shift from the conditioner's
    output bias. Scales are clamped like the coupling layer's.
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        dim: int,
        hidden_sizes: list[int],
        rng: np.random.Generator,
    ) -> None:
        self.dim = dim
        self.cond = MaskedMLP(store, name, dim, hidden_sizes, 2, rng)

    def _scale_shift(self, y: Var) -> tuple[Var, Var]:
        p = self.cond(y)
        n = p.data.shape[0]
        s = engine.reshape(engine.take_range_last(p, 0, 1), (n, self.dim))
        t = engine.reshape(engine.take_range_last(p, 1, 2), (n, self.dim))
        return engine.clip(s, -SCALE_CLAMP, SCALE_CLAMP), t

    def forward(self, z: Var) -> tuple[Var, Var]:
        _check_input(z, self.dim, "autoregressive")
        y = Var(np.zeros_like(z.data))
        s = t = None
        for _ in range(self.dim):
            s, t = self._scale_shift(y)
            y = z * engine.exp(s) + t
        return y, engine.vsum(s, axis=1)

    def inverse(self, y: Var) -> tuple[Var, Var]:
        _check_input(y, self.dim, "autoregressive")
        s, t = self._scale_shift(y)
        z = (y - t) * engine.exp(-s)
        return z, engine.vsum(-s, axis=1)


class SplineAutoregressive(Bijector):
    """Masked autoregressive transform with rational-quadratic splines.

    Each dimension is mapped by a monotone spline whose knots come from the
    conditioner output (3K-1 numbers per dimension); identity outside
    [-bound, bound]. Dimension 1 gets a trainable constant spline.
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        dim: int,
        hidden_sizes: list[int],
        rng: np.random.Generator,
        n_bins: int = 8,
        bound: float = 12.0,
    ) -> None:
        if n_bins < 1:
            raise ContractError(f"n_bins must be >= 1, got {n_bins}")
        if bound <= 0:
            raise ContractError(f"bound must be positive, got {bound}")
        self.dim = dim
        self.n_bins = n_bins
        self.bound = bound
        self.cond = MaskedMLP(store, name, dim, hidden_sizes, 3 * n_bins - 1, rng)

    def _knots(self, y: Var):
        return decode_spline_params(self.cond(y), self.n_bins, self.bound)

    def forward(self, z: Var) -> tuple[Var, Var]:
        _check_input(z, self.dim, "spline autoregressive")
        y = Var(np.zeros_like(z.data))
        log_deriv = None
        for _ in range(self.dim):
            xk, yk, dk = self._knots(y)
            y, log_deriv = spline_apply(xk, yk, dk, z, self.bound, inverse=False)
        return y, engine.vsum(log_deriv, axis=1)

    def inverse(self, y: Var) -> tuple[Var, Var]:
        _check_input(y, self.dim, "spline autoregressive")
        xk, yk, dk = self._knots(y)
        z, log_deriv = spline_apply(xk, yk, dk, y, self.bound, inverse=True)
        return z, engine.vsum(-log_deriv, axis=1)


class Chain(Bijector):
    """Composition of bijectors, applied left to right in forward.

    Every intermediate is checked for finiteness; a blow-up names the
    offending stage. An empty chain is the identity.
    """

    def __init__(self, bijectors: list[Bijector], dim: int | None = None) -> None:
        if not bijectors and dim is None:
            raise ContractError("an empty chain needs an explicit dim")
        self.bijectors = list(bijectors)
        self.dim = dim if dim is not None else bijectors[0].dim
        for i, b in enumerate(self.bijectors):
            if b.dim != self.dim:
                raise ContractError(
                    f"bijector {i} has dim {b.dim}, chain has dim {self.dim}"
                )

    @staticmethod
    def _check_finite(x: Var, log_det: Var, i: int, direction: str) -> None:
        if not (np.all(np.isfinite(x.data)) and np.all(np.isfinite(log_det.data))):
            raise NumericError(
                f"non-finite output from bijector {i} in {direction} pass"
            )

    def forward(self, z: Var) -> tuple[Var, Var]:
        _check_input(z, self.dim, "chain")
        total = Var(np.zeros(z.data.shape[0]))
        x = z
        for i, b in enumerate(self.bijectors):
            x, ld = b.forward(x)
            self._check_finite(x, ld, i, "forward")
            total = total + ld
        return x, total

    def inverse(self, y: Var) -> tuple[Var, Var]:
        _check_input(y, self.dim, "chain")
        total = Var(np.zeros(y.data.shape[0]))
        x = y
        for i in reversed(range(len(self.bijectors))):
            x, ld = self.bijectors[i].inverse(x)
            self._check_finite(x, ld, i, "inverse")
            total = total + ld
        return x, total
