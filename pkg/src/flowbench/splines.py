"""Monotone rational-quadratic splines with identity tails.

A spline is defined on the box [-B, B] by K+1 knots (x_k, y_k) with positive
derivatives d_k at each knot; outside the box it is the identity, and the
boundary derivatives are pinned to 1 so the map is C1 across the edge.
Inside bin k the map is the quotient of two quadratics in the bin-relative
coordinate xi = (x - x_k) / (x_{k+1} - x_k); it is strictly increasing
whenever widths, heights, and derivatives are positive, and its inverse is
the closed-form stable root of a quadratic.

decode_spline_params turns raw conditioner output (3K-1 numbers per
dimension: K width logits, K height logits, K-1 derivative pre-activations)
into knots. Widths and heights are softmax shares of the box with a small
absolute floor; the box endpoints are pinned exactly by construction.
Derivative pre-activations are shifted so that zero raw input decodes to
derivative exactly 1, making a zero-initialized conditioner the identity
map. All decode/evaluate/invert arithmetic runs on tape Vars, so the same
code serves training (differentiable) and sampling (plain numpy inside
constant Vars).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .engine import Var
from .errors import ContractError, NumericError

Array = np.ndarray

MIN_BIN_FRACTION = 1e-3
MIN_DERIVATIVE = 1e-3
# softplus(shift) == 1 - MIN_DERIVATIVE, so raw 0 decodes to derivative 1
_DERIV_RAW_SHIFT = float(np.log(np.expm1(1.0 - MIN_DERIVATIVE)))


def decode_spline_params(raw: Var, n_bins: int, bound: float):
    """Decode raw conditioner output into knot Vars.

    raw has shape (..., 3K-1); returns (x_knots, y_knots, derivs), each of
    shape (..., K+1), with endpoints exactly +-bound and boundary
    derivatives exactly 1.
    """
    k = n_bins
    if raw.data.shape[-1] != 3 * k - 1:
        raise ContractError(
            f"raw spline block must have 3K-1={3 * k - 1} entries per dimension,"
            f" got {raw.data.shape[-1]}"
        )
    head = raw.data.shape[:-1]
    min_bin = MIN_BIN_FRACTION * (2.0 * bound / k)
    span = 2.0 * bound - k * min_bin

    def knots_from(logits: Var) -> Var:
        shares = engine.softmax_last(logits)
        widths = shares * span + min_bin
        interior = engine.take_range_last(engine.cumsum_last(widths), 0, k - 1)
        interior = interior + (-bound)
        left = Var(np.full(head + (1,), -bound))
        right = Var(np.full(head + (1,), bound))
        return engine.concat([left, interior, right], axis=-1)

    x_knots = knots_from(engine.take_range_last(raw, 0, k))
    y_knots = knots_from(engine.take_range_last(raw, k, 2 * k))
    d_raw = engine.take_range_last(raw, 2 * k, 3 * k - 1)
    d_interior = engine.softplus(d_raw + _DERIV_RAW_SHIFT) + MIN_DERIVATIVE
    edge = Var(np.ones(head + (1,)))
    derivs = engine.concat([edge, d_interior, edge], axis=-1)
    return x_knots, y_knots, derivs


def _bin_index(knots: Array, q: Array, bound: float) -> Array:
    """Vectorized per-row bin search.

    knots: (..., K+1) sorted within each row, spanning [-bound, bound];
    q: (...,) clipped to the same interval. Returns bin indices in
    [0, K-1]. Implemented as one global searchsorted after shifting each
    row into its own disjoint interval.
    """
    k1 = knots.shape[-1]
    rows = int(np.prod(knots.shape[:-1], dtype=np.int64)) if knots.ndim > 1 else 1
    offset = np.arange(rows, dtype=np.float64) * (4.0 * bound)
    flat_knots = (knots.reshape(rows, k1) + offset[:, None]).ravel()
    flat_q = q.reshape(rows) + offset
    idx = np.searchsorted(flat_knots, flat_q, side="right")
    idx -= np.arange(rows) * k1 + 1
    return np.clip(idx, 0, k1 - 2).reshape(q.shape)


def spline_apply(
    x_knots: Var,
    y_knots: Var,
    derivs: Var,
    q: Var,
    bound: float,
    inverse: bool,
):
    """Apply the spline (or its inverse) elementwise, identity outside the box.

    q has shape matching x_knots.shape[:-1]. Returns (out, log_deriv) where
    log_deriv is log dy/dx evaluated at the abscissa of each point (zero in
    the identity tails). For inverse=True, out is the abscissa recovered
    from ordinate q.
    """
    qc = engine.clip(q, -bound, bound)
    search_in = y_knots if inverse else x_knots
    k = _bin_index(search_in.data, qc.data, bound)
    k1 = k + 1
    x0 = engine.take_along_last(x_knots, k)
    x1 = engine.take_along_last(x_knots, k1)
    y0 = engine.take_along_last(y_knots, k)
    y1 = engine.take_along_last(y_knots, k1)
    d0 = engine.take_along_last(derivs, k)
    d1 = engine.take_along_last(derivs, k1)
    w = x1 - x0
    h = y1 - y0
    s = h / w
    r = d1 + d0 - 2.0 * s

    if inverse:
        dy = qc - y0
        a = h * (s - d0) + dy * r
        b = h * d0 - dy * r
        c = -s * dy
        disc = b * b - 4.0 * a * c
        if np.any(disc.data < 0.0):
            raise NumericError("negative discriminant in spline inversion")
        xi = (2.0 * c) / (-b - engine.sqrt(disc))
        out_box = xi * w + x0
    else:
        xi = (qc - x0) / w
        out_box = None  # filled below once xi exists

    omxi = 1.0 - xi
    xi_omxi = xi * omxi
    den = s + r * xi_omxi
    if not inverse:
        num = h * (s * xi * xi + d0 * xi_omxi)
        out_box = y0 + num / den
    deriv = s * s * (d1 * xi * xi + 2.0 * s * xi_omxi + d0 * omxi * omxi) / (den * den)

    inside = (np.abs(q.data) <= bound).astype(np.float64)
    m = Var(inside)
    out = m * out_box + (1.0 - m) * q
    log_deriv = m * engine.log(deriv)
    return out, log_deriv


@dataclass
class RqsParams:
    """Knot representation of one spline: abscissas, ordinates, derivatives."""

    x_knots: Array
    y_knots: Array
    derivs: Array
    bound: float

    def __post_init__(self) -> None:
        self.x_knots = np.asarray(self.x_knots, dtype=np.float64)
        self.y_knots = np.asarray(self.y_knots, dtype=np.float64)
        self.derivs = np.asarray(self.derivs, dtype=np.float64)
        self.bound = float(self.bound)
        b = self.bound
        n = self.x_knots.shape
        if self.y_knots.shape != n or self.derivs.shape != n:
            raise ContractError("knot arrays must share one shape (K+1,)")
        if self.x_knots.ndim != 1 or self.x_knots.size < 2:
            raise ContractError("need at least two knots")
        if b <= 0.0:
            raise ContractError(f"bound must be positive, got {b}")
        tol = 1e-9 * max(b, 1.0)
        for name, arr in (("x", self.x_knots), ("y", self.y_knots)):
            if np.any(np.diff(arr) <= 0.0):
                raise ContractError(f"{name}-knots must be strictly increasing")
            if abs(arr[0] + b) > tol or abs(arr[-1] - b) > tol:
                raise ContractError(f"{name}-knots must span [-{b}, {b}]")
        if np.any(self.derivs <= 0.0):
            raise ContractError("knot derivatives must be positive")
        if abs(self.derivs[0] - 1.0) > tol or abs(self.derivs[-1] - 1.0) > tol:
            raise ContractError("boundary derivatives must equal 1")

    @property
    def n_bins(self) -> int:
        return self.x_knots.size - 1


def rqs_param_decode(raw: Array, n_bins: int, bound: float) -> RqsParams:
    """Decode one dimension's raw parameter block into validated knots."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (3 * n_bins - 1,):
        raise ContractError(
            f"expected raw shape {(3 * n_bins - 1,)}, got {raw.shape}"
        )
    xk, yk, dk = decode_spline_params(Var(raw), n_bins, bound)
    return RqsParams(xk.data, yk.data, dk.data, bound)


def _apply_scalar_api(params: RqsParams, q, inverse: bool):
    q_arr = np.asarray(q, dtype=np.float64)
    flat = np.atleast_1d(q_arr).reshape(-1)
    n = flat.size
    k1 = params.x_knots.size
    tile = lambda a: Var(np.broadcast_to(a, (n, k1)).copy())
    out, log_deriv = spline_apply(
        tile(params.x_knots),
        tile(params.y_knots),
        tile(params.derivs),
        Var(flat),
        params.bound,
        inverse=inverse,
    )
    out_data = out.data.reshape(q_arr.shape)
    deriv = np.exp(log_deriv.data if not inverse else -log_deriv.data)
    deriv = deriv.reshape(q_arr.shape)
    if np.isscalar(q) or q_arr.ndim == 0:
        return float(out_data), float(deriv)
    return out_data, deriv


def rqs_eval(params: RqsParams, x):
    """Map x through the spline. Returns (y, dy/dx); identity outside the box."""
    return _apply_scalar_api(params, x, inverse=False)


def rqs_invert(params: RqsParams, y):
    """Map y back through the spline. Returns (x, dx/dy)."""
    return _apply_scalar_api(params, y, inverse=True)
