"""Parameter storage, feed-forward conditioners, and the Adam optimizer.

All trainable state lives in one ParamStore per model: a flat float64
vector plus a name -> (start, stop, shape) layout. Each named parameter is
exposed as a Var whose data is a view into the flat vector, so in-place
optimizer updates are immediately visible to every layer, and the whole
model state can be copied, restored, or checkpointed as one array.
"""

from __future__ import annotations

import numpy as np

from . import engine
from .engine import Var
from .errors import ContractError, NumericError, ShapeError

Array = np.ndarray


class ParamStore:
    """Flat parameter vector with named, shaped views."""

    def __init__(self) -> None:
        self.values = np.zeros(0, dtype=np.float64)
        self._slots: dict[str, tuple[int, int, tuple[int, ...]]] = {}
        self._order: list[str] = []
        self._vars: dict[str, Var] = {}

    @property
    def n_params(self) -> int:
        return self.values.size

    def add(self, name: str, init: Array) -> Var:
        """Append a parameter block and return its Var view.

        Must be called before any tape records the parameter; growing the
        store rebinds every existing view onto the reallocated vector.
        """
        if name in self._slots:
            raise ContractError(f"duplicate parameter name: {name!r}")
        init = np.asarray(init, dtype=np.float64)
        start = self.values.size
        stop = start + init.size
        self.values = np.concatenate([self.values, init.ravel()])
        self._slots[name] = (start, stop, init.shape)
        self._order.append(name)
        for other, (a, b, shape) in self._slots.items():
            view = self.values[a:b].reshape(shape)
            if other in self._vars:
                self._vars[other].data = view
            else:
                self._vars[other] = Var(view, needs_grad=True)
        return self._vars[name]

    def var(self, name: str) -> Var:
        return self._vars[name]

    def view(self, name: str) -> Array:
        """Writable array view of one parameter block."""
        start, stop, shape = self._slots[name]
        return self.values[start:stop].reshape(shape)

    def layout(self) -> list[dict]:
        return [
            {"name": n, "start": s[0], "stop": s[1], "shape": list(s[2])}
            for n, s in ((name, self._slots[name]) for name in self._order)
        ]

    def get_values(self) -> Array:
        return self.values.copy()

    def set_values(self, vec: Array) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != self.values.shape:
            raise ShapeError(
                f"parameter vector has size {vec.size}, store holds {self.values.size}"
            )
        self.values[:] = vec

    def zero_grads(self) -> None:
        for var in self._vars.values():
            var.grad = None

    def gather_grads(self) -> Array:
        """Flat gradient vector aligned with `values`; missing grads are zero."""
        flat = np.zeros_like(self.values)
        for name in self._order:
            var = self._vars[name]
            if var.grad is not None:
                start, stop, _ = self._slots[name]
                flat[start:stop] = var.grad.ravel()
        return flat


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Array:
    """Fan-balanced uniform init for a (fan_in, fan_out) weight matrix."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    """Affine layer y = x @ W + b, optionally with a fixed binary mask on W."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        zero_init: bool = False,
        mask: Array | None = None,
    ) -> None:
        self.in_dim = in_dim
        self.out_dim = out_dim
        if zero_init:
            weight = np.zeros((in_dim, out_dim))
        else:
            weight = glorot_uniform(rng, in_dim, out_dim)
        if mask is not None:
            mask = np.asarray(mask, dtype=np.float64)
            if mask.shape != (in_dim, out_dim):
                raise ShapeError(
                    f"mask shape {mask.shape} != weight shape {(in_dim, out_dim)}"
                )
        self.mask = mask
        self.weight = store.add(f"{name}.weight", weight)
        self.bias = store.add(f"{name}.bias", np.zeros(out_dim))

    def __call__(self, x: Var) -> Var:
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise ShapeError(
                f"layer expects (N, {self.in_dim}) input, got {x.data.shape}"
            )
        w = self.weight
        if self.mask is not None:
            w = engine.mul(w, Var(self.mask))
        return engine.add(engine.matmul(x, w), self.bias)


class MLP:
    """ReLU multilayer perceptron.

    sizes = [in, hidden..., out]. The final layer is zero-initialized by
    default so conditioners start every flow at the identity map.
    """

    def __init__(
        self,
        store: ParamStore,
        name: str,
        sizes: list[int],
        rng: np.random.Generator,
        zero_final: bool = True,
        masks: list[Array] | None = None,
    ) -> None:
        if len(sizes) < 2:
            raise ContractError("an MLP needs at least an input and an output size")
        if masks is not None and len(masks) != len(sizes) - 1:
            raise ContractError(
                f"got {len(masks)} masks for {len(sizes) - 1} layers"
            )
        self.sizes = list(sizes)
        self.layers: list[Linear] = []
        n_layers = len(sizes) - 1
        for i in range(n_layers):
            self.layers.append(
                Linear(
                    store,
                    f"{name}.{i}",
                    sizes[i],
                    sizes[i + 1],
                    rng,
                    zero_init=zero_final and i == n_layers - 1,
                    mask=None if masks is None else masks[i],
                )
            )

    def __call__(self, x: Var) -> Var:
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = engine.relu(h)
        return h


def made_degrees(dim: int, hidden_sizes: list[int]) -> list[Array]:
    """Connectivity degrees for input and hidden units.

    Inputs get 1..dim. Hidden units cycle through 1..dim-1 (all 1 when
    dim == 1, where no hidden unit may feed any output).
    """
    if dim < 1:
        raise ContractError(f"dim must be >= 1, got {dim}")
    degrees = [np.arange(1, dim + 1)]
    top = max(dim - 1, 1)
    for width in hidden_sizes:
        degrees.append(np.arange(width) % top + 1)
    return degrees


def made_masks(
    dim: int, hidden_sizes: list[int], params_per_output: int
) -> list[Array]:
    """Binary masks enforcing strict autoregressive structure.

    Layer masks allow deg_out >= deg_in; the final mask requires
    deg_out > deg_hidden, so output block j (dim-major, params_per_output
    entries per dimension) depends on inputs 1..j-1 only. Output block 1
    sees nothing and is driven purely by the final bias.
    """
    degrees = made_degrees(dim, hidden_sizes)
    masks = []
    for prev, this in zip(degrees[:-1], degrees[1:]):
        masks.append((this[None, :] >= prev[:, None]).astype(np.float64))
    out_degrees = np.repeat(np.arange(1, dim + 1), params_per_output)
    masks.append((out_degrees[None, :] > degrees[-1][:, None]).astype(np.float64))
    return masks


class MaskedMLP:
    """Autoregressive conditioner: dim inputs -> (dim, params_per_output)."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        dim: int,
        hidden_sizes: list[int],
        params_per_output: int,
        rng: np.random.Generator,
    ) -> None:
        self.dim = dim
        self.params_per_output = params_per_output
        masks = made_masks(dim, hidden_sizes, params_per_output)
        sizes = [dim] + list(hidden_sizes) + [dim * params_per_output]
        self.net = MLP(store, name, sizes, rng, zero_final=True, masks=masks)

    def __call__(self, x: Var) -> Var:
        out = self.net(x)
        n = out.data.shape[0]
        return engine.reshape(out, (n, self.dim, self.params_per_output))


class Adam:
    """Adam with bias correction, acting in place on a ParamStore."""

    def __init__(
        self,
        store: ParamStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-7,
    ) -> None:
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(store.n_params)
        self.v = np.zeros(store.n_params)

    def step(self, grads: Array) -> None:
        grads = np.asarray(grads, dtype=np.float64)
        if grads.shape != self.store.values.shape:
            raise ShapeError(
                f"gradient size {grads.size} != parameter count {self.store.n_params}"
            )
        if not np.all(np.isfinite(grads)):
            raise NumericError("non-finite gradients in optimizer step")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        self.store.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
