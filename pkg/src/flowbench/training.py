"""Flow assembly, the NLL objective, and the staged training loop.

A FlowModel is a base standard normal plus a chain of bijectors sharing one
ParamStore. build_flow assembles the three supported architectures with
interleaved fixed random permutations and near-identity initialization.

Training minimizes the exact negative log-likelihood in the normalizing
direction. The loop runs a fixed number of stages; each stage uses Adam at
one tenth of the previous stage's learning rate, runs at most
max_epochs_per_stage epochs, stops early once validation NLL has not
improved for `patience` consecutive epochs, and restores the stage's
best-validation parameters before the next stage begins. Every random
choice derives from the config seed, so a (config, target) pair reproduces
its TrainReport bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import engine
from .bijectors import (
    AffineAutoregressive,
    AffineCoupling,
    Bijector,
    Chain,
    Permutation,
    SplineAutoregressive,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .distributions import SampleSet, StandardNormal
from .engine import Tape, Var
from .errors import ConfigError, ContractError, NumericError, TrainingDivergedError
from .nn import Adam, ParamStore
from .rng import derive_seed, make_rng

Array = np.ndarray

ARCHITECTURES = ("realnvp", "maf", "arqs")

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class TrainConfig:
    """Architecture-independent hyperparameters and the run seed."""

    n_bijectors: int = 2
    hidden_sizes: tuple[int, ...] = (64, 64)
    n_train: int = 50_000
    batch_size: int = 1024
    n_stages: int = 3
    max_epochs_per_stage: int = 300
    patience: int = 30
    lr_initial: float = 1e-3
    lr_decay: float = 0.1
    val_fraction: float = 0.1
    spline_bins: int = 8
    spline_bound: float = 12.0
    permutation: str = "random"
    seed: int = 0

    def __post_init__(self) -> None:
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if self.n_bijectors < 1:
            raise ConfigError(f"n_bijectors must be >= 1, got {self.n_bijectors}")
        if any(h < 1 for h in self.hidden_sizes) or not self.hidden_sizes:
            raise ConfigError(f"hidden_sizes must be positive, got {self.hidden_sizes}")
        if self.n_train < 10:
            raise ConfigError(f"n_train must be >= 10, got {self.n_train}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.n_stages < 1 or self.max_epochs_per_stage < 1 or self.patience < 1:
            raise ConfigError("stages, epochs per stage, and patience must be >= 1")
        if not (0.0 < self.val_fraction < 0.5):
            raise ConfigError(f"val_fraction must be in (0, 0.5), got {self.val_fraction}")
        if self.spline_bins < 1 or self.spline_bound <= 0:
            raise ConfigError("spline_bins must be >= 1 and spline_bound positive")
        if self.permutation not in ("random", "reverse"):
            raise ConfigError(f"permutation must be 'random' or 'reverse', got {self.permutation!r}")


def _draw_permutation(dim: int, kind: str, seed: int) -> Array:
    if dim == 1 or kind == "reverse":
        return np.arange(dim)[::-1].copy()
    rng = make_rng(seed)
    while True:
        perm = rng.permutation(dim)
        if not np.array_equal(perm, np.arange(dim)):
            return perm


class FlowModel:
    """Base standard normal pushed through a bijector chain."""

    def __init__(
        self,
        architecture: str,
        chain: Chain,
        store: ParamStore,
        config: TrainConfig,
    ) -> None:
        self.architecture = architecture
        self.chain = chain
        self.store = store
        self.config = config
        self.dim = chain.dim
        self.base = StandardNormal(self.dim)

    def _base_log_prob_var(self, z: Var) -> Var:
        quad = engine.vsum(z * z, axis=1)
        return quad * (-0.5) + (-0.5 * self.dim * _LOG_2PI)

    def log_prob_var(self, y: Var) -> Var:
        """Differentiable log-density of data points under the flow."""
        z, log_det = self.chain.inverse(y)
        return self._base_log_prob_var(z) + log_det

    def log_prob(self, x: Array, chunk_size: int = 16_384) -> Array:
        """Exact log-density, evaluated in memory-bounded chunks."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape[0])
        for lo in range(0, x.shape[0], chunk_size):
            hi = min(lo + chunk_size, x.shape[0])
            out[lo:hi] = self.log_prob_var(Var(x[lo:hi])).data
        return out

    def sample(self, n: int, seed: int, chunk_size: int = 16_384) -> Array:
        """Push base draws through the chain; same seed, same samples."""
        z = make_rng(seed).standard_normal((n, self.dim))
        out = np.empty_like(z)
        for lo in range(0, n, chunk_size):
            hi = min(lo + chunk_size, n)
            y, _ = self.chain.forward(Var(z[lo:hi]))
            out[lo:hi] = y.data
        return out


def build_flow(architecture: str, dim: int, config: TrainConfig) -> FlowModel:
    """Assemble an initialized flow: bijectors interleaved with permutations.

    Initialization and permutation draws derive from config.seed; the final
    conditioner layers are zero-initialized, so the fresh flow is the
    identity map and its samples are base samples.
    """
    if architecture not in ARCHITECTURES:
        raise ConfigError(
            f"unknown architecture {architecture!r}, expected one of {ARCHITECTURES}"
        )
    if dim < 1:
        raise ContractError(f"dim must be >= 1, got {dim}")
    store = ParamStore()
    rng = make_rng(derive_seed(config.seed, "init"))
    hidden = list(config.hidden_sizes)
    bijectors: list[Bijector] = []
    for i in range(config.n_bijectors):
        if i > 0:
            perm = _draw_permutation(
                dim, config.permutation, derive_seed(config.seed, "perm", i)
            )
            bijectors.append(Permutation(dim, perm))
        name = f"b{i}"
        if architecture == "realnvp":
            bijectors.append(AffineCoupling(store, name, dim, hidden, rng))
        elif architecture == "maf":
            bijectors.append(AffineAutoregressive(store, name, dim, hidden, rng))
        else:
            bijectors.append(
                SplineAutoregressive(
                    store,
                    name,
                    dim,
                    hidden,
                    rng,
                    n_bins=config.spline_bins,
                    bound=config.spline_bound,
                )
            )
    return FlowModel(architecture, Chain(bijectors, dim=dim), store, config)


def nll_loss(model: FlowModel, batch: Array) -> Var:
    """Mean negative log-likelihood of a batch; differentiable.

    Raises TrainingDivergedError if the loss is non-finite.
    """
    batch = np.asarray(batch, dtype=np.float64)
    loss = engine.vmean(-model.log_prob_var(Var(batch)))
    if not np.isfinite(loss.data):
        raise TrainingDivergedError("non-finite training loss")
    return loss


class EarlyStopper:
    """Patience logic on validation values; keeps the best snapshot.

    An epoch improves only if strictly below the best seen. should_stop
    becomes true once `patience` consecutive epochs fail to improve, i.e.
    at epoch (last improvement + patience).
    """

    def __init__(self, patience: int) -> None:
        self.patience = patience
        self.best_value = np.inf
        self.best_params: Array | None = None
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, value: float, params: Array) -> bool:
        if value < self.best_value:
            self.best_value = value
            self.best_params = params.copy()
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


@dataclass
class StageReport:
    lr: float
    epochs_run: int
    train_nll: list[float]
    val_nll: list[float]
    best_epoch: int
    best_val_nll: float
    stop_reason: str
    seconds: float


@dataclass
class TrainReport:
    status: str
    n_params: int
    stages: list[StageReport] = field(default_factory=list)
    final_val_nll: float = np.nan
    total_seconds: float = 0.0
    diverged_batch: int | None = None
    checkpoint_path: str | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out["stages"] = [asdict(s) for s in self.stages]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TrainReport":
        stages = [StageReport(**s) for s in obj.get("stages", [])]
        rest = {k: v for k, v in obj.items() if k != "stages"}
        return cls(stages=stages, **rest)


def _dataset_nll(model: FlowModel, data: Array, chunk_size: int = 8_192) -> float:
    """Mean NLL over a dataset, computed off-tape in chunks."""
    total = 0.0
    for lo in range(0, data.shape[0], chunk_size):
        hi = min(lo + chunk_size, data.shape[0])
        total += -model.log_prob_var(Var(data[lo:hi])).data.sum()
    return float(total / data.shape[0])


def train(
    model: FlowModel,
    target,
    config: TrainConfig | None = None,
    checkpoint_path=None,
    verbose: bool = False,
) -> TrainReport:
    """Staged maximum-likelihood training against an exact-sampling target.

    Draws n_train samples from the target, holds out val_fraction of them,
    and runs the staged Adam loop described in the module docstring. On a
    non-finite loss or gradient the report comes back with status
    "diverged" and the best parameters seen so far are restored; otherwise
    status is "completed". If checkpoint_path is given, the final
    parameters, layout, and rebuild metadata are written there.
    """
    config = config or model.config
    if target.dim != model.dim:
        raise ContractError(f"target dim {target.dim} != model dim {model.dim}")
    t_start = time.perf_counter()
    data = target.sample(config.n_train, derive_seed(config.seed, "data")).data
    n_val = max(1, int(round(config.val_fraction * data.shape[0])))
    order = make_rng(derive_seed(config.seed, "split")).permutation(data.shape[0])
    val_data = data[order[:n_val]]
    train_data = data[order[n_val:]]
    n_train = train_data.shape[0]

    report = TrainReport(status="completed", n_params=model.store.n_params)
    shuffle_root = derive_seed(config.seed, "shuffle")
    diverged = False

    for stage in range(config.n_stages):
        lr = config.lr_initial * config.lr_decay**stage
        optimizer = Adam(model.store, lr=lr)
        stopper = EarlyStopper(config.patience)
        # the stage's entry parameters are a restore candidate too
        stopper.update(0, _dataset_nll(model, val_data), model.store.get_values())
        stage_report = StageReport(
            lr=lr,
            epochs_run=0,
            train_nll=[],
            val_nll=[],
            best_epoch=0,
            best_val_nll=stopper.best_value,
            stop_reason="max_epochs",
            seconds=0.0,
        )
        t_stage = time.perf_counter()
        for epoch in range(1, config.max_epochs_per_stage + 1):
            epoch_rng = make_rng(derive_seed(shuffle_root, stage, epoch))
            order = epoch_rng.permutation(n_train)
            loss_sum = 0.0
            try:
                for bi, lo in enumerate(range(0, n_train, config.batch_size)):
                    batch = train_data[order[lo : lo + config.batch_size]]
                    with Tape() as tape:
                        loss = nll_loss(model, batch)
                        grads = tape.gradient(loss, model.store)
                    optimizer.step(grads)
                    loss_sum += float(loss.data) * batch.shape[0]
            except (TrainingDivergedError, NumericError) as exc:
                report.diverged_batch = bi
                stage_report.stop_reason = f"diverged: {exc}"
                diverged = True
                break
            train_nll = loss_sum / n_train
            val_nll = _dataset_nll(model, val_data)
            stage_report.train_nll.append(train_nll)
            stage_report.val_nll.append(val_nll)
            stage_report.epochs_run = epoch
            if verbose:
                print(
                    f"stage {stage} epoch {epoch}: train {train_nll:.5f}"
                    f" val {val_nll:.5f}"
                )
            if not np.isfinite(val_nll):
                stage_report.stop_reason = "diverged: non-finite validation NLL"
                diverged = True
                break
            if stopper.update(epoch, val_nll, model.store.get_values()):
                stage_report.stop_reason = "patience"
                break
        if stopper.best_params is not None:
            model.store.set_values(stopper.best_params)
        stage_report.best_epoch = stopper.best_epoch
        stage_report.best_val_nll = float(stopper.best_value)
        stage_report.seconds = time.perf_counter() - t_stage
        report.stages.append(stage_report)
        if diverged:
            report.status = "diverged"
            break

    report.final_val_nll = float(report.stages[-1].best_val_nll)
    report.total_seconds = time.perf_counter() - t_start
    if checkpoint_path is not None:
        meta = {
            "architecture": model.architecture,
            "dim": model.dim,
            "config": asdict(config),
        }
        path = save_checkpoint(checkpoint_path, model.store.values, model.store.layout(), meta)
        report.checkpoint_path = str(path)
    return report


def flow_sample(model: FlowModel, n: int, seed: int) -> SampleSet:
    """Draw n flow samples as a SampleSet with provenance 'flow'."""
    return SampleSet(model.sample(n, seed), "flow", seed)


def flow_log_prob(model: FlowModel, x: Array) -> Array:
    """Exact flow log-density at arbitrary points."""
    return model.log_prob(np.asarray(x, dtype=np.float64))


def load_flow(path) -> FlowModel:
    """Rebuild a flow from a training checkpoint and restore its parameters."""
    values, layout, meta = load_checkpoint(path)
    cfg_dict = dict(meta["config"])
    cfg_dict["hidden_sizes"] = tuple(cfg_dict["hidden_sizes"])
    config = TrainConfig(**cfg_dict)
    model = build_flow(meta["architecture"], int(meta["dim"]), config)
    if model.store.layout() != layout:
        raise ContractError("checkpoint layout does not match the rebuilt model")
    model.store.set_values(values)
    return model
