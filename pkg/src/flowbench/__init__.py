"""Normalizing-flow density estimation on toy targets, plus a benchmark
harness for comparing architectures with nonparametric two-sample metrics.
"""

from .bench import RunSpec, execute, execute_run, load_config, plan, report
from .bijectors import (
    AffineAutoregressive,
    AffineCoupling,
    Bijector,
    Chain,
    Permutation,
    SplineAutoregressive,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .distributions import (
    CorrelatedGaussian,
    MixtureOfGaussians,
    SampleSet,
    StandardNormal,
    make_target,
    random_correlation_matrix,
    target_from_json,
)
from .engine import Tape, Var, numeric_gradient
from .errors import (
    ConfigError,
    ContractError,
    GenerationError,
    NumericError,
    ShapeError,
    TrainingDivergedError,
)
from .metrics import (
    KsResult,
    MetricConfig,
    MetricReport,
    compute_metric_report,
    f_norm_corr,
    kolmogorov_sf,
    ks_two_sample,
    wasserstein_1d,
)
from .nn import MLP, Adam, MaskedMLP, ParamStore, glorot_uniform, made_masks
from .splines import RqsParams, rqs_eval, rqs_invert, rqs_param_decode
from .training import (
    ARCHITECTURES,
    EarlyStopper,
    FlowModel,
    TrainConfig,
    TrainReport,
    build_flow,
    flow_log_prob,
    flow_sample,
    load_flow,
    nll_loss,
    train,
)

__version__ = "0.1.0"
