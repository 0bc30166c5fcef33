"""Excitatory-inhibitory rate reservoirs with homeostatic inhibitory plasticity."""

from .balance import (
    AdaptationConfig,
    AdaptationTrace,
    DivergedError,
    TargetRates,
    UnreachableTargetWarning,
    adapt,
    adapt_step,
    design_one_step,
    sample_targets,
)
from .core import (
    BalanceMode,
    ConfigError,
    Dale,
    EIReservoir,
    InputError,
    NetworkConfig,
    build_reservoir,
    global_balance,
    inverse_sigmoid,
    load_reservoir,
    local_balance,
    mu_inhibitory,
    run_open_loop,
    save_reservoir,
    sigmoid,
    step,
)
from .evaluation import Evaluation, dynamics_summary, evaluate
from .experiments import Experiment, ExperimentSpec, Mode, parse_config, run_experiment
from .metrics import (
    Regime,
    RegimeLabel,
    classify_regime,
    kl_entropy,
    mean_pairwise_correlation,
    memory_capacity,
    nrmse,
    r_squared,
    rmse,
    vpt,
)
from .readout import Readout, SplitSpec, predict_closed_loop, predict_open_loop, train_ridge
from .tasks import Task, TaskData, generate

__version__ = "0.1.0"

__all__ = [
    "AdaptationConfig", "AdaptationTrace", "BalanceMode", "ConfigError", "Dale", "DivergedError",
    "EIReservoir", "Evaluation", "Experiment", "ExperimentSpec", "InputError", "Mode", "NetworkConfig",
    "Readout", "Regime", "RegimeLabel", "SplitSpec", "TargetRates", "Task", "TaskData",
    "UnreachableTargetWarning", "adapt", "adapt_step", "build_reservoir", "classify_regime",
    "design_one_step", "dynamics_summary", "evaluate", "generate", "global_balance", "inverse_sigmoid",
    "kl_entropy", "load_reservoir", "local_balance", "mean_pairwise_correlation", "memory_capacity",
    "mu_inhibitory", "nrmse", "parse_config", "predict_closed_loop", "predict_open_loop", "r_squared",
    "rmse", "run_experiment", "run_open_loop", "sample_targets", "save_reservoir", "sigmoid", "step",
    "train_ridge", "vpt",
]
