"""
Local E-I balance: inhibitory adaptation toward target firing rates and the
one-step multiplicative design of inhibitory in-links.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ConfigError, EIReservoir, inverse_sigmoid

logger = logging.getLogger(__name__)


class DivergedError(RuntimeError):
    """Adaptation produced non-finite weights.  ``trace`` holds the records so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class UnreachableTargetWarning(UserWarning):
    pass


@dataclass
class TargetRates:
    """Per-neuron target firing rates.

    ``mode`` is ``"Homogeneous"`` or ``"Heterogeneous"``; ``params`` records
    ``rho_T`` or ``(a, b, seed)`` respectively.
    """

    mode: str
    rho: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if np.any((self.rho <= 0) | (self.rho >= 1)):
            raise ConfigError("target rates must lie strictly inside (0, 1)")


def sample_targets(mode: str, n: int, seed=None, rho_T: float = 0.5, a: float = 9.0, b: float = 9.0) -> TargetRates:
    """Homogeneous targets (all ``rho_T``) or i.i.d. Beta(a, b) draws."""
    if mode == "Homogeneous":
        if not 0.0 < rho_T < 1.0:
            raise ConfigError(f"rho_T must lie in (0, 1), got {rho_T}")
        return TargetRates(mode, np.full(n, float(rho_T)), {"rho_T": rho_T})
    if mode == "Heterogeneous":
        if a <= 0 or b <= 0:
            raise ConfigError("Beta parameters must be positive")
        rng = np.random.default_rng(seed)
        rho = rng.beta(a, b, n)
        # Beta draws can round to exactly 0 or 1 only for extreme a, b
        rho = np.clip(rho, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        return TargetRates(mode, rho, {"a": a, "b": b, "seed": seed})
    raise ConfigError(f"unknown target mode {mode!r}")


@dataclass
class AdaptationConfig:
    """Settings for :func:`adapt`.

    ``input_source`` is a callable ``rng -> float`` producing one drive sample;
    ``seed`` seeds that stream.  ``evaluate`` (optional) is called as
    ``evaluate(res) -> (name, value)`` every ``eval_every`` steps on a frozen
    copy of the reservoir.
    """

    delta: float = 1e-3
    n_steps: int = 20_000
    eval_every: Optional[int] = None
    input_source: Optional[Callable[[np.random.Generator], float]] = None
    seed: int = 0
    evaluate: Optional[Callable[[EIReservoir], tuple]] = None

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigError("delta must be non-negative")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be non-negative")
        if self.eval_every is not None and self.eval_every < 1:
            raise ConfigError("eval_every must be positive")


def uniform_source(low: float = 0.0, high: float = 1.0):
    """Input source drawing i.i.d. uniform values on ``[low, high)``."""
    return lambda rng: rng.uniform(low, high)


def series_source(series):
    """Input source that replays ``series`` cyclically from the start."""
    series = np.asarray(series, dtype=float)
    state = {"t": 0}

    def source(rng):
        u = series[state["t"] % series.size]
        state["t"] += 1
        return u

    return source


def adapt_step(res: EIReservoir, targets, delta: float) -> None:
    """One inhibitory update from the current rates.

    Every inhibitory link into neuron ``i`` moves by
    ``delta * (r_i - rho_i)``, clamped at zero.  Positions without an
    inhibitory link are never touched.
    """
    rho = targets.rho if isinstance(targets, TargetRates) else np.asarray(targets, dtype=float)
    drive = delta * (res.r - rho)
    A_I = res.A_I
    A_I += drive[:, None] * res.inh_links
    np.maximum(A_I, 0.0, out=A_I)


@dataclass
class TraceRecord:
    step: int
    beta: float
    mean_rate: float
    metric_name: str = ""
    metric_value: float = float("nan")


@dataclass
class AdaptationTrace:
    records: list = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "beta", "mean_rate", "metric_name", "metric_value"])
            for r in self.records:
                writer.writerow([r.step, repr(r.beta), repr(r.mean_rate), r.metric_name, repr(r.metric_value)])


def adapt(res: EIReservoir, targets: TargetRates, cfg: AdaptationConfig, log_every: int = 100) -> AdaptationTrace:
    """Run the dynamics with one inhibitory update per step.

    The trace gets a record every ``log_every`` steps (global balance and the
    mean rate over that block) plus a metric record every ``cfg.eval_every``
    steps when ``cfg.evaluate`` is set.  Evaluation runs on a copy, so the
    adapting reservoir is frozen during it.
    """
    rng = np.random.default_rng(cfg.seed)
    source = cfg.input_source or uniform_source()
    rho = targets.rho
    trace = AdaptationTrace()

    def evaluate(t):
        name, value = cfg.evaluate(res.copy())
        trace.append(TraceRecord(t, res.global_balance(), float(res.r.mean()), name, float(value)))

    if cfg.evaluate is not None and cfg.eval_every:
        evaluate(0)

    A_I = res.A_I
    inh = res.inh_links.astype(float)
    rate_sum = np.zeros_like(res.r)
    block = 0
    for t in range(1, cfg.n_steps + 1):
        res.step(source(rng))
        if cfg.delta:
            drive = cfg.delta * (res.r - rho)
            A_I += drive[:, None] * inh
            np.maximum(A_I, 0.0, out=A_I)
        rate_sum += res.r
        block += 1
        if t % log_every == 0 or t == cfg.n_steps:
            if not np.all(np.isfinite(A_I)):
                raise DivergedError(f"non-finite inhibitory weights at step {t}", trace)
            trace.append(TraceRecord(t, res.global_balance(), float(rate_sum.mean() / block)))
            rate_sum[:] = 0.0
            block = 0
        if cfg.evaluate is not None and cfg.eval_every and t % cfg.eval_every == 0:
            evaluate(t)
    return trace


@dataclass
class DesignReport:
    omega: np.ndarray
    clamped: list
    unreachable: list


def design_factors(res: EIReservoir, targets, mean_input: float) -> tuple:
    """Per-neuron inhibitory scale factors that put ``targets`` at steady state.

    Returns ``(omega, numerator, denominator)``; ``omega`` is NaN where the
    denominator vanishes.
    """
    rho = targets.rho if isinstance(targets, TargetRates) else np.asarray(targets, dtype=float)
    numer = inverse_sigmoid(rho, res.c) + res.theta - res.W_in * mean_input - res.A_E @ rho
    # inhibition enters the potential as -A_I @ rho
    denom = -(res.A_I @ rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(denom != 0, numer / np.where(denom != 0, denom, 1.0), np.nan)
    return omega, numer, denom


def design_one_step(res: EIReservoir, targets, mean_input: float) -> tuple:
    """Rescale each neuron's inhibitory in-links in one shot.

    Returns ``(designed_reservoir, report)``.  Neurons needing a negative
    factor get their inhibitory row zeroed; neurons without inhibitory input
    but a nonzero requirement are left unchanged.  Both cases are listed in
    the report and raise an :class:`UnreachableTargetWarning`.
    """
    if np.any(res.A_I < 0):
        raise ValueError("design requires non-negative inhibitory magnitudes")
    omega, numer, denom = design_factors(res, targets, mean_input)
    unreachable = np.flatnonzero((denom == 0) & (numer != 0)).tolist()
    clamped = np.flatnonzero(omega < 0).tolist()
    scale = np.where(np.isnan(omega), 1.0, np.maximum(omega, 0.0))
    out = res.copy()
    out.A_I = res.A_I * scale[:, None]
    out.reset()
    if unreachable or clamped:
        warnings.warn(
            f"design: {len(clamped)} neuron(s) clamped to zero inhibition, "
            f"{len(unreachable)} without inhibitory input",
            UnreachableTargetWarning,
            stacklevel=2,
        )
    return out, DesignReport(omega, clamped, unreachable)
