"""
Task-level evaluation of a reservoir: drive, train the readout, score.

Memory capacity and NARMA-10 are scored open-loop; Mackey-Glass and Lorenz
are scored by the valid prediction time of a closed-loop forecast that starts
right after the training span.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .core import EIReservoir
from .readout import Readout, SplitSpec, predict_closed_loop, train_ridge
from .tasks import Task, TaskData

METRIC_NAMES = {
    Task.MEMORY: "memory_capacity",
    Task.NARMA10: "rmse",
    Task.MACKEY_GLASS: "vpt",
    Task.LORENZ: "vpt",
}

# direction of improvement per task metric
HIGHER_IS_BETTER = {
    Task.MEMORY: True,
    Task.NARMA10: False,
    Task.MACKEY_GLASS: True,
    Task.LORENZ: True,
}


@dataclass
class Evaluation:
    task: Task
    metric_name: str
    metric_value: float
    states: np.ndarray
    readout: Readout
    details: dict = field(default_factory=dict)


def evaluate_memory(res: EIReservoir, data: TaskData, split: SplitSpec, eta: float = 1e-7) -> Evaluation:
    """Memory capacity from one multi-target ridge fit over all delays."""
    split.check(data.u.size)
    states = res.run(data.u[: split.total])
    Y = data.y[: split.total]
    train = slice(split.washout, split.washout + split.train_len)
    test = slice(split.washout + split.train_len, split.total)
    rows = np.arange(train.start, train.stop)
    rows = rows[np.all(np.isfinite(Y[rows]), axis=1)]
    ro = train_ridge(states[rows], Y[rows], eta)
    pred = ro(states[test])
    truth = Y[test]
    r2 = np.array([metrics.r_squared(truth[:, d], pred[:, d]) for d in range(truth.shape[1])])
    return Evaluation(Task.MEMORY, "memory_capacity", metrics.memory_capacity(r2),
                      states[split.washout:], ro, {"r2_by_delay": r2})


def evaluate_regression(res: EIReservoir, data: TaskData, split: SplitSpec, eta: float = 1e-7) -> Evaluation:
    """Open-loop one-output regression scored by test RMSE (NARMA-10)."""
    split.check(data.u.size)
    states = res.run(data.u[: split.total])
    train = slice(split.washout, split.washout + split.train_len)
    test = slice(split.washout + split.train_len, split.total)
    ro = train_ridge(states[train], data.y[train], eta)
    pred = ro(states[test])[:, 0]
    return Evaluation(data.task, "rmse", metrics.rmse(data.y[test], pred),
                      states[split.washout:], ro, {"prediction": pred})


def evaluate_forecast(res: EIReservoir, data: TaskData, split: SplitSpec, eta: float = 1e-7,
                      threshold: float = 0.4, window: int = 10) -> Evaluation:
    """Teacher-forced training then autonomous forecast; scored by VPT (samples).

    The readout maps ``r(t)`` to ``y(t) = u(t+1)``.  After driving through the
    training span, the first forecast is the readout of the last driven state,
    so the forecast window is ``y[T-1 : T-1+test_len]`` with
    ``T = washout + train_len``.
    """
    T = split.washout + split.train_len
    if T - 1 + split.test_len > data.y.size:
        raise ValueError("series too short for the requested split")
    states = res.run(data.u[:T])
    train = slice(split.washout, T)
    ro = train_ridge(states[train], data.y[train], eta)
    forecast, diverged = predict_closed_loop(res, ro, split.test_len)
    truth = data.y[T - 1: T - 1 + split.test_len]
    value = metrics.vpt(truth, forecast, threshold, window)
    return Evaluation(data.task, "vpt", float(value), states[split.washout:], ro,
                      {"forecast": forecast, "truth": truth, "diverged": diverged,
                       "vpt_time": value * data.dt_sample})


def evaluate(res: EIReservoir, data: TaskData, split: SplitSpec, eta: float = 1e-7,
             vpt_threshold: float = 0.4, vpt_window: int = 10, reset: bool = True) -> Evaluation:
    """Score ``res`` on ``data``.  Runs on a copy; ``res`` is left untouched."""
    res = res.copy()
    if reset:
        res.reset()
    if data.task is Task.MEMORY:
        return evaluate_memory(res, data, split, eta)
    if data.task is Task.NARMA10:
        return evaluate_regression(res, data, split, eta)
    return evaluate_forecast(res, data, split, eta, vpt_threshold, vpt_window)


def dynamics_summary(states: np.ndarray, n_pairs: int = 1000, seed=0, n_entropy: int = 10_000) -> dict:
    """Mean rate, mean neuron entropy, mean pairwise correlation, regime label
    and the fraction of neurons whose mean rate lies outside (0.05, 0.95)."""
    label = metrics.classify_regime(states, n_pairs, seed)
    rates = states.mean(axis=0)
    extreme = (rates <= metrics.SILENT_RATE) | (rates >= metrics.SATURATED_RATE)
    return {
        "mean_rate": label.mean_rate,
        "mean_entropy": float(np.mean(metrics.neuron_entropies(states, n_entropy))),
        "mean_corr": label.mean_corr,
        "regime": label.label.value,
        "frac_extreme": float(extreme.mean()),
    }
