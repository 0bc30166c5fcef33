"""
Evaluation quantities: delayed-recall R^2 and memory capacity, (N)RMSE,
valid prediction time, nearest-neighbour differential entropy, pairwise
correlation and the dynamical-regime classifier.
"""

from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

SILENT_RATE = 0.05
SATURATED_RATE = 0.95
SYNC_CORR = 0.9


class DegenerateWarning(UserWarning):
    """A metric was evaluated on constant data and fell back to a default."""


def r_squared(truth, pred) -> float:
    """Squared Pearson correlation ``cov^2 / (var_truth * var_pred)``.

    Returns 0.0 with a :class:`DegenerateWarning` if either series is constant.
    """
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape or truth.size < 2:
        raise ValueError("r_squared needs two equal-length series of length >= 2")
    dt = truth - truth.mean()
    dp = pred - pred.mean()
    var_t = np.dot(dt, dt)
    var_p = np.dot(dp, dp)
    if var_t == 0 or var_p == 0:
        warnings.warn("r_squared of a constant series; returning 0", DegenerateWarning, stacklevel=2)
        return 0.0
    return float(min(1.0, np.dot(dt, dp) ** 2 / (var_t * var_p)))


def memory_capacity(r2_by_delay) -> float:
    """Sum of the delayed-recall R^2 profile."""
    return float(np.sum(r2_by_delay))


def rmse(truth, pred) -> float:
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape:
        raise ValueError("rmse needs equal-length series")
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def nrmse(truth, pred) -> float:
    """RMSE divided by the standard deviation of ``truth``."""
    std = float(np.std(truth))
    if std == 0:
        raise ValueError("nrmse undefined for a constant truth series")
    return rmse(truth, pred) / std


def running_nrmse(truth, pred, window: int = 10, scale=None) -> np.ndarray:
    """Trailing-window NRMSE at every index.

    Index ``t`` uses the last ``min(window, t + 1)`` squared errors and is
    normalized by ``scale`` (default: std of the whole ``truth``).
    """
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if scale is None:
        scale = float(np.std(truth))
    if scale == 0:
        raise ValueError("running_nrmse undefined for a constant truth series")
    sq = (truth - pred) ** 2
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    idx = np.arange(sq.size)
    lo = np.maximum(0, idx + 1 - window)
    mse = (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)
    return np.sqrt(mse) / scale


def vpt(truth, pred, threshold: float = 0.4, window: int = 10, scale=None) -> int:
    """Valid prediction time in samples.

    First index at which the trailing-window NRMSE exceeds ``threshold``, or
    the full length if it never does.  A ``pred`` shorter than ``truth``
    (a truncated diverged forecast) counts as failing at its end.
    """
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.size == 0:
        raise ValueError("vpt of an empty series")
    if scale is None:
        scale = float(np.std(truth))
    n = min(truth.size, pred.size)
    if n == 0:
        return 0
    err = running_nrmse(truth[:n], pred[:n], window, scale)
    over = np.flatnonzero(err > threshold)
    if over.size:
        return int(over[0])
    return int(n)


def kl_entropy(samples, with_flag: bool = False):
    """Kozachenko-Leonenko differential entropy of a 1-D sample (nats).

    Uses ``psi(T) - psi(1) + log 2 + mean(log eps_t)`` with ``eps_t`` the
    distance to the nearest other sample.  Zero distances (repeated values)
    are replaced by the smallest positive distance observed.  If every sample
    is identical the result is ``-inf``.  With ``with_flag`` the return value
    is ``(H, replaced_zero_distances)``.
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    T = x.size
    if T < 2:
        raise ValueError("kl_entropy needs at least 2 samples")
    gaps = np.diff(x)
    eps = np.empty(T)
    eps[0] = gaps[0]
    eps[-1] = gaps[-1]
    eps[1:-1] = np.minimum(gaps[:-1], gaps[1:])
    flagged = False
    if np.any(eps == 0):
        positive = gaps[gaps > 0]
        if positive.size == 0:
            return (-np.inf, True) if with_flag else -np.inf
        eps[eps == 0] = positive.min()
        flagged = True
    H = float(digamma(T) - digamma(1) + np.log(2.0) + np.mean(np.log(eps)))
    return (H, flagged) if with_flag else H


def neuron_entropies(states, n_samples: int | None = 10_000) -> np.ndarray:
    """Per-neuron :func:`kl_entropy` over the last ``n_samples`` rows."""
    states = np.asarray(states, dtype=float)
    if n_samples is not None:
        states = states[-n_samples:]
    return np.array([kl_entropy(states[:, i]) for i in range(states.shape[1])])


def _pearson_pairs(states, i, j) -> np.ndarray:
    z = states - states.mean(axis=0)
    z /= np.sqrt((z**2).sum(axis=0))
    return np.einsum("ti,ti->i", z[:, i], z[:, j])


def mean_pairwise_correlation(states, n_pairs: int | None = 1000, seed=None) -> float:
    """Mean Pearson correlation over random distinct neuron pairs.

    Constant neurons are excluded.  ``n_pairs=None`` averages over all pairs.
    """
    states = np.asarray(states, dtype=float)
    if states.shape[0] < 2:
        raise ValueError("need at least 2 time points")
    active = np.flatnonzero(np.ptp(states, axis=0) > 0)
    if active.size < 2:
        raise ValueError("fewer than 2 non-constant neurons")
    X = states[:, active]
    m = active.size
    if n_pairs is None:
        i, j = np.triu_indices(m, 1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, m, n_pairs)
        j = rng.integers(0, m - 1, n_pairs)
        j = j + (j >= i)
    return float(np.mean(_pearson_pairs(X, i, j)))


class Regime(str, enum.Enum):
    SILENT = "Silent"
    SATURATED = "Saturated"
    SYNCHRONIZED = "Synchronized"
    ACTIVE = "Active"


@dataclass
class RegimeLabel:
    label: Regime
    mean_rate: float
    mean_corr: float


def regime_from(mean_rate: float, mean_corr: float) -> Regime:
    if mean_rate < SILENT_RATE:
        return Regime.SILENT
    if mean_rate > SATURATED_RATE:
        return Regime.SATURATED
    if mean_corr > SYNC_CORR:
        return Regime.SYNCHRONIZED
    return Regime.ACTIVE


def classify_regime(states, n_pairs: int | None = 1000, seed=0) -> RegimeLabel:
    """Label post-washout activity as silent, saturated, synchronized or active."""
    states = np.asarray(states, dtype=float)
    mean_rate = float(states.mean())
    try:
        corr = mean_pairwise_correlation(states, n_pairs, seed)
    except ValueError:
        corr = float("nan")
    return RegimeLabel(regime_from(mean_rate, corr), mean_rate, corr)


NEURON_CSV_COLUMNS = ["neuron", "type", "is_input", "mean_rate", "local_balance", "entropy", "output_weight"]


def neuron_diagnostics(res, states, readout=None, n_entropy_samples: int | None = 10_000) -> list:
    """Per-neuron rows: type, input flag, mean rate, local balance, entropy, |W_out|."""
    states = np.asarray(states, dtype=float)
    rates = states.mean(axis=0)
    beta_i = res.local_balance()
    H = neuron_entropies(states, n_entropy_samples)
    if readout is not None:
        w = np.linalg.norm(readout.W_out[: res.n_neurons], axis=1)
    else:
        w = np.full(res.n_neurons, np.nan)
    return [
        {
            "neuron": i,
            "type": "E" if res.is_excitatory[i] else "I",
            "is_input": bool(res.W_in[i] != 0),
            "mean_rate": float(rates[i]),
            "local_balance": float(beta_i[i]),
            "entropy": float(H[i]),
            "output_weight": float(w[i]),
        }
        for i in range(res.n_neurons)
    ]


def write_neuron_diagnostics(rows, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=NEURON_CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
