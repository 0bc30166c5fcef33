"""
Linear readout trained by ridge regression, plus open- and closed-loop
prediction with a trained readout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import EIReservoir


@dataclass
class SplitSpec:
    """Washout / train / test lengths in samples."""

    washout: int = 500
    train_len: int = 20_000
    test_len: int = 5_000

    def __post_init__(self):
        if self.washout < 0 or self.train_len < 1 or self.test_len < 1:
            raise ValueError("washout must be >= 0; train_len and test_len must be >= 1")

    @property
    def total(self) -> int:
        return self.washout + self.train_len + self.test_len

    def check(self, length: int) -> None:
        if self.total > length:
            raise ValueError(f"split needs {self.total} samples, series has {length}")


@dataclass
class Readout:
    """Trained output weights.

    ``W_out`` has shape (N + 1, M) when ``bias`` is set (last row is the
    intercept) and (N, M) otherwise.
    """

    W_out: np.ndarray
    eta: float = 1e-7
    bias: bool = True

    @property
    def n_outputs(self) -> int:
        return self.W_out.shape[1]

    def features(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        if self.bias:
            return np.hstack([states, np.ones((states.shape[0], 1))])
        return states

    def __call__(self, states: np.ndarray) -> np.ndarray:
        X = self.features(states)
        if X.shape[1] != self.W_out.shape[0]:
            raise ValueError(
                f"readout expects {self.W_out.shape[0]} features, got {X.shape[1]}"
            )
        return X @ self.W_out

    def to_arrays(self) -> dict:
        return {
            "readout_W_out": self.W_out,
            "readout_eta": np.array(self.eta),
            "readout_bias": np.array(self.bias),
        }

    @classmethod
    def from_arrays(cls, arrays) -> Readout:
        return cls(
            np.array(arrays["readout_W_out"], dtype=float),
            float(arrays["readout_eta"]),
            bool(arrays["readout_bias"]),
        )


def train_ridge(states, targets, eta: float = 1e-7, bias: bool = True) -> Readout:
    """Solve ``(X^T X + eta I) W = X^T Y`` by Cholesky.

    ``X`` is ``states`` with a constant column appended when ``bias`` is set;
    the intercept is regularized like every other weight.  With ``eta = 0``
    a rank-deficient ``X`` raises :class:`numpy.linalg.LinAlgError`.
    """
    states = np.asarray(states, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if states.shape[0] != Y.shape[0]:
        raise ValueError("states and targets must have the same number of rows")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    ro = Readout(np.empty((0, 0)), eta, bias)
    X = ro.features(states)
    G = X.T @ X
    G[np.diag_indices_from(G)] += eta
    try:
        factor = linalg.cho_factor(G, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"normal equations not positive definite (eta={eta})") from exc
    ro.W_out = linalg.cho_solve(factor, X.T @ Y)
    return ro


def predict_open_loop(res: EIReservoir, ro: Readout, inputs) -> np.ndarray:
    """Drive ``res`` with ``inputs`` and read out every step; shape (T, M)."""
    if ro.W_out.shape[0] != res.n_neurons + int(ro.bias):
        raise ValueError("readout size does not match reservoir")
    states = res.run(inputs)
    return ro(states) if states.shape[0] else np.empty((0, ro.n_outputs))


def predict_closed_loop(res: EIReservoir, ro: Readout, horizon: int) -> tuple:
    """Autonomous prediction feeding each output back as the next input.

    ``res`` must already be synchronized: its current rates are those after
    the last true input.  Returns ``(outputs, diverged)`` where ``outputs`` is
    truncated at the first non-finite value.
    """
    if ro.n_outputs != 1:
        raise ValueError("closed-loop prediction needs a single-output readout")
    if ro.W_out.shape[0] != res.n_neurons + int(ro.bias):
        raise ValueError("readout size does not match reservoir")
    w = ro.W_out[:, 0]
    w_state = w[: res.n_neurons]
    b = w[-1] if ro.bias else 0.0
    out = np.empty(horizon)
    for t in range(horizon):
        y = float(res.r @ w_state + b)
        if not np.isfinite(y):
            return out[:t], True
        out[t] = y
        res.step(y)
    return out, False
