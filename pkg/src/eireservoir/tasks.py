"""
Benchmark signal generators: delayed recall (memory capacity), NARMA-10,
Mackey-Glass and partially observed Lorenz.

Every generator is a pure function of its arguments and seed.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)


class IntegrationError(ArithmeticError):
    pass


class Task(str, enum.Enum):
    MEMORY = "MemoryCapacity"
    NARMA10 = "Narma10"
    MACKEY_GLASS = "MackeyGlass"
    LORENZ = "Lorenz"


@dataclass
class TaskData:
    """Input series ``u`` and target ``y`` for one task instance.

    For the memory task ``y`` has shape (T, d_max) with NaN where the delayed
    value does not exist.  ``normalization`` holds the ``(min, max)`` used for
    [0, 1] scaling of chaotic series, or ``None``.
    """

    task: Task
    u: np.ndarray
    y: np.ndarray
    dt_sample: float = 1.0
    normalization: Optional[tuple] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def mean_input(self) -> float:
        """Mean input used by one-step design; analytic where it is known."""
        if self.task is Task.MEMORY:
            return 0.5
        if self.task is Task.NARMA10:
            return 0.25
        return float(np.mean(self.u))

    def denormalize(self, values):
        if self.normalization is None:
            return np.asarray(values)
        lo, hi = self.normalization
        return np.asarray(values) * (hi - lo) + lo

    def to_csv(self, path) -> None:
        """CSV with ``time,u,y`` columns (memory: one ``y_d`` column per delay).

        The first line is a ``#``-prefixed JSON header with task metadata.
        """
        header = {
            "task": self.task.value,
            "dt_sample": self.dt_sample,
            "normalization": list(self.normalization) if self.normalization else None,
            "seed": self.seed,
        }
        y = self.y if self.y.ndim == 2 else self.y[:, None]
        ycols = [f"y_{d + 1}" for d in range(y.shape[1])] if self.y.ndim == 2 else ["y"]
        with open(path, "w", newline="") as f:
            f.write("# " + json.dumps(header) + "\n")
            writer = csv.writer(f)
            writer.writerow(["time", "u", *ycols])
            for t in range(self.u.size):
                writer.writerow([repr(t * self.dt_sample), repr(float(self.u[t])), *(repr(float(v)) for v in y[t])])

    @classmethod
    def from_csv(cls, path) -> TaskData:
        with open(path) as f:
            header = json.loads(f.readline()[1:])
            rows = list(csv.reader(f))
        cols = rows[0]
        data = np.array(rows[1:], dtype=float)
        y = data[:, 2:]
        if cols[2:] == ["y"]:
            y = y[:, 0]
        norm = header["normalization"]
        return cls(Task(header["task"]), data[:, 1], y, header["dt_sample"],
                   tuple(norm) if norm else None, header["seed"])


def normalize(x):
    """Affine map of ``x`` onto [0, 1]; returns ``(scaled, (min, max))``."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        raise ValueError("cannot normalize a constant series")
    return (x - lo) / (hi - lo), (lo, hi)


def delay_targets(u, d_max: int) -> np.ndarray:
    """Matrix whose column ``d-1`` is ``u`` delayed by ``d`` (NaN-padded)."""
    u = np.asarray(u, dtype=float)
    Y = np.full((u.size, d_max), np.nan)
    for d in range(1, d_max + 1):
        Y[d:, d - 1] = u[:-d]
    return Y


def gen_memory_input(length: int, d_max: int = 70, seed=None) -> TaskData:
    """i.i.d. uniform [0, 1] input with delayed-recall targets for d = 1..d_max."""
    if length <= d_max:
        raise ValueError(f"length ({length}) must exceed d_max ({d_max})")
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, length)
    return TaskData(Task.MEMORY, u, delay_targets(u, d_max), 1.0, None, seed, {"d_max": d_max})


def narma10_series(u, p=0.3, q=0.05, g=1.5, D=0.1, order=10) -> np.ndarray:
    """NARMA output for input ``u``; the first ``order`` outputs are zero.

    y(t) = p*y(t-1) + q*y(t-1)*sum_{i=1..order} y(t-i) + g*u(t-order)*u(t-1) + D
    """
    u = np.asarray(u, dtype=float)
    y = np.zeros(u.size)
    for t in range(order, u.size):
        y[t] = (p * y[t - 1] + q * y[t - 1] * y[t - order:t].sum()
                + g * u[t - order] * u[t - 1] + D)
    return y


def gen_narma10(length: int, seed=None, max_retries: int = 20) -> TaskData:
    """NARMA-10 with input uniform on [0, 0.5]; input is ``u``, target is ``y``.

    A diverging realization (|y| > 10) is regenerated from a derived seed; the
    number of retries is stored in ``meta["retries"]``.
    """
    if length <= 10:
        raise ValueError("length must exceed 10")
    ss = np.random.SeedSequence(seed)
    for attempt in range(max_retries + 1):
        rng = np.random.default_rng(ss if attempt == 0 else ss.spawn(1)[0])
        u = rng.uniform(0.0, 0.5, length)
        with np.errstate(over="ignore", invalid="ignore"):
            y = narma10_series(u)
        if np.all(np.isfinite(y)) and np.max(np.abs(y)) <= 10:
            if attempt:
                logger.info("NARMA-10 regenerated %d time(s) after divergence", attempt)
            return TaskData(Task.NARMA10, u, y, 1.0, None, seed, {"retries": attempt})
    raise IntegrationError("NARMA-10 diverged on every retry")


def mackey_glass_rhs(x, x_tau, xi=0.2, gamma=0.1, n=10):
    return xi * x_tau / (1.0 + x_tau**n) - gamma * x


def integrate_mackey_glass(n_samples: int, dt=0.1, tau=17.0, xi=0.2, gamma=0.1, n=10,
                           history=1.2) -> np.ndarray:
    """RK4 integration of the Mackey-Glass delay equation.

    The delay must be a whole number of steps.  Delayed values at RK4
    half-steps are linear interpolations of neighbouring stored samples.
    ``history`` is the constant (or array of length ``tau/dt + 1``) initial
    segment; the returned array starts at the last history sample.
    """
    lag = tau / dt
    m = int(round(lag))
    if abs(lag - m) > 1e-9 or m < 1:
        raise ValueError(f"tau/dt must be a positive integer, got {lag}")
    hist = np.broadcast_to(np.asarray(history, dtype=float), (m + 1,))
    x = np.empty(m + n_samples)
    x[: m + 1] = hist
    for k in range(m, m + n_samples - 1):
        xk = x[k]
        d0 = x[k - m]
        d1 = x[k - m + 1]
        dh = 0.5 * (d0 + d1)
        k1 = mackey_glass_rhs(xk, d0, xi, gamma, n)
        k2 = mackey_glass_rhs(xk + 0.5 * dt * k1, dh, xi, gamma, n)
        k3 = mackey_glass_rhs(xk + 0.5 * dt * k2, dh, xi, gamma, n)
        k4 = mackey_glass_rhs(xk + dt * k3, d1, xi, gamma, n)
        x[k + 1] = xk + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(x[k + 1]):
            raise IntegrationError(f"Mackey-Glass state non-finite at step {k + 1 - m}")
    return x[m:]


def _one_step_pairs(task, series, dt, norm, seed, meta) -> TaskData:
    return TaskData(task, series[:-1], series[1:], dt, norm, seed, meta)


def gen_mackey_glass(length: int, seed=None, dt=0.1, tau=17.0, xi=0.2, gamma=0.1, n=10,
                     history=1.2, transient=10_000, history_jitter=0.0) -> TaskData:
    """Normalized Mackey-Glass series as one-step-ahead pairs.

    ``length`` is the number of (u, y) pairs.  The integration step equals the
    sampling step.  ``history_jitter`` adds a seed-dependent uniform offset in
    ``[-jitter, jitter]`` to the constant initial history; with the default of
    zero the series does not depend on ``seed``.
    """
    if history_jitter:
        rng = np.random.default_rng(seed)
        history = history + rng.uniform(-history_jitter, history_jitter)
    x = integrate_mackey_glass(transient + length + 1, dt, tau, xi, gamma, n, history)
    x = x[transient:]
    scaled, norm = normalize(x)
    meta = {"tau": tau, "xi": xi, "gamma": gamma, "n": n, "transient": transient}
    return _one_step_pairs(Task.MACKEY_GLASS, scaled, dt, norm, seed, meta)


def lorenz_rhs(s, a=10.0, b=28.0, c=8.0 / 3.0):
    x, y, z = s
    return np.array([a * (y - x), -x * z + b * x - y, x * y - c * z])


def integrate_lorenz(state0, dt: float, n_steps: int, a=10.0, b=28.0, c=8.0 / 3.0,
                     every: int = 1) -> np.ndarray:
    """Classical RK4; returns states at every ``every``-th step, starting with ``state0``."""
    x, y, z = (float(v) for v in state0)
    out = np.empty((n_steps // every + 1, 3))
    out[0] = x, y, z
    h2 = 0.5 * dt
    h6 = dt / 6.0
    j = 1
    # scalar arithmetic: small-array numpy overhead dominates otherwise
    for k in range(1, n_steps + 1):
        k1x = a * (y - x)
        k1y = -x * z + b * x - y
        k1z = x * y - c * z
        x2, y2, z2 = x + h2 * k1x, y + h2 * k1y, z + h2 * k1z
        k2x = a * (y2 - x2)
        k2y = -x2 * z2 + b * x2 - y2
        k2z = x2 * y2 - c * z2
        x3, y3, z3 = x + h2 * k2x, y + h2 * k2y, z + h2 * k2z
        k3x = a * (y3 - x3)
        k3y = -x3 * z3 + b * x3 - y3
        k3z = x3 * y3 - c * z3
        x4, y4, z4 = x + dt * k3x, y + dt * k3y, z + dt * k3z
        k4x = a * (y4 - x4)
        k4y = -x4 * z4 + b * x4 - y4
        k4z = x4 * y4 - c * z4
        x += h6 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += h6 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        z += h6 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        if k % every == 0:
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
                raise IntegrationError(f"Lorenz state non-finite at step {k}")
            out[j] = x, y, z
            j += 1
    return out


def gen_lorenz(length: int, seed=None, dt=0.01, sample_every=2, a=10.0, b=28.0, c=8.0 / 3.0,
               transient=5_000, perturbation=1e-3) -> TaskData:
    """Normalized Lorenz ``x`` coordinate as one-step-ahead pairs.

    Integration starts at (1, 1, 1) plus a seed-dependent perturbation of norm
    ``perturbation``; ``transient`` samples are dropped.
    """
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=3)
    state0 = np.ones(3) + perturbation * direction / np.linalg.norm(direction)
    n_samples = transient + length + 1
    traj = integrate_lorenz(state0, dt, (n_samples - 1) * sample_every, a, b, c, every=sample_every)
    x = traj[transient:, 0]
    scaled, norm = normalize(x)
    meta = {"a": a, "b": b, "c": c, "transient": transient, "dt_integration": dt}
    return _one_step_pairs(Task.LORENZ, scaled, dt * sample_every, norm, seed, meta)


def generate(task, length: int, seed=None, **kwargs) -> TaskData:
    task = Task(task)
    if task is Task.MEMORY:
        return gen_memory_input(length, seed=seed, **kwargs)
    if task is Task.NARMA10:
        return gen_narma10(length, seed=seed, **kwargs)
    if task is Task.MACKEY_GLASS:
        return gen_mackey_glass(length, seed=seed, **kwargs)
    return gen_lorenz(length, seed=seed, **kwargs)
