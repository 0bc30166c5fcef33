"""
Excitatory-inhibitory reservoir: construction and rate dynamics.

The reservoir keeps excitatory and inhibitory couplings in two non-negative
matrices, ``A_E`` and ``A_I``; the effective connectivity is ``A_E - A_I``.
Entry ``(i, j)`` is the link from neuron ``j`` to neuron ``i``.  Each update is

    V <- leak * V + (A_E - A_I) @ r + W_in * u
    r <- sigmoid(V - theta, c)

and both lines use the previous ``r`` (synchronous update).
"""

from __future__ import annotations

import copy
import enum
import io
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import expit, logit

FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Invalid network or experiment parameters."""


class InputError(ValueError):
    """Non-finite or malformed input signal."""


class BalanceMode(str, enum.Enum):
    LINK_STRENGTH = "LinkStrength"
    INHIB_FRACTION = "InhibFraction"


class Dale(str, enum.Enum):
    RESPECT = "Respect"
    SHUFFLED = "Shuffled"


@dataclass
class NetworkConfig:
    """All parameters that determine a reservoir.

    ``mu_E``, ``sigma_E`` and ``sigma_I`` default to ``None`` and are resolved
    from the other fields: ``mu_E = 1/(k*f_E)``, ``sigma_E = 0.2*mu_E`` and
    ``sigma_I = sigma_E``.

    In ``InhibFraction`` mode the inhibitory mean is fixed at
    ``inhib_strength_ratio * mu_E`` and ``beta`` is ignored; the global balance
    then follows from ``excit_fraction`` (see :func:`excit_fraction_for_balance`).
    """

    n_neurons: int = 500
    excit_fraction: float = 0.8
    mean_degree: float = 50.0
    mu_E: float | None = None
    sigma_E: float | None = None
    beta: float = 0.0
    sigma_I: float | None = None
    alpha: float = 1.0
    theta: float = 0.0
    sigmoid_steepness: float = 10.0
    leak: float = 0.0
    input_fraction: float = 0.3
    input_spread: float = 0.016
    balance_mode: BalanceMode = BalanceMode.LINK_STRENGTH
    inhib_strength_ratio: float = 4.0
    dale: Dale = Dale.RESPECT
    seed: int = 0

    def __post_init__(self):
        self.balance_mode = BalanceMode(self.balance_mode)
        self.dale = Dale(self.dale)
        self.n_neurons = int(self.n_neurons)
        self.seed = int(self.seed)

    def validate(self) -> NetworkConfig:
        if self.n_neurons < 1:
            raise ConfigError("n_neurons must be positive")
        if not 0.0 < self.excit_fraction < 1.0:
            raise ConfigError("excit_fraction must lie in (0, 1)")
        if not 0.0 < self.mean_degree <= self.n_neurons:
            raise ConfigError(
                f"mean_degree must lie in (0, n_neurons]; got {self.mean_degree} "
                f"for n_neurons={self.n_neurons}"
            )
        if self.sigmoid_steepness <= 0:
            raise ConfigError("sigmoid_steepness must be positive")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if not 0.0 <= self.leak <= 1.0:
            raise ConfigError("leak must lie in [0, 1]")
        if not 0.0 < self.input_fraction <= 1.0:
            raise ConfigError("input_fraction must lie in (0, 1]")
        if self.input_spread < 0:
            raise ConfigError("input_spread must be non-negative")
        if self.mu_E is not None and self.mu_E <= 0:
            raise ConfigError("mu_E must be positive")
        for name in ("sigma_E", "sigma_I"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return self

    def resolved(self) -> NetworkConfig:
        """Copy with every defaulted (``None``) field filled in."""
        mu_E = self.mu_E if self.mu_E is not None else 1.0 / (self.mean_degree * self.excit_fraction)
        sigma_E = self.sigma_E if self.sigma_E is not None else 0.2 * mu_E
        sigma_I = self.sigma_I if self.sigma_I is not None else sigma_E
        return replace(self, mu_E=mu_E, sigma_E=sigma_E, sigma_I=sigma_I)

    @property
    def mu_I(self) -> float:
        """Mean magnitude of inhibitory links (before ``alpha`` scaling)."""
        cfg = self.resolved()
        if cfg.balance_mode is BalanceMode.INHIB_FRACTION:
            return cfg.inhib_strength_ratio * cfg.mu_E
        return mu_inhibitory(cfg.excit_fraction, cfg.mu_E, cfg.beta, cfg.mean_degree)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["balance_mode"] = self.balance_mode.value
        d["dale"] = self.dale.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> NetworkConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown network config keys: {sorted(unknown)}")
        return cls(**d)


def mu_inhibitory(f_E: float, mu_E: float, beta: float, k: float) -> float:
    """Inhibitory link magnitude giving global balance ``beta``.

    Returns ``(f_E*mu_E - beta/k) / (1 - f_E)``.  A negative result means the
    nominally inhibitory population acts excitatory (strongly over-excited
    networks).
    """
    if f_E == 1:
        raise ZeroDivisionError("excitatory fraction of 1 leaves no inhibitory population")
    if k <= 0:
        raise ConfigError("mean degree must be positive")
    return (f_E * mu_E - beta / k) / (1.0 - f_E)


def excit_fraction_for_balance(beta: float, mu_E: float, strength_ratio: float, k: float) -> float:
    """Excitatory fraction that yields ``beta`` when link strengths are fixed.

    Expected balance is ``k*mu_E*(f_E - (1 - f_E)*strength_ratio)``; this
    inverts it for ``f_E``.
    """
    f_E = (beta / (k * mu_E) + strength_ratio) / (1.0 + strength_ratio)
    if not 0.0 < f_E < 1.0:
        raise ConfigError(
            f"beta={beta} unreachable with strength ratio {strength_ratio} (f_E={f_E:.3f})"
        )
    return f_E


def sigmoid(x, c: float = 10.0):
    """Logistic function ``1 / (1 + exp(-c*x))``."""
    out = expit(c * np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def inverse_sigmoid(p, c: float = 10.0):
    """Inverse of :func:`sigmoid`; defined only on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(~np.isfinite(p)):
        raise ValueError("inverse_sigmoid is defined only for 0 < p < 1")
    out = logit(p) / c
    return out if out.ndim else float(out)


def _truncated_normal(rng: np.random.Generator, mean: float, std: float, size: int) -> np.ndarray:
    """Normal draws, redrawn until their sign matches ``mean``.

    A non-positive mean returns the draws untouched.
    """
    x = rng.normal(mean, std, size)
    if mean <= 0:
        return x
    bad = x <= 0
    while np.any(bad):
        x[bad] = rng.normal(mean, std, int(bad.sum()))
        bad = x <= 0
    return x


class EIReservoir:
    """Rate-based reservoir with split excitatory / inhibitory couplings.

    Attributes
    ----------
    A_E, A_I : ndarray, shape (N, N)
        Excitatory weights and inhibitory magnitudes.  ``A_I`` may hold
        negative values only for over-excited constructions (``beta > 1``).
    inh_links : ndarray of bool, shape (N, N)
        Structural positions of inhibitory links.  Adaptation and design act
        only on these positions, so a link clamped to zero can recover.
    W_in, theta, leak : ndarray, shape (N,)
    c : float
    V, r : ndarray, shape (N,)
        Membrane potentials and firing rates.
    is_excitatory : ndarray of bool, shape (N,)
    """

    def __init__(self, A_E, A_I, W_in, theta, leak, c, is_excitatory, inh_links=None, config=None):
        self.A_E = np.array(A_E, dtype=float)
        self.A_I = np.array(A_I, dtype=float)
        n = self.A_E.shape[0]
        if self.A_E.shape != (n, n) or self.A_I.shape != (n, n):
            raise ValueError("A_E and A_I must be square and of equal shape")
        self.W_in = np.array(W_in, dtype=float).reshape(n)
        self.theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,)).copy()
        self.leak = np.broadcast_to(np.asarray(leak, dtype=float), (n,)).copy()
        self.c = float(c)
        self.is_excitatory = np.array(is_excitatory, dtype=bool).reshape(n)
        if inh_links is None:
            inh_links = self.A_I != 0
        self.inh_links = np.array(inh_links, dtype=bool)
        self.config = config
        self.V = np.zeros(n)
        self.r = np.empty(n)
        self.reset()

    @property
    def n_neurons(self) -> int:
        return self.A_E.shape[0]

    @property
    def A(self) -> np.ndarray:
        """Signed effective connectivity ``A_E - A_I``."""
        return self.A_E - self.A_I

    def reset(self) -> None:
        """Return to the zero-input start: ``V = 0``, ``r = sigmoid(-theta)``."""
        self.V[:] = 0.0
        self.r[:] = sigmoid(-self.theta, self.c)

    def copy(self) -> EIReservoir:
        return copy.deepcopy(self)

    def step(self, u: float) -> np.ndarray:
        """Advance one time step with scalar input ``u``; returns the new ``r``."""
        u = float(u)
        if not np.isfinite(u):
            raise InputError(f"non-finite input {u!r}")
        V = self.A_E @ self.r - self.A_I @ self.r + self.W_in * u
        if np.any(self.leak):
            V += self.leak * self.V
        self.V = V
        self.r = sigmoid(V - self.theta, self.c)
        return self.r

    def run(self, inputs) -> np.ndarray:
        """Drive with ``inputs`` in order; returns the (T, N) rate history."""
        inputs = np.asarray(inputs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(inputs)):
            raise InputError("inputs contain non-finite values")
        n = self.n_neurons
        out = np.empty((inputs.size, n))
        if inputs.size == 0:
            return out
        A_E, A_I = self.A_E, self.A_I
        W_in, theta, c, leak = self.W_in, self.theta, self.c, self.leak
        leaky = bool(np.any(leak))
        V, r = self.V, self.r
        for t, u in enumerate(inputs):
            V_new = A_E @ r - A_I @ r + W_in * u
            if leaky:
                V_new += leak * V
            V = V_new
            r = expit(c * (V - theta))
            out[t] = r
        self.V, self.r = V, r.copy()
        return out

    def local_balance(self) -> np.ndarray:
        """Per-neuron balance: row sums of ``A_E - A_I``."""
        return self.A_E.sum(axis=1) - self.A_I.sum(axis=1)

    def global_balance(self) -> float:
        """Mean of :meth:`local_balance`."""
        return float(np.mean(self.local_balance()))

    # serialization

    def to_arrays(self) -> dict:
        meta = {
            "format_version": FORMAT_VERSION,
            "kind": "EIReservoir",
            "c": self.c,
            "config": self.config.to_dict() if self.config is not None else None,
        }
        return {
            "meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            "A_E": self.A_E,
            "A_I": self.A_I,
            "inh_links": self.inh_links,
            "W_in": self.W_in,
            "theta": self.theta,
            "leak": self.leak,
            "is_excitatory": self.is_excitatory,
            "V": self.V,
            "r": self.r,
        }

    @classmethod
    def from_arrays(cls, arrays) -> EIReservoir:
        meta = json.loads(bytes(np.asarray(arrays["meta"], dtype=np.uint8)).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported reservoir format version {meta.get('format_version')}")
        config = NetworkConfig.from_dict(meta["config"]) if meta["config"] is not None else None
        res = cls(
            arrays["A_E"], arrays["A_I"], arrays["W_in"], arrays["theta"], arrays["leak"],
            meta["c"], arrays["is_excitatory"], inh_links=arrays["inh_links"], config=config,
        )
        res.V = np.array(arrays["V"], dtype=float)
        res.r = np.array(arrays["r"], dtype=float)
        return res


PathLike = Union[str, Path, io.IOBase]


def save_reservoir(res: EIReservoir, path: PathLike, readout=None) -> None:
    """Write a versioned ``.npz`` container; optionally bundle a readout."""
    arrays = res.to_arrays()
    if readout is not None:
        arrays.update(readout.to_arrays())
    np.savez(path, **arrays)


def load_reservoir(path: PathLike):
    """Load a container written by :func:`save_reservoir`.

    Returns ``(reservoir, readout)``; ``readout`` is ``None`` when absent.
    """
    from .readout import Readout

    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    res = EIReservoir.from_arrays(arrays)
    readout = Readout.from_arrays(arrays) if "readout_W_out" in arrays else None
    return res, readout


def build_reservoir(config: NetworkConfig) -> EIReservoir:
    """Construct a random E-I reservoir from ``config``.

    Each ordered pair (self-loops included) is linked independently with
    probability ``mean_degree / n_neurons``.  Excitatory weights are drawn
    from N(mu_E, sigma_E) and inhibitory magnitudes from N(mu_I, sigma_I),
    both redrawn to stay on the sign of their mean when that mean is
    positive; everything is then multiplied by ``alpha``.  Input weights are
    uniform on ``[-input_spread/2, input_spread/2]`` for a random
    ``input_fraction`` of all neurons and zero elsewhere.
    """
    cfg = config.validate().resolved()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_neurons

    n_exc = int(round(n * cfg.excit_fraction))
    is_exc = np.zeros(n, dtype=bool)
    is_exc[rng.permutation(n)[:n_exc]] = True

    links = rng.random((n, n)) < cfg.mean_degree / n
    exc_links = links & is_exc[None, :]
    inh_links = links & ~is_exc[None, :]

    A_E = np.zeros((n, n))
    A_I = np.zeros((n, n))
    A_E[exc_links] = _truncated_normal(rng, cfg.mu_E, cfg.sigma_E, int(exc_links.sum()))
    A_I[inh_links] = _truncated_normal(rng, cfg.mu_I, cfg.sigma_I, int(inh_links.sum()))
    A_E *= cfg.alpha
    A_I *= cfg.alpha

    W_in = np.zeros(n)
    n_in = int(round(n * cfg.input_fraction))
    idx = rng.choice(n, n_in, replace=False)
    W_in[idx] = rng.uniform(-cfg.input_spread / 2, cfg.input_spread / 2, n_in)

    res = EIReservoir(
        A_E, A_I, W_in, cfg.theta, cfg.leak, cfg.sigmoid_steepness, is_exc,
        inh_links=inh_links, config=config,
    )
    if cfg.dale is Dale.SHUFFLED:
        # derived stream so the unshuffled draws above are shared with Respect
        shuffle_seed = np.random.SeedSequence([cfg.seed, 0x5EED]).generate_state(1, np.uint64)[0]
        res = shuffle_dale(res, int(shuffle_seed))
    return res


def shuffle_dale(res: EIReservoir, seed) -> EIReservoir:
    """Permute signed weights across the existing link positions.

    The set of linked positions is unchanged; only which weight sits where
    is randomized, so neurons end up with mixed-sign outgoing links.
    """
    rng = np.random.default_rng(seed)
    A = res.A_E - res.A_I
    links = (res.A_E != 0) | res.inh_links
    rows, cols = np.nonzero(links)
    values = A[rows, cols]
    values = values[rng.permutation(values.size)]
    A_new = np.zeros_like(A)
    A_new[rows, cols] = values
    out = res.copy()
    out.A_E = np.where(A_new > 0, A_new, 0.0)
    out.A_I = np.where(A_new < 0, -A_new, 0.0)
    out.inh_links = np.zeros_like(links)
    out.inh_links[rows, cols] = values < 0
    out.reset()
    return out


def step(res: EIReservoir, u: float) -> np.ndarray:
    return res.step(u)


def run_open_loop(res: EIReservoir, inputs) -> np.ndarray:
    return res.run(inputs)


def global_balance(res: EIReservoir) -> float:
    return res.global_balance()


def local_balance(res: EIReservoir) -> np.ndarray:
    return res.local_balance()
