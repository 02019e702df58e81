"""Regressors, observation/communication noise, the binary sensor and the
one-bit channel."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import BoundViolation, DegenerateInterval, DimensionMismatch

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
EXCITATION_TOL = 1e-9


@dataclass(frozen=True)
class GaussianNoise:
    """Zero-mean Gaussian noise with exact CDF/PDF evaluation."""

    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("std must be positive")

    def cdf(self, x):
        # scipy's ndtr is accurate to ~1 ulp over the whole real line
        return ndtr(np.asarray(x, dtype=float) / self.std)

    def pdf(self, x):
        z = np.asarray(x, dtype=float) / self.std
        return _INV_SQRT_2PI / self.std * np.exp(-0.5 * z * z)

    def sample(self, rng: np.random.Generator, size=None):
        return self.std * rng.standard_normal(size)


class ScriptedNoise:
    """Test double replaying a fixed sequence of noise values.

    ``cdf``/``pdf`` delegate to ``law`` when given (e.g. to keep the
    algorithm's innovation terms meaningful while draws are frozen).
    """

    def __init__(self, values: Sequence[float], law: GaussianNoise | None = None):
        self._values = list(values)
        self._pos = 0
        self.law = law

    def sample(self, rng=None, size=None):
        if size is not None:
            out = np.array([self.sample() for _ in range(int(np.prod(size)))])
            return out.reshape(size)
        v = self._values[self._pos % len(self._values)]
        self._pos += 1
        return float(v)

    def cdf(self, x):
        if self.law is None:
            raise TypeError("scripted noise has no distribution attached")
        return self.law.cdf(x)

    def pdf(self, x):
        if self.law is None:
            raise TypeError("scripted noise has no distribution attached")
        return self.law.pdf(x)


def dot(a, b):
    """Inner product along the last axis. Both simulation paths use this so
    their rounding agrees."""
    return (np.asarray(a) * np.asarray(b)).sum(axis=-1)


def cdf(model, x):
    return model.cdf(x)


def density_bounds(model: GaussianNoise, C: float, radius: float) -> tuple[float, float]:
    """(min, max) of the noise density over ``[C - radius, C + radius]``."""
    if not radius > 0:
        raise DegenerateInterval("radius must be positive")
    lo, hi = C - radius, C + radius
    nearest = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
    farthest = max(abs(lo), abs(hi))
    return float(model.pdf(farthest)), float(model.pdf(nearest))


# -- regressors ---------------------------------------------------------------


@dataclass
class StateSpaceRegressor:
    """x <- A x + B eta, phi = C x, with eta ~ U[-halfwidth, halfwidth].

    ``A`` and ``C`` are diagonal and stored as their diagonals.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    x: np.ndarray
    halfwidth: float
    phi_bar: float = math.inf
    strict: bool = False
    realized_max: float = field(default=0.0, init=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        self.x = np.array(self.x, dtype=float)
        n = self.x.shape[0]
        if any(v.shape != (n,) for v in (self.A, self.B, self.C)):
            raise DimensionMismatch("A, B, C diagonals and x must share dimension")

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def draw_innovation(self, rng: np.random.Generator) -> float:
        return rng.uniform(-self.halfwidth, self.halfwidth)

    def advance(self, eta: float) -> np.ndarray:
        self.x = self.A * self.x + self.B * eta
        phi = self.C * self.x
        norm = float(np.sqrt(np.sum(phi * phi)))
        if norm > self.realized_max:
            self.realized_max = norm
        if norm > self.phi_bar:
            if self.strict:
                raise BoundViolation(f"|phi| = {norm:.4g} exceeds configured bound {self.phi_bar:.4g}")
        return phi

    def next(self, rng: np.random.Generator) -> np.ndarray:
        return self.advance(self.draw_innovation(rng))


class ScriptedRegressor:
    """Replays a fixed list of regressor vectors (cyclically)."""

    def __init__(self, sequence, phi_bar: float = math.inf):
        self.sequence = [np.asarray(v, dtype=float) for v in sequence]
        self.phi_bar = phi_bar
        self._pos = 0
        self.realized_max = 0.0

    @property
    def dim(self) -> int:
        return self.sequence[0].shape[0]

    def draw_innovation(self, rng=None) -> float:
        return 0.0

    def advance(self, eta: float = 0.0) -> np.ndarray:
        phi = self.sequence[self._pos % len(self.sequence)]
        self._pos += 1
        norm = float(np.linalg.norm(phi))
        self.realized_max = max(self.realized_max, norm)
        if norm > self.phi_bar:
            raise BoundViolation(f"|phi| = {norm:.4g} exceeds bound {self.phi_bar:.4g}")
        return phi

    def next(self, rng=None) -> np.ndarray:
        return self.advance()


def regressor_next(gen, rng) -> np.ndarray:
    return gen.next(rng)


def warn_if_exceeded(realized: float, bound: float) -> bool:
    if realized > bound:
        warnings.warn(
            f"realized regressor norm {realized:.4g} exceeds configured bound {bound:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
        return True
    return False


# -- sensor and channel ---------------------------------------------------------


@dataclass
class BinarySensor:
    threshold: float
    noise: GaussianNoise | ScriptedNoise

    def sense(self, phi, theta, rng=None) -> int:
        d = self.noise.sample(rng)
        return quantize(dot(phi, theta), d, self.threshold)


@dataclass
class QuantizedChannel:
    threshold: float
    noise: GaussianNoise | ScriptedNoise

    def transmit(self, encoded: float, rng=None) -> int:
        w = self.noise.sample(rng)
        return quantize(encoded, w, self.threshold)


def quantize(signal, noise, threshold):
    """One-bit indicator of ``signal + noise <= threshold`` (ties give 1)."""
    out = np.asarray(signal) + np.asarray(noise) <= threshold
    return int(out) if out.ndim == 0 else out.astype(np.int8)


def sense(s: BinarySensor, phi, theta, rng=None) -> int:
    return s.sense(phi, theta, rng)


def channel_transmit(ch: QuantizedChannel, encoded: float, rng=None) -> int:
    return ch.transmit(encoded, rng)


# -- excitation -------------------------------------------------------------------


@dataclass(frozen=True)
class ExcitationReport:
    h: int
    delta_phi_sq: float
    satisfied: bool
    windows: int


def excitation_report(streams, h: int, horizon: int | None = None) -> ExcitationReport:
    """Minimum over windows of the smallest eigenvalue of the node-averaged
    windowed regressor Gram matrix, evaluated on realized sequences.

    ``streams`` has shape (m, K, n): m nodes, K time steps.
    """
    try:
        arr = np.asarray(streams, dtype=float)
    except ValueError as exc:
        raise DimensionMismatch("regressor streams have inconsistent shapes") from exc
    if arr.ndim != 3:
        raise DimensionMismatch("streams must have shape (nodes, steps, dim)")
    m, K, n = arr.shape
    if horizon is not None:
        if horizon > K:
            raise DimensionMismatch("horizon exceeds stream length")
        arr = arr[:, :horizon]
        K = horizon
    if h < 1 or K < h:
        raise ValueError("need 1 <= h <= horizon")
    outer = np.einsum("mki,mkj->kij", arr, arr)
    csum = np.concatenate([np.zeros((1, n, n)), np.cumsum(outer, axis=0)])
    windows = (csum[h:] - csum[:-h]) / (m * h)
    lam = np.linalg.eigvalsh(windows)[:, 0]
    delta = max(float(lam.min()), 0.0)
    return ExcitationReport(h=h, delta_phi_sq=delta, satisfied=delta > EXCITATION_TOL, windows=K - h + 1)
