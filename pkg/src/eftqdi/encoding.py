"""Linear one-dimensional compression of an estimate before transmission."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearEncoder:
    """Encoding vectors psi_k, either the cyclic standard basis or an explicit
    periodic list. ``k`` is 1-based."""

    dim: int
    vectors: tuple | None = None
    h_psi: int | None = None

    def __post_init__(self):
        if self.vectors is not None:
            vecs = tuple(np.asarray(v, dtype=float) for v in self.vectors)
            if not vecs or any(v.shape != (self.dim,) for v in vecs):
                raise ValueError("encoder vectors must all have the configured dimension")
            object.__setattr__(self, "vectors", vecs)
        if self.h_psi is None:
            object.__setattr__(self, "h_psi", self.period)

    @property
    def period(self) -> int:
        return self.dim if self.vectors is None else len(self.vectors)

    @property
    def psi_bar(self) -> float:
        if self.vectors is None:
            return 1.0
        return float(max(np.linalg.norm(v) for v in self.vectors))

    def psi(self, k: int) -> np.ndarray:
        if k < 1:
            raise ValueError("k starts at 1")
        idx = (k - 1) % self.period
        if self.vectors is None:
            e = np.zeros(self.dim)
            e[idx] = 1.0
            return e
        return self.vectors[idx]

    def table(self) -> np.ndarray:
        """All distinct psi vectors in schedule order, shape (period, dim)."""
        return np.array([self.psi(k) for k in range(1, self.period + 1)])

    def encode(self, k: int, theta) -> float:
        return float(np.dot(self.psi(k), theta))


def psi_at(enc: LinearEncoder, k: int) -> np.ndarray:
    return enc.psi(k)


def window_gram(enc: LinearEncoder, k: int, h: int) -> np.ndarray:
    vs = np.array([enc.psi(l) for l in range(k, k + h)])
    return vs.T @ vs / h


def verify_pe(enc: LinearEncoder, h_psi: int | None = None, horizon: int | None = None) -> float:
    """Certified lower bound on the windowed encoder Gram's smallest eigenvalue.

    Periodic schedules are scanned over one full period of window starts,
    which covers every distinct window. Returns 0.0 when excitation fails.
    """
    h = enc.h_psi if h_psi is None else h_psi
    if h < 1:
        raise ValueError("window must be positive")
    starts = enc.period if horizon is None else min(enc.period, horizon - h + 1)
    if starts < 1:
        raise ValueError("horizon shorter than window")
    worst = min(np.linalg.eigvalsh(window_gram(enc, k, h))[0] for k in range(1, starts + 1))
    return max(float(worst), 0.0)
