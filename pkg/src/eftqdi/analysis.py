"""Theory-side constants, gain certificates and empirical convergence
diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import EmptyInput, NonPositiveInput, NonPositiveTrace
from .estimator import NetworkState, StepSchedule


def _require_positive(**kwargs):
    bad = [k for k, v in kwargs.items() if not (v > 0 and math.isfinite(v))]
    if bad:
        raise NonPositiveInput("must be positive and finite: " + ", ".join(bad))


def sigma_constant(h, f_lower, lambda2, delta_phi_sq, phi_bar) -> float:
    """Contraction constant of the fusion-error recursion."""
    _require_positive(h=h, f_lower=f_lower, lambda2=lambda2, delta_phi_sq=delta_phi_sq, phi_bar=phi_bar)
    return h * f_lower * lambda2 * delta_phi_sq / (2 * f_lower * phi_bar**2 + h * lambda2)


def c_h_constant(sched: StepSchedule) -> float:
    return sched.c_h


@dataclass(frozen=True)
class TheoryConstants:
    h: int
    c_h: float
    f_lower: float
    f_upper: float
    g_lower: float
    phi_bar: float
    psi_bar: float
    theta_bar: float
    delta_phi_sq: float
    delta_psi_sq: float
    pi_min: float
    lambda2_mirror: float
    lambda_m: float
    n_bar: int

    @property
    def sigma(self) -> float:
        return sigma_constant(self.h, self.f_lower, self.lambda2_mirror, self.delta_phi_sq, self.phi_bar)

    def check(self) -> None:
        _require_positive(**{f.name: getattr(self, f.name) for f in fields(self)})

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        try:
            d["sigma"] = self.sigma
        except NonPositiveInput:
            d["sigma"] = float("nan")
        return d


def gamma_threshold(beta: float, tc: TheoryConstants) -> float:
    """Smallest ENE gain that guarantees mean-square convergence for ``beta``.

    Saturates to inf when the constants are too extreme for float64.
    """
    tc.check()
    _require_positive(beta=beta)
    s, ch, N = np.float64(tc.sigma), tc.c_h, tc.n_bar
    with np.errstate(over="ignore", divide="ignore", under="ignore", invalid="ignore"):
        # one final division over a common denominator keeps the rounding tight
        s3 = 3 * s**3
        num = s3 * (2 * ch * N + s * (tc.f_upper**2 * tc.phi_bar**4 + tc.lambda_m**2)) + 8 * ch**4 * N**2
        den = 2 * np.float64(tc.g_lower) * tc.pi_min * tc.delta_psi_sq * s3
        return float(beta * num / den)


def gamma_threshold_rate(beta: float, tc: TheoryConstants) -> float:
    """ENE gain needed for the O(1/k) rate with b_k = 1/k; requires
    ``beta > 2 c_h / (3 sigma)`` (returns inf otherwise)."""
    tc.check()
    _require_positive(beta=beta)
    s, ch, N = np.float64(tc.sigma), tc.c_h, tc.n_bar
    if not beta * 3 * s > 2 * ch:
        return math.inf
    with np.errstate(over="ignore", divide="ignore", under="ignore"):
        inner = (
            2 * ch * N
            + s * (tc.f_upper**2 * tc.phi_bar**4 + tc.lambda_m**2)
            + 8 * beta * ch**4 * N**2 / (s**2 * (3 * beta * s - 2 * ch))
            + ch / beta
        )
        return float(beta / (2 * np.float64(tc.g_lower) * tc.pi_min * tc.delta_psi_sq) * inner)


def lambda_min_2x2(w1: float, w2: float, w3: float) -> float:
    """Smallest eigenvalue of the symmetric matrix [[w1, w2], [w2, w3]]."""
    half_trace = 0.5 * (w1 + w3)
    radius = math.hypot(0.5 * (w1 - w3), w2)
    if half_trace <= 0:
        return half_trace - radius
    # det / lambda_max avoids the cancellation in half_trace - radius
    lam_max = half_trace + radius
    scale = max(abs(w1), abs(w2), abs(w3))
    det_scaled = (w1 / scale) * (w3 / scale) - (w2 / scale) ** 2
    return det_scaled * scale * (scale / lam_max)


@dataclass(frozen=True)
class GainCertificate:
    w1: float
    w2: float
    w3: float
    lambda_min_W: float
    certifies_convergence: bool
    certifies_rate: bool

    @property
    def converges(self) -> bool:
        return self.certifies_convergence


def certificate_from_w(w1: float, w2: float, w3: float, beta_rate_ok: bool = False) -> GainCertificate:
    lam = lambda_min_2x2(w1, w2, w3)
    return GainCertificate(w1, w2, w3, lam, lam > 0, lam > 1 and beta_rate_ok)


def gain_certificate(beta: float, gamma: float, tc: TheoryConstants) -> GainCertificate:
    """Coupling matrix of the two Lyapunov recursions and its verdicts."""
    tc.check()
    _require_positive(beta=beta, gamma=gamma)
    s, ch, N = np.float64(tc.sigma), tc.c_h, tc.n_bar
    with np.errstate(over="ignore", divide="ignore", under="ignore"):
        w1 = 2 * gamma * tc.g_lower * tc.pi_min * tc.delta_psi_sq / ch - beta * (
            tc.f_upper**2 * tc.phi_bar**4 * s / ch + 2 * N + s * tc.lambda_m**2 / ch
        )
        w2 = -2 * beta * ch * N / s
        w3 = 3 * beta * s / (2 * ch)
        rate_ok = bool(beta > 2 * ch / (3 * s))
    return certificate_from_w(float(w1), float(w2), float(w3), beta_rate_ok=rate_ok)


# -- empirical diagnostics ------------------------------------------------------


def stack_error_vector(net: NetworkState) -> np.ndarray:
    """ENE errors, receiver-major with senders in ascending order."""
    blocks = [net.nodes[i].neighbor_estimates[j] - net.nodes[j].theta for i, j in net.edges]
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)


@dataclass(frozen=True)
class LyapunovTrace:
    U: np.ndarray
    V: np.ndarray
    rep_count: int


def fold_mean(rows) -> np.ndarray:
    """Mean of equal-length rows, accumulated strictly in the given order."""
    rows = list(rows)
    if not rows:
        raise EmptyInput("no repetitions to aggregate")
    acc = np.array(rows[0], dtype=float)
    for r in rows[1:]:
        if len(r) != len(acc):
            raise ValueError("all repetitions must share the horizon")
        acc = acc + np.asarray(r, dtype=float)
    return acc / len(rows)


def lyapunov_traces(runs) -> LyapunovTrace:
    """``runs`` is a sequence of per-rep ``(U_seq, V_seq)`` pairs, in rep order."""
    runs = list(runs)
    if not runs:
        raise EmptyInput("no repetitions to aggregate")
    U = fold_mean(r[0] for r in runs)
    V = fold_mean(r[1] for r in runs)
    return LyapunovTrace(U=U, V=V, rep_count=len(runs))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[int, int]


def rate_fit(trace, k_lo: int, k_hi: int) -> RateFit:
    """Least-squares line through (log k, log trace_k) for k in [k_lo, k_hi].

    ``trace[0]`` is the value at k = 1.
    """
    trace = np.asarray(trace, dtype=float)
    if not (1 <= k_lo < k_hi <= len(trace)):
        raise ValueError(f"window [{k_lo}, {k_hi}] invalid for horizon {len(trace)}")
    y = trace[k_lo - 1 : k_hi]
    if np.any(~(y > 0)):
        raise NonPositiveTrace("trace must be positive on the fit window")
    x = np.log(np.arange(k_lo, k_hi + 1, dtype=float))
    ly = np.log(y)
    xm, ym = x.mean(), ly.mean()
    dx = x - xm
    slope = float(np.dot(dx, ly - ym) / np.dot(dx, dx))
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * x)
    ss_tot = float(np.dot(ly - ym, ly - ym))
    r2 = 1.0 - float(np.dot(resid, resid)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(slope=slope, intercept=intercept, r_squared=r2, window=(k_lo, k_hi))
