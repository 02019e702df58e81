"""Batch simulation: the per-node recursion of :mod:`eftqdi.estimator`,
vectorised over Monte Carlo repetitions.

Every arithmetic step is elementwise along the repetition axis and mirrors
the per-node code operation for operation, so a repetition's trajectory is
bit-identical whatever batch it runs in. Random draws come from the
per-(rep, role, index) streams of :mod:`eftqdi.rng`, pre-drawn in chunks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import rng as rngmod
from .encoding import LinearEncoder
from .estimator import GainConfig, ProjectionBox
from .graphs import TopologyEnsemble, cumulative_rows, pick_index
from .signals import dot

CHUNK = 2048


@dataclass(frozen=True)
class Plan:
    """Array form of everything a run needs."""

    ensemble: TopologyEnsemble
    encoder: LinearEncoder
    box: ProjectionBox
    gains: GainConfig
    theta_true: np.ndarray  # (n,)
    reg_A: np.ndarray  # (m, n) diagonals
    reg_B: np.ndarray  # (m, n)
    reg_C: np.ndarray  # (m, n) diagonals
    reg_x0: np.ndarray  # (m, n)
    halfwidth: np.ndarray  # (m,)
    sensor_C: np.ndarray  # (m,)
    meas_std: float
    channel_C: np.ndarray  # (E,)
    channel_std: float
    theta0: np.ndarray  # (n,) already projected
    ene0: np.ndarray  # (n,) already projected
    edges: tuple  # ((receiver, sender), ...)

    @property
    def m(self) -> int:
        return self.reg_A.shape[0]

    @property
    def n(self) -> int:
        return self.theta_true.shape[0]


@dataclass
class BatchResult:
    reps: list[int]
    V: np.ndarray  # (R, K) sum over nodes of |theta_i - theta|^2
    U: np.ndarray  # (R, K) sum over union edges of |ene_ij - theta_j|^2
    V_baseline: np.ndarray | None
    phi_max: np.ndarray  # (R,) largest realized regressor norm
    graph_counts: np.ndarray  # (R, s) ticks spent in each graph


class _Streams:
    """Per-rep generators; hands out aligned chunks of draws."""

    def __init__(self, seed: int, reps, m: int, E: int, halfwidth: np.ndarray):
        self.halfwidth = halfwidth
        self.sw = [rngmod.stream(seed, r, rngmod.SWITCH) for r in reps]
        self.reg = [[rngmod.stream(seed, r, rngmod.REGRESSOR, i) for i in range(m)] for r in reps]
        self.meas = [[rngmod.stream(seed, r, rngmod.MEASUREMENT, i) for i in range(m)] for r in reps]
        self.chan = [[rngmod.stream(seed, r, rngmod.CHANNEL, e) for e in range(E)] for r in reps]

    def chunk(self, T: int):
        R, m, E = len(self.sw), len(self.reg[0]), len(self.chan[0])
        u = np.empty((T, R))
        eta = np.empty((T, R, m))
        d = np.empty((T, R, m))
        w = np.empty((T, R, E))
        for r in range(R):
            u[:, r] = self.sw[r].random(T)
            for i in range(m):
                hw = self.halfwidth[i]
                eta[:, r, i] = self.reg[r][i].uniform(-hw, hw, T)
                d[:, r, i] = self.meas[r][i].standard_normal(T)
            for e in range(E):
                w[:, r, e] = self.chan[r][e].standard_normal(T)
        return u, eta, d, w


def run_batch(plan: Plan, seed: int, reps, horizon: int, baseline: bool = False) -> BatchResult:
    reps = list(reps)
    R, m, n, K = len(reps), plan.m, plan.n, horizon
    ens = plan.ensemble
    E = len(plan.edges)
    recv = np.array([i for i, _ in plan.edges], dtype=int)
    send = np.array([j for _, j in plan.edges], dtype=int)

    # weight of each union edge in each member graph; column E is a zero pad
    Wt = np.zeros((ens.size, E + 1))
    for u, g in enumerate(ens.graphs):
        for e, (i, j) in enumerate(plan.edges):
            Wt[u, e] = g.weights[i, j]
    n_bar = max((int(np.sum(recv == i)) for i in range(m)), default=0)
    slots = np.full((max(n_bar, 0), m), E, dtype=int)
    for i in range(m):
        for q, e in enumerate(np.nonzero(recv == i)[0]):
            slots[q, i] = e

    cum = cumulative_rows(ens.transition)
    cum0 = cumulative_rows(ens.initial_dist[None, :])[0]
    psi_table = plan.encoder.table()
    period = psi_table.shape[0]
    lo, hi = plan.box.lower, plan.box.upper
    beta, gamma = plan.gains.beta, plan.gains.gamma
    sched = plan.gains.schedule
    th_true = plan.theta_true
    A, B, C = plan.reg_A, plan.reg_B, plan.reg_C
    sC = plan.sensor_C
    cC = plan.channel_C
    ms, cs = plan.meas_std, plan.channel_std

    x = np.broadcast_to(plan.reg_x0, (R, m, n)).copy()
    theta = np.broadcast_to(plan.theta0, (R, m, n)).copy()
    ene = np.zeros((R, E + 1, n))
    ene[:, :E] = plan.ene0
    theta_nc = theta.copy() if baseline else None

    V = np.empty((R, K))
    U = np.empty((R, K))
    Vb = np.empty((R, K)) if baseline else None
    phi_max = np.zeros(R)
    counts = np.zeros((R, ens.size), dtype=np.int64)
    rows = np.arange(R)

    streams = _Streams(seed, reps, m, E, plan.halfwidth)
    state = None
    k = 0
    while k < K:
        T = min(CHUNK, K - k)
        u_draw, eta_all, d_all, w_all = streams.chunk(T)
        for t in range(T):
            k += 1
            if state is None:
                state = pick_index(cum0, u_draw[t])
            else:
                state = pick_index(cum[state], u_draw[t])
            counts[rows, state] += 1
            a = Wt[state]  # (R, E+1)
            active = a[:, :E] > 0

            x = A * x + B * eta_all[t][..., None]
            phi = C * x
            norms = np.sqrt(dot(phi, phi))
            np.maximum(phi_max, norms.max(axis=1), out=phi_max)
            s = (dot(phi, th_true) + ms * d_all[t] <= sC).astype(np.int8)

            b_k = sched(k)
            psi = psi_table[(k - 1) % period]

            # one-bit channels carry the senders' previous estimates
            z = (dot(psi, theta[:, send]) + cs * w_all[t] <= cC).astype(np.int8)
            ene_prev = ene
            G_hat = ndtr((cC - dot(psi, ene_prev[:, :E])) / cs)
            step_g = gamma * b_k
            upd = np.clip(ene_prev[:, :E] + step_g * psi * (G_hat - z)[..., None], lo, hi)
            ene = ene_prev.copy()
            ene[:, :E] = np.where(active[..., None], upd, ene_prev[:, :E])

            F_hat = ndtr((sC - dot(phi, theta)) / ms)
            acc = np.zeros_like(theta)
            for q in range(slots.shape[0]):
                idx = slots[q]
                acc = acc + a[:, idx][..., None] * (ene_prev[:, idx] - theta)
            step_b = beta * b_k
            theta = np.clip(theta + step_b * (phi * (F_hat - s)[..., None] + acc), lo, hi)

            diff = theta - th_true
            V[:, k - 1] = dot(diff, diff).sum(axis=1)
            e_err = ene[:, :E] - theta[:, send]
            U[:, k - 1] = dot(e_err, e_err).sum(axis=1)

            if baseline:
                Fb = ndtr((sC - dot(phi, theta_nc)) / ms)
                acc0 = np.zeros_like(theta_nc)
                theta_nc = np.clip(theta_nc + step_b * (phi * (Fb - s)[..., None] + acc0), lo, hi)
                db = theta_nc - th_true
                Vb[:, k - 1] = dot(db, db).sum(axis=1)

    return BatchResult(reps=reps, V=V, U=U, V_baseline=Vb, phi_max=phi_max, graph_counts=counts)
