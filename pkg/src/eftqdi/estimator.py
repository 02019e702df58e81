"""Per-node form of the estimation-fusion algorithm with one-bit measurements
and one-bit communication.

Each node ``i`` keeps a fusion estimate ``theta`` and, for every neighbour
``j`` it can ever hear from (union graph), an estimate of that neighbour's
fusion estimate, reconstructed from one-bit channel outputs. This module is
the readable reference; :mod:`eftqdi.engine` runs the same recursion
vectorised over Monte Carlo repetitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import LinearEncoder
from .errors import InvalidExponent
from .graphs import MarkovSwitcher, TopologyEnsemble
from .signals import BinarySensor, QuantizedChannel, dot


@dataclass(frozen=True)
class ProjectionBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if np.any(lo >= hi):
            raise ValueError("box needs lower < upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def theta_bar(self) -> float:
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return float(np.sqrt(np.sum(corner * corner)))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, x):
        return np.clip(x, self.lower, self.upper)


def project_box(x, box: ProjectionBox):
    return box.project(x)


@dataclass(frozen=True)
class StepSchedule:
    """b_k = k^(-p), p in (1/2, 1]."""

    p: float = 1.0
    h: int = 1

    def __post_init__(self):
        if not (0.5 < self.p <= 1.0):
            raise InvalidExponent(f"exponent {self.p} outside (1/2, 1]")
        if self.h < 1:
            raise ValueError("window h must be >= 1")

    def __call__(self, k: int) -> float:
        return step_size(self, k)

    @property
    def c_h(self) -> float:
        # sup of b_a / b_b over |a - b| < h is reached at a=1, b=h
        return float(self.h) ** self.p


def step_size(sched: StepSchedule, k: int) -> float:
    if k < 1:
        raise ValueError("k starts at 1")
    if not (0.5 < sched.p <= 1.0):
        raise InvalidExponent(f"exponent {sched.p} outside (1/2, 1]")
    return float(k) ** (-float(sched.p))


@dataclass(frozen=True)
class GainConfig:
    beta: float
    gamma: float
    schedule: StepSchedule = StepSchedule()

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0):
            raise ValueError("beta and gamma must be positive")


def estimation_update(prev, psi, z, channel_cdf, C_ij, gamma, b_k, active, box):
    """Update one estimate of a neighbour's estimate from a received bit.

    Inactive edges hold the previous value exactly.
    """
    if not active:
        return prev
    G_hat = channel_cdf(C_ij - dot(psi, prev))
    step = gamma * b_k
    return box.project(prev + step * psi * (G_hat - z))


def fusion_update(prev, phi, s, meas_cdf, C_i, neighbor_terms, beta, b_k, box):
    """Innovation from the local bit plus consensus toward neighbour estimates.

    ``neighbor_terms`` holds ``(a_ij, ene_ij)`` for currently active
    neighbours only, with ``ene_ij`` taken from the previous tick.
    """
    F_hat = meas_cdf(C_i - dot(phi, prev))
    acc = np.zeros_like(prev)
    for a, ene in neighbor_terms:
        acc = acc + a * (ene - prev)
    step = beta * b_k
    return box.project(prev + step * (phi * (F_hat - s) + acc))


@dataclass
class NodeState:
    theta: np.ndarray
    neighbor_estimates: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass
class Telemetry:
    k: int
    graph_index: int
    node_sq_err: np.ndarray
    edge_sq_err: np.ndarray
    phi_norms: np.ndarray

    @property
    def fusion_sq_err(self) -> float:
        return float(self.node_sq_err.sum())

    @property
    def ene_sq_err(self) -> float:
        return float(self.edge_sq_err.sum())


@dataclass
class NetworkState:
    """Everything one simulation run owns. Single-owner, mutable.

    ``edges`` are the union-graph edges as (receiver, sender) pairs in
    receiver-major order; ``channels[e]`` and ``channel_rngs[e]`` follow it.
    """

    nodes: list[NodeState]
    theta_true: np.ndarray
    ensemble: TopologyEnsemble
    switcher: MarkovSwitcher
    encoder: LinearEncoder
    box: ProjectionBox
    regressors: list
    sensors: list[BinarySensor]
    channels: list[QuantizedChannel]
    regressor_rngs: list
    measurement_rngs: list
    channel_rngs: list
    edges: list[tuple[int, int]] = field(default_factory=list)
    k: int = 0

    def __post_init__(self):
        if not self.edges:
            self.edges = self.ensemble.union_edges()
        n = self.theta_true.shape[0]
        if any(node.theta.shape != (n,) for node in self.nodes):
            raise ValueError("all nodes must share the parameter dimension")

    @property
    def m(self) -> int:
        return len(self.nodes)

    def stacked_theta(self) -> np.ndarray:
        return np.array([node.theta for node in self.nodes])


def _draw_tick(net: NetworkState, k: int, with_channels: bool):
    phis = [reg.next(rng) for reg, rng in zip(net.regressors, net.regressor_rngs)]
    bits = [
        sensor.sense(phi, net.theta_true, rng)
        for sensor, phi, rng in zip(net.sensors, phis, net.measurement_rngs)
    ]
    if not with_channels:
        return phis, bits, None, None
    psi = net.encoder.psi(k)
    z = []
    for (i, j), ch, rng in zip(net.edges, net.channels, net.channel_rngs):
        encoded = dot(psi, net.nodes[j].theta)
        z.append(ch.transmit(encoded, rng))
    return phis, bits, psi, z


def network_step(net: NetworkState, gains: GainConfig) -> Telemetry:
    """Advance the whole network by one synchronised tick."""
    k = net.k + 1
    u = net.switcher.current_state if k == 1 else net.switcher.next()
    A = net.ensemble.graphs[u].weights
    # all randomness for the tick is drawn against the previous estimates
    phis, bits, psi, z = _draw_tick(net, k, with_channels=True)
    b_k = gains.schedule(k)

    new_ene = []
    for e, (i, j) in enumerate(net.edges):
        ch = net.channels[e]
        prev = net.nodes[i].neighbor_estimates[j]
        new_ene.append(
            estimation_update(prev, psi, z[e], ch.noise.cdf, ch.threshold, gains.gamma, b_k, A[i, j] > 0, net.box)
        )

    new_theta = []
    for i, node in enumerate(net.nodes):
        terms = [(A[i, j], node.neighbor_estimates[j]) for j in sorted(node.neighbor_estimates) if A[i, j] > 0]
        sensor = net.sensors[i]
        new_theta.append(
            fusion_update(node.theta, phis[i], bits[i], sensor.noise.cdf, sensor.threshold, terms, gains.beta, b_k, net.box)
        )

    for e, (i, j) in enumerate(net.edges):
        net.nodes[i].neighbor_estimates[j] = new_ene[e]
    for node, th in zip(net.nodes, new_theta):
        node.theta = th
    net.k = k
    return _telemetry(net, u, phis)


def noncoop_step(net: NetworkState, gains: GainConfig) -> Telemetry:
    """Same local innovation, no channels and no consensus."""
    k = net.k + 1
    phis, bits, _, _ = _draw_tick(net, k, with_channels=False)
    b_k = gains.schedule(k)
    for i, node in enumerate(net.nodes):
        sensor = net.sensors[i]
        node.theta = fusion_update(node.theta, phis[i], bits[i], sensor.noise.cdf, sensor.threshold, [], gains.beta, b_k, net.box)
    net.k = k
    return _telemetry(net, -1, phis)


def _telemetry(net: NetworkState, u: int, phis) -> Telemetry:
    node_err = np.array([dot(node.theta - net.theta_true, node.theta - net.theta_true) for node in net.nodes])
    edge_err = np.array(
        [
            dot(net.nodes[i].neighbor_estimates[j] - net.nodes[j].theta, net.nodes[i].neighbor_estimates[j] - net.nodes[j].theta)
            for i, j in net.edges
        ]
    )
    return Telemetry(
        k=net.k,
        graph_index=u,
        node_sq_err=node_err,
        edge_sq_err=edge_err,
        phi_norms=np.array([np.sqrt(dot(p, p)) for p in phis]),
    )
