"""Directed weighted graphs, Markov-switching topology ensembles and the
spectral quantities the convergence theory needs.

Conventions: ``weights[i, j] > 0`` means node ``i`` receives from node ``j``
(edge ``j -> i``). Node indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonErgodicChain, NotBalanced

BALANCE_TOL = 1e-12
RANK_TOL = 1e-9
ZERO_EIG_REL = 1e-9


@dataclass(frozen=True)
class Digraph:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
            raise ValueError("weights must be a non-empty square matrix")
        if np.any(w < 0) or np.any(w >= 1):
            raise ValueError("edge weights must lie in [0, 1)")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-weights must be zero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, m: int, edges, weight: float | None = None) -> "Digraph":
        """Build from ``(sender, receiver)`` or ``(sender, receiver, weight)`` tuples."""
        w = np.zeros((m, m))
        for e in edges:
            if len(e) == 3:
                j, i, a = e
            else:
                (j, i), a = e, weight
            if a is None:
                raise ValueError("edge weight missing")
            w[i, j] = a
        return cls(w)

    @property
    def node_count(self) -> int:
        return self.weights.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(receiver, sender)`` pairs, receiver-major order."""
        rows, cols = np.nonzero(self.weights)
        return list(zip(rows.tolist(), cols.tolist()))

    def in_neighbors(self, i: int) -> list[int]:
        return np.nonzero(self.weights[i])[0].tolist()

    def is_balanced(self, tol: float = BALANCE_TOL) -> bool:
        w = self.weights
        return bool(np.all(np.abs(w.sum(axis=1) - w.sum(axis=0)) <= tol))


def laplacian(g: Digraph) -> np.ndarray:
    w = g.weights
    return np.diag(w.sum(axis=1)) - w


def mirror_laplacian(g: Digraph) -> np.ndarray:
    """Laplacian of the undirected mirror graph, ``(L + L^T) / 2``.

    Only a Laplacian when ``g`` is balanced, so unbalanced graphs are rejected.
    """
    w = g.weights
    gap = np.max(np.abs(w.sum(axis=1) - w.sum(axis=0)))
    if gap > BALANCE_TOL:
        raise NotBalanced(f"in/out weight sums differ by {gap:.3e}")
    L = laplacian(g)
    return 0.5 * (L + L.T)


def symmetric_eigenvalues(S: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    S = np.asarray(S, dtype=float)
    if not np.allclose(S, S.T, rtol=0, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (S + S.T))


def smallest_nonzero_eigenvalue(S: np.ndarray) -> float:
    """Smallest eigenvalue above the numerical null space, or 0.0 if the
    null space has dimension > 1 (disconnected graph)."""
    ev = symmetric_eigenvalues(S)
    top = ev[-1]
    if top <= 0:
        return 0.0
    cut = ZERO_EIG_REL * top
    zeros = int(np.sum(np.abs(ev) <= cut))
    if zeros != 1:
        return 0.0
    return float(ev[ev > cut][0])


def spectral_norm(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.sqrt(max(symmetric_eigenvalues(M.T @ M)[-1], 0.0)))


def has_spanning_tree(g: Digraph) -> bool:
    """True when some root reaches every node along directed edges."""
    m = g.node_count
    # out_adj[j] = receivers of j
    out_adj = [np.nonzero(g.weights[:, j])[0].tolist() for j in range(m)]
    for root in range(m):
        seen = {root}
        stack = [root]
        while stack:
            j = stack.pop()
            for i in out_adj[j]:
                if i not in seen:
                    seen.add(i)
                    stack.append(i)
        if len(seen) == m:
            return True
    return False


def stationary_distribution(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    s = P.shape[0]
    _check_stochastic(P)
    M = P.T - np.eye(s)
    if np.linalg.matrix_rank(M, tol=RANK_TOL) != s - 1:
        raise NonErgodicChain("eigenvalue 1 of the transition matrix is not simple")
    A = np.vstack([M, np.ones((1, s))])
    b = np.zeros(s + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def is_aperiodic_irreducible(P) -> bool:
    """Primitive-matrix test: some power up to s**2 is entrywise positive."""
    P = np.asarray(P, dtype=float)
    s = P.shape[0]
    pattern = (P > 0).astype(float)
    Q = pattern.copy()
    for _ in range(s * s):
        if np.all(Q > 0):
            return True
        Q = np.minimum(Q @ pattern, 1.0)
    return False


def _check_stochastic(P: np.ndarray) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0):
        raise ValueError("transition matrix has negative entries")
    if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("transition matrix rows must sum to 1")


@dataclass(frozen=True)
class TopologyEnsemble:
    graphs: tuple[Digraph, ...]
    transition: np.ndarray
    initial_dist: np.ndarray

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise ValueError("ensemble needs at least one graph")
        m = graphs[0].node_count
        if any(g.node_count != m for g in graphs):
            raise ValueError("all graphs must share the node set")
        P = np.array(self.transition, dtype=float)
        if P.shape != (len(graphs), len(graphs)):
            raise ValueError("transition matrix shape does not match graph count")
        _check_stochastic(P)
        p0 = np.array(self.initial_dist, dtype=float)
        if p0.shape != (len(graphs),) or np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-12:
            raise ValueError("initial distribution must be a probability vector")
        P.setflags(write=False)
        p0.setflags(write=False)
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial_dist", p0)

    @property
    def node_count(self) -> int:
        return self.graphs[0].node_count

    @property
    def size(self) -> int:
        return len(self.graphs)

    def union_edges(self) -> list[tuple[int, int]]:
        """``(receiver, sender)`` pairs present in any member graph, receiver-major."""
        support = np.zeros((self.node_count,) * 2, dtype=bool)
        for g in self.graphs:
            support |= g.weights > 0
        rows, cols = np.nonzero(support)
        return list(zip(rows.tolist(), cols.tolist()))


def union_graph(e: TopologyEnsemble) -> Digraph:
    pi = stationary_distribution(e.transition)
    w = sum(p * g.weights for p, g in zip(pi, e.graphs))
    return Digraph(w)


@dataclass(frozen=True)
class EnsembleReport:
    stationary: np.ndarray
    pi_min: float
    lambda2_mirror: float
    lambda_m: float
    neighbor_sizes: tuple[int, ...]
    n_bar: int
    balanced_all: bool
    union_has_spanning_tree: bool
    ergodic: bool
    problems: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.problems


def validate_ensemble(e: TopologyEnsemble) -> EnsembleReport:
    """Check the topology assumption and compute the ensemble constants.

    Never raises on a failing ensemble; the verdicts are in the report.
    """
    problems = []
    s = e.size
    try:
        pi = stationary_distribution(e.transition)
        unique = True
    except NonErgodicChain:
        pi = np.full(s, np.nan)
        unique = False
    ergodic = unique and is_aperiodic_irreducible(e.transition)
    if not ergodic:
        problems.append("Markov chain is not ergodic")

    balanced = all(g.is_balanced() for g in e.graphs)
    if not balanced:
        problems.append("some member graph is not balanced")

    support = np.zeros((e.node_count,) * 2, dtype=bool)
    for g in e.graphs:
        support |= g.weights > 0
    rooted = has_spanning_tree(Digraph(np.where(support, 0.5, 0.0)))
    if not rooted:
        problems.append("union graph has no spanning tree")

    edges = e.union_edges()
    if unique and edges:
        occupancy = [
            sum(pi[u] for u, g in enumerate(e.graphs) if g.weights[i, j] > 0)
            for i, j in edges
        ]
        pi_min = float(min(occupancy))
    else:
        pi_min = float("nan") if not unique else 0.0

    lambda2 = 0.0
    if unique:
        union = union_graph(e)
        if union.is_balanced():
            lambda2 = smallest_nonzero_eigenvalue(mirror_laplacian(union))
    lambda_m = max(spectral_norm(laplacian(g)) for g in e.graphs)
    sizes = tuple(int(n) for n in support.sum(axis=1))
    return EnsembleReport(
        stationary=pi,
        pi_min=pi_min,
        lambda2_mirror=float(lambda2),
        lambda_m=lambda_m,
        neighbor_sizes=sizes,
        n_bar=max(sizes),
        balanced_all=balanced,
        union_has_spanning_tree=rooted,
        ergodic=ergodic,
        problems=tuple(problems),
    )


class MarkovSwitcher:
    """Samples the active graph index. Owns its generator.

    The initial state is drawn from the ensemble's initial distribution, and
    each ``next()`` consumes exactly one uniform draw.
    """

    def __init__(self, ensemble: TopologyEnsemble, rng: np.random.Generator):
        self.ensemble = ensemble
        self.rng = rng
        self._cum = cumulative_rows(ensemble.transition)
        self.current_state = int(pick_index(cumulative_rows(ensemble.initial_dist[None, :])[0], rng.random()))

    def next(self) -> int:
        self.current_state = int(pick_index(self._cum[self.current_state], self.rng.random()))
        return self.current_state


def cumulative_rows(P: np.ndarray) -> np.ndarray:
    cum = np.cumsum(np.asarray(P, dtype=float), axis=1)
    cum[:, -1] = 1.0
    return cum


def pick_index(cum_row: np.ndarray, u):
    """Inverse-CDF selection; works for a scalar draw or vectorised rows."""
    return (np.asarray(cum_row) <= np.asarray(u)[..., None]).sum(axis=-1)


def markov_next(sw: MarkovSwitcher) -> int:
    return sw.next()
