"""Random drift matrices for the sparse and dense classes, and spring networks.

Sparse: A = -(gamma + 2 a_min sqrt(k-1)) I + a_min * S, S a randomly signed
k-regular adjacency matrix. Dense: A = -(gamma + 2 sqrt(alpha)) I + W / sqrt(p)
with W symmetric, entries +-a_min w.p. 1/4 each and 0 w.p. 1/2. In both cases
gamma is the smallest shift with lambda_max(A) <= -rho.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sde import InteractionMatrix, MassSpring, path_rng

GAMMA_FLOOR = 1e-12


class GraphSamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SparseEnsembleSpec:
    p: int
    k: int = 3
    a_min: float = 1.0
    rho: float = 0.1

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("sparse class needs k >= 3")
        if self.k >= self.p:
            raise ValueError("need k < p")
        if (self.p * self.k) % 2:
            raise ValueError("p*k must be even for a k-regular graph to exist")
        if self.a_min <= 0 or self.rho <= 0:
            raise ValueError("a_min and rho must be positive")

    @property
    def regime(self) -> str:
        return "sparse"

    @property
    def coupling(self) -> float:
        """Magnitude of every off-diagonal nonzero."""
        return self.a_min


@dataclass(frozen=True)
class DenseEnsembleSpec:
    p: int
    a_min: float = 1.0
    rho: float = 0.1

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("dense ensemble needs p >= 2")
        if self.a_min <= 0 or self.rho <= 0:
            raise ValueError("a_min and rho must be positive")

    @property
    def alpha(self) -> float:
        return self.a_min**2 / 2.0

    @property
    def regime(self) -> str:
        return "dense"

    @property
    def coupling(self) -> float:
        return self.a_min / np.sqrt(self.p)


def _pairing_exact(p, k, rng, tries):
    # configuration model with whole-draw rejection: exactly uniform
    stubs = np.repeat(np.arange(p), k)
    for _ in range(tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        i, j = pairs[:, 0], pairs[:, 1]
        if np.any(i == j):
            continue
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        keys = lo * p + hi
        if np.unique(keys).size == keys.size:
            return lo, hi
    return None


def _pairing_incremental(p, k, rng, tries):
    # pair stubs one edge at a time, skipping loops and repeats; restart on dead ends
    for _ in range(tries):
        stubs = list(np.repeat(np.arange(p), k))
        edges = set()
        while stubs:
            n = len(stubs)
            for _ in range(50 * n):
                a, b = rng.integers(n, size=2)
                u, v = stubs[a], stubs[b]
                if u != v and (min(u, v), max(u, v)) not in edges:
                    break
            else:
                break
            edges.add((min(u, v), max(u, v)))
            for idx in sorted((a, b), reverse=True):
                stubs[idx] = stubs[-1]
                stubs.pop()
        if not stubs:
            e = np.array(sorted(edges), dtype=np.int64)
            return e[:, 0], e[:, 1]
    return None


def random_regular_signed(p: int, k: int, seed, max_retries: int = 1000) -> np.ndarray:
    """Symmetric {-1,0,+1} matrix whose support is a random k-regular simple graph.

    The graph comes from the pairing model, rejecting draws with loops or
    repeated edges. Rejection succeeds with probability about
    exp(-(k^2-1)/4), so after ``max_retries`` failures the edges are paired
    one at a time instead (asymptotically uniform). Every edge then gets an
    independent fair sign.
    """
    if k >= p or k < 0:
        raise ValueError("need 0 <= k < p")
    if (p * k) % 2:
        raise ValueError("p*k must be even")
    rng = seed if isinstance(seed, np.random.Generator) else path_rng(seed)
    found = _pairing_exact(p, k, rng, max_retries) or _pairing_incremental(p, k, rng, 100)
    if found is None:
        raise GraphSamplingError(f"no simple {k}-regular graph on {p} vertices found")
    lo, hi = found
    signs = rng.choice(np.array([-1, 1]), size=lo.size)
    S = np.zeros((p, p), dtype=np.int8)
    S[lo, hi] = signs
    S[hi, lo] = signs
    return S


def _shift(lam_max: float, edge: float, rho: float) -> float:
    return max(GAMMA_FLOOR, lam_max - edge + rho)


def sparse_ensemble_sample(spec: SparseEnsembleSpec, seed) -> InteractionMatrix:
    S = random_regular_signed(spec.p, spec.k, seed).astype(float)
    W = spec.a_min * S
    edge = 2.0 * spec.a_min * np.sqrt(spec.k - 1)
    gamma = _shift(np.linalg.eigvalsh(W)[-1], edge, spec.rho)
    A = W - (gamma + edge) * np.eye(spec.p)
    return InteractionMatrix(A, rho=spec.rho)


def dense_ensemble_sample(spec: DenseEnsembleSpec, seed) -> InteractionMatrix:
    rng = seed if isinstance(seed, np.random.Generator) else path_rng(seed)
    p = spec.p
    vals = rng.choice(np.array([-spec.a_min, 0.0, spec.a_min]), size=(p, p), p=[0.25, 0.5, 0.25])
    W = np.triu(vals)
    W = W + np.triu(W, 1).T
    W = W / np.sqrt(p)
    edge = 2.0 * np.sqrt(spec.alpha)
    gamma = _shift(np.linalg.eigvalsh(W)[-1], edge, spec.rho)
    A = W - (gamma + edge) * np.eye(p)
    return InteractionMatrix(A, rho=spec.rho)


def sample_ensemble(spec, seed) -> InteractionMatrix:
    if isinstance(spec, SparseEnsembleSpec):
        return sparse_ensemble_sample(spec, seed)
    if isinstance(spec, DenseEnsembleSpec):
        return dense_ensemble_sample(spec, seed)
    raise TypeError(f"not an ensemble spec: {spec!r}")


def in_sparse_class(A, k: int, a_min: float, rho: float, tol: float = 1e-9) -> bool:
    """Row degree <= k off the diagonal, |A_ij| >= a_min on the support, margin >= rho."""
    A = np.asarray(A, dtype=float)
    off = A - np.diag(np.diag(A))
    nz = off != 0
    if np.any(nz.sum(axis=1) > k):
        return False
    if np.any(np.abs(off[nz]) < a_min - tol):
        return False
    return InteractionMatrix(A, rho=rho).satisfies_margin(tol)


def in_dense_class(A, a_min: float, a_max: float, rho: float, tol: float = 1e-9) -> bool:
    """a_min <= |A_ij| sqrt(p) <= a_max on the nonzero off-diagonals, margin >= rho."""
    A = np.asarray(A, dtype=float)
    p = A.shape[0]
    off = A - np.diag(np.diag(A))
    mags = np.abs(off[off != 0]) * np.sqrt(p)
    if mags.size and (mags.min() < a_min - tol or mags.max() > a_max + tol):
        return False
    return InteractionMatrix(A, rho=rho).satisfies_margin(tol)


@dataclass(frozen=True)
class NetworkSpec:
    """Spring network on a rows x cols grid of unit masses.

    ``topology`` is 'grid' (nearest neighbours), 'grid-with-diagonals' (both
    diagonals in every cell) or 'edges' with an explicit ``edge_list``.
    Rest lengths equal ``rest_length`` times the grid distance, so the grid
    layout is a zero-force configuration.
    """

    rows: int = 3
    cols: int = 3
    topology: str = "grid"
    rest_length: float = 1.0
    gamma_damp: float = 2.0
    sigma: float = 0.5
    d: int = 2
    edge_list: tuple[tuple[int, int], ...] | None = field(default=None)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            raise ValueError("grid needs at least two masses")
        if self.topology not in ("grid", "grid-with-diagonals", "edges"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.topology == "edges" and not self.edge_list:
            raise ValueError("topology 'edges' needs an edge_list")
        if self.d < 2 and (self.rows > 1 and self.cols > 1):
            raise ValueError("a 2-d grid needs d >= 2")

    @property
    def p(self) -> int:
        return self.rows * self.cols


def _grid_edges(rows, cols, diagonals):
    idx = lambda r, c: r * cols + c  # noqa: E731
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
            if diagonals and r + 1 < rows and c + 1 < cols:
                edges.append((idx(r, c), idx(r + 1, c + 1)))
                edges.append((idx(r, c + 1), idx(r + 1, c)))
    return edges


def _connected(p, edges):
    adj = [[] for _ in range(p)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == p


def mass_spring_network(spec: NetworkSpec, seed=None) -> MassSpring:
    """Build the spring network described by ``spec``.

    The construction is deterministic; ``seed`` is accepted for interface
    symmetry with the matrix samplers. The returned model carries the grid
    layout as ``rest_positions``.
    """
    p = spec.p
    if spec.topology == "edges":
        edges = [tuple(sorted(map(int, e))) for e in spec.edge_list]
        if any(i == j or not (0 <= i < p and 0 <= j < p) for i, j in edges):
            raise ValueError("edge list has loops or out-of-range vertices")
    else:
        edges = _grid_edges(spec.rows, spec.cols, spec.topology == "grid-with-diagonals")
    if not _connected(p, edges):
        raise ValueError("spring network is disconnected")

    pos = np.zeros((p, spec.d))
    for r in range(spec.rows):
        for c in range(spec.cols):
            if spec.d >= 2:
                pos[r * spec.cols + c, :2] = (c, r)
            else:
                pos[r * spec.cols + c, 0] = c + r
    pos *= spec.rest_length

    C = np.zeros((p, p))
    D = np.zeros((p, p))
    for i, j in edges:
        C[i, j] = C[j, i] = 1.0
        D[i, j] = D[j, i] = np.linalg.norm(pos[i] - pos[j])
    return MassSpring(C, D, spec.gamma_damp, spec.sigma, spec.d, rest_positions=pos)
