"""Drift models, Euler-Maruyama integration and stationary statistics.

Three drift families share one small interface (``dim``, ``drift``,
``drift_batch``, ``noise_scale``):

* :class:`LinearDrift` -- F(x) = A x
* :class:`BasisDrift` -- F(x) = A f(x) for a finite list of basis functions
* :class:`MassSpring` -- damped unit masses joined by unit springs, state
  ``[q, v]`` with noise entering the velocities only.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import kernels

DIVERGENCE_GUARD = 1e8
DIRECT_LYAPUNOV_MAX_P = 32


class DivergenceError(FloatingPointError):
    """A simulated path left the box |x| <= 1e8 (or became non-finite)."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"trajectory diverged at step {step}")


class UnstableMatrixError(ValueError):
    """The drift matrix has no positive definite stationary covariance."""


@dataclass(frozen=True)
class InteractionMatrix:
    """A real p x p drift matrix with an optional claimed stability margin."""

    entries: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"interaction matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("interaction matrix has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be nonnegative")

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    def margin(self) -> float:
        """lambda_min(-(A + A^T)/2)."""
        a = self.entries
        return float(np.linalg.eigvalsh(-(a + a.T) / 2.0)[0])

    def satisfies_margin(self, tol: float = 1e-9) -> bool:
        if self.rho is None:
            return True
        return self.margin() >= self.rho - tol

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def as_matrix(A) -> np.ndarray:
    if isinstance(A, InteractionMatrix):
        return A.entries
    return np.asarray(A, dtype=float)


@dataclass(frozen=True)
class LinearDrift:
    A: InteractionMatrix

    def __post_init__(self):
        if not isinstance(self.A, InteractionMatrix):
            object.__setattr__(self, "A", InteractionMatrix(self.A))

    @property
    def dim(self) -> int:
        return self.A.p

    def drift(self, x):
        return self.A.entries @ np.asarray(x, dtype=float)

    def drift_batch(self, X):
        return np.asarray(X, dtype=float) @ self.A.entries.T

    def noise_scale(self):
        return np.ones(self.dim)


class FeatureMap:
    """A basis that evaluates all of its functions on a batch of states at once.

    Subclasses implement :meth:`evaluate`; indexing yields the single scalar
    functions so a ``FeatureMap`` can stand in for a list of callables.
    """

    names: list[str]

    def __len__(self):
        return len(self.names)

    def __getitem__(self, j):
        def f(X, _j=j):
            return self.evaluate(np.atleast_2d(X))[:, _j]

        f.__name__ = self.names[j]
        return f

    def evaluate(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


def evaluate_basis(basis, X) -> np.ndarray:
    """Evaluate ``basis`` on states ``X`` of shape (n, dim); returns (n, m).

    Plain callables receive the whole (n, dim) batch and must return (n,).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(basis, FeatureMap):
        return basis.evaluate(X)
    cols = []
    for f in basis:
        col = np.broadcast_to(np.asarray(f(X), dtype=float), (X.shape[0],))
        cols.append(col)
    return np.column_stack(cols) if cols else np.empty((X.shape[0], 0))


@dataclass(frozen=True)
class BasisDrift:
    """F(x) = A f(x) with A of shape (dim, m) and m basis functions."""

    coef: np.ndarray
    basis: Sequence[Callable] | FeatureMap

    def __post_init__(self):
        c = np.array(self.coef, dtype=float)
        if c.ndim != 2:
            raise ValueError("coefficient matrix must be 2-d")
        if c.shape[1] != len(self.basis):
            raise ValueError(
                f"coefficient matrix has {c.shape[1]} columns but basis has {len(self.basis)} functions"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficient matrix has non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    @property
    def dim(self) -> int:
        return self.coef.shape[0]

    def features(self, X):
        return evaluate_basis(self.basis, X)

    def drift(self, x):
        return self.drift_batch(np.asarray(x, dtype=float)[None, :])[0]

    def drift_batch(self, X):
        return self.features(X) @ self.coef.T

    def noise_scale(self):
        return np.ones(self.dim)


@dataclass(frozen=True)
class MassSpring:
    """p unit masses in R^d; ``C0`` adjacency, ``D0`` rest lengths.

    State is ``[q, v]`` with q and v each of length p*d, mass-major.
    """

    C0: np.ndarray
    D0: np.ndarray
    gamma_damp: float
    sigma: float
    d: int
    rest_positions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        C = np.array(self.C0, dtype=float)
        D = np.array(self.D0, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or D.shape != C.shape:
            raise ValueError("C0 and D0 must be square matrices of equal shape")
        if not np.array_equal(C, C.T) or np.any(np.diag(C) != 0):
            raise ValueError("C0 must be symmetric with zero diagonal")
        if not np.all((C == 0) | (C == 1)):
            raise ValueError("C0 must be a 0-1 matrix")
        if np.any(D[C == 1] <= 0):
            raise ValueError("rest lengths must be positive on every spring")
        if not np.allclose(D[C == 1], D.T[C == 1]):
            raise ValueError("D0 must be symmetric on the springs")
        if self.gamma_damp < 0 or self.sigma <= 0 or self.d < 1:
            raise ValueError("need gamma_damp >= 0, sigma > 0, d >= 1")
        for arr in (C, D):
            arr.setflags(write=False)
        object.__setattr__(self, "C0", C)
        object.__setattr__(self, "D0", D)
        i, j = np.nonzero(np.triu(C, 1))
        object.__setattr__(self, "_ei", i.astype(np.int64))
        object.__setattr__(self, "_ej", j.astype(np.int64))
        object.__setattr__(self, "_rest", np.ascontiguousarray(D[i, j]))

    @property
    def p(self) -> int:
        return self.C0.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.p * self.d

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self._ei.tolist(), self._ej.tolist()))

    def force(self, q) -> np.ndarray:
        """-grad U(q)."""
        q = np.ascontiguousarray(q, dtype=float)
        return kernels.spring_force(q, self._ei, self._ej, self._rest, self.d)

    def potential(self, q) -> float:
        qq = np.asarray(q, dtype=float).reshape(self.p, self.d)
        delta = qq[self._ei] - qq[self._ej]
        ext = np.linalg.norm(delta, axis=1) - self._rest
        return float(0.5 * np.sum(ext**2))

    def drift(self, x):
        x = np.asarray(x, dtype=float)
        pd = self.p * self.d
        q, v = x[:pd], x[pd:]
        return np.concatenate([v, self.force(q) - self.gamma_damp * v])

    def drift_batch(self, X):
        return np.array([self.drift(x) for x in np.atleast_2d(X)])

    def noise_scale(self):
        pd = self.p * self.d
        return np.concatenate([np.zeros(pd), np.full(pd, self.sigma)])

    def rest_state(self) -> np.ndarray:
        if self.rest_positions is None:
            raise ValueError("this network carries no rest configuration")
        q = np.asarray(self.rest_positions, dtype=float).ravel()
        return np.concatenate([q, np.zeros_like(q)])


DriftModel = LinearDrift | BasisDrift | MassSpring


def mass_spring_drift(q, v, C0, D0, gamma_damp, d=None) -> np.ndarray:
    """Return ``[v, -gamma_damp*v - grad U(q)]`` for the spring network.

    ``q`` and ``v`` may be given as (p, d) arrays or flat mass-major vectors;
    with flat input ``d`` is required.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if d is None:
        if q.ndim != 2:
            raise ValueError("pass d when q is flat")
        d = q.shape[1]
    model = MassSpring(C0, D0, gamma_damp, 1.0, d)
    return model.drift(np.concatenate([q.ravel(), v.ravel()]))


@dataclass(frozen=True)
class Trajectory:
    """A uniformly sampled path; row 0 of ``states`` is the initial condition."""

    eta: float
    states: np.ndarray
    seed: int | None = None

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def T(self) -> float:
        return self.eta * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.eta * np.arange(self.states.shape[0])


def default_eta(model) -> float:
    if isinstance(model, MassSpring):
        return 0.005
    if isinstance(model, LinearDrift):
        norm = np.linalg.norm(model.A.entries, ord=np.inf)
        return 0.01 / norm if norm > 0 else 0.01
    return 1e-3


def path_rng(seed, index=None) -> np.random.Generator:
    """Generator for ``seed`` or for path ``index`` under master ``seed``.

    The derivation depends only on the (seed, index) pair, so how paths are
    distributed over workers never changes the numbers.
    """
    if index is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _check_linear_step(A: np.ndarray, eta: float):
    norm = np.linalg.norm(A, ord=np.inf)
    if eta * norm > 0.1:
        warnings.warn(
            f"eta*||A||_inf = {eta * norm:.3g} is not small; Euler steps may be inaccurate",
            RuntimeWarning,
            stacklevel=3,
        )


def simulate(model, x0, eta: float, n_steps: int, seed: int) -> Trajectory:
    """Euler-Maruyama path of ``model`` from ``x0``.

    x[t+1] = x[t] + F(x[t]) eta + sqrt(eta) * s * xi[t], with ``s`` the
    model's per-coordinate noise scale. Bit-identical for identical inputs.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    x0 = np.ascontiguousarray(x0, dtype=float).ravel()
    if x0.shape[0] != model.dim:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, model expects {model.dim}")
    rng = path_rng(seed)
    scale = model.noise_scale() * np.sqrt(eta)

    if isinstance(model, MassSpring):
        pd = model.p * model.d
        noise = np.ascontiguousarray(rng.standard_normal((n_steps, pd)) * scale[pd:])
        states, bad = kernels.euler_mass_spring(
            model._ei, model._ej, model._rest, model.d, float(model.gamma_damp),
            float(eta), x0, noise, DIVERGENCE_GUARD,
        )
    elif isinstance(model, LinearDrift):
        A = np.ascontiguousarray(model.A.entries)
        _check_linear_step(A, eta)
        noise = np.ascontiguousarray(rng.standard_normal((n_steps, model.dim)) * scale)
        states, bad = kernels.euler_linear(A, x0, float(eta), noise, DIVERGENCE_GUARD)
    else:
        noise = rng.standard_normal((n_steps, model.dim)) * scale
        states = np.empty((n_steps + 1, model.dim))
        states[0] = x0
        x = x0.copy()
        bad = -1
        for t in range(n_steps):
            x = x + model.drift(x) * eta + noise[t]
            states[t + 1] = x
            if not np.all(np.abs(x) <= DIVERGENCE_GUARD):
                bad = t + 1
                break
    if bad >= 0:
        raise DivergenceError(bad)
    return Trajectory(eta=float(eta), states=states, seed=seed)


def _lyapunov_direct(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A X) = (A kron I) vec X, vec(X A^T) = (I kron A) vec X
    p = A.shape[0]
    eye = np.eye(p)
    K = np.kron(A, eye) + np.kron(eye, A)
    return np.linalg.solve(K, -Q.ravel()).reshape(p, p)


def _lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    if A.shape[0] <= DIRECT_LYAPUNOV_MAX_P:
        return _lyapunov_direct(A, Q)
    return scipy.linalg.solve_continuous_lyapunov(A, -Q)


def lyapunov_residual(A, S) -> float:
    A = as_matrix(A)
    p = A.shape[0]
    return float(np.max(np.abs(A @ S + S @ A.T + np.eye(p))))


def stationary_covariance(A, tol: float = 1e-10) -> np.ndarray:
    """Solve A S + S A^T + I = 0 for the stationary covariance S.

    Small systems (p <= 32) use a direct Kronecker solve, larger ones a
    Schur-based solver; one refinement pass is applied if the residual is
    above ``tol``.
    """
    A = as_matrix(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    p = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise UnstableMatrixError("A is not Hurwitz; no stationary covariance exists")
    eye = np.eye(p)
    S = _lyapunov(A, eye)
    S = 0.5 * (S + S.T)
    R = A @ S + S @ A.T + eye
    if np.max(np.abs(R)) > tol:
        E = _lyapunov(A, R)
        S = S + 0.5 * (E + E.T)
    return S


def sample_stationary(A, seed, size: int | None = None) -> np.ndarray:
    """Draw from N(0, S) with S the stationary covariance of dx = A x dt + db."""
    S = stationary_covariance(A)
    w, V = np.linalg.eigh(S)
    if w[0] <= 0:
        raise UnstableMatrixError("stationary covariance is not positive definite")
    root = V * np.sqrt(w)
    rng = seed if isinstance(seed, np.random.Generator) else path_rng(seed)
    if size is None:
        return root @ rng.standard_normal(S.shape[0])
    return rng.standard_normal((size, S.shape[0])) @ root.T
