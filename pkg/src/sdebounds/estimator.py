"""l1-penalised least-squares recovery of the signed drift support.

Each drift row i solves

    min_a  (1 / (2 T eta)) sum_t (dx_t[i] - eta <a, f_t>)^2 + lam |a|_1

with T = n eta, which up to a constant is 0.5 a'Ga - c'a + lam |a|_1 where
G = mean_t f_t f_t' and c = (1/T) sum_t f_t dx_t. Only (G, c) are needed, so
long runs are reduced to :class:`SufficientStats` without storing paths.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .sde import (
    DIVERGENCE_GUARD,
    DivergenceError,
    FeatureMap,
    LinearDrift,
    MassSpring,
    Trajectory,
    as_matrix,
    evaluate_basis,
    path_rng,
    sample_stationary,
    simulate,
)

DEFAULT_LAMBDA_C = 0.1
SPRING_LAMBDA_C = 0.03
CD_TOL = 1e-8
CD_MAX_SWEEPS = 10_000
CHUNK_STEPS = 1 << 15


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RegressionData:
    features: np.ndarray  # (n, q)
    targets: np.ndarray  # (n, r): x[t+1] - x[t]
    eta: float

    def __post_init__(self):
        if self.features.shape[0] != self.targets.shape[0]:
            raise ValueError("features and targets are not aligned")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise ValueError("regression data has non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def T(self) -> float:
        return self.n * self.eta


@dataclass
class SufficientStats:
    """Running sums for the lasso objective: sum f f' and sum f dx'."""

    ff: np.ndarray
    fdx: np.ndarray
    n: int
    eta: float

    @classmethod
    def zeros(cls, q, r, eta):
        return cls(np.zeros((q, q)), np.zeros((q, r)), 0, float(eta))

    @classmethod
    def from_data(cls, data: RegressionData):
        F = data.features
        return cls(F.T @ F, F.T @ data.targets, data.n, float(data.eta))

    def add(self, F, dX):
        self.ff += F.T @ F
        self.fdx += F.T @ dX
        self.n += F.shape[0]

    def copy(self):
        return SufficientStats(self.ff.copy(), self.fdx.copy(), self.n, self.eta)

    @property
    def T(self) -> float:
        return self.n * self.eta

    @property
    def gram(self) -> np.ndarray:
        return self.ff / self.n

    @property
    def cross(self) -> np.ndarray:
        return self.fdx / self.T


def build_regression(traj: Trajectory, basis=None, rows=None) -> RegressionData:
    """Pair x_t (or f(x_t)) with the increment x_{t+1} - x_t.

    ``rows`` restricts the targets to a subset of state coordinates (e.g. the
    noisy velocity block of a spring network).
    """
    if traj.n_steps < 2:
        raise ValueError("need at least two steps")
    X = traj.states[:-1]
    dX = np.diff(traj.states, axis=0)
    if rows is not None:
        dX = dX[:, rows]
    F = X if basis is None else evaluate_basis(basis, X)
    return RegressionData(np.ascontiguousarray(F), np.ascontiguousarray(dX), traj.eta)


def _as_stats(data) -> SufficientStats:
    if isinstance(data, SufficientStats):
        return data
    if isinstance(data, RegressionData):
        return SufficientStats.from_data(data)
    raise TypeError("expected RegressionData or SufficientStats")


def default_lambda(data, c: float = DEFAULT_LAMBDA_C) -> float:
    """c * sqrt(s log q / T), s the mean squared feature size.

    s makes the penalty invariant to the units of the features; the noise in
    each entry of c has standard deviation sqrt(G_jj / T).
    """
    st = _as_stats(data)
    q = st.ff.shape[0]
    s = float(np.mean(np.diag(st.gram)))
    return c * math.sqrt(s * math.log(max(q, 2)) / st.T)


def lasso_path(G, C, lambdas, tol=CD_TOL, max_sweeps=CD_MAX_SWEEPS, B0=None):
    """Solve every column of the covariance-form lasso along decreasing ``lambdas``.

    Returns the (q, r) solution at the last lambda and the sweep counts.
    """
    G = np.ascontiguousarray(G, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    B = np.zeros_like(C) if B0 is None else np.ascontiguousarray(B0, dtype=float).copy()
    sweeps = []
    for lam in lambdas:
        sweeps.append(kernels.lasso_cd(G, C, float(lam), B, float(tol), int(max_sweeps)))
    return B, sweeps


def l1_drift_estimate(data, lam=None, *, c: float = DEFAULT_LAMBDA_C, tol: float = CD_TOL,
                      max_sweeps: int = CD_MAX_SWEEPS, n_path: int = 10, return_info: bool = False):
    """Row-wise lasso estimate of the drift coefficients, shape (r, q).

    ``lam`` defaults to :func:`default_lambda`. The solve warm-starts along a
    geometric path from the smallest penalty that zeroes everything. Hitting
    ``max_sweeps`` raises a :class:`ConvergenceWarning`.
    """
    st = _as_stats(data)
    if st.n < 2:
        raise ValueError("need at least two samples")
    if lam is None:
        lam = default_lambda(st, c)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    G, C = st.gram, st.cross
    lam_max = float(np.max(np.abs(C))) if C.size else 0.0
    if lam >= lam_max:
        path = [lam]
    else:
        start = max(lam, lam_max)
        stop = max(lam, 1e-3 * lam_max)
        path = list(np.geomspace(start, stop, n_path)) if stop > 0 else [start]
        if path[-1] != lam:
            path.append(lam)
    B, sweeps = lasso_path(G, C, path, tol, max_sweeps)
    converged = max(sweeps) < max_sweeps
    if not converged:
        warnings.warn(f"coordinate descent hit {max_sweeps} sweeps at lambda={lam:.3g}",
                      ConvergenceWarning, stacklevel=2)
    Ahat = B.T
    if return_info:
        return Ahat, {"lambda": float(lam), "sweeps": sweeps, "converged": converged}
    return Ahat


def kkt_violation(data, Ahat, lam) -> float:
    """Largest violation of the lasso optimality conditions over all rows."""
    st = _as_stats(data)
    grad = st.gram @ Ahat.T - st.cross  # (q, r)
    B = Ahat.T
    active = B != 0
    v_active = np.abs(grad[active] + lam * np.sign(B[active]))
    v_zero = np.clip(np.abs(grad[~active]) - lam, 0.0, None)
    return float(max(v_active.max(initial=0.0), v_zero.max(initial=0.0)))


def signed_support(Ahat, tau: float = 0.0) -> np.ndarray:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    Ahat = np.asarray(Ahat, dtype=float)
    return np.where(np.abs(Ahat) > tau, np.sign(Ahat), 0.0).astype(np.int8)


def gap_threshold(Ahat) -> float:
    """Threshold at the midpoint of the widest gap in sorted |Ahat|."""
    mags = np.sort(np.abs(np.asarray(Ahat, dtype=float)).ravel())
    if mags.size < 2:
        return 0.0
    gaps = np.diff(mags)
    i = int(np.argmax(gaps))
    return float(0.5 * (mags[i] + mags[i + 1]))


@dataclass
class RecoveryResult:
    estimated_sign: np.ndarray
    truth_sign: np.ndarray
    lam: float
    threshold: float
    row_errors: np.ndarray = field(init=False)
    success: bool = field(init=False)

    def __post_init__(self):
        self.estimated_sign = np.asarray(self.estimated_sign, dtype=np.int8)
        self.truth_sign = np.asarray(self.truth_sign, dtype=np.int8)
        if self.estimated_sign.shape != self.truth_sign.shape:
            raise ValueError("estimated and true sign matrices differ in shape")
        self.row_errors = np.sum(self.estimated_sign != self.truth_sign, axis=1)
        self.success = bool(np.all(self.row_errors == 0))

    def to_dict(self):
        return {
            "success": self.success,
            "lambda": self.lam,
            "threshold": self.threshold,
            "row_errors": self.row_errors.tolist(),
            "estimated_sign": self.estimated_sign.tolist(),
            "truth_sign": self.truth_sign.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["estimated_sign"]), np.array(d["truth_sign"]),
                   float(d["lambda"]), float(d["threshold"]))


def recover_signed_support(data, truth, lam=None, tau=None, c: float = DEFAULT_LAMBDA_C) -> RecoveryResult:
    """Lasso, threshold at ``tau`` (largest-gap rule if None), compare with sign(truth)."""
    Ahat, info = l1_drift_estimate(data, lam, c=c, return_info=True)
    if tau is None:
        tau = gap_threshold(Ahat)
    truth_sign = np.sign(np.asarray(truth, dtype=float)).astype(np.int8)
    return RecoveryResult(signed_support(Ahat, tau), truth_sign, info["lambda"], float(tau))


# -- streaming statistics ------------------------------------------------------

def linear_stats_at(A, x0, eta, checkpoints, seed) -> list[SufficientStats]:
    """Simulate dx = A x dt + db once and snapshot the lasso statistics.

    ``checkpoints`` are increasing step counts; the returned list holds the
    statistics of the prefix of each length. The noise stream is the one
    :func:`simulate` would draw for the same seed.
    """
    A = np.ascontiguousarray(as_matrix(A))
    p = A.shape[0]
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])) or checkpoints[0] < 1:
        raise ValueError("checkpoints must be positive and strictly increasing")
    rng = seed if isinstance(seed, np.random.Generator) else path_rng(seed)
    sq = math.sqrt(eta)
    stats = SufficientStats.zeros(p, p, eta)
    out = []
    x = np.ascontiguousarray(x0, dtype=float)
    done = 0
    for target in checkpoints:
        while done < target:
            m = min(CHUNK_STEPS, target - done)
            noise = rng.standard_normal((m, p)) * sq
            states, bad = kernels.euler_linear(A, x, float(eta), noise, DIVERGENCE_GUARD)
            if bad >= 0:
                raise DivergenceError(done + bad)
            stats.add(states[:-1], np.diff(states, axis=0))
            x = np.ascontiguousarray(states[-1])
            done += m
        out.append(stats.copy())
    return out


def stats_from_trajectory(traj: Trajectory, basis=None, rows=None, checkpoints=None):
    """Lasso statistics of a stored path, optionally for several prefixes."""
    n = traj.n_steps
    checkpoints = [n] if checkpoints is None else [int(c) for c in checkpoints]
    if checkpoints[-1] > n:
        raise ValueError("checkpoint beyond trajectory length")
    X = traj.states
    out = []
    stats = None
    done = 0
    for target in checkpoints:
        while done < target:
            m = min(CHUNK_STEPS, target - done)
            blk = X[done:done + m + 1]
            F = blk[:-1] if basis is None else evaluate_basis(basis, blk[:-1])
            dX = np.diff(blk, axis=0)
            if rows is not None:
                dX = dX[:, rows]
            if stats is None:
                stats = SufficientStats.zeros(F.shape[1], dX.shape[1], traj.eta)
            stats.add(F, dX)
            done += m
        out.append(stats.copy())
    return out


# -- sample complexity ---------------------------------------------------------

def _trial_seed(master_seed, p, trial):
    return np.random.SeedSequence([int(master_seed), int(p), int(trial)])


def run_linear_trial(spec, T_grid, trial: int, master_seed: int = 0, eta=None,
                     lam_c: float = DEFAULT_LAMBDA_C, tau=None):
    """One ensemble draw, one path, success flags at every horizon in ``T_grid``."""
    from .ensembles import sample_ensemble

    ss = _trial_seed(master_seed, spec.p, trial)
    s_mat, s_x0, s_path = ss.spawn(3)
    A = sample_ensemble(spec, np.random.default_rng(s_mat))
    x0 = sample_stationary(A, np.random.default_rng(s_x0))
    if eta is None:
        eta = 0.01 / np.linalg.norm(A.entries, ord=np.inf)
    steps = [max(2, int(round(T / eta))) for T in T_grid]
    stats = linear_stats_at(A, x0, eta, steps, np.random.default_rng(s_path))
    tau = spec.coupling / 2.0 if tau is None else tau
    truth = np.sign(A.entries)
    return [recover_signed_support(st, truth, tau=tau, c=lam_c).success for st in stats]


@dataclass
class ComplexityTable:
    spec: object
    T_grid: list
    trials: int
    successes: list
    failures_diverged: int = 0

    @property
    def p(self) -> int:
        return self.spec.p

    @property
    def regime(self) -> str:
        return self.spec.regime

    @property
    def success_rate(self):
        return [s / self.trials for s in self.successes]

    @property
    def k_or_density(self):
        return self.spec.k if self.regime == "sparse" else 0.5

    def rows(self):
        return [
            {"p": self.p, "k_or_density": self.k_or_density, "T": T, "trials": self.trials,
             "successes": s, "success_rate": s / self.trials}
            for T, s in zip(self.T_grid, self.successes)
        ]

    def t_star(self, level: float):
        for T, r in zip(self.T_grid, self.success_rate):
            if r >= level:
                return T
        return None


def estimate_sample_complexity(spec, T_grid, trials: int, success_level: float = 0.9,
                               master_seed: int = 0, eta=None, lam_c: float = DEFAULT_LAMBDA_C,
                               tau=None, threads: int = 1) -> ComplexityTable:
    """Exact-recovery rate at each horizon over independent trials.

    Each trial draws a matrix and one stationary path observed up to
    max(T_grid); shorter horizons use prefixes of the same path. A trial
    whose path diverges counts as a failure at every horizon.
    """
    T_grid = [float(t) for t in T_grid]
    if any(b <= a for a, b in zip(T_grid, T_grid[1:])):
        raise ValueError("T_grid must be strictly increasing")
    if trials < 1:
        raise ValueError("need at least one trial")

    def one(i):
        try:
            return run_linear_trial(spec, T_grid, i, master_seed, eta, lam_c, tau), False
        except DivergenceError:
            return [False] * len(T_grid), True

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, range(trials)))
    else:
        results = [one(i) for i in range(trials)]
    succ = np.sum([r for r, _ in results], axis=0).astype(int).tolist()
    return ComplexityTable(spec, T_grid, trials, succ,
                           sum(1 for _, d in results if d))


# -- spring networks -----------------------------------------------------------

class MassSpringBasis(FeatureMap):
    """Features [v^(i)], [Delta^(ij)], [Delta^(ij) / |Delta^(ij)|] for i < j, all components."""

    def __init__(self, p: int, d: int):
        self.p, self.d = p, d
        self.pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
        self._i = np.array([i for i, _ in self.pairs], dtype=int)
        self._j = np.array([j for _, j in self.pairs], dtype=int)
        names = [f"v{i}_{a}" for i in range(p) for a in range(d)]
        names += [f"D{i},{j}_{a}" for i, j in self.pairs for a in range(d)]
        names += [f"U{i},{j}_{a}" for i, j in self.pairs for a in range(d)]
        self.names = names

    def __len__(self):
        return len(self.names)

    @property
    def n_pairs(self):
        return len(self.pairs)

    def delta_columns(self, pair_index: int) -> np.ndarray:
        base = self.p * self.d + pair_index * self.d
        return np.arange(base, base + self.d)

    def unit_columns(self, pair_index: int) -> np.ndarray:
        base = self.p * self.d + (self.n_pairs + pair_index) * self.d
        return np.arange(base, base + self.d)

    def evaluate(self, X):
        X = np.atleast_2d(X)
        n = X.shape[0]
        pd = self.p * self.d
        q = X[:, :pd].reshape(n, self.p, self.d)
        v = X[:, pd:]
        delta = q[:, self._i, :] - q[:, self._j, :]
        norm = np.linalg.norm(delta, axis=2, keepdims=True)
        if np.any(norm == 0):
            raise ZeroDivisionError("coincident masses: unit-vector feature undefined")
        unit = delta / norm
        return np.concatenate([v, delta.reshape(n, -1), unit.reshape(n, -1)], axis=1)

    def exact_coefficients(self, model: MassSpring) -> np.ndarray:
        """Coefficient matrix (2 p d, m) reproducing the spring drift exactly."""
        p, d = self.p, self.d
        pd = p * d
        coef = np.zeros((2 * pd, len(self)))
        coef[:pd, :pd] = np.eye(pd)
        coef[pd:, :pd] = -model.gamma_damp * np.eye(pd)
        for k, (i, j) in enumerate(self.pairs):
            if model.C0[i, j] == 0:
                continue
            dc, uc = self.delta_columns(k), self.unit_columns(k)
            for a in range(d):
                coef[pd + i * d + a, dc[a]] = -1.0
                coef[pd + i * d + a, uc[a]] = model.D0[i, j]
                coef[pd + j * d + a, dc[a]] = 1.0
                coef[pd + j * d + a, uc[a]] = -model.D0[i, j]
        return coef


def spring_edge_scores(Ahat_vel, basis: MassSpringBasis) -> np.ndarray:
    """Per-pair RMS of the matching-component coefficients on Delta^(ij).

    ``Ahat_vel`` holds the velocity rows only, shape (p d, m). A spring of
    unit stiffness scores 1, an absent pair 0.
    """
    p, d = basis.p, basis.d
    scores = np.zeros((p, p))
    for k, (i, j) in enumerate(basis.pairs):
        cols = basis.delta_columns(k)
        vals = [Ahat_vel[i * d + a, cols[a]] for a in range(d)]
        vals += [Ahat_vel[j * d + a, cols[a]] for a in range(d)]
        scores[i, j] = scores[j, i] = math.sqrt(np.mean(np.square(vals)))
    return scores


def recover_spring_edges(stats: SufficientStats, model: MassSpring, basis: MassSpringBasis,
                         lam=None, tau: float = 0.5, c: float = SPRING_LAMBDA_C) -> RecoveryResult:
    """Lasso on the velocity rows, then threshold the per-pair edge scores."""
    Ahat, info = l1_drift_estimate(stats, lam, c=c, return_info=True)
    scores = spring_edge_scores(Ahat, basis)
    est = (scores > tau).astype(np.int8)
    return RecoveryResult(est, model.C0.astype(np.int8), info["lambda"], float(tau))


def spring_trial(model: MassSpring, T_grid, trial: int, master_seed: int = 0, eta: float = 0.005,
                 lam_c: float = SPRING_LAMBDA_C, tau: float = 0.5, return_trajectory: bool = False):
    """Simulate one network path from rest and recover edges at each horizon."""
    basis = MassSpringBasis(model.p, model.d)
    seed = int(np.random.SeedSequence([int(master_seed), 9001, int(trial)]).generate_state(1)[0])
    steps = [max(2, int(round(T / eta))) for T in T_grid]
    traj = simulate(model, model.rest_state(), eta, steps[-1], seed)
    pd = model.p * model.d
    stats = stats_from_trajectory(traj, basis, rows=slice(pd, 2 * pd), checkpoints=steps)
    results = [recover_spring_edges(st, model, basis, tau=tau, c=lam_c) for st in stats]
    if return_trajectory:
        return results, traj
    return results
