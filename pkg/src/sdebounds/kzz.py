"""Two independent Monte-Carlo estimates of I(X^T; A) for a finite prior over drifts.

* direct: average of log p(X | A) / p(X) over joint draws, using the
  Euler-discretised likelihood ratio against the driftless path measure;
* time integral: one half of the integral over [0, T] of the posterior
  variance of the drift, E Var_{A | X^t} F(x_t; A).

Both are computed on the same simulated paths. All paths start at x0 = 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .sde import BasisDrift, LinearDrift, MassSpring, Trajectory, path_rng

BATCH_PATHS = 20_000


@dataclass(frozen=True)
class DiscretePrior:
    candidates: tuple
    weights: np.ndarray

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise ValueError("prior needs at least one candidate")
        if any(isinstance(m, MassSpring) for m in cands):
            raise ValueError("only unit-diffusion drift models are supported")
        dims = {m.dim for m in cands}
        if len(dims) != 1:
            raise ValueError(f"candidates disagree on the state dimension: {sorted(dims)}")
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(cands),) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("weights must be nonnegative, one per candidate, summing to 1")
        w.setflags(write=False)
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, candidates):
        candidates = tuple(candidates)
        return cls(candidates, np.full(len(candidates), 1.0 / len(candidates)))

    @property
    def dim(self) -> int:
        return self.candidates[0].dim

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def drift_all(self, X) -> np.ndarray:
        """Drifts of every candidate at states X (n, p); shape (n, J, p)."""
        return np.stack([m.drift_batch(X) for m in self.candidates], axis=1)


@dataclass(frozen=True)
class PosteriorTrace:
    times: np.ndarray
    log_weights: np.ndarray  # normalised, (n+1, J)
    variance_rate: np.ndarray  # (n+1,)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def _increment_loglik(F, dx, eta):
    # per-step log-likelihood ratio against the driftless walk
    return np.einsum("...p,...p->...", F, dx) - 0.5 * eta * np.einsum("...p,...p->...", F, F)


def path_loglik(traj: Trajectory, model) -> float:
    """sum_t <F(x_t), x_{t+1} - x_t> - (eta/2) |F(x_t)|^2."""
    if isinstance(model, MassSpring):
        raise ValueError("only unit-diffusion drift models are supported")
    if model.dim != traj.dim:
        raise ValueError(f"model dimension {model.dim} does not match trajectory {traj.dim}")
    X = traj.states
    F = model.drift_batch(X[:-1])
    return float(np.sum(_increment_loglik(F, np.diff(X, axis=0), traj.eta)))


def _posterior_variance(F, logw):
    # F (..., J, p), logw (..., J) unnormalised
    lw = logw - logsumexp(logw, axis=-1, keepdims=True)
    w = np.exp(lw)
    mean = np.einsum("...j,...jp->...p", w, F)
    dev = F - mean[..., None, :]
    return np.einsum("...j,...jp,...jp->...", w, dev, dev), lw


def posterior_trace(traj: Trajectory, prior: DiscretePrior) -> PosteriorTrace:
    """Posterior over the candidates after each prefix X^t, and Var_{A|X^t} F(x_t; A)."""
    if prior.dim != traj.dim:
        raise ValueError("prior and trajectory dimensions differ")
    X = traj.states
    F = prior.drift_all(X)  # (n+1, J, p)
    inc = _increment_loglik(F[:-1], np.diff(X, axis=0)[:, None, :], traj.eta)  # (n, J)
    ll = np.vstack([np.zeros((1, len(prior.candidates))), np.cumsum(inc, axis=0)])
    var, lw = _posterior_variance(F, prior.log_weights + ll)
    return PosteriorTrace(traj.times, lw, var)


@dataclass(frozen=True)
class MIEstimate:
    value: float
    se: float


def _simulate_estimates(prior: DiscretePrior, T: float, eta: float, n_paths: int, seed: int,
                        batch: int = BATCH_PATHS):
    """Per-path direct and time-integral terms on shared paths from x0 = 0."""
    n_steps = int(round(T / eta))
    if n_steps < 1:
        raise ValueError("T must cover at least one step")
    logw = prior.log_weights
    J, p = len(prior.candidates), prior.dim
    direct, kzz = [], []
    sq = math.sqrt(eta)
    for b, start in enumerate(range(0, n_paths, batch)):
        m = min(batch, n_paths - start)
        rng = path_rng(seed, b)
        idx = rng.choice(J, size=m, p=prior.weights)
        x = np.zeros((m, p))
        ll = np.zeros((m, J))
        acc = np.zeros(m)
        rows = np.arange(m)
        for t in range(n_steps + 1):
            F = prior.drift_all(x)
            var, _ = _posterior_variance(F, logw + ll)
            acc += (0.5 if t in (0, n_steps) else 1.0) * eta * var
            if t == n_steps:
                break
            dx = F[rows, idx] * eta + sq * rng.standard_normal((m, p))
            ll += _increment_loglik(F, dx[:, None, :], eta)
            x = x + dx
        direct.append(ll[rows, idx] - logsumexp(logw + ll, axis=1))
        kzz.append(0.5 * acc)
    return np.concatenate(direct), np.concatenate(kzz)


def _summary(vals) -> MIEstimate:
    n = vals.size
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return MIEstimate(float(np.mean(vals)), se)


def mi_direct(prior, T, eta=1e-3, n_paths=10_000, seed=0) -> MIEstimate:
    if len(prior.candidates) == 1:
        return MIEstimate(0.0, 0.0)
    d, _ = _simulate_estimates(prior, T, eta, n_paths, seed)
    return _summary(d)


def mi_kzz(prior, T, eta=1e-3, n_paths=10_000, seed=0) -> MIEstimate:
    if len(prior.candidates) == 1:
        return MIEstimate(0.0, 0.0)
    _, k = _simulate_estimates(prior, T, eta, n_paths, seed)
    return _summary(k)


@dataclass(frozen=True)
class KZZReport:
    I_direct: float
    se_direct: float
    I_kzz: float
    se_kzz: float
    rel_diff: float
    passed: bool

    def to_dict(self):
        return {"I_direct": self.I_direct, "se_direct": self.se_direct, "I_kzz": self.I_kzz,
                "se_kzz": self.se_kzz, "rel_diff": self.rel_diff, "pass": self.passed}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(d["I_direct"], d["se_direct"], d["I_kzz"], d["se_kzz"], d["rel_diff"], d["pass"])


def verify_kzz(prior, T, eta=1e-3, n_paths=10_000, seed=0, rel_tol=0.02) -> KZZReport:
    """Compare the two estimators on shared paths.

    Passes when |I_direct - I_kzz| <= max(rel_tol * I_direct, 3 combined
    standard errors).
    """
    if len(prior.candidates) == 1:
        return KZZReport(0.0, 0.0, 0.0, 0.0, 0.0, True)
    d, k = _simulate_estimates(prior, T, eta, n_paths, seed)
    ed, ek = _summary(d), _summary(k)
    diff = abs(ed.value - ek.value)
    rel = diff / abs(ed.value) if ed.value != 0 else (0.0 if diff == 0 else math.inf)
    ok = diff <= max(rel_tol * abs(ed.value), 3.0 * math.hypot(ed.se, ek.se))
    return KZZReport(ed.value, ed.se, ek.value, ek.se, rel, bool(ok))


# -- presets and oracles -------------------------------------------------------

def constant_drift(value: float, p: int = 1) -> BasisDrift:
    """F(x) = value for every coordinate (p = 1 gives the scalar case)."""
    ones = lambda X: np.ones(np.atleast_2d(X).shape[0])  # noqa: E731
    return BasisDrift(np.full((p, 1), float(value)), [ones])


def constant_pm1_prior() -> DiscretePrior:
    return DiscretePrior.uniform([constant_drift(1.0), constant_drift(-1.0)])


def linear_four_prior(diag: float = 2.0, off: float = 1.5) -> DiscretePrior:
    """The four 2x2 matrices [[-diag, +-off], [+-off, -diag]], equiprobable."""
    mats = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            mats.append(LinearDrift(np.array([[-diag, s1 * off], [s2 * off, -diag]])))
    return DiscretePrior.uniform(mats)


PRESETS = {"constant-pm1": constant_pm1_prior, "linear-four": linear_four_prior}


def constant_drift_mi_quadrature(T: float, drifts=(1.0, -1.0), weights=None) -> float:
    """I(x_T; A) for scalar constant drifts; x_T is sufficient so this is I(X^T; A)."""
    drifts = np.asarray(drifts, dtype=float)
    w = np.full(drifts.size, 1.0 / drifts.size) if weights is None else np.asarray(weights, float)
    s = math.sqrt(T)

    def dens(x):
        return float(np.sum(w * np.exp(-((x - drifts * T) ** 2) / (2 * T)))) / (s * math.sqrt(2 * math.pi))

    def integrand(x):
        f = dens(x)
        return -f * math.log(f) if f > 0 else 0.0

    lo = drifts.min() * T - 40 * s
    hi = drifts.max() * T + 40 * s
    h_mix = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400,
                           points=list(drifts * T))[0]
    return h_mix - 0.5 * math.log(2 * math.pi * math.e * T)
