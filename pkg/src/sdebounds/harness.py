"""Experiment orchestration behind the command line.

A run is described by one JSON-compatible config dict (see
:class:`ExperimentConfig`); every artifact written records the resolved
config so the run can be repeated from its own output.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, kernels
from .ensembles import (
    DenseEnsembleSpec,
    NetworkSpec,
    SparseEnsembleSpec,
    mass_spring_network,
    sample_ensemble,
)
from .estimator import (
    DEFAULT_LAMBDA_C,
    SPRING_LAMBDA_C,
    estimate_sample_complexity,
    linear_stats_at,
    recover_signed_support,
    spring_trial,
)
from .kzz import PRESETS, verify_kzz
from .sde import LinearDrift, default_eta, sample_stationary, simulate
from .spectral import (
    NonlinearClassParams,
    lower_bound_dense,
    lower_bound_nonlinear,
    lower_bound_sparse,
)

MODES = ("simulate", "bound", "estimate", "phase", "kzz", "reproduce-spring")
PHASE_MAX_P = {"sparse": 64, "dense": 32}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration (exit code 2)."""


class ArtifactError(OSError):
    """An input file could not be read or parsed (exit code 4)."""


@dataclass
class ExperimentConfig:
    mode: str
    seed: int = 0
    out: str | None = None
    threads: int = 1
    # matrix ensembles and bounds
    regime: str = "sparse"
    p: int | list | None = None
    k: int = 3
    a_min: float = 1.0
    rho: float = 0.1
    B: float | None = None
    L: float | None = None
    D: float | None = None
    C_const: float | None = None
    # horizons and replication
    T: float | None = None
    T_grid: list | None = None
    eta: float | None = None
    trials: int = 50
    success_level: float = 0.9
    lam_c: float | None = None
    tau: float | None = None
    # simulate
    model: str = "linear"
    matrix: str | None = None
    # kzz
    preset: str = "constant-pm1"
    paths: int = 100_000
    # spring networks
    grid: str = "3x3"
    topology: str = "grid"
    rest_length: float = 1.0
    gamma_damp: float = 2.0
    sigma: float = 0.5
    d: int = 2
    save_every: int = 100

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        if "mode" not in d:
            raise ConfigError("config needs a 'mode'")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def p_list(self) -> list[int]:
        if self.p is None:
            raise ConfigError("field 'p' is required for this mode")
        ps = self.p if isinstance(self.p, list) else [self.p]
        return [int(v) for v in ps]

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.T_grid is not None:
            tg = [float(t) for t in self.T_grid]
            if not tg or any(t <= 0 for t in tg) or any(b <= a for a, b in zip(tg, tg[1:])):
                raise ConfigError("T_grid must be positive and strictly increasing")
            self.T_grid = tg
        if self.eta is not None and self.eta <= 0:
            raise ConfigError("eta must be positive")
        if not 0 < self.success_level <= 1:
            raise ConfigError("success_level must lie in (0, 1]")
        if self.regime not in ("sparse", "dense", "nonlinear"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        need = {
            "simulate": ["T"],
            "estimate": ["T", "p"],
            "phase": ["T_grid", "p"],
            "reproduce-spring": ["T_grid"],
            "kzz": ["T"],
        }.get(self.mode, [])
        missing = [n for n in need if getattr(self, n) is None]
        if self.mode == "simulate" and self.model == "linear" and self.matrix is None and self.p is None:
            missing.append("p or matrix")
        if self.mode == "bound":
            if self.regime == "nonlinear":
                missing += [n for n in ("p", "B", "L", "D", "C_const") if getattr(self, n) is None]
            elif self.p is None:
                missing.append("p")
        if missing:
            raise ConfigError(f"mode {self.mode!r} requires: {', '.join(missing)}")
        if self.mode == "phase":
            if self.regime == "nonlinear":
                raise ConfigError("phase mode supports the sparse and dense regimes")
            cap = PHASE_MAX_P[self.regime]
            if max(self.p_list()) > cap:
                raise ConfigError(f"phase mode caps p at {cap} for the {self.regime} regime")
        if self.mode == "kzz" and self.preset not in PRESETS:
            raise ConfigError(f"unknown kzz preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if self.model not in ("linear", "mass-spring"):
            raise ConfigError(f"unknown model {self.model!r}")

    # -- builders --------------------------------------------------------------

    def ensemble_spec(self, p: int):
        try:
            if self.regime == "sparse":
                return SparseEnsembleSpec(p, self.k, self.a_min, self.rho)
            if self.regime == "dense":
                return DenseEnsembleSpec(p, self.a_min, self.rho)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError("an ensemble needs regime 'sparse' or 'dense'")

    def network_spec(self) -> NetworkSpec:
        try:
            rows, cols = (int(v) for v in self.grid.lower().split("x"))
            return NetworkSpec(rows, cols, self.topology, self.rest_length, self.gamma_damp,
                               self.sigma, self.d)
        except ValueError as exc:
            raise ConfigError(f"bad network description: {exc}") from exc

    def bound_for(self, p: int):
        try:
            if self.regime == "sparse":
                return lower_bound_sparse(p, self.k, self.a_min, self.rho)
            if self.regime == "dense":
                return lower_bound_dense(p, self.a_min, self.rho)
            return lower_bound_nonlinear(
                NonlinearClassParams(p, self.k, self.B, self.L, self.D, self.C_const))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class PhaseRow:
    p: int
    regime: str
    k_or_density: float
    T: float
    trials: int
    successes: int
    t_min_theory: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass
class PhaseTable:
    rows: list = field(default_factory=list)
    success_level: float = 0.9

    def t_star(self, regime: str, p: int):
        for r in sorted((r for r in self.rows if r.regime == regime and r.p == p), key=lambda r: r.T):
            if r.success_rate >= self.success_level:
                return r.T
        return None


PHASE_COLUMNS = ["p", "regime", "k_or_density", "T", "trials", "successes", "success_rate", "t_min_theory"]


def emit_phase_plotdata(table: PhaseTable, out_dir, config: dict | None = None):
    """Write ``phase.csv`` (sorted by regime, p, T) and ``phase_summary.json``."""
    if not table.rows:
        raise ValueError("phase table is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = sorted(table.rows, key=lambda r: (r.regime, r.p, r.T))
    recs = [dict(dataclasses.asdict(r), success_rate=r.success_rate) for r in rows]
    io.write_rows_csv(recs, out_dir / "phase.csv", PHASE_COLUMNS)
    per_p = []
    for regime, p in sorted({(r.regime, r.p) for r in rows}):
        ts = table.t_star(regime, p)
        theory = next(r.t_min_theory for r in rows if r.regime == regime and r.p == p)
        per_p.append({"regime": regime, "p": p, "t_star": ts if ts is not None else "not reached",
                      "t_min_theory": theory})
    summary = {"success_level": table.success_level, "per_p": per_p, "config": config}
    io.write_json(summary, out_dir / "phase_summary.json")
    return out_dir / "phase.csv", out_dir / "phase_summary.json"


# -- modes ---------------------------------------------------------------------

def _out_dir(cfg) -> Path | None:
    if cfg.out is None:
        return None
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _echo(cfg):
    return {"config": cfg.to_dict(), "kernel_backend": kernels.BACKEND}


def _run_simulate(cfg, out):
    n_steps_for = lambda eta: int(round(cfg.T / eta))  # noqa: E731
    if cfg.model == "mass-spring":
        model = mass_spring_network(cfg.network_spec())
        eta = cfg.eta or default_eta(model)
        traj = simulate(model, model.rest_state(), eta, n_steps_for(eta), cfg.seed)
        A = None
    else:
        if cfg.matrix is not None:
            try:
                A = io.read_matrix(cfg.matrix)
            except (OSError, ValueError) as exc:
                raise ArtifactError(f"cannot read matrix file: {exc}") from exc
        else:
            A = sample_ensemble(cfg.ensemble_spec(cfg.p_list()[0]),
                                np.random.default_rng([cfg.seed, 1])).entries
        model = LinearDrift(A)
        eta = cfg.eta or default_eta(model)
        x0 = sample_stationary(A, np.random.default_rng([cfg.seed, 2]))
        traj = simulate(model, x0, eta, n_steps_for(eta), cfg.seed)
    result = {"eta": eta, "n_steps": traj.n_steps, "dim": traj.dim, "seed": cfg.seed}
    if out is not None:
        io.write_trajectory_csv(traj, out / "trajectory.csv")
        if A is not None:
            io.write_matrix(A, out / "matrix.txt")
        io.write_json({**result, **_echo(cfg)}, out / "run.json")
    return result


def _run_bound(cfg, out):
    report = cfg.bound_for(cfg.p_list()[0])
    if out is not None:
        io.write_json({**report.to_dict(), **_echo(cfg)}, out / "bound.json")
    return report.to_dict()


def _run_estimate(cfg, out):
    p = cfg.p_list()[0]
    spec = cfg.ensemble_spec(p)
    A = sample_ensemble(spec, np.random.default_rng([cfg.seed, 1]))
    x0 = sample_stationary(A, np.random.default_rng([cfg.seed, 2]))
    eta = cfg.eta or 0.01 / np.linalg.norm(A.entries, ord=np.inf)
    (stats,) = linear_stats_at(A, x0, eta, [max(2, int(round(cfg.T / eta)))],
                               np.random.default_rng([cfg.seed, 3]))
    tau = spec.coupling / 2 if cfg.tau is None else cfg.tau
    rec = recover_signed_support(stats, A.entries, tau=tau,
                                 c=DEFAULT_LAMBDA_C if cfg.lam_c is None else cfg.lam_c)
    result = rec.to_dict()
    if out is not None:
        io.write_json({**result, **_echo(cfg)}, out / "recovery.json")
        io.write_matrix(A.entries, out / "matrix.txt")
    return result


def _run_phase(cfg, out):
    table = PhaseTable(success_level=cfg.success_level)
    sweep_rows = []
    lam_c = DEFAULT_LAMBDA_C if cfg.lam_c is None else cfg.lam_c
    for p in cfg.p_list():
        spec = cfg.ensemble_spec(p)
        res = estimate_sample_complexity(spec, cfg.T_grid, cfg.trials, cfg.success_level,
                                         master_seed=cfg.seed, eta=cfg.eta, lam_c=lam_c,
                                         tau=cfg.tau, threads=cfg.threads)
        t_min = cfg.bound_for(p).t_min
        for row in res.rows():
            sweep_rows.append(row)
            table.rows.append(PhaseRow(p, spec.regime, row["k_or_density"], row["T"], res.trials,
                                       row["successes"], t_min))
    if out is not None:
        emit_phase_plotdata(table, out, cfg.to_dict())
        io.write_sweep_csv(sweep_rows, out / "sweep.csv")
    summary = {f"{cfg.regime}:{p}": table.t_star(cfg.regime, p) for p in cfg.p_list()}
    return {"t_star": summary, "rows": [dict(dataclasses.asdict(r), success_rate=r.success_rate)
                                        for r in table.rows]}


def _run_kzz(cfg, out):
    prior = PRESETS[cfg.preset]()
    rel_tol = 0.02 if cfg.preset == "constant-pm1" else 0.05
    report = verify_kzz(prior, cfg.T, cfg.eta or 1e-3, cfg.paths, cfg.seed, rel_tol=rel_tol)
    result = report.to_dict()
    if out is not None:
        io.write_json({**result, **_echo(cfg)}, out / "kzz.json")
    return result


def _run_reproduce_spring(cfg, out):
    model = mass_spring_network(cfg.network_spec())
    eta = cfg.eta or default_eta(model)
    lam_c = SPRING_LAMBDA_C if cfg.lam_c is None else cfg.lam_c
    tau = 0.5 if cfg.tau is None else cfg.tau
    successes = np.zeros(len(cfg.T_grid), dtype=int)
    first = None
    for trial in range(cfg.trials):
        if trial == 0:
            results, traj = spring_trial(model, cfg.T_grid, trial, cfg.seed, eta, lam_c, tau,
                                         return_trajectory=True)
            first = (results, traj)
        else:
            results = spring_trial(model, cfg.T_grid, trial, cfg.seed, eta, lam_c, tau)
        successes += [r.success for r in results]
    rows = [{"T": T, "trials": cfg.trials, "successes": int(s), "success_rate": s / cfg.trials}
            for T, s in zip(cfg.T_grid, successes)]
    if out is not None:
        io.write_rows_csv(rows, out / "spring_success.csv", ["T", "trials", "successes", "success_rate"])
        io.write_trajectory_csv(first[1], out / "trajectory.csv", every=cfg.save_every)
        io.write_json({"recoveries": [{"T": T, **r.to_dict()} for T, r in zip(cfg.T_grid, first[0])],
                       "edges": [list(e) for e in model.edges], **_echo(cfg)},
                      out / "spring_recovery.json")
    return {"rows": rows}


_DISPATCH = {
    "simulate": _run_simulate,
    "bound": _run_bound,
    "estimate": _run_estimate,
    "phase": _run_phase,
    "kzz": _run_kzz,
    "reproduce-spring": _run_reproduce_spring,
}


def run(config) -> dict:
    """Validate ``config`` (dict or :class:`ExperimentConfig`), run its mode, write artifacts."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    cfg.validate()
    out = _out_dir(cfg)
    return _DISPATCH[cfg.mode](cfg, out)


def isotonic_deviation(rates) -> float:
    """Largest drop of a sequence below its running maximum."""
    worst, top = 0.0, -math.inf
    for r in rates:
        top = max(top, r)
        worst = max(worst, top - r)
    return worst
