import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdebounds.ensembles import NetworkSpec, SparseEnsembleSpec, mass_spring_network, sample_ensemble
from sdebounds.estimator import (
    ComplexityTable,
    ConvergenceWarning,
    MassSpringBasis,
    RecoveryResult,
    RegressionData,
    SufficientStats,
    build_regression,
    default_lambda,
    estimate_sample_complexity,
    gap_threshold,
    kkt_violation,
    l1_drift_estimate,
    linear_stats_at,
    recover_signed_support,
    run_linear_trial,
    signed_support,
    spring_edge_scores,
    spring_trial,
    stats_from_trajectory,
)
from sdebounds.sde import LinearDrift, path_rng, simulate


def _stats(G, c, n=1000, eta=0.01):
    """Sufficient statistics with prescribed gram G and cross term c."""
    G = np.atleast_2d(G)
    c = np.asarray(c, dtype=float).reshape(G.shape[0], -1)
    return SufficientStats(G * n, c * n * eta, n, eta)


def soft(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@settings(max_examples=50, deadline=None)
@given(g=st.floats(0.1, 10.0), c=st.floats(-5, 5), lam=st.floats(0.0, 3.0))
def test_one_dimensional_lasso_is_soft_threshold(g, c, lam):
    est = l1_drift_estimate(_stats([[g]], [c]), lam)
    assert est[0, 0] == pytest.approx(soft(c, lam) / g, abs=1e-9)


def test_orthogonal_design_closed_form(rng):
    g = rng.uniform(0.5, 3.0, size=6)
    C = rng.normal(size=(6, 4))
    est = l1_drift_estimate(_stats(np.diag(g), C), 0.4)
    np.testing.assert_allclose(est, (soft(C, 0.4) / g[:, None]).T, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.01, 1.0))
def test_lasso_satisfies_kkt(seed, lam):
    r = np.random.default_rng(seed)
    F = r.normal(size=(300, 8)) @ r.normal(size=(8, 8))
    Y = r.normal(size=(300, 3))
    data = RegressionData(F, Y, 0.1)
    est = l1_drift_estimate(data, lam, tol=1e-12)
    assert kkt_violation(data, est, lam) <= 1e-6 * max(1.0, np.abs(SufficientStats.from_data(data).cross).max())


def test_lambda_zero_is_least_squares(rng):
    F = rng.normal(size=(500, 5))
    Y = F @ rng.normal(size=(5, 2)) * 0.01 + rng.normal(size=(500, 2)) * 0.1
    data = RegressionData(F, Y, 0.01)
    est = l1_drift_estimate(data, 0.0, tol=1e-14)
    ols = np.linalg.lstsq(F * 0.01, Y, rcond=None)[0].T
    np.testing.assert_allclose(est, ols, rtol=1e-6, atol=1e-8)


def test_large_lambda_gives_zero(rng):
    data = RegressionData(rng.normal(size=(100, 4)), rng.normal(size=(100, 4)), 0.1)
    lam_max = np.abs(SufficientStats.from_data(data).cross).max()
    assert np.all(l1_drift_estimate(data, lam_max * 1.0001) == 0)
    with pytest.raises(ValueError):
        l1_drift_estimate(data, -1.0)


def test_default_lambda_scales(rng):
    F = rng.normal(size=(400, 9))
    d1 = RegressionData(F, rng.normal(size=(400, 2)), 0.01)
    d2 = RegressionData(3 * F, d1.targets, 0.01)
    d3 = RegressionData(F, d1.targets, 0.04)
    assert default_lambda(d2) == pytest.approx(3 * default_lambda(d1))
    assert default_lambda(d3) == pytest.approx(default_lambda(d1) / 2)
    expect = 0.1 * math.sqrt(np.mean(np.sum(F**2, axis=0) / 400) * math.log(9) / 4.0)
    assert default_lambda(d1) == pytest.approx(expect)


def test_convergence_warning(rng):
    F = rng.normal(size=(50, 30))
    F[:, 1] = F[:, 0] + 1e-9 * F[:, 2]
    data = RegressionData(F, rng.normal(size=(50, 1)), 0.1)
    with pytest.warns(ConvergenceWarning):
        l1_drift_estimate(data, 1e-12, max_sweeps=3, tol=1e-15)


def test_signed_support_and_gap():
    A = np.array([[-1.2, 0.01], [-0.02, 0.9]])
    assert signed_support(A, 0.5).tolist() == [[-1, 0], [0, 1]]
    assert gap_threshold(A) == pytest.approx((0.02 + 0.9) / 2)
    with pytest.raises(ValueError):
        signed_support(A, -1)


def test_recovery_result_roundtrip():
    r = RecoveryResult(np.array([[1, 0], [0, -1]]), np.array([[1, 0], [1, -1]]), 0.1, 0.2)
    assert not r.success and r.row_errors.tolist() == [0, 1]
    back = RecoveryResult.from_dict(r.to_dict())
    assert np.array_equal(back.estimated_sign, r.estimated_sign) and back.success == r.success
    with pytest.raises(ValueError):
        RecoveryResult(np.zeros((2, 2)), np.zeros((2, 3)), 0, 0)


def test_streamed_stats_match_stored_path(rng):
    A = sample_ensemble(SparseEnsembleSpec(8), 1)
    x0 = rng.normal(size=8)
    eta = 0.005
    traj = simulate(LinearDrift(A), x0, eta, 3000, 21)
    streamed = linear_stats_at(A, x0, eta, [1000, 3000], 21)
    stored = stats_from_trajectory(traj, checkpoints=[1000, 3000])
    whole = SufficientStats.from_data(build_regression(traj))
    for a, b in zip(streamed, stored):
        np.testing.assert_allclose(a.ff, b.ff, rtol=1e-10)
        np.testing.assert_allclose(a.fdx, b.fdx, rtol=1e-9, atol=1e-12)
        assert a.n == b.n
    np.testing.assert_allclose(streamed[1].ff, whole.ff, rtol=1e-10)


def test_streamed_stats_chunk_invariant(monkeypatch):
    from sdebounds import estimator

    A = sample_ensemble(SparseEnsembleSpec(6), 2)
    ref = linear_stats_at(A, np.zeros(6), 0.01, [500], 3)[0]
    monkeypatch.setattr(estimator, "CHUNK_STEPS", 37)
    chunked = linear_stats_at(A, np.zeros(6), 0.01, [500], 3)[0]
    np.testing.assert_allclose(chunked.ff, ref.ff, rtol=1e-12)


def test_ols_recovers_drift_on_long_path():
    A = np.array([[-1.0, 0.5], [0.0, -2.0]])
    (st,) = linear_stats_at(A, np.zeros(2), 0.01, [400_000], 5)
    est = l1_drift_estimate(st, 0.0)
    np.testing.assert_allclose(est, A, atol=0.15)


def test_recover_signed_support_easy_case():
    A = sample_ensemble(SparseEnsembleSpec(8, 3, 1.0, 0.1), 4)
    (st,) = linear_stats_at(A, np.zeros(8), 0.002, [1_000_000], 6)
    res = recover_signed_support(st, A.entries, tau=0.5)
    assert res.success


def test_trial_outcomes_are_reproducible():
    spec = SparseEnsembleSpec(8)
    a = run_linear_trial(spec, [20, 200], 3, master_seed=9)
    b = run_linear_trial(spec, [20, 200], 3, master_seed=9)
    assert a == b


def test_sample_complexity_table_and_threads():
    spec = SparseEnsembleSpec(8)
    t1 = estimate_sample_complexity(spec, [5, 400], 6, master_seed=2)
    t2 = estimate_sample_complexity(spec, [5, 400], 6, master_seed=2, threads=3)
    assert isinstance(t1, ComplexityTable)
    assert t1.successes == t2.successes
    assert t1.successes[0] == 0 and t1.successes[1] >= 4
    rows = t1.rows()
    assert [r["T"] for r in rows] == [5.0, 400.0] and rows[0]["k_or_density"] == 3
    assert t1.t_star(0.5) == 400.0 and t1.t_star(1.01) is None
    with pytest.raises(ValueError):
        estimate_sample_complexity(spec, [10, 5], 2)


def test_spring_basis_reproduces_drift(rng):
    model = mass_spring_network(NetworkSpec(2, 3, "grid-with-diagonals"))
    basis = MassSpringBasis(model.p, model.d)
    coef = basis.exact_coefficients(model)
    X = np.array([model.rest_state() + rng.normal(scale=0.3, size=model.dim) for _ in range(10)])
    np.testing.assert_allclose(basis.evaluate(X) @ coef.T, model.drift_batch(X), atol=1e-12)
    pd = model.p * model.d
    scores = spring_edge_scores(coef[pd:], basis)
    np.testing.assert_allclose(scores, model.C0)


def test_spring_trial_recovers_at_long_horizon():
    model = mass_spring_network(NetworkSpec(2, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        results = spring_trial(model, [2, 600], 0, master_seed=3)
    assert not results[0].success and results[1].success
    assert results[1].estimated_sign.tolist() == model.C0.astype(int).tolist()


def test_regression_data_checks():
    with pytest.raises(ValueError):
        RegressionData(np.zeros((3, 2)), np.zeros((4, 2)), 0.1)
    with pytest.raises(ValueError):
        RegressionData(np.full((3, 2), np.nan), np.zeros((3, 2)), 0.1)
    with pytest.raises(TypeError):
        default_lambda(np.zeros((2, 2)))
    assert path_rng(1).integers(1000) == path_rng(1).integers(1000)
