import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_stable
from sdebounds.ensembles import NetworkSpec, mass_spring_network
from sdebounds.sde import (
    BasisDrift,
    DivergenceError,
    InteractionMatrix,
    LinearDrift,
    MassSpring,
    Trajectory,
    UnstableMatrixError,
    default_eta,
    lyapunov_residual,
    mass_spring_drift,
    path_rng,
    sample_stationary,
    simulate,
    stationary_covariance,
)


@pytest.mark.parametrize("p", [1, 5, 20, 33, 64])
def test_lyapunov_symmetric_matches_inverse(rng, p):
    A = random_stable(rng, p, symmetric=True)
    S = stationary_covariance(A)
    assert lyapunov_residual(A, S) <= 1e-10
    assert np.max(np.abs(S + 0.5 * np.linalg.inv(A))) <= 1e-8


@pytest.mark.parametrize("p", [3, 32, 40])
def test_lyapunov_nonsymmetric_residual(rng, p):
    A = random_stable(rng, p)
    S = stationary_covariance(A)
    assert lyapunov_residual(A, S) <= 1e-10
    np.testing.assert_allclose(S, S.T, atol=1e-14)
    assert np.linalg.eigvalsh(S)[0] > 0


def test_lyapunov_scalar_closed_form():
    # a x dt + db has variance -1/(2a)
    for a in (-0.1, -1.0, -7.5):
        assert stationary_covariance(np.array([[a]]))[0, 0] == pytest.approx(-1 / (2 * a), rel=1e-14)


def test_lyapunov_rejects_unstable():
    with pytest.raises(UnstableMatrixError):
        stationary_covariance(np.array([[0.1, 0.0], [0.0, -1.0]]))
    with pytest.raises(ValueError):
        stationary_covariance(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(p=st.integers(1, 12), seed=st.integers(0, 2**32 - 1), margin=st.floats(0.01, 2.0))
def test_lyapunov_property(p, seed, margin):
    A = random_stable(np.random.default_rng(seed), p, margin=margin)
    S = stationary_covariance(A)
    assert lyapunov_residual(A, S) <= 1e-10 * max(1.0, np.abs(S).max())


def test_interaction_matrix_validation():
    with pytest.raises(ValueError):
        InteractionMatrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        InteractionMatrix(np.array([[np.nan]]))
    A = InteractionMatrix(-np.eye(3), rho=0.5)
    assert A.p == 3 and A.margin() == pytest.approx(1.0)
    assert A.satisfies_margin()
    assert not InteractionMatrix(-np.eye(3), rho=2.0).satisfies_margin()
    with pytest.raises(ValueError):
        A.entries[0, 0] = 1.0


def test_simulate_deterministic_and_seed_sensitive(rng):
    model = LinearDrift(random_stable(rng, 4))
    a = simulate(model, np.zeros(4), 0.01, 200, 5)
    b = simulate(model, np.zeros(4), 0.01, 200, 5)
    c = simulate(model, np.zeros(4), 0.01, 200, 6)
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, c.states)
    assert a.states.shape == (201, 4)
    assert a.T == pytest.approx(2.0)
    np.testing.assert_allclose(a.times, 0.01 * np.arange(201))


def test_simulate_is_euler_maruyama(rng):
    A = random_stable(rng, 3)
    eta, n = 0.02, 50
    traj = simulate(LinearDrift(A), np.ones(3), eta, n, 11)
    xi = path_rng(11).standard_normal((n, 3))
    x = np.ones(3)
    for t in range(n):
        x = x + A @ x * eta + math.sqrt(eta) * xi[t]
        np.testing.assert_allclose(traj.states[t + 1], x, rtol=1e-12, atol=1e-12)


def test_simulate_generic_drift_matches_linear(rng):
    A = random_stable(rng, 3)
    lin = simulate(LinearDrift(A), np.ones(3), 0.01, 100, 2)
    basis = [lambda X, i=i: X[:, i] for i in range(3)]
    gen = simulate(BasisDrift(A, basis), np.ones(3), 0.01, 100, 2)
    np.testing.assert_allclose(gen.states, lin.states, rtol=1e-12, atol=1e-12)


def test_ou_stationary_variance():
    # Euler chain x' = (1 - eta) x + sqrt(eta) xi has variance 1 / (2 - eta)
    eta = 0.01
    traj = simulate(LinearDrift(np.array([[-1.0]])), np.zeros(1), eta, 400_000, 3)
    x = traj.states[1000:, 0]
    assert np.var(x) == pytest.approx(1 / (2 - eta), rel=0.05)
    assert abs(np.mean(x)) < 0.05


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_detected():
    with pytest.raises(DivergenceError) as err:
        simulate(LinearDrift(np.array([[50.0]])), np.ones(1), 0.1, 1000, 0)
    assert 0 < err.value.step < 1000


def test_large_step_warns():
    with pytest.warns(RuntimeWarning):
        simulate(LinearDrift(-np.eye(2) * 10), np.zeros(2), 0.1, 5, 0)


def test_simulate_input_checks():
    model = LinearDrift(-np.eye(2))
    with pytest.raises(ValueError):
        simulate(model, np.zeros(3), 0.01, 5, 0)
    with pytest.raises(ValueError):
        simulate(model, np.zeros(2), 0.0, 5, 0)
    assert simulate(model, np.zeros(2), 0.01, 0, 0).states.shape == (1, 2)


def test_sample_stationary_covariance(rng):
    A = random_stable(rng, 3)
    X = sample_stationary(A, 1, size=200_000)
    np.testing.assert_allclose(np.cov(X.T), stationary_covariance(A), atol=0.02)
    assert sample_stationary(A, 1).shape == (3,)


def test_default_eta():
    A = np.array([[-2.0, 1.0], [0.5, -3.0]])
    assert default_eta(LinearDrift(A)) == pytest.approx(0.01 / 3.5)
    assert default_eta(mass_spring_network(NetworkSpec())) == 0.005


def test_spring_force_is_negative_gradient(rng):
    model = mass_spring_network(NetworkSpec(3, 3, "grid-with-diagonals"))
    for _ in range(20):
        q = model.rest_positions.ravel() + rng.normal(scale=0.3, size=model.p * model.d)
        f = model.force(q)
        h = 1e-6
        fd = np.empty_like(q)
        for i in range(q.size):
            e = np.zeros_like(q)
            e[i] = h
            fd[i] = -(model.potential(q + e) - model.potential(q - e)) / (2 * h)
        np.testing.assert_allclose(f, fd, rtol=1e-6, atol=1e-7)


def test_spring_rest_state_is_equilibrium():
    model = mass_spring_network(NetworkSpec(3, 3))
    x = model.rest_state()
    np.testing.assert_allclose(model.drift(x), 0.0, atol=1e-14)
    assert model.potential(x[: model.p * model.d]) == pytest.approx(0.0, abs=1e-28)


def test_spring_two_masses_by_hand():
    C = np.array([[0, 1], [1, 0]])
    D = np.array([[0, 2.0], [2.0, 0]])
    q = np.array([[0.0, 0.0], [3.0, 4.0]])  # distance 5, stretched by 3
    v = np.array([[1.0, 0.0], [0.0, -1.0]])
    out = mass_spring_drift(q, v, C, D, gamma_damp=0.5)
    # pull on mass 0 along (3,4)/5 with magnitude 3
    expect_f0 = np.array([3 * 3 / 5, 3 * 4 / 5])
    np.testing.assert_allclose(out[:4], v.ravel())
    np.testing.assert_allclose(out[4:6], expect_f0 - 0.5 * v[0])
    np.testing.assert_allclose(out[6:8], -expect_f0 - 0.5 * v[1])


def test_spring_noise_only_on_velocities():
    model = mass_spring_network(NetworkSpec(2, 2, sigma=0.5))
    pd = model.p * model.d
    np.testing.assert_array_equal(model.noise_scale()[:pd], 0.0)
    np.testing.assert_array_equal(model.noise_scale()[pd:], 0.5)
    traj = simulate(model, model.rest_state(), 0.005, 300, 4)
    # positions integrate the velocities exactly
    np.testing.assert_allclose(np.diff(traj.states[:, :pd], axis=0), 0.005 * traj.states[:-1, pd:],
                               atol=1e-13)


def test_spring_simulation_matches_generic_euler():
    model = mass_spring_network(NetworkSpec(2, 3))
    eta, n = 0.005, 200
    traj = simulate(model, model.rest_state(), eta, n, 8)
    pd = model.p * model.d
    xi = path_rng(8).standard_normal((n, pd)) * model.sigma * math.sqrt(eta)
    x = model.rest_state()
    for t in range(n):
        x = x + model.drift(x) * eta + np.concatenate([np.zeros(pd), xi[t]])
    np.testing.assert_allclose(traj.states[-1], x, rtol=1e-10, atol=1e-12)


def test_mass_spring_validation():
    C = np.array([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        MassSpring(C, np.zeros((2, 2)), 1.0, 1.0, 2)
    with pytest.raises(ValueError):
        MassSpring(np.array([[0, 1], [0, 0]]), np.ones((2, 2)), 1.0, 1.0, 2)
    with pytest.raises(ValueError):
        MassSpring(C, np.ones((2, 2)), 1.0, 0.0, 2)
    with pytest.raises(ValueError):
        MassSpring(C, np.ones((2, 2)), 1.0, 1.0, 2).rest_state()


def test_coincident_masses_rejected():
    model = mass_spring_network(NetworkSpec(1, 2, d=2))
    with pytest.raises(ZeroDivisionError):
        model.force(np.zeros(4))


def test_trajectory_shape_checks():
    t = Trajectory(0.1, np.zeros((5, 2)), seed=1)
    assert t.n_steps == 4 and t.dim == 2 and t.T == pytest.approx(0.4)
