import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdebounds.spectral import (
    BoundReport,
    NonlinearClassParams,
    c_dense,
    c_dense_quad,
    c_dense_textbook,
    general_bound,
    kesten_mckay_cdf,
    kesten_mckay_pdf,
    km_edge,
    lower_bound_dense,
    lower_bound_nonlinear,
    lower_bound_sparse,
    mi_chain_bound,
    mi_chain_check,
    q_dense,
    q_dense_textbook,
    q_sparse,
    q_sparse_textbook,
    semicircle_cdf,
    semicircle_pdf,
    stieltjes_G,
    stieltjes_G_quad,
    stieltjes_G_textbook,
)

mp.mp.dps = 20


def km_mp(k, fn):
    """Integral of fn(nu) against the Kesten-McKay law, in high precision."""
    e = 2 * mp.sqrt(k - 1)
    dens = lambda nu: k / (2 * mp.pi) * mp.sqrt(max(0, 4 * (k - 1) - nu**2)) / (k**2 - nu**2)  # noqa: E731
    return mp.quad(lambda nu: dens(nu) * fn(nu), [-e, 0, e])


def semicircle_mp(alpha, fn):
    r = 2 * mp.sqrt(alpha)
    return mp.quad(lambda x: mp.sqrt(max(0, r**2 - x**2)) / (2 * mp.pi * alpha) * fn(x), [-r, 0, r])


@pytest.mark.parametrize("k", [3, 4, 7, 10])
def test_kesten_mckay_is_a_probability_law(k):
    assert float(km_mp(k, lambda nu: 1)) == pytest.approx(1.0, abs=1e-12)
    assert kesten_mckay_cdf(km_edge(k), k) == 1.0
    assert kesten_mckay_cdf(0.0, k) == pytest.approx(0.5, abs=1e-10)
    x = 0.7 * km_edge(k)
    assert kesten_mckay_cdf(x, k) == pytest.approx(float(0.5 + mp.quad(
        lambda nu: k / (2 * mp.pi) * mp.sqrt(4 * (k - 1) - nu**2) / (k**2 - nu**2), [0, x])), abs=1e-9)
    assert kesten_mckay_pdf(km_edge(k) * 1.01, k) == 0.0


def test_kesten_mckay_second_moment_is_k():
    # mean degree: E nu^2 = k for the k-regular law
    for k in (3, 5, 9):
        assert float(km_mp(k, lambda nu: nu**2)) == pytest.approx(k, rel=1e-12)


@pytest.mark.parametrize("k", [3, 4, 5, 8, 10])
def test_stieltjes_against_mpmath(k):
    e = km_edge(k)
    # at the edge itself z G = (k-1)/(k-2)
    assert stieltjes_G(k, e) == pytest.approx(2 * (k - 1) / ((k - 2) * e), rel=1e-6)
    for z in [e * 1.001, k - 0.1, k, k + 0.1, 2 * e, 50.0]:
        oracle = float(km_mp(k, lambda nu: 1 / (z - nu)))
        assert stieltjes_G(k, z) == pytest.approx(oracle, rel=1e-9)
        assert stieltjes_G_quad(k, z) == pytest.approx(oracle, rel=1e-7)


def test_stieltjes_textbook_agrees_off_k():
    for k in (3, 6):
        z = np.array([km_edge(k) + 0.3, k + 1.0, 20.0])
        np.testing.assert_allclose(stieltjes_G_textbook(k, z), stieltjes_G(k, z), rtol=1e-12)


def test_stieltjes_domain():
    with pytest.raises(ValueError):
        stieltjes_G(3, 1.0)
    with pytest.raises(ValueError):
        stieltjes_G(2, 5.0)
    # large z behaves like 1/z
    assert stieltjes_G(4, 1e8) * 1e8 == pytest.approx(1.0, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(3, 12), t=st.floats(0.0, 50.0))
def test_stieltjes_decreasing_and_positive(k, t):
    z = km_edge(k) + t
    g, g2 = stieltjes_G(k, z), stieltjes_G(k, z + 0.01)
    assert 0 < g2 <= g
    if t > 0:
        # the law is supported below the edge, so G(z) <= 1 / (z - edge)
        assert g <= 1 / t


@pytest.mark.parametrize("k", range(3, 11))
def test_mi_chain(k):
    assert mi_chain_check(k) <= mi_chain_bound(k) + 1e-6
    # the supremum sits at the edge, where z G = (k-1)/(k-2)
    assert mi_chain_check(k) == pytest.approx(mi_chain_bound(k), abs=1e-6)
    assert mi_chain_bound(3) == pytest.approx(4.0)


@settings(max_examples=20, deadline=None)
@given(k=st.integers(3, 8), a=st.floats(0.1, 5.0), rho=st.floats(1e-6, 100.0))
def test_q_sparse_against_oracle(k, a, rho):
    z = rho / a + 2 * math.sqrt(k - 1)
    G = float(km_mp(k, lambda nu: 1 / (z - nu)))
    oracle = rho + 2 * a * math.sqrt(k - 1) - a / G
    assert q_sparse(a, k, rho) == pytest.approx(oracle, rel=1e-8)


def test_q_sparse_limits_and_textbook():
    for k in (3, 4, 5):
        for a in (0.5, 1.0, 2.0):
            assert q_sparse(a, k, 1e-9) == pytest.approx(k * a / math.sqrt(k - 1), abs=1e-3)
            assert 1e6 * q_sparse(a, k, 1e6) == pytest.approx(k * a * a, rel=0.01)
            assert q_sparse(a, k, 0.3) == pytest.approx(q_sparse_textbook(a, k, 0.3), rel=1e-10)
    # the textbook form loses everything to cancellation at large rho
    assert abs(q_sparse_textbook(1.0, 3, 1e9) * 1e9 - 3) > abs(q_sparse(1.0, 3, 1e9) * 1e9 - 3)


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(0.05, 5.0), rho=st.floats(1e-4, 50.0))
def test_c_dense_against_oracles(alpha, rho):
    oracle = float(semicircle_mp(alpha, lambda x: 1 / (2 * mp.sqrt(alpha) + rho - x)))
    assert c_dense(alpha, rho) == pytest.approx(oracle, rel=1e-9)
    assert c_dense_quad(alpha, rho) == pytest.approx(oracle, rel=1e-7)
    if rho > 1e-3:
        assert c_dense_textbook(alpha, rho) == pytest.approx(oracle, rel=1e-8)


def test_c_dense_value():
    # at the edge of the spectrum the semicircle average is 1 / sqrt(alpha)
    assert c_dense(4.0, 0.0) == pytest.approx(0.5, rel=1e-15)
    # rho = alpha = 1: (3 - sqrt 5) / 2
    assert c_dense(1.0, 1.0) == pytest.approx((3 - math.sqrt(5)) / 2, rel=1e-15)


def test_q_dense_limits():
    for a in (0.5, 1.0, 2.0):
        assert q_dense(a, 1e-9) == pytest.approx(a / math.sqrt(2), abs=1e-3)
        assert 1e6 * q_dense(a, 1e6) == pytest.approx(a * a / 2, rel=0.01)
        assert q_dense(a, 0.7) == pytest.approx(q_dense_textbook(a, 0.7), rel=1e-10)


def test_semicircle_law():
    assert float(semicircle_mp(0.5, lambda x: x**2)) == pytest.approx(0.5)
    assert semicircle_cdf(0.0, 2.0) == pytest.approx(0.5)
    assert semicircle_cdf(3.0, 2.0) == 1.0
    assert semicircle_pdf(0.0, 1.0) == pytest.approx(1 / math.pi)


# Frozen values. Oracle: the per-dimension variance rate is half of
# E(1/p)Tr(-A) - 1/E(1/p)Tr((-A)^{-1}) under the limiting spectral law,
# each trace computed by high-precision quadrature.
SPARSE_P1000_TMIN = 16.506074724298177
DENSE_P100_TMIN = 93.35272880042794


def _sparse_oracle(p, k, a, rho):
    z = rho / a + 2 * math.sqrt(k - 1)
    inv_mean = km_mp(k, lambda nu: 1 / (a * (z - nu)))
    rate = (a * z - 1 / inv_mean) / 2
    return float((k * mp.log(2 * mp.mpf(p) / k) - 2) / rate)


def _dense_oracle(p, a, rho):
    alpha = mp.mpf(a) ** 2 / 2
    r = 2 * mp.sqrt(alpha)
    inv_mean = semicircle_mp(alpha, lambda x: 1 / (r + rho - x))
    rate = (r + rho - 1 / inv_mean) / 2
    return float(((1 + mp.mpf(p)) / 4 * mp.log(4) - 2) / rate)


def test_sparse_bound_frozen_value():
    assert _sparse_oracle(1000, 3, 1.0, 1e-9) == pytest.approx(SPARSE_P1000_TMIN, rel=1e-8)
    rep = lower_bound_sparse(1000, 3, 1.0, 1e-9)
    assert rep.t_min == pytest.approx(SPARSE_P1000_TMIN, rel=1e-12)
    assert rep.entropy_per_p == pytest.approx(3 * math.log(2000 / 3))
    assert rep.mi_x0_per_p == 1.0


def test_dense_bound_frozen_value():
    assert _dense_oracle(100, 1.0, 1e-9) == pytest.approx(DENSE_P100_TMIN, rel=1e-8)
    assert lower_bound_dense(100, 1.0, 1e-9).t_min == pytest.approx(DENSE_P100_TMIN, rel=1e-12)


@pytest.mark.parametrize("p,k,a,rho", [(32, 3, 1.0, 0.1), (64, 4, 0.5, 1.0), (5000, 3, 2.0, 0.01)])
def test_sparse_bound_oracle_grid(p, k, a, rho):
    assert lower_bound_sparse(p, k, a, rho).t_min == pytest.approx(_sparse_oracle(p, k, a, rho), rel=1e-8)


def test_bounds_grow_with_p():
    sp = [lower_bound_sparse(p, 3, 1.0, 0.1).t_min for p in (16, 64, 256, 1024)]
    de = [lower_bound_dense(p, 1.0, 0.1).t_min for p in (16, 64, 256, 1024)]
    assert sp == sorted(sp) and de == sorted(de)
    # logarithmic versus linear growth
    assert sp[-1] / sp[1] < 2 and de[-1] / de[1] > 10


def test_nonlinear_bound():
    rep = lower_bound_nonlinear(NonlinearClassParams(100, 3, 1.0, 1.0, 1.0, 1.0))
    assert rep.t_min == pytest.approx(0.55367, abs=1e-5)
    assert rep.numerator == 3 * math.log(100 / 3)
    assert rep.variance_rate_per_p == 19.0
    # larger B/L means more information in x0 and a smaller bound
    assert lower_bound_nonlinear(NonlinearClassParams(100, 3, 4.0, 1.0, 1.0, 1.0)).t_min < rep.t_min
    with pytest.raises(ValueError):
        NonlinearClassParams(3, 3, 1.0, 1.0, 1.0, 1.0)


def test_general_bound_and_report_roundtrip():
    rep = general_bound(1.0, 2.0, 3.0)
    assert rep.t_min == 0.0 and rep.vacuous
    with pytest.raises(ValueError):
        general_bound(1.0, 0.0, 0.0)
    rep = lower_bound_sparse(50, 3, 1.0, 0.1)
    assert BoundReport.from_dict(rep.to_dict()) == rep
    assert not rep.vacuous
