"""Closed-form spectral quantities and observation-time lower bounds.

Each closed form has an independent quadrature twin (suffix ``_quad``) used
as an oracle in the tests. The limiting spectral laws are the Kesten-McKay
law of a randomly signed k-regular graph and the semicircle of radius
2 sqrt(alpha).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate


# -- Kesten-McKay --------------------------------------------------------------

def km_edge(k: float) -> float:
    return 2.0 * math.sqrt(k - 1)


def kesten_mckay_pdf(nu, k):
    """Density (k / 2 pi) sqrt(4(k-1) - nu^2) / (k^2 - nu^2) on |nu| <= 2 sqrt(k-1)."""
    if k < 3:
        raise ValueError("Kesten-McKay density needs k >= 3")
    nu = np.asarray(nu, dtype=float)
    inside = np.clip(4.0 * (k - 1) - nu**2, 0.0, None)
    out = (k / (2 * np.pi)) * np.sqrt(inside) / (k**2 - nu**2)
    out = np.where(np.abs(nu) <= km_edge(k), out, 0.0)
    return out if out.ndim else float(out)


def _km_theta(theta, k):
    # density in nu = e sin(theta) times d nu / d theta; smooth at the edges
    e = km_edge(k)
    c = math.cos(theta)
    nu = e * math.sin(theta)
    return (k / (2 * math.pi)) * e * e * c * c / (k * k - nu * nu)


def kesten_mckay_cdf(x, k):
    """P(nu <= x) under the Kesten-McKay law, by quadrature."""
    e = km_edge(k)

    def one(v):
        if v <= -e:
            return 0.0
        if v >= e:
            return 1.0
        hi = math.asin(v / e)
        return integrate.quad(_km_theta, -math.pi / 2, hi, args=(k,), epsabs=1e-12, epsrel=1e-12)[0]

    x = np.asarray(x, dtype=float)
    out = np.vectorize(one, otypes=[float])(x)
    return out if out.ndim else float(out)


def stieltjes_G(k, z):
    """G(k, z) = int dmu(nu) / (z - nu) for z >= 2 sqrt(k-1).

    Evaluated as 2(k-1) / ((k-2) z + k sqrt(z^2 - 4(k-1))), which is the
    rationalised form of the usual expression and has no removable
    singularity at z = k.
    """
    if k < 3:
        raise ValueError("need k >= 3")
    z = np.asarray(z, dtype=float)
    disc = z**2 - 4.0 * (k - 1)
    if np.any(z < 0) or np.any(disc < -1e-12 * max(1.0, 4.0 * (k - 1))):
        raise ValueError("z lies inside the spectrum support; G is complex there")
    out = 2.0 * (k - 1) / ((k - 2) * z + k * np.sqrt(np.clip(disc, 0.0, None)))
    return out if out.ndim else float(out)


def stieltjes_G_textbook(k, z):
    """The same transform in its unrationalised form (undefined at z = k)."""
    z = np.asarray(z, dtype=float)
    return -((k - 2) * z - k * np.sqrt(z**2 - 4 * k + 4)) / (2 * (z**2 - k**2))


def stieltjes_G_quad(k, z):
    """Quadrature oracle for G(k, z), substituting nu = e sin(theta)."""
    e = km_edge(k)
    f = lambda th: _km_theta(th, k) / (z - e * math.sin(th))  # noqa: E731
    return integrate.quad(f, -math.pi / 2, math.pi / 2, epsabs=1e-12, epsrel=1e-12, limit=200)[0]


def mi_chain_value(k, z):
    """2 sqrt(z G(k, z))."""
    return 2.0 * np.sqrt(z * stieltjes_G(k, z))


def mi_chain_bound(k) -> float:
    return math.sqrt(8.0) * math.sqrt((k - 1) / (k - 2))


def mi_chain_check(k, n_grid: int = 1000, z_max: float = 1e3) -> float:
    """Supremum of 2 sqrt(z G(k,z)) over z >= 2 sqrt(k-1) on a log grid.

    The grid contains the support edge itself followed by ``n_grid``
    log-spaced points from just above it to ``z_max``.
    """
    e = km_edge(k)
    grid = np.concatenate([[e], np.geomspace(e * (1 + 1e-9), z_max, n_grid)])
    return float(np.max(mi_chain_value(k, grid)))


def q_sparse(a_min, k, rho):
    """Upper bound on the per-dimension variance rate constant for the sparse ensemble.

    rho + 2 a sqrt(k-1) - a / G(k, rho/a + 2 sqrt(k-1)), computed in the
    cancellation-free form 2 a k / (z + sqrt(z^2 - 4(k-1))).
    """
    if a_min <= 0 or rho < 0 or k < 3:
        raise ValueError("need a_min > 0, rho >= 0, k >= 3")
    z = rho / a_min + km_edge(k)
    return 2.0 * a_min * k / (z + math.sqrt(max(z * z - 4.0 * (k - 1), 0.0)))


def q_sparse_textbook(a_min, k, rho):
    z = rho / a_min + km_edge(k)
    return rho + a_min * km_edge(k) - a_min / stieltjes_G(k, z)


# -- semicircle ----------------------------------------------------------------

def semicircle_pdf(x, alpha):
    """Semicircle density of radius 2 sqrt(alpha) (variance alpha)."""
    x = np.asarray(x, dtype=float)
    r2 = 4.0 * alpha
    out = np.sqrt(np.clip(r2 - x**2, 0.0, None)) / (2 * np.pi * alpha)
    return out if out.ndim else float(out)


def semicircle_cdf(x, alpha):
    r = 2.0 * math.sqrt(alpha)
    u = np.clip(np.asarray(x, dtype=float) / r, -1.0, 1.0)
    out = 0.5 + (u * np.sqrt(1 - u**2) + np.arcsin(u)) / np.pi
    return out if out.ndim else float(out)


def c_dense(alpha, rho):
    """lim E (1/p) Tr (-A)^{-1} for the dense ensemble.

    (2 sqrt(a) + rho - sqrt(rho (4 sqrt(a) + rho))) / (2 a), evaluated as
    2 / (2 sqrt(a) + rho + sqrt(rho (4 sqrt(a) + rho))).
    """
    if alpha <= 0 or rho < 0:
        raise ValueError("need alpha > 0, rho >= 0")
    r = math.sqrt(alpha)
    return 2.0 / (2 * r + rho + math.sqrt(rho * (4 * r + rho)))


def c_dense_textbook(alpha, rho):
    r = math.sqrt(alpha)
    return (2 * r + rho - math.sqrt(rho * (4 * r + rho))) / (2 * alpha)


def c_dense_quad(alpha, rho):
    """Semicircle average of 1 / (2 sqrt(alpha) + rho - nu), by quadrature."""
    r = 2.0 * math.sqrt(alpha)
    # nu = r sin(theta): density * dnu = (2 / pi) cos^2(theta) dtheta
    f = lambda th: (2 / math.pi) * math.cos(th) ** 2 / (r + rho - r * math.sin(th))  # noqa: E731
    return integrate.quad(f, -math.pi / 2, math.pi / 2, epsabs=1e-12, epsrel=1e-12, limit=200)[0]


def q_dense(a_min, rho):
    """rho + 2 sqrt(alpha) - 1 / C(alpha, rho) with alpha = a_min^2 / 2.

    Evaluated as 2 alpha / (2 sqrt(alpha) + rho + sqrt(rho (rho + 4 sqrt(alpha)))).
    """
    if a_min <= 0 or rho < 0:
        raise ValueError("need a_min > 0, rho >= 0")
    alpha = a_min**2 / 2.0
    r = math.sqrt(alpha)
    return 2.0 * alpha / (2 * r + rho + math.sqrt(rho * (rho + 4 * r)))


def q_dense_textbook(a_min, rho):
    alpha = a_min**2 / 2.0
    return rho + 2 * math.sqrt(alpha) - 1.0 / c_dense(alpha, rho)


# -- bounds --------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Per-dimension terms of the observation-time lower bound.

    t_min = max(0, (entropy_per_p - 2 mi_x0_per_p) / variance_rate_per_p).
    """

    regime: str
    entropy_per_p: float
    mi_x0_per_p: float
    variance_rate_per_p: float
    t_min: float

    @property
    def numerator(self) -> float:
        return self.entropy_per_p - 2.0 * self.mi_x0_per_p

    @property
    def vacuous(self) -> bool:
        """True when the entropy does not exceed twice the initial-state information."""
        return self.numerator <= 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "BoundReport":
        return cls(**{f: d[f] for f in ("regime", "entropy_per_p", "mi_x0_per_p",
                                        "variance_rate_per_p", "t_min")})


def general_bound(entropy, mi_x0, variance_rate, regime: str = "generic") -> BoundReport:
    if not variance_rate > 0:
        raise ValueError("variance rate must be positive")
    vals = (entropy, mi_x0, variance_rate)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("bound terms must be finite")
    t = max(0.0, (entropy - 2.0 * mi_x0) / variance_rate)
    return BoundReport(regime, float(entropy), float(mi_x0), float(variance_rate), float(t))


def sparse_entropy_per_p(p, k) -> float:
    return k * math.log(2.0 * p / k)


def dense_entropy_per_p(p) -> float:
    return (1 + p) / 4.0 * math.log(4.0)


def lower_bound_sparse(p, k, a_min, rho) -> BoundReport:
    """Lower bound for the randomly signed k-regular ensemble.

    The variance rate per dimension is half of ``q_sparse``: the mean
    conditional variance of A x_0 is at most (1/2) Tr(E(-A) - (E(-A^{-1}))^{-1}).
    The initial-state information is bounded by one nat per dimension.
    """
    if not p > k >= 3:
        raise ValueError("need p > k >= 3")
    return general_bound(sparse_entropy_per_p(p, k), 1.0, 0.5 * q_sparse(a_min, k, rho), "sparse")


def lower_bound_dense(p, a_min, rho) -> BoundReport:
    if p < 2:
        raise ValueError("need p >= 2")
    return general_bound(dense_entropy_per_p(p), 1.0, 0.5 * q_dense(a_min, rho), "dense")


@dataclass(frozen=True)
class NonlinearClassParams:
    p: int
    k: int
    B: float
    L: float
    D: float
    C_const: float

    def __post_init__(self):
        if self.B <= 0 or self.L <= 0:
            raise ValueError("B and L must be positive")
        if self.k < 1 or self.p <= self.k:
            raise ValueError("need p > k >= 1")
        if self.D < 0 or self.C_const < 0:
            raise ValueError("D and C_const must be nonnegative")


def lower_bound_nonlinear(params: NonlinearClassParams) -> BoundReport:
    """(k log(p/k) - log(B/L)) / (C + 2 k^2 D^2 B)."""
    k, p = params.k, params.p
    entropy = k * math.log(p / k)
    mi = 0.5 * math.log(params.B / params.L)
    rate = params.C_const + 2.0 * k * k * params.D**2 * params.B
    return general_bound(entropy, mi, rate, "nonlinear")
