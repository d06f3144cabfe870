"""Brownian Dirichlet problem on the equilateral triangle via a conformal map.

The unit triangle has vertices 0, 1 and e^{i pi/3}.  The map

    w(z) = 1/2 + 27 / (2 B^3) * wp'(conj(z) e^{-i pi/3})

with ``B = B(1/3, 1/3)`` and ``wp`` the Weierstrass function of the
equianharmonic lattice (g2 = 0, g3 = -B^6 / 27^2) sends the triangle onto
the upper half-plane: the edge [0, 1] to [1, +inf), the edge [0, e^{i pi/3}]
to (-inf, 0] and the far edge [1, e^{i pi/3}] to [0, 1].  The far edge is
parametrized back by a regularized incomplete Beta integral, and harmonic
functions with data on the far edge are half-plane Poisson integrals.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .asymptotics import BETA_THIRD, GAMMA_THIRD

OMEGA = cmath.exp(1j * math.pi / 3)  # apex of the unit triangle
VERTICES = (0j, 1 + 0j, OMEGA)
SQRT3 = math.sqrt(3.0)


class PoleError(ValueError):
    """Argument too close to a lattice point of the elliptic function."""


class QuadratureError(RuntimeError):
    def __init__(self, message: str, value: float, abserr: float):
        super().__init__(message)
        self.value = value
        self.abserr = abserr


# ---------------------------------------------------------------------------
# Weierstrass functions


@dataclass(frozen=True)
class EquianharmonicLattice:
    g2: float = 0.0
    g3: float = -(BETA_THIRD**6) / 27.0**2
    terms: int = 40

    def __post_init__(self) -> None:
        if self.g2 != 0.0:
            raise ValueError("only the equianharmonic case g2 = 0 is supported")

    @cached_property
    def coefficients(self) -> np.ndarray:
        """c[k] multiplies u^(2k-2) in the Laurent series of wp."""
        c = np.zeros(self.terms + 1)
        c[2] = self.g2 / 20.0
        c[3] = self.g3 / 28.0
        for k in range(4, self.terms + 1):
            s = sum(c[m] * c[k - m] for m in range(2, k - 1))
            c[k] = 3.0 * s / ((2 * k + 1) * (k - 3))
        return c

    @cached_property
    def min_period(self) -> float:
        """Shortest nonzero lattice vector, the radius of convergence of the series."""
        # real period of the g3 = 1 equianharmonic lattice, rescaled by |g3|^(-1/6)
        return GAMMA_THIRD**3 / (2.0 * math.pi) * abs(self.g3) ** (-1.0 / 6.0)

    def _series(self, u):
        c = self.coefficients
        u2 = u * u
        u6 = u2 * u2 * u2
        # only c[3j] survive when g2 = 0; Horner in u^6
        ks = [k for k in range(self.terms, 1, -1) if c[k] != 0.0]
        sp = 0.0 * u
        sd = 0.0 * u
        for k in ks:
            sp = sp * u6 + c[k]
            sd = sd * u6 + (2 * k - 2) * c[k]
        # wp = 1/u^2 + u^4 sum_j c_{3j} u^{6(j-1)};  wp' = -2/u^3 + u^3 sum_j (6j-2) c_{3j} u^{6(j-1)}
        return 1.0 / u2 + u2 * u2 * sp, -2.0 / (u2 * u) + u2 * u * sd

    def wp_pair(self, u):
        """(wp(u), wp'(u)) by Laurent series, halving arguments beyond half the radius."""
        u = np.asarray(u, dtype=complex)
        if np.any(np.abs(u) < 1e-100):
            raise PoleError("argument at the pole u = 0")
        far = np.abs(u) > self.min_period / 2.0
        if not np.any(far):
            return self._series(u)
        p = np.empty_like(u)
        dp = np.empty_like(u)
        near = ~far
        if np.any(near):
            p[near], dp[near] = self._series(u[near])
        ph, dph = self.wp_pair(u[far] / 2.0)
        if np.any(dph == 0):
            raise PoleError("argument is a lattice point (half argument at a zero of wp')")
        # tangent line at (wp, wp') meets the curve again at the image of -u
        lam = (6.0 * ph * ph - self.g2 / 2.0) / dph
        p2 = lam * lam / 4.0 - 2.0 * ph
        p[far] = p2
        dp[far] = -lam * (p2 - ph) - dph
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(dp))):
            raise PoleError("argument too close to a lattice point")
        return p, dp

    def ode_residual(self, u) -> np.ndarray:
        """|wp'^2 - (4 wp^3 - g2 wp - g3)| / |wp'^2|."""
        p, dp = self.wp_pair(u)
        return np.abs(dp * dp - (4 * p**3 - self.g2 * p - self.g3)) / np.abs(dp * dp)


LATTICE = EquianharmonicLattice()


def _scalar_or_array(x, like):
    return complex(x) if np.ndim(like) == 0 else x


def wp_prime(u, lattice: EquianharmonicLattice = LATTICE):
    p, dp = lattice.wp_pair(u)
    return _scalar_or_array(dp, u)


def wp(u, lattice: EquianharmonicLattice = LATTICE):
    p, dp = lattice.wp_pair(u)
    return _scalar_or_array(p, u)


# ---------------------------------------------------------------------------
# conformal maps


def _check_triangle(z, tol: float = 1e-12) -> None:
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    inside = (y >= -tol) & (SQRT3 * x - y >= -tol) & (SQRT3 * (1 - x) - y >= -tol)
    if not np.all(inside):
        raise ValueError("point outside the closed unit triangle")
    for v in VERTICES:
        if np.any(np.abs(z - v) < 1e-14):
            raise ValueError(f"vertex {v} has no finite image")


def forward_map(z, lattice: EquianharmonicLattice = LATTICE):
    """Conformal map of the unit triangle onto the upper half-plane."""
    _check_triangle(z)
    u = np.conj(np.asarray(z, dtype=complex)) * np.conj(OMEGA)
    _, dp = lattice.wp_pair(u)
    w = 0.5 + 27.0 / (2.0 * BETA_THIRD**3) * dp
    return _scalar_or_array(w, z)


def near_vertex_image(z) -> complex:
    """Leading term of w(z) at the apex-free vertex 0: 27 / (B^3 conj(z)^3)."""
    return 27.0 / (BETA_THIRD**3 * np.conj(z) ** 3)


# ---------------------------------------------------------------------------
# quadrature on (0, 1) with t^(-2/3) (1-t)^(-2/3) endpoint behaviour


def _graded(s):
    """t(s) = s^3 / (s^3 + (1-s)^3) and dt/ds."""
    a, b = s**3, (1 - s) ** 3
    q = a + b
    return a / q, 3.0 * s * s * (1 - s) ** 2 / (q * q)


def _graded_inverse(t: float) -> float:
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    r = (t / (1 - t)) ** (1.0 / 3.0)
    return r / (1 + r)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule pulled back through the cubic grading t(s)."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def graded(cls, n: int = 64) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (x + 1)
        t, dt = _graded(s)
        return cls(t, 0.5 * w * dt)

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_GL_S = 0.5 * (_GL_X + 1)
_GL_W = 0.5 * _GL_W


def _lower_beta_third(x):
    """int_0^x t^(-2/3) (1-t)^(-2/3) dt for 0 <= x <= 1/2, via t = x s^3."""
    x = np.asarray(x, dtype=float)
    s3 = _GL_S**3
    vals = np.sum(_GL_W * (1.0 - x[..., None] * s3) ** (-2.0 / 3.0), axis=-1)
    return 3.0 * np.cbrt(x) * vals


def beta_third_cdf(t):
    """Regularized incomplete Beta I_t(1/3, 1/3)."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    lo = np.minimum(t, 1.0 - t)
    part = _lower_beta_third(lo) / BETA_THIRD
    out = np.where(t <= 0.5, part, 1.0 - part)
    return float(out) if out.ndim == 0 else out


def boundary_point(t):
    """Point of the far edge [e^{i pi/3}, 1] whose image under forward_map is t."""
    if np.any((np.asarray(t) <= 0) | (np.asarray(t) >= 1)):
        raise ValueError("t must lie strictly between 0 and 1")
    z = OMEGA + beta_third_cdf(t) * np.conj(OMEGA)
    return _scalar_or_array(z, t)


def phi_p321(z):
    """Fair heads-up win probability of player 1 at far-edge point z."""
    return 1.0 - 2.0 / SQRT3 * np.imag(z)


# boundary data as functions of the half-plane coordinate t in (0, 1)
def data_p321(t):
    return beta_third_cdf(t)


def data_third_first(t):
    return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0


def data_zero(t):
    return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0


# ---------------------------------------------------------------------------
# Poisson integral


POISSON_PREFACTOR = 1.0 / (math.pi * math.sqrt(2.0))


def poisson_integral(z, data, epsabs: float = 1e-10, epsrel: float = 1e-12, w=None):
    """Return (value, abserr) of (1/(pi sqrt2)) int_0^1 Im w/|t-w|^2 data(t) dt.

    The integral is taken in the graded variable s so the t^(1/3)-type
    endpoint behaviour of the data becomes smooth.
    """
    if w is None:
        w = forward_map(z)
    wr, wi = w.real, w.imag
    if not wi > 0:
        raise ValueError("z must be an interior point of the triangle")

    def integrand(s):
        t, dt = _graded(s)
        return wi / ((t - wr) ** 2 + wi * wi) * data(t) * dt

    peak = []
    if 0.0 < wr < 1.0 and wi < 0.1:
        peak = [_graded_inverse(wr)]
    value, abserr, info, *rest = integrate.quad(
        integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=400,
        points=peak or None, full_output=1,
    )
    if rest and abserr > max(epsabs, epsrel * abs(value)):
        raise QuadratureError(
            f"Poisson integral did not converge: {rest[0]}",
            value * POISSON_PREFACTOR, abserr * POISSON_PREFACTOR,
        )
    return value * POISSON_PREFACTOR, abserr * POISSON_PREFACTOR


def poisson_value(z, data, epsabs: float = 1e-10, epsrel: float = 1e-12) -> float:
    """Poisson integral of ``data`` at z, with the fixed 1/(pi sqrt 2) prefactor.

    Multiply by sqrt(2) to get the harmonic function of the unit triangle
    with data ``data`` on the far edge and 0 on the other two edges.
    """
    return poisson_integral(z, data, epsabs, epsrel)[0]


def harmonic_value(z, data, epsabs: float = 1e-12, epsrel: float = 1e-12) -> float:
    """Harmonic function on the unit triangle: sqrt(2) * poisson_value."""
    return math.sqrt(2.0) * poisson_value(z, data, epsabs, epsrel)


def _scaled_point(x1: float, x2: float, N: float) -> complex:
    z = complex(x1, x2) / (math.sqrt(2.0) * N)
    x, y = z.real, z.imag
    if not (y > 0 and SQRT3 * x - y > 0 and SQRT3 * (1 - x) - y > 0):
        raise ValueError(f"({x1}, {x2}) is not strictly inside the triangle of side sqrt(2) N")
    return z


def bm_p321(x1: float, x2: float, N: float, epsrel: float = 1e-13) -> float:
    """Brownian probability that player 3 is eliminated first, then player 2."""
    z = _scaled_point(x1, x2, N)
    return math.sqrt(2.0) * poisson_value(z, data_p321, epsabs=0.0, epsrel=epsrel)


def bm_third_first(x1: float, x2: float, N: float, epsrel: float = 1e-13) -> float:
    """Brownian probability that player 3 is eliminated first."""
    z = _scaled_point(x1, x2, N)
    return math.sqrt(2.0) * poisson_value(z, data_third_first, epsabs=0.0, epsrel=epsrel)


@dataclass
class ConformalContext:
    """Shared read-only state for repeated Brownian evaluations."""

    lattice: EquianharmonicLattice = field(default_factory=EquianharmonicLattice)
    rule: QuadratureRule = field(default_factory=QuadratureRule.graded)

    @cached_property
    def boundary_samples(self) -> np.ndarray:
        return boundary_point(self.rule.nodes)

    def edge_samples(self, n: int = 50) -> dict[str, np.ndarray]:
        """n points per edge, vertices excluded."""
        s = np.arange(1, n + 1) / (n + 1)
        return {
            "0-1": s + 0j,
            "0-apex": s * OMEGA,
            "1-apex": 1 + s * (OMEGA - 1),
        }
