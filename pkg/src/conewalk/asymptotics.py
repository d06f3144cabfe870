"""Closed-form constants for the large-N behaviour of the exit probabilities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .model import SQRT6, STANDARD, WedgeParams, u_wedge


def gamma_fn(x: float) -> float:
    """Gamma function for x > 0 (libm, ~1 ulp on the range used here)."""
    if not x > 0:
        raise ValueError(f"gamma_fn needs a positive argument, got {x}")
    return math.gamma(x)


def beta_fn(a: float, b: float) -> float:
    """Euler Beta function; the log-Gamma route takes over once Gamma would overflow."""
    if not (a > 0 and b > 0):
        raise ValueError("beta_fn needs positive arguments")
    if a + b < 150:
        return gamma_fn(a) * gamma_fn(b) / gamma_fn(a + b)
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


GAMMA_THIRD = gamma_fn(1.0 / 3.0)
#: B(1/3, 1/3), the total mass of t^(-2/3) (1-t)^(-2/3) on (0, 1).
BETA_THIRD = beta_fn(1.0 / 3.0, 1.0 / 3.0)


@dataclass(frozen=True)
class AsymptoticConstants:
    """Prefactors of ``value * N^3`` in capital and wedge coordinates."""

    c_third_first: float
    c_321: float
    c_bm_321: float
    c_bm_third: float

    @classmethod
    def compute(cls) -> "AsymptoticConstants":
        g9 = GAMMA_THIRD**9
        pi4 = math.pi**4
        return cls(
            c_third_first=g9 / (16.0 * pi4),
            c_321=g9 / (32.0 * pi4),
            c_bm_321=g9 / (96.0 * SQRT6 * pi4),
            c_bm_third=g9 / (48.0 * SQRT6 * pi4),
        )

    def check(self, tol: float = 1e-14) -> dict[str, bool]:
        def close(a, b):
            return abs(a - b) <= tol * max(abs(a), abs(b))

        return {
            "c_321 = c_third_first / 2": close(self.c_321, self.c_third_first / 2),
            "c_bm_321 = c_bm_third / 2": close(self.c_bm_321, self.c_bm_third / 2),
            "c_bm_321 * 3 sqrt6 = c_321": close(self.c_bm_321 * 3 * SQRT6, self.c_321),
            "c_bm_third * 3 sqrt6 = c_third_first": close(self.c_bm_third * 3 * SQRT6, self.c_third_first),
        }


CONSTANTS = AsymptoticConstants.compute()

#: Limit of N^3 P321(N; 1, 1); also the third-first prefactor.
GAMBLER_CONSTANT = CONSTANTS.c_third_first


def predict_p321(y1: float, y2: float, N: float) -> float:
    return CONSTANTS.c_321 * y1 * y2 * (y1 + y2) / N**3


def predict_third_first(y1: float, y2: float, N: float) -> float:
    return CONSTANTS.c_third_first * y1 * y2 * (y1 + y2) / N**3


def predict_bm(x1: float, x2: float, N: float, kind: str = "p321") -> float:
    """Brownian prediction in wedge coordinates, ``c * u(x) / N^3``."""
    c = {"p321": CONSTANTS.c_bm_321, "third-first": CONSTANTS.c_bm_third}.get(kind)
    if c is None:
        raise ValueError(f"unknown kind {kind!r}")
    return c * u_wedge(x1, x2) / N**3


def projection_increments() -> dict[float, float]:
    """Law of the walk's steps projected on the far-edge normal."""
    normal = WedgeParams().far_edge_normal()
    law: dict[float, Fraction] = {}
    for x, p in zip(STANDARD.wedge_offsets(), STANDARD.probs):
        key = round(float(x @ normal), 12)
        law[key] = law.get(key, Fraction(0)) + p
    return {k: float(v) for k, v in sorted(law.items())}


def renewal_function(r: float) -> float:
    """Descending ladder-height renewal function of the projected walk.

    The projection is a lazy simple walk on the grid of mesh sqrt(6)/2, so the
    renewal function is the identity on that grid.
    """
    return float(r)
