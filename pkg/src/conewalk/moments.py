"""Moments of the wedge-coordinate step X = T Y, by enumeration of the six outcomes.

Exact values are kept as ``rational * sqrt(radicand)``.  With
X1 = (2 Y1 + Y2) / sqrt(2) and X2 = sqrt(3/2) Y2, the moment E[X1^i X2^j]
equals E[(2Y1+Y2)^i Y2^j] * 3^(j/2) / 2^((i+j)/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import STANDARD


@dataclass(frozen=True)
class Surd:
    """The number ``rational * sqrt(radicand)``."""

    rational: Fraction
    radicand: int = 1

    def __float__(self) -> float:
        return float(self.rational) * math.sqrt(self.radicand)

    def __eq__(self, other) -> bool:
        if isinstance(other, Surd):
            if self.rational == 0 or other.rational == 0:
                return self.rational == other.rational
            return (self.rational, self.radicand) == (other.rational, other.radicand)
        if self.radicand == 1 or self.rational == 0:
            return self.rational == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.rational, self.radicand))


def y_moment(i: int, j: int) -> Fraction:
    """E[Y1^i Y2^j] exactly."""
    return sum(
        (p * Fraction(a) ** i * Fraction(b) ** j for (a, b), p in STANDARD.items()),
        Fraction(0),
    )


def exact_moment(i: int, j: int) -> Surd:
    base = sum(
        (p * Fraction(2 * a + b) ** i * Fraction(b) ** j for (a, b), p in STANDARD.items()),
        Fraction(0),
    )
    if base == 0:
        return Surd(Fraction(0))
    # sqrt(3^j / 2^(i+j)) split into rational part and square-free radicand
    odd = (i + j) % 2
    rational = base * Fraction(3 ** (j // 2), 2 ** ((i + j) // 2)) / (2 if odd else 1)
    return Surd(rational, 3 ** (j % 2) * 2**odd)


def moment_table(max_degree: int = 6) -> dict[tuple[int, int], Surd]:
    """E[X1^i X2^j] for i + j <= max_degree."""
    return {
        (i, j): exact_moment(i, j)
        for i in range(max_degree + 1)
        for j in range(max_degree + 1 - i)
    }


def joint_moment(i: int, j: int) -> float:
    """E[X1^i X2^j] in floating point, averaging over the six outcomes."""
    if i < 0 or j < 0 or i + j > 8:
        raise ValueError("need i, j >= 0 and i + j <= 8")
    x = STANDARD.wedge_offsets()
    return float(np.mean(x[:, 0] ** i * x[:, 1] ** j))


# the hand-entered moment identities
MOMENT_CLAIMS: dict[str, tuple[str, tuple[int, int], Fraction]] = {
    "E[Y1^2] = 2/3": ("Y", (2, 0), Fraction(2, 3)),
    "E[Y2^4] = 2/3": ("Y", (0, 4), Fraction(2, 3)),
    "E[Y1^3] = 0": ("Y", (3, 0), Fraction(0)),
    "E[Y1^2 Y2] = 0": ("Y", (2, 1), Fraction(0)),
    "E[Y1 Y2^2] = 0": ("Y", (1, 2), Fraction(0)),
    "E[Y1 Y2] = -1/3": ("Y", (1, 1), Fraction(-1, 3)),
    "E[Y1^3 Y2] = -1/3": ("Y", (3, 1), Fraction(-1, 3)),
    "E[Y1 Y2^3] = -1/3": ("Y", (1, 3), Fraction(-1, 3)),
    "E[Y1^3 Y2^3] = -1/3": ("Y", (3, 3), Fraction(-1, 3)),
    "E[Y1^2 Y2^2] = 1/3": ("Y", (2, 2), Fraction(1, 3)),
    "E[Y1^4 Y2^2] = 1/3": ("Y", (4, 2), Fraction(1, 3)),
    "E[Y1^2 Y2^4] = 1/3": ("Y", (2, 4), Fraction(1, 3)),
    "E[X1] = 0": ("X", (1, 0), Fraction(0)),
    "E[X2] = 0": ("X", (0, 1), Fraction(0)),
    "E[X1^2] = 1": ("X", (2, 0), Fraction(1)),
    "E[X2^2] = 1": ("X", (0, 2), Fraction(1)),
    "E[X1 X2] = 0": ("X", (1, 1), Fraction(0)),
    "E[X1^2 X2] = 0": ("X", (2, 1), Fraction(0)),
    "E[X1^4] = 3/2": ("X", (4, 0), Fraction(3, 2)),
    "E[X2^4] = 3/2": ("X", (0, 4), Fraction(3, 2)),
    "E[X1^3 X2] = 0": ("X", (3, 1), Fraction(0)),
    "E[X1 X2^3] = 0": ("X", (1, 3), Fraction(0)),
    "E[X1^2 X2^2] = 1/2": ("X", (2, 2), Fraction(1, 2)),
}


def verify_moment_table(tol: float = 1e-14) -> dict[str, bool]:
    """Check every moment identity, in exact and in floating-point arithmetic.

    Besides the listed claims, every X-moment of odd total degree up to 7
    must vanish.
    """
    report = {}
    for name, (var, (i, j), expected) in MOMENT_CLAIMS.items():
        if var == "Y":
            report[name] = y_moment(i, j) == expected
        else:
            ok_exact = exact_moment(i, j) == expected
            ok_float = abs(joint_moment(i, j) - float(expected)) <= tol
            report[name] = bool(ok_exact and ok_float)
    for deg in (1, 3, 5, 7):
        ok = all(
            exact_moment(i, deg - i) == 0 and abs(joint_moment(i, deg - i)) <= tol
            for i in range(deg + 1)
        )
        report[f"odd degree {deg} moments vanish"] = ok
    return report


# ---------------------------------------------------------------------------
# polynomials in wedge coordinates, {(i, j): coefficient of x1^i x2^j}

Poly = dict[tuple[int, int], float]


def poly_eval(poly: Poly, x1, x2):
    return sum(c * x1**i * x2**j for (i, j), c in poly.items())


def laplacian(poly: Poly) -> Poly:
    out: Poly = {}
    for (i, j), c in poly.items():
        if i >= 2:
            out[(i - 2, j)] = out.get((i - 2, j), 0) + c * i * (i - 1)
        if j >= 2:
            out[(i, j - 2)] = out.get((i, j - 2), 0) + c * j * (j - 1)
    return {k: v for k, v in out.items() if v != 0}


def real_power(n: int) -> Poly:
    """Re (x1 + i x2)^n as integer coefficients."""
    poly: Poly = {}
    for k in range(n + 1):
        coef = math.comb(n, k) * (1j**k)
        if coef.real != 0:
            poly[(n - k, k)] = coef.real
    return poly


def imag_power(n: int) -> Poly:
    poly: Poly = {}
    for k in range(n + 1):
        coef = math.comb(n, k) * (1j**k)
        if coef.imag != 0:
            poly[(n - k, k)] = coef.imag
    return poly


def fourth_order_cancellation(poly: Poly, points: int = 20, seed: int = 0) -> float:
    """max over random points of |E poly(x + X) - poly(x)|.

    Vanishes for harmonic polynomials of degree at most 5 because the walk's
    fourth-order term is proportional to the bi-Laplacian; degree 6 is the
    first where the hexagonal anisotropy shows.
    """
    lap = laplacian(poly)
    scale = max((abs(c) for c in poly.values()), default=1.0)
    if any(abs(c) > 1e-12 * scale for c in lap.values()):
        raise ValueError("polynomial is not harmonic")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(points, 2))
    steps = STANDARD.wedge_offsets()
    probs = STANDARD.float_probs()
    worst = 0.0
    for x1, x2 in pts:
        mean = sum(p * poly_eval(poly, x1 + d1, x2 + d2) for (d1, d2), p in zip(steps, probs))
        worst = max(worst, abs(mean - poly_eval(poly, x1, x2)))
    return worst

