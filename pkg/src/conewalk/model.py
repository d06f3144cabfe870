"""Three-player gambler's ruin as a lattice walk in a truncated wedge.

States are pairs ``(a, b)`` of integer capitals of players 1 and 2; the
third player holds ``N - a - b``.  Wedge coordinates are a derived view
obtained with the matrix ``T`` that turns the walk's covariance into the
identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

State = tuple[int, int]

SQRT2 = math.sqrt(2.0)
SQRT6 = math.sqrt(6.0)

#: Maps capitals (a, b) to wedge coordinates; the quadrant becomes a pi/3 wedge.
T_MATRIX = np.array([[SQRT2, SQRT2 / 2.0], [0.0, SQRT6 / 2.0]])

#: Wedge distance between consecutive lattice layers a + b = k.
LAYER_GAP = SQRT6 / 2.0

#: Homogeneity degree of the positive harmonic function of the pi/3 wedge.
HOMOGENEITY = 3
DIMENSION = 2


@dataclass(frozen=True)
class StepSet:
    """Jump law of the walk: symmetric offsets, their probabilities and a holding probability."""

    offsets: tuple[State, ...]
    probs: tuple[Fraction, ...]
    hold_prob: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if len(self.offsets) != len(self.probs):
            raise ValueError("offsets and probs differ in length")
        if any(p <= 0 for p in self.probs):
            raise ValueError("step probabilities must be positive")
        if not 0 <= self.hold_prob < 1:
            raise ValueError("hold_prob must lie in [0, 1)")
        if sum(self.probs, Fraction(0)) + self.hold_prob != 1:
            raise ValueError("probabilities do not sum to 1")
        law = dict(zip(self.offsets, self.probs))
        if len(law) != len(self.offsets):
            raise ValueError("duplicate offsets")
        for (da, db), p in law.items():
            if law.get((-da, -db)) != p:
                raise ValueError(f"step set is not symmetric at {(da, db)}")

    def items(self) -> Iterator[tuple[State, Fraction]]:
        return zip(self.offsets, self.probs)

    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    def wedge_offsets(self) -> np.ndarray:
        """Offsets mapped to wedge coordinates, shape (k, 2)."""
        return np.asarray(self.offsets, dtype=float) @ T_MATRIX.T


_SIX = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))

STANDARD = StepSet(_SIX, (Fraction(1, 6),) * 6)
#: Increment law of the gap process of three non-colliding Bernoulli walks.
LAZY = StepSet(_SIX, (Fraction(1, 8),) * 6, hold_prob=Fraction(1, 4))


def lazy_steps(hold_prob: Fraction | int | str) -> StepSet:
    """Same jump chain as the standard walk, holding with probability ``hold_prob``."""
    hold = Fraction(hold_prob)
    return StepSet(_SIX, ((1 - hold) / 6,) * 6, hold_prob=hold)


@dataclass(frozen=True)
class GamblerConfig:
    N: int
    start: State

    def __post_init__(self) -> None:
        a, b = self.start
        if self.N < 3:
            raise ValueError(f"total capital must be at least 3, got {self.N}")
        if a < 1 or b < 1 or a + b > self.N - 1:
            raise ValueError(f"start {self.start} is not interior for N={self.N}")

    @property
    def third(self) -> int:
        return self.N - sum(self.start)


class TriangleDomain:
    """Interior and boundary states of the chain at total capital ``N``.

    Interior states are ordered by ``a`` then ``b``.  Boundary points come in
    three blocks: B1 = {(0, b)} (player 1 broke), B2 = {(a, 0)} (player 2
    broke) and B3 = {(a, N - a)} (player 3 broke), each with 1 <= . <= N - 1.
    """

    def __init__(self, N: int):
        if N < 3:
            raise ValueError(f"N must be at least 3, got {N}")
        self.N = N
        self.interior: list[State] = [
            (a, b) for a in range(1, N - 1) for b in range(1, N - a)
        ]
        self._index = {s: i for i, s in enumerate(self.interior)}
        b1 = [(0, b) for b in range(1, N)]
        b2 = [(a, 0) for a in range(1, N)]
        b3 = [(a, N - a) for a in range(1, N)]
        self.boundary: list[State] = b1 + b2 + b3
        self._bindex = {s: i for i, s in enumerate(self.boundary)}
        self.edges = {"B1": b1, "B2": b2, "B3": b3}

    def __len__(self) -> int:
        return len(self.interior)

    def __repr__(self) -> str:
        return f"TriangleDomain(N={self.N})"

    def is_interior(self, s: State) -> bool:
        a, b = s
        return a >= 1 and b >= 1 and a + b <= self.N - 1

    def index(self, s: State) -> int:
        try:
            return self._index[tuple(s)]
        except KeyError:
            raise KeyError(f"{s} is not an interior state for N={self.N}") from None

    def state_at(self, i: int) -> State:
        return self.interior[i]

    def boundary_index(self, y: State) -> int:
        try:
            return self._bindex[tuple(y)]
        except KeyError:
            raise KeyError(f"{y} is not a boundary point for N={self.N}") from None

    def edge_of(self, y: State) -> str:
        """Name of the edge holding boundary point ``y``."""
        a, b = y
        if a == 0 and 1 <= b <= self.N - 1:
            return "B1"
        if b == 0 and 1 <= a <= self.N - 1:
            return "B2"
        if a + b == self.N and 1 <= a <= self.N - 1:
            return "B3"
        raise ValueError(f"{y} is not a boundary point for N={self.N}")

    def neighbors(self, s: State, steps: StepSet = STANDARD) -> list[tuple[State, Fraction]]:
        """All points reachable from interior ``s`` in one step, with probabilities.

        The holding move, if any, is listed as ``(s, hold_prob)``.
        """
        if not self.is_interior(s):
            raise ValueError(f"{s} is not an interior state for N={self.N}")
        a, b = s
        out = [((a + da, b + db), p) for (da, db), p in steps.items()]
        if steps.hold_prob:
            out.append(((a, b), steps.hold_prob))
        return out

    def layer(self, k: int) -> list[State]:
        """Interior states with a + b = k."""
        if not 2 <= k <= self.N - 1:
            return []
        return [(a, k - a) for a in range(1, k)]


def to_wedge(state) -> np.ndarray:
    """Wedge coordinates ``T @ (a, b)``; accepts a pair or an (n, 2) array."""
    return np.asarray(state, dtype=float) @ T_MATRIX.T


def from_wedge(x) -> np.ndarray:
    return np.linalg.solve(T_MATRIX, np.asarray(x, dtype=float).T).T


def V_original(A, B):
    """Positive harmonic function in capital coordinates, 3*sqrt(6)*A*B*(A+B)."""
    return 3.0 * SQRT6 * A * B * (A + B)


def V_exact(A: int, B: int) -> Fraction:
    """A*B*(A+B) as an exact integer; V_original is 3*sqrt(6) times this."""
    return Fraction(A * B * (A + B))


def u_wedge(x1, x2):
    """Harmonic function of the pi/3 wedge, vanishing on both rays."""
    return 3.0 * x1 * x1 * x2 - x2**3


def wedge_distance_to_far_edge(k: int, N: int) -> float:
    """Wedge distance from layer a + b = k to the far edge a + b = N."""
    return LAYER_GAP * (N - k)


@dataclass(frozen=True)
class WedgeParams:
    T: np.ndarray = field(default_factory=lambda: T_MATRIX.copy())
    p: int = HOMOGENEITY
    d: int = DIMENSION
    layer_gap: float = LAYER_GAP

    def far_edge_normal(self) -> np.ndarray:
        """Unit normal of the far edge sqrt(3) x1 + x2 = sqrt(6) N, pointing to the apex."""
        return -np.array([math.sqrt(3.0), 1.0]) / 2.0
