"""Absorbing-chain linear solves: harmonic functions, exit laws, Green functions.

The interior operator ``I - Q`` is symmetric positive definite because the
step law is symmetric and every interior state can leave the triangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import (
    LAYER_GAP,
    STANDARD,
    GamblerConfig,
    State,
    StepSet,
    TriangleDomain,
    V_original,
)

DEFAULT_TOL = 1e-12


class SolverError(RuntimeError):
    """Raised when the iterative solver hits its iteration cap."""

    def __init__(self, message: str, best_residual: float, iterations: int, values: np.ndarray):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations
        self.values = values


# ---------------------------------------------------------------------------
# boundary data


def _capitals(y: State, N: int) -> tuple[int, int, int]:
    a, b = y
    return a, b, N - a - b


class BoundaryData:
    """Values on the boundary points of a :class:`TriangleDomain`.

    Subclasses define ``value(y, N)``.  Data describing a game outcome also
    define ``outcome(first, second)``: the payoff once player ``first`` went
    broke on the edge and player ``second`` lost the heads-up game.
    """

    name = "custom"

    def value(self, y: State, N: int) -> float:
        raise NotImplementedError

    def outcome(self, first: int, second: int) -> float:
        raise TypeError(f"{type(self).__name__} has no game-outcome semantics")

    def values(self, domain: TriangleDomain) -> np.ndarray:
        return np.array([self.value(y, domain.N) for y in domain.boundary], dtype=float)


@dataclass(frozen=True)
class BrokeFirst(BoundaryData):
    """1 on the edge where ``player`` is broke, 0 elsewhere."""

    player: int = 3

    @property
    def name(self) -> str:
        return {1: "first-first", 2: "second-first", 3: "third-first"}[self.player]

    def value(self, y: State, N: int) -> float:
        caps = _capitals(y, N)
        return 1.0 if caps[self.player - 1] == 0 else 0.0

    def outcome(self, first: int, second: int) -> float:
        return float(first == self.player)


@dataclass(frozen=True)
class EliminationOrder(BoundaryData):
    """Probability that ``first`` is eliminated first and ``second`` second.

    On the edge where ``first`` is broke the two survivors play a fair
    heads-up game, so ``second`` loses with probability (other's capital)/N.
    """

    first: int = 3
    second: int = 2

    def __post_init__(self) -> None:
        if {self.first, self.second} - {1, 2, 3} or self.first == self.second:
            raise ValueError("players must be two distinct labels from 1, 2, 3")

    @property
    def name(self) -> str:
        return f"p{self.first}{self.second}{6 - self.first - self.second}"

    def value(self, y: State, N: int) -> float:
        caps = _capitals(y, N)
        if caps[self.first - 1] != 0:
            return 0.0
        other = 6 - self.first - self.second
        return caps[other - 1] / N

    def outcome(self, first: int, second: int) -> float:
        return float(first == self.first and second == self.second)


@dataclass(frozen=True)
class Wins(BoundaryData):
    """Probability that ``player`` wins the whole game."""

    player: int = 1

    @property
    def name(self) -> str:
        return {1: "first-wins", 2: "second-wins", 3: "third-wins"}[self.player]

    def value(self, y: State, N: int) -> float:
        caps = _capitals(y, N)
        if caps[self.player - 1] == 0:
            return 0.0
        return caps[self.player - 1] / N

    def outcome(self, first: int, second: int) -> float:
        return float(self.player not in (first, second))


@dataclass(frozen=True)
class PointMass(BoundaryData):
    point: State = (0, 1)
    name = "point-mass"

    def value(self, y: State, N: int) -> float:
        return 1.0 if tuple(y) == tuple(self.point) else 0.0


@dataclass(frozen=True, eq=False)
class Custom(BoundaryData):
    """Arbitrary data: a callable ``f(y, N)`` or a vector in boundary order."""

    source: Callable[[State, int], float] | Sequence[float] = field(default=lambda y, N: 0.0)
    name = "custom"

    def value(self, y: State, N: int) -> float:
        if callable(self.source):
            return float(self.source(y, N))
        raise TypeError("vector-backed Custom data has no pointwise value without a domain")

    def values(self, domain: TriangleDomain) -> np.ndarray:
        if callable(self.source):
            return super().values(domain)
        v = np.asarray(self.source, dtype=float)
        if v.shape != (len(domain.boundary),):
            raise ValueError(f"expected {len(domain.boundary)} boundary values, got {v.shape}")
        return v


THIRD_FIRST = BrokeFirst(3)
P321 = EliminationOrder(3, 2)
FIRST_WINS = Wins(1)

QUANTITIES: dict[str, BoundaryData] = {
    "third-first": THIRD_FIRST,
    "p321": P321,
    "first-wins": FIRST_WINS,
}


def quantity(name: str) -> BoundaryData:
    try:
        return QUANTITIES[name]
    except KeyError:
        raise ValueError(f"unknown quantity {name!r}; choose from {sorted(QUANTITIES)}") from None


# ---------------------------------------------------------------------------
# operator


@dataclass(eq=False)
class InteriorOperator:
    """Sparse ``I - Q`` on interior states plus the interior-to-boundary kernel.

    ``matrix`` is CSR, ``exits`` has shape (interior, boundary) and holds the
    one-step probabilities of leaving into each boundary point.
    """

    domain: TriangleDomain
    steps: StepSet
    matrix: sp.csr_matrix
    exits: sp.csr_matrix
    _lu: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def Q(self) -> sp.csr_matrix:
        return (sp.identity(self.size, format="csr") - self.matrix).tocsr()

    def factorized(self):
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        return self._lu


@lru_cache(maxsize=16)
def _assemble_cached(N: int, steps: StepSet) -> InteriorOperator:
    domain = TriangleDomain(N)
    n = len(domain)
    states = np.array(domain.interior, dtype=np.int64).reshape(-1, 2)
    grid = np.full((N + 1, N + 1), -1, dtype=np.int64)
    grid[states[:, 0], states[:, 1]] = np.arange(n)
    bgrid = np.full((N + 1, N + 1), -1, dtype=np.int64)
    bpts = np.array(domain.boundary, dtype=np.int64)
    bgrid[bpts[:, 0], bpts[:, 1]] = np.arange(len(bpts))

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 1.0 - float(steps.hold_prob))]
    brows, bcols, bvals = [], [], []
    for (da, db), p in steps.items():
        ta = states[:, 0] + da
        tb = states[:, 1] + db
        j = grid[ta, tb]
        inside = j >= 0
        rows.append(np.flatnonzero(inside))
        cols.append(j[inside])
        vals.append(np.full(inside.sum(), -float(p)))
        k = bgrid[ta[~inside], tb[~inside]]
        if np.any(k < 0):
            raise AssertionError("a step left the triangle through a vertex")
        brows.append(np.flatnonzero(~inside))
        bcols.append(k)
        bvals.append(np.full(k.size, float(p)))
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    exits = sp.csr_matrix(
        (np.concatenate(bvals), (np.concatenate(brows), np.concatenate(bcols))),
        shape=(n, len(bpts)),
    )
    return InteriorOperator(domain, steps, matrix, exits)


def assemble(domain: TriangleDomain | int, steps: StepSet = STANDARD) -> InteriorOperator:
    """Build ``I - Q`` for the chain killed on leaving the triangle.

    Operators are cached per ``(N, steps)`` and must be treated as read-only.
    """
    N = domain.N if isinstance(domain, TriangleDomain) else int(domain)
    if N < 3:
        raise ValueError(f"N must be at least 3, got {N}")
    return _assemble_cached(N, steps)


# ---------------------------------------------------------------------------
# solver


@dataclass
class SolveReport:
    values: np.ndarray
    relative_residual: float
    iterations: int


def _relative_residual(op: InteriorOperator, x: np.ndarray, rhs: np.ndarray) -> float:
    nb = np.linalg.norm(rhs)
    r = np.linalg.norm(op.matrix @ x - rhs)
    return 0.0 if nb == 0 else float(r / nb)


def conjugate_gradient(A, b, tol=DEFAULT_TOL, maxiter=None):
    """Jacobi-preconditioned CG; returns (x, iterations, relative residual, converged)."""
    n = b.size
    if maxiter is None:
        maxiter = max(20, int(math.ceil(20 * math.sqrt(n))))
    diag = A.diagonal()
    nb = np.linalg.norm(b)
    x = np.zeros(n)
    if nb == 0.0:
        return x, 0, 0.0, True
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    best_x, best_res = x.copy(), 1.0
    for k in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / nb
        if res < best_res:
            best_res = res
            best_x = x.copy()
        if res <= tol:
            return x, k, res, True
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return best_x, maxiter, best_res, False


def solve(
    op: InteriorOperator,
    rhs: np.ndarray,
    tol: float = DEFAULT_TOL,
    method: str = "cg",
    maxiter: int | None = None,
) -> SolveReport:
    """Solve ``(I - Q) x = rhs``.

    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients with an
    iteration cap of ``20 * sqrt(n)``.  ``method="direct"`` uses a cached
    sparse LU factorization; it keeps relative accuracy in the tiny values
    near the apex, which the normwise CG stopping rule does not.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (op.size,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({op.size},)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method == "direct":
        x = op.factorized().solve(rhs)
        return SolveReport(x, _relative_residual(op, x, rhs), 1)
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    x, its, res, ok = conjugate_gradient(op.matrix, rhs, tol, maxiter)
    if not ok:
        raise SolverError(
            f"CG did not reach tol={tol:g} in {its} iterations (best residual {res:.3e})",
            res, its, x,
        )
    return SolveReport(x, _relative_residual(op, x, rhs), its)


# ---------------------------------------------------------------------------
# harmonic functions and exit probabilities


@dataclass
class HarmonicField:
    domain: TriangleDomain
    report: SolveReport

    @property
    def values(self) -> np.ndarray:
        return self.report.values

    def __getitem__(self, state: State) -> float:
        return float(self.values[self.domain.index(state)])


def harmonic_solve(
    N: int,
    steps: StepSet = STANDARD,
    data: BoundaryData = THIRD_FIRST,
    tol: float = DEFAULT_TOL,
    method: str = "cg",
) -> HarmonicField:
    """Discrete Dirichlet problem: the function equal to its one-step mean, with ``data`` on exit."""
    op = assemble(N, steps)
    rhs = op.exits @ data.values(op.domain)
    return HarmonicField(op.domain, solve(op, rhs, tol, method))


def mean_value_defect(field_: HarmonicField, steps: StepSet, data: BoundaryData) -> float:
    """Largest violation of the one-step mean-value property over interior states."""
    op = assemble(field_.domain.N, steps)
    v = field_.values
    mean = op.Q() @ v + op.exits @ data.values(op.domain)
    return float(np.max(np.abs(mean - v)))


def _probability(N, A, B, data, steps, tol, method) -> float:
    cfg = GamblerConfig(N, (A, B))
    return harmonic_solve(cfg.N, steps, data, tol, method)[cfg.start]


def p321_exact(N: int, A: int, B: int, steps=STANDARD, tol=DEFAULT_TOL, method="cg") -> float:
    """Probability that player 3 goes broke first and player 2 second."""
    return _probability(N, A, B, P321, steps, tol, method)


def third_first_exact(N: int, A: int, B: int, steps=STANDARD, tol=DEFAULT_TOL, method="cg") -> float:
    return _probability(N, A, B, THIRD_FIRST, steps, tol, method)


def first_wins_exact(N: int, A: int, B: int, steps=STANDARD, tol=DEFAULT_TOL, method="cg") -> float:
    return _probability(N, A, B, FIRST_WINS, steps, tol, method)


# ---------------------------------------------------------------------------
# Green function and harmonic measure


@dataclass
class GreenColumn:
    """Expected visits ``g[z] = G_N(start, z)`` before exit, over interior states."""

    domain: TriangleDomain
    start: State
    g: np.ndarray
    report: SolveReport
    steps: StepSet = STANDARD

    def __getitem__(self, z: State) -> float:
        return float(self.g[self.domain.index(z)])

    def get(self, z: State, default: float = 0.0) -> float:
        return self[z] if self.domain.is_interior(z) else default

    def identity_defect(self) -> float:
        """max |g - e_start - Q^T g|, the defining renewal identity."""
        op = assemble(self.domain.N, self.steps)
        e = np.zeros_like(self.g)
        e[self.domain.index(self.start)] = 1.0
        return float(np.max(np.abs(self.g - e - op.Q().T @ self.g)))


def green_column(
    N: int, start: State, steps: StepSet = STANDARD, tol: float = DEFAULT_TOL, method: str = "cg"
) -> GreenColumn:
    op = assemble(N, steps)
    start = tuple(start)
    rhs = np.zeros(op.size)
    rhs[op.domain.index(start)] = 1.0
    rep = solve(op, rhs, tol, method)
    return GreenColumn(op.domain, start, rep.values, rep, steps)


@dataclass
class ExitLaw:
    """Exit distribution over ``domain.boundary``."""

    domain: TriangleDomain
    probs: np.ndarray

    def __getitem__(self, y: State) -> float:
        return float(self.probs[self.domain.boundary_index(y)])

    def edge_mass(self, edge: str) -> float:
        return float(sum(self[y] for y in self.domain.edges[edge]))

    def edge(self, edge: str) -> np.ndarray:
        return np.array([self[y] for y in self.domain.edges[edge]])


def exit_distribution(
    N: int, start: State, steps: StepSet = STANDARD, tol: float = DEFAULT_TOL, method: str = "cg",
    green: GreenColumn | None = None,
) -> ExitLaw:
    """Harmonic measure from ``start``: mu(y) = sum_z G(start, z) p(z -> y)."""
    op = assemble(N, steps)
    if green is None:
        green = green_column(N, start, steps, tol, method)
    return ExitLaw(op.domain, op.exits.T @ green.g)


def exit_distribution_dirichlet(
    N: int, start: State, steps: StepSet = STANDARD, tol: float = DEFAULT_TOL, method: str = "cg"
) -> ExitLaw:
    """Same law, one Dirichlet solve per boundary indicator; quadratic cost, for checks."""
    op = assemble(N, steps)
    i = op.domain.index(tuple(start))
    probs = np.empty(len(op.domain.boundary))
    for k, y in enumerate(op.domain.boundary):
        rhs = op.exits[:, k].toarray().ravel()
        probs[k] = solve(op, rhs, tol, method).values[i] if rhs.any() else 0.0
    return ExitLaw(op.domain, probs)


def central_layer(domain: TriangleDomain, k: int, rho: float | None = 0.2) -> list[State]:
    """States of layer a + b = k with min(a, b) >= rho * k."""
    states = domain.layer(k)
    if rho:
        states = [s for s in states if min(s) >= rho * k]
    return states


def layer_mass(
    N: int, start: State, j: int, rho: float | None = 0.2, steps: StepSet = STANDARD,
    method: str = "direct", green: GreenColumn | None = None,
) -> float:
    """Green measure of the layer a + b = N - j, restricted to the central sub-cone."""
    if not 1 <= j <= N / 2:
        raise ValueError(f"j must satisfy 1 <= j <= N/2, got j={j}, N={N}")
    if green is None:
        green = green_column(N, start, steps, method=method)
    return float(sum(green[s] for s in central_layer(green.domain, N - j, rho)))


def local_green_bound_ratio(green: GreenColumn, j: int) -> float:
    """max over layer N - j of N^4 G(x, y) / (V(x) j)."""
    N = green.domain.N
    A, B = green.start
    vals = [green[s] for s in green.domain.layer(N - j)]
    return N**4 * max(vals) / (V_original(A, B) * j)


def layer_wedge_distance(j: int) -> float:
    return LAYER_GAP * j


def expected_exit_time(
    N: int, start: State, steps: StepSet = STANDARD, tol: float = DEFAULT_TOL, method: str = "cg"
) -> float:
    """E_start[sigma_N], the total Green mass sum_z G(start, z)."""
    op = assemble(N, steps)
    rep = solve(op, np.ones(op.size), tol, method)
    return float(rep.values[op.domain.index(tuple(start))])
