"""Seeded Monte Carlo estimates of the exit quantities.

Trials are grouped in fixed blocks of ``BLOCK`` trials.  Block ``k`` draws from
a Philox (counter-based) stream keyed by ``(seed, k)``, so every estimate is a
pure function of ``(seed, trials)`` whatever the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exact import BoundaryData, quantity as _quantity
from .model import STANDARD, GamblerConfig, State, StepSet, TriangleDomain

BLOCK = 4096
MAX_STEPS = 10**9


class StepCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class McOptions:
    trials: int
    seed: int
    workers: int = 1
    second_stage: str = "analytic"

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.second_stage not in ("analytic", "simulated"):
            raise ValueError("second_stage is 'analytic' or 'simulated'")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int

    def covers(self, value: float, k: float = 3.0) -> bool:
        return abs(value - self.mean) <= k * self.stderr


def block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _move_table(steps: StepSet) -> tuple[np.ndarray, np.ndarray]:
    moves = list(steps.offsets)
    probs = [float(p) for p in steps.probs]
    if steps.hold_prob:
        moves.append((0, 0))
        probs.append(float(steps.hold_prob))
    return np.array(moves, dtype=np.int64), np.cumsum(probs)


def simulate_until_exit(
    N: int, start: State, steps: StepSet = STANDARD, rng: np.random.Generator | None = None,
    max_steps: int = MAX_STEPS,
) -> tuple[State, int]:
    """Run one walk from ``start`` to its first boundary point; return (point, steps taken)."""
    cfg = GamblerConfig(N, tuple(start))
    rng = rng if rng is not None else np.random.default_rng()
    moves, cum = _move_table(steps)
    a, b = cfg.start
    n = 0
    while a >= 1 and b >= 1 and a + b <= N - 1:
        if n >= max_steps:
            raise StepCapExceeded(f"no exit after {max_steps} steps")
        k = int(np.searchsorted(cum, rng.random(), side="right"))
        da, db = moves[min(k, len(moves) - 1)]
        a, b = a + int(da), b + int(db)
        n += 1
    return (a, b), n


def _walk_block(N, start, steps, rng, n, max_steps=MAX_STEPS):
    moves, cum = _move_table(steps)
    a = np.full(n, start[0], dtype=np.int64)
    b = np.full(n, start[1], dtype=np.int64)
    length = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    t = 0
    while active.size:
        if t >= max_steps:
            raise StepCapExceeded(f"{active.size} walks still inside after {max_steps} steps")
        k = np.minimum(np.searchsorted(cum, rng.random(active.size), side="right"), len(moves) - 1)
        a[active] += moves[k, 0]
        b[active] += moves[k, 1]
        length[active] += 1
        aa, bb = a[active], b[active]
        active = active[(aa >= 1) & (bb >= 1) & (aa + bb <= N - 1)]
        t += 1
    return a, b, length


def _heads_up(rng, capital, N):
    """Fair +-1 game from ``capital`` to 0 or N; True where the holder reaches N."""
    c = capital.astype(np.int64).copy()
    active = np.flatnonzero((c > 0) & (c < N))
    while active.size:
        c[active] += np.where(rng.random(active.size) < 0.5, 1, -1)
        active = active[(c[active] > 0) & (c[active] < N)]
    return c == N


def boundary_indices(N: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Positions in ``TriangleDomain(N).boundary`` of exit points (a, b)."""
    return np.where(a == 0, b - 1, np.where(b == 0, N - 1 + a - 1, 2 * (N - 1) + a - 1))


def _payoffs(data, N, a, b, rng, second_stage):
    if second_stage == "analytic":
        table = data.values(TriangleDomain(N))
        return table[boundary_indices(N, a, b)]
    caps = np.stack([a, b, N - a - b], axis=1)
    first = np.argmin(caps, axis=1)  # the broke player, 0-based
    # survivors in increasing label order
    lo = np.where(first == 0, 1, 0)
    hi = np.where(first == 2, 1, 2)
    lo_wins = _heads_up(rng, caps[np.arange(len(a)), lo], N)
    loser = np.where(lo_wins, hi, lo)
    table = np.array([[data.outcome(f + 1, s + 1) if f != s else 0.0 for s in range(3)] for f in range(3)])
    return table[first, loser]


def _run_block(args):
    N, start, steps, data, seed, block, n, second_stage = args
    rng = block_rng(seed, block)
    a, b, length = _walk_block(N, start, steps, rng, n)
    x = _payoffs(data, N, a, b, rng, second_stage) if data is not None else length.astype(float)
    m = float(np.mean(x))
    return n, m, float(np.sum((x - m) ** 2))


def _combine(parts) -> tuple[int, float, float]:
    """Chan's pairwise merge of (count, mean, M2), in block order."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def _estimate(N, start, steps, data, opts: McOptions) -> McEstimate:
    cfg = GamblerConfig(N, tuple(start))
    nblocks = -(-opts.trials // BLOCK)
    jobs = [
        (cfg.N, cfg.start, steps, data, opts.seed, k,
         min(BLOCK, opts.trials - k * BLOCK), opts.second_stage)
        for k in range(nblocks)
    ]
    if opts.workers == 1 or nblocks == 1:
        parts = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    n, mean, m2 = _combine(parts)
    sd = math.sqrt(m2 / (n - 1)) if n > 1 else 0.0
    return McEstimate(mean, sd / math.sqrt(n), n)


def estimate(
    quantity: str | BoundaryData, N: int, start: State, opts: McOptions, steps: StepSet = STANDARD
) -> McEstimate:
    """Monte Carlo estimate of an exit quantity.

    With the analytic second stage each exit contributes the exact boundary
    value (for P321 the fair heads-up win probability a/N); with the
    simulated one the heads-up game is played out on the edge.
    """
    data = _quantity(quantity) if isinstance(quantity, str) else quantity
    return _estimate(N, start, steps, data, opts)


def mean_exit_time(N: int, start: State, opts: McOptions, steps: StepSet = STANDARD) -> McEstimate:
    return _estimate(N, start, steps, None, opts)


def coverage(
    quantity: str, N: int, start: State, exact_value: float, reps: int, trials: int,
    seed: int = 0, k: float = 3.0,
) -> float:
    """Fraction of ``reps`` independent estimates whose k-stderr band contains ``exact_value``."""
    hits = 0
    for r in range(reps):
        est = estimate(quantity, N, start, McOptions(trials, seed=seed + r))
        hits += est.covers(exact_value, k)
    return hits / reps
