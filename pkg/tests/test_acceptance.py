"""The nine acceptance criteria, each at its stated tolerance.

A pass/fail line per criterion is printed in the terminal summary.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
from scipy import integrate

from conewalk import conformal, exact, moments, montecarlo, studies
from conewalk.asymptotics import CONSTANTS, GAMBLER_CONSTANT, gamma_fn
from conewalk.model import LAZY, STANDARD, TriangleDomain, V_exact, to_wedge

C_PUBLISHED = 4.5597944999598458


def test_criterion_1_gambler_constant(record):
    t0 = time.perf_counter()
    p300 = exact.p321_exact(300, 1, 1)
    elapsed = time.perf_counter() - t0
    rel = abs(300**3 * p300 - C_PUBLISHED) / C_PUBLISHED

    table = studies.gambler_table((50, 100, 150, 200, 250, 300), (1, 1), method="direct")
    gaps = [abs(v - C_PUBLISHED) for _, v in table]
    trending = all(b < a for a, b in zip(gaps, gaps[1:]))

    record(1, "gambler constant", f"rel={rel:.2e} N=300 solve {elapsed:.2f}s gaps={gaps[0]:.1e}..{gaps[-1]:.1e}")
    assert rel <= 1e-4
    assert elapsed <= 10.0
    assert trending


def test_criterion_2_constant_identities(record):
    checks = CONSTANTS.check(1e-14)
    g = gamma_fn(1 / 3)
    reflection = abs(g * gamma_fn(2 / 3) - math.pi / math.sin(math.pi / 3)) / (math.pi / math.sin(math.pi / 3))
    record(2, "constant identities", f"{sum(checks.values())}/{len(checks)} identities, reflection rel={reflection:.1e}")
    assert all(checks.values()), checks
    assert reflection <= 1e-13
    assert abs(GAMBLER_CONSTANT - C_PUBLISHED) / C_PUBLISHED <= 1e-14


def test_criterion_3_moment_identities(record):
    report = moments.verify_moment_table(tol=1e-14)
    named = {
        (2, 0): 1.0, (4, 0): 1.5, (2, 2): 0.5, (3, 1): 0.0,
    }
    worst = max(abs(moments.joint_moment(i, j) - v) for (i, j), v in named.items())
    y_ok = moments.y_moment(1, 1) == Fraction(-1, 3) and moments.y_moment(2, 2) == Fraction(1, 3)
    record(3, "step moments", f"{sum(report.values())}/{len(report)} identities, max float err {worst:.1e}")
    assert all(report.values()), [k for k, v in report.items() if not v]
    assert worst <= 1e-14
    assert y_ok


def test_criterion_4_discrete_harmonicity(record):
    checked = 0
    for N in range(3, 51):
        for a, b in TriangleDomain(N).interior:
            mean = sum(p * V_exact(a + da, b + db) for (da, db), p in STANDARD.items())
            assert mean == V_exact(a, b), (N, a, b)
            checked += 1
    record(4, "discrete harmonicity of V", f"{checked} states exact in rationals, N<=50")


def test_criterion_5_oracle_equivalence(record):
    green_gap = 0.0
    for N in range(3, 16):
        start = (1, 1) if N < 6 else (N // 3, N // 4)
        a = exact.exit_distribution(N, start, method="direct")
        b = exact.exit_distribution_dirichlet(N, start, method="direct")
        green_gap = max(green_gap, float(np.max(np.abs(a.probs - b.probs))))

    lazy_gap = 0.0
    for N in range(3, 31):
        start = (1, 1) if N < 6 else (N // 3, N // 3)
        a = exact.exit_distribution(N, start, STANDARD, method="direct")
        b = exact.exit_distribution(N, start, LAZY, method="direct")
        lazy_gap = max(lazy_gap, float(np.max(np.abs(a.probs - b.probs))))

    target = exact.p321_exact(10, 3, 3, method="direct")
    cov = montecarlo.coverage("p321", 10, (3, 3), target, reps=100, trials=4096, seed=2024, k=3.0)

    record(5, "oracle equivalence", f"green/dirichlet {green_gap:.1e}, lazy {lazy_gap:.1e}, MC coverage {cov:.2f}")
    assert green_gap <= 1e-9
    assert lazy_gap <= 1e-9
    assert cov >= 0.95


def test_criterion_6_exit_identity(record):
    rep = studies.theorem2_report(50, (1, 1))
    record(6, "exit-point identity on the far edge", f"max defect {rep.identity_defect[50]:.1e} at N=50")
    assert rep.identity_defect[50] <= 1e-10


def test_criterion_7_green_scaling(record):
    rep = studies.theorem1_report((120, 200, 240), (1, 1), js=(1, 2, 4, 8), rho=0.2)
    ratio = rep.linearity_ratio(200, 4, 8)
    ray = max(rep.ray_variation(120, 240, j) for j in rep.js)
    h_err = max(abs(v - GAMBLER_CONSTANT) / GAMBLER_CONSTANT for per_j in rep.integral_h.values() for v in per_j.values())
    record(7, "Green-function scaling", f"ratio {ratio:.3f}, ray variation {ray:.3f}, 3*int h rel err {h_err:.1e}")
    assert 1.8 <= ratio <= 2.2
    assert ray <= 0.15
    assert h_err <= 0.10


PROBES = [(40, 40), (30, 30), (20, 60), (60, 20), (50, 30), (25, 45), (70, 25), (35, 55), (45, 45), (15, 15)]


def test_criterion_8_conformal_solver(record):
    ctx = conformal.ConformalContext()
    axis = max(float(np.max(np.abs(np.imag(conformal.forward_map(z))))) for z in ctx.edge_samples(50).values())

    rng = np.random.default_rng(8)
    u = rng.uniform(-0.8, 0.8, 200) + 1j * rng.uniform(-0.8, 0.8, 200)
    u = u[np.abs(u) > 0.05]
    ode = float(np.max(conformal.LATTICE.ode_residual(u)))

    integral, _ = integrate.quad(lambda t: conformal.phi_p321(conformal.boundary_point(t)), 0, 1,
                                 epsabs=1e-13, epsrel=1e-13, limit=200)

    N = 120
    field = exact.harmonic_solve(N, STANDARD, exact.P321, method="direct")
    poisson_gap = max(abs(field[s] - conformal.bm_p321(*to_wedge(s), N)) for s in PROBES)

    record(8, "conformal solver", f"axis {axis:.1e}, ode {ode:.1e}, int phi-1/2 {abs(integral - 0.5):.1e}, "
                                  f"poisson gap {poisson_gap:.1e}")
    assert axis <= 1e-8
    assert ode <= 1e-9
    assert abs(integral - 0.5) <= 1e-10
    assert poisson_gap <= 5e-3


def test_criterion_9_rate_study(record):
    t0 = time.perf_counter()
    rep = studies.rate_report([40, 80, 120, 160, 200, 240], (1, 1))
    elapsed = time.perf_counter() - t0
    verdict = "closer to 4" if rep.closer_to_conjectured else "not closer to 4"
    record(9, "rate study", f"slope {rep.slope:.3f} band ({rep.band[0]:.3f}, {rep.band[1]:.3f}), {verdict}, {elapsed:.1f}s")
    assert rep.slope >= 2.7
    assert elapsed <= 180.0
