from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from conewalk import conformal
from conewalk.asymptotics import GAMBLER_CONSTANT, predict_bm
from conewalk.conformal import (
    LATTICE, OMEGA, ConformalContext, PoleError, QuadratureRule, beta_third_cdf, bm_p321, bm_third_first,
    boundary_point, forward_map, harmonic_value, near_vertex_image, wp, wp_prime,
)
from conewalk.model import to_wedge

RHO = cmath.exp(2j * math.pi / 3)

small_u = st.complex_numbers(max_magnitude=2.5, allow_nan=False, allow_infinity=False).filter(
    lambda u: abs(u) > 0.05
)


def interior_points(n, seed=0, margin=0.05):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x, y = rng.uniform(0, 1), rng.uniform(0, 1)
        z = complex(x, y)
        if y > margin and math.sqrt(3) * x - y > margin and math.sqrt(3) * (1 - x) - y > margin:
            out.append(z)
    return out


def test_laurent_leading_terms():
    u = 1e-3 * (1 + 0.5j)
    assert wp(u) * u**2 == pytest.approx(1.0, rel=1e-12)
    assert wp_prime(u) * u**3 == pytest.approx(-2.0, rel=1e-12)
    with pytest.raises(PoleError):
        wp(0j)


def test_ode_residual_on_a_disk():
    rng = np.random.default_rng(1)
    u = rng.uniform(-2, 2, 400) + 1j * rng.uniform(-2, 2, 400)
    u = u[np.abs(u) > 0.05]
    assert LATTICE.ode_residual(u).max() <= 1e-9


@settings(max_examples=60)
@given(small_u)
def test_parity_and_rotation(u):
    # far from lattice points only
    if min(abs(u - w) for w in _short_periods()) < 0.1:
        return
    p, dp = wp(u), wp_prime(u)
    assert wp(-u) == pytest.approx(p, rel=1e-9, abs=1e-9)
    assert wp_prime(-u) == pytest.approx(-dp, rel=1e-9, abs=1e-9)
    assert wp(RHO * u) == pytest.approx(RHO**-2 * p, rel=1e-9, abs=1e-9)


def _short_periods():
    T = LATTICE.min_period
    return [0j] + [T * cmath.exp(1j * math.pi * (2 * k + 1) / 6) for k in range(6)] + [
        T * cmath.exp(1j * math.pi * k / 3) for k in range(6)]


def test_lattice_periodicity():
    T = LATTICE.min_period
    periods = [w for w in _short_periods()[1:]
               if abs(wp(0.3 + 0.2j + w) - wp(0.3 + 0.2j)) < 1e-8 * abs(wp(0.3 + 0.2j))]
    assert len(periods) == 6
    assert T == pytest.approx(math.sqrt(3), rel=1e-12)


def test_edges_map_to_real_axis_and_interior_to_upper_half_plane():
    ctx = ConformalContext()
    for name, z in ctx.edge_samples(50).items():
        assert np.abs(np.imag(forward_map(z))).max() <= 1e-8, name
    w = forward_map(np.array(interior_points(100)))
    assert np.all(np.imag(w) > 0)


def test_far_edge_parametrization_inverts_the_map():
    t = np.linspace(0.02, 0.98, 25)
    w = forward_map(boundary_point(t))
    assert np.allclose(w, t, atol=1e-9)


def test_map_rejects_vertices_and_outside_points():
    for z in (0j, 1 + 0j, OMEGA, 0.5 - 0.1j, 2 + 0.1j):
        with pytest.raises(ValueError):
            forward_map(z)
    with pytest.raises(ValueError):
        boundary_point(0.0)


def test_near_vertex_asymptotics():
    for z in (1e-3 * cmath.exp(0.4j), 2e-3 * cmath.exp(0.9j)):
        w = forward_map(z)
        assert abs(w / near_vertex_image(z) - 1) < 1e-4


@given(st.floats(0.0, 1.0))
def test_beta_cdf_matches_scipy(t):
    assert beta_third_cdf(t) == pytest.approx(special.betainc(1 / 3, 1 / 3, t), abs=1e-14)


def test_beta_cdf_symmetry():
    t = np.linspace(0.01, 0.99, 20)
    assert np.abs(beta_third_cdf(t) + beta_third_cdf(1 - t) - 1).max() <= 1e-10
    with pytest.raises(ValueError):
        beta_third_cdf(1.5)


def test_graded_rule_handles_endpoint_singularity():
    rule = QuadratureRule.graded(64)
    # nodes near t = 1 carry rounding in 1 - t, so test the left endpoint
    assert rule.integrate(lambda t: t ** (-2 / 3)) == pytest.approx(3.0, rel=1e-12)
    assert rule.integrate(lambda t: t ** (-2 / 3) * (1 + t)) == pytest.approx(3.0 + 0.75, rel=1e-12)
    assert rule.integrate(conformal.data_p321) == pytest.approx(0.5, abs=1e-12)


def test_constant_data_gives_harmonic_measure_of_the_edge():
    for z in interior_points(5, seed=3):
        w = forward_map(z)
        expected = (cmath.phase(w - 1) - cmath.phase(w)) / math.pi
        assert harmonic_value(z, conformal.data_third_first) == pytest.approx(expected, abs=1e-11)
        assert harmonic_value(z, conformal.data_zero) == 0.0


def test_circle_mean_value_property():
    r = 1e-2
    angles = 2 * math.pi * np.arange(16) / 16
    for z in interior_points(5, seed=4, margin=0.1):
        ring = np.mean([conformal.poisson_value(z + r * cmath.exp(1j * a), conformal.data_p321) for a in angles])
        assert abs(ring - conformal.poisson_value(z, conformal.data_p321)) <= 1e-6


def test_bm_large_N_limit():
    x = to_wedge((1, 1))
    vals = [N**3 * bm_p321(*x, N) for N in (1e3, 1e4)]
    assert abs(vals[1] - vals[0]) / vals[1] <= 1e-2
    assert vals[1] == pytest.approx(GAMBLER_CONSTANT, rel=1e-6)


@pytest.mark.parametrize("start", [(1, 1), (2, 1), (1, 3), (4, 2), (3, 5)])
def test_bm_matches_closed_form_at_large_N(start):
    x = to_wedge(start)
    assert bm_p321(*x, 1e4) == pytest.approx(predict_bm(*x, 1e4, "p321"), rel=2e-2)
    assert bm_third_first(*x, 1e4) / bm_p321(*x, 1e4) == pytest.approx(2.0, rel=1e-2)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30))
def test_bm_third_first_dominates_and_is_symmetric(a, b):
    N = 64
    if a + b > N - 1:
        return
    x, xr = to_wedge((a, b)), to_wedge((b, a))
    t = bm_third_first(*x, N)
    assert t >= bm_p321(*x, N)
    assert t == pytest.approx(bm_third_first(*xr, N), rel=1e-9)
    # swapping players 1 and 2 swaps p321 with p312
    assert bm_p321(*x, N) + bm_p321(*xr, N) == pytest.approx(t, rel=1e-9)


def test_bm_rejects_points_outside():
    with pytest.raises(ValueError):
        bm_p321(*to_wedge((10, 10)), 20)
