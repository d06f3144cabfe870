from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conewalk import studies
from conewalk.asymptotics import GAMBLER_CONSTANT
from conewalk.montecarlo import McOptions
from conewalk.studies import SweepRecord

opt_float = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False))
records = st.builds(
    SweepRecord,
    N=st.integers(3, 10_000), start_a=st.integers(1, 100), start_b=st.integers(1, 100),
    quantity=st.sampled_from(["p321", "third-first", "first-wins"]),
    method=st.sampled_from(studies.METHODS),
    value=opt_float, stderr=opt_float, residual=opt_float,
    iterations=st.one_of(st.none(), st.integers(0, 10**6)), seconds=opt_float,
)


@given(st.lists(records, max_size=8))
def test_csv_round_trip(recs):
    assert studies.records_from_csv(studies.records_to_csv(recs)) == recs


@given(st.lists(records, max_size=8))
def test_json_round_trip(recs):
    assert studies.records_from_json(studies.records_to_json(recs)) == recs


def test_file_round_trip(tmp_path):
    recs = studies.sweep(["p321"], [10], [(1, 1), (2, 3)])
    for fmt in ("csv", "json"):
        path = tmp_path / f"out.{fmt}"
        studies.write_records(recs, path, fmt)
        assert studies.read_records(path) == recs


def test_csv_header_and_schema_checked():
    with pytest.raises(ValueError):
        studies.records_from_csv("N,value\n3,0.5\n")
    with pytest.raises(ValueError):
        studies.records_from_json(json.dumps({"schema_version": 99, "records": []}))
    assert studies.records_to_csv([]).strip() == ",".join(studies.CSV_FIELDS)


def test_sweep_gambler_table_converges_monotonically():
    recs = studies.sweep(["p321"], [50, 100, 150, 200, 250, 300], [(1, 1)], solver="direct")
    scaled = [r.N**3 * r.value for r in recs]
    gaps = [abs(v - GAMBLER_CONSTANT) for v in scaled]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert scaled[-1] == pytest.approx(4.55979450208, rel=1e-10)


def test_asym_close_to_exact_at_300():
    recs = studies.sweep(["p321"], [300], [(1, 1)], methods=("exact", "asym"), solver="direct")
    ex, asym = (r.value for r in recs)
    assert abs(asym - ex) / ex <= 1e-3


def test_exact_and_mc_agree_at_30():
    recs = studies.sweep(["p321"], [30], [(7, 9)], methods=("exact", "mc"), mc=McOptions(100_000, seed=4))
    ex, mc = recs
    assert abs(ex.value - mc.value) <= 3 * mc.stderr


def test_sweep_records_failures_and_continues():
    recs = studies.sweep(["first-wins", "p321"], [10], [(2, 2)], methods=("bm", "asym", "mc"))
    by = {(r.quantity, r.method): r.value for r in recs}
    assert by[("first-wins", "bm")] is None  # no Brownian route
    assert by[("first-wins", "mc")] is None  # no MC options given
    assert by[("p321", "bm")] is not None and by[("p321", "asym")] is not None
    with pytest.raises(ValueError):
        studies.sweep(["p321"], [5], [(3, 3)])
    with pytest.raises(ValueError):
        studies.sweep(["p321"], [5], [(1, 1)], methods=("guess",))


def test_sweep_is_deterministic_unless_timed():
    args = (["p321", "third-first"], [8, 12], [(1, 1), (2, 3)], ("exact", "mc", "bm"), McOptions(5000, seed=9))
    assert studies.records_to_csv(studies.sweep(*args)) == studies.records_to_csv(studies.sweep(*args))
    timed = studies.sweep(*args, timing=True)
    assert all(r.seconds is not None for r in timed)
    parallel = studies.sweep(*args, workers=2)
    assert parallel == studies.sweep(*args)


def test_rate_report():
    rep = studies.rate_report([20, 40, 80, 120, 160, 200, 240])
    assert rep.Ns == [40, 80, 120, 160, 200, 240]
    assert any("N < 40" in f for f in rep.flags)
    assert any("not asserted" in f for f in rep.flags)
    assert all(d >= 0 for d in rep.deltas)
    assert rep.slope >= 2.7 and rep.proven_rate_ok
    assert rep.band[0] <= rep.slope <= rep.band[1]
    json.loads(rep.to_json())
    with pytest.raises(ValueError):
        studies.rate_report([40, 80, 120, 160])


def test_theorem1_report():
    rep = studies.theorem1_report([60, 120], (1, 1), js=(1, 2, 4), rho=0.2)
    assert 1.6 <= rep.linearity_ratio(120, 2, 4) <= 2.4
    assert rep.ray_variation(60, 120, 1) <= 0.15
    for per_j in rep.integral_h.values():
        for v in per_j.values():
            assert abs(v - GAMBLER_CONSTANT) / GAMBLER_CONSTANT <= 0.1
    bounds = [rep.local_bound[N][1] for N in (60, 120)]
    assert max(bounds) / min(bounds) < 1.5
    payload = json.loads(rep.to_json())
    assert payload["schema_version"] == studies.SCHEMA_VERSION
    with pytest.raises(ValueError):
        studies.theorem1_report([20], js=(11,))


def test_ray_point_stays_on_layer():
    for alpha in (0.0, 0.3, 1.0):
        a, b = studies.ray_point(50, 4, alpha)
        assert a + b == 46 and a >= 1 and b >= 1


def test_theorem2_report():
    rep = studies.theorem2_report([50, 120, 240], (1, 1))
    assert rep.identity_defect[50] <= 1e-10
    assert all(v <= 1e-12 for v in rep.edge_total_defect.values())
    assert rep.profile_variation(120, 240) <= 0.15
    # symmetric start gives a symmetric profile
    assert rep.profile[240][0.25] == pytest.approx(rep.profile[240][0.75], rel=1e-10)
    json.loads(rep.to_json())


def test_truncation_profile_is_bounded():
    rows = studies.truncation_profile(120)
    scaled = np.array([r.scaled for r in rows])
    assert len(rows) >= 5
    assert scaled.max() <= 10 * np.median(scaled)
    deep = rows[-1]
    # deep interior: the one-step defect is tiny in absolute terms
    assert deep.delta >= 120 / 3 - 3
    assert abs(deep.f) <= 1e-6
    with pytest.raises(ValueError):
        studies.truncation_profile(40)


def test_truncation_scaling_is_stable_in_N():
    a = np.median([r.scaled for r in studies.truncation_profile(60)])
    b = np.median([r.scaled for r in studies.truncation_profile(120)])
    assert 0.5 <= a / b <= 2


def test_discrete_solution_has_no_truncation_defect():
    assert studies.discrete_defect(60) <= 1e-12


def test_lazy_equivalence_report():
    rep = studies.lazy_equivalence_report([3, 10])
    assert rep.passed
    assert rep.exit_time_ratio[3] == pytest.approx(4 / 3)
    assert rep.max_exit_law_gap[10] <= 1e-10


def test_gambler_table_shape():
    table = studies.gambler_table((50, 100))
    assert [N for N, _ in table] == [50, 100]
    assert all(v == pytest.approx(GAMBLER_CONSTANT, rel=1e-5) for _, v in table)
