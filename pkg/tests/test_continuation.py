import math

import numpy as np
import pytest

import oracles as o
from linni.continuation import (
    Branch,
    StopCriteria,
    bifurcation_diagram,
    blowup_diagnostics,
    count_crossings,
    detect_bifurcations,
    hausdorff_distance,
    read_branch_csv,
    trace_branch,
)
from linni.errors import InsufficientTail, StallError
from linni.radial_ode import RadialProblem, integrate


@pytest.fixture(scope="module")
def lower_n4():
    return trace_branch(4, 9.0, 2, "lower")


@pytest.fixture(scope="module")
def upper_n4_head():
    return trace_branch(4, 9.0, 3, "upper", max_points=40)


# ------------------------------------------------------------ bifurcations


def test_bifurcations_dim3_unit_ball():
    pts = detect_bifurcations(3, 1.0, 6)
    assert [i for i, _ in pts] == [2, 3, 4, 5, 6]
    for (i, p), x in zip(pts, o.TAN_ROOTS):
        assert p == pytest.approx(2.0 + x * x, rel=1e-10)
    assert pts[0][1] == pytest.approx(22.19, abs=5e-3)


@pytest.mark.parametrize("N", [3, 4, 6])
def test_bifurcations_scale_with_radius(N):
    one = detect_bifurcations(N, 1.0, 5)
    two = detect_bifurcations(N, 2.0, 5)
    for (_, p1), (_, p2) in zip(one, two):
        assert p2 - 2.0 == pytest.approx((p1 - 2.0) / 4.0, rel=1e-10)
    ps = [p for _, p in one]
    assert all(b > a for a, b in zip(ps, ps[1:]))


def test_bifurcations_dim4_radius_nine():
    for (i, p), j in zip(detect_bifurcations(4, 9.0, 4), o.J2_ZEROS):
        assert p == pytest.approx(2.0 + (j / 9.0) ** 2, rel=1e-10)


def test_bifurcations_reject():
    with pytest.raises(ValueError):
        detect_bifurcations(3, 1.0, 1)


# ------------------------------------------------------------------ trace


def _check_branch(br, i):
    sigma = 1 if br.direction == "upper" else -1
    s = np.array([pt.arclength for pt in br.points])
    assert np.all(np.diff(s) > 0)
    assert np.all(np.sign(br.a_values - 1.0) == sigma)
    for pt in br.points[::10]:
        assert pt.zeros_of_u_minus_1 == i - 1
        assert count_crossings(br.profile(pt)) == i - 1
    assert max(abs(pt.residual) for pt in br.points) <= 1e-8


def test_trace_dim3_departure():
    br = trace_branch(3, 1.0, 2, "upper", max_points=25, stop=StopCriteria(p_max=30.0))
    first = br.points[0]
    assert first.a == pytest.approx(1.001, rel=1e-12)
    # the bifurcation is transcritical: the seed sits O(offset) away from p_i, scaled by nu = p_i - 2
    assert abs(first.p - br.origin_p) < 1e-2 * (br.origin_p - 2.0)
    _check_branch(br, 2)
    assert len(br.points) == 25 and br.stop_reason == "max_points"


def test_trace_lower_dim4(lower_n4):
    _check_branch(lower_n4, 2)
    # lower branches stay bounded: u(0) decreases monotonically between 0 and 1
    a = lower_n4.a_values
    assert np.all(np.diff(a) < 0)
    assert 0 < a.min() < a.max() < 1
    assert lower_n4.stop_reason in ("p_max", "a_min")


def test_trace_upper_dim4_head(upper_n4_head):
    _check_branch(upper_n4_head, 3)


def test_points_resolve_on_reintegration(upper_n4_head):
    br = upper_n4_head
    for pt in br.points[::7]:
        slope = integrate(RadialProblem(4, 9.0, pt.p), pt.a, 9.0).derivatives[-1]
        assert abs(slope) <= 1e-8


def test_trace_stall_keeps_partial_branch():
    with pytest.raises(StallError) as info:
        trace_branch(4, 9.0, 2, "upper", step=1e-13)
    assert info.value.branch is not None
    assert len(info.value.branch.points) == 1


def test_trace_rejects():
    with pytest.raises(ValueError):
        trace_branch(4, 9.0, 1)
    with pytest.raises(ValueError):
        trace_branch(4, 9.0, 2, step=0.0)
    with pytest.raises(ValueError):
        trace_branch(4, 9.0, 2, direction="sideways")


# --------------------------------------------------------------- datasets


def test_diagram_empty(tmp_path):
    out = bifurcation_diagram(4, 9.0, [], tmp_path / "d")
    files = sorted(p.name for p in (tmp_path / "d").iterdir())
    assert files == ["index.csv"]
    assert out["critical_p"] == 4.0
    assert "# critical_p=4" in (tmp_path / "d" / "index.csv").read_text()


def test_diagram_round_trip(tmp_path, lower_n4):
    bifurcation_diagram(4, 9.0, [lower_n4], tmp_path)
    path = tmp_path / "branch_N4_R9_i2_lower.csv"
    assert path.read_text().splitlines()[0] == "p,u0,a,zeros,arclength"
    back = read_branch_csv(path, 4, 9.0, 2, "lower")
    assert np.array_equal(back.p_values, lower_n4.p_values)
    assert np.array_equal(back.a_values, lower_n4.a_values)
    for pt in back.points[::5]:
        slope = integrate(RadialProblem(4, 9.0, pt.p), pt.a, 9.0).derivatives[-1]
        assert abs(slope) <= 1e-8
    index = (tmp_path / "index.csv").read_text()
    assert "branch_N4_R9_i2_lower.csv" in index


def test_hausdorff_basics(lower_n4):
    assert hausdorff_distance(lower_n4, lower_n4) < 1e-14
    shifted = Branch(4, 9.0, 2, lower_n4.origin_p, "lower")
    for pt in lower_n4.points:
        shifted.points.append(type(pt)(pt.p + 1e-3, pt.a, None, pt.zeros_of_u_minus_1, pt.arclength))
    assert hausdorff_distance(lower_n4, shifted) == pytest.approx(1e-3, rel=0.05)


# ---------------------------------------------------------------- blow-up


def test_blowup_needs_tail(lower_n4):
    with pytest.raises(InsufficientTail):
        blowup_diagnostics(lower_n4, len(lower_n4.points) + 1)
    with pytest.raises(InsufficientTail):
        blowup_diagnostics(lower_n4, 0)


def test_blowup_constant_control():
    br = Branch(4, 2.0, 2, math.nan, "upper")
    for k, p in enumerate((3.0, 3.2, 3.4)):
        br.add(p, 1.0, integrate(RadialProblem(4, 2.0, p), 1.0, 2.0), 0.0, float(k))
    rep = blowup_diagnostics(br, 3)
    assert not rep["growing"]
    for row in rep["points"]:
        assert math.isfinite(row["mu"])
        assert row["decomposition_residual"] > 0.1
        assert abs(row["pohozaev_residual"]) < 1e-12 * row["pohozaev_scale"]
