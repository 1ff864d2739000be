"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line in the summary."""

import io
import math
import time

import numpy as np
import pytest

import oracles as o
from linni.asymptotics import (
    BubbleParams,
    ReducedEnergyModel,
    beta_constant,
    bubble_modified,
    c1_moment,
    c5,
    critical_point,
    mass_2star,
    mu_from_center,
    decomposition_residual,
    sobolev_constant,
    t0_existence_map,
)
from linni.bvp import (
    dim6_root_separation,
    entire_profile,
    exceptional_radii_dim6,
    radial_neumann_eigenvalues,
    scan_solutions,
)
from linni.cli import main
from linni.continuation import (
    blowup_diagnostics,
    count_crossings,
    detect_bifurcations,
    hausdorff_distance,
    trace_branch,
)
from linni.diagnostics import exact_coefficient, quadratic_gap_coefficient, pohozaev_residual
from linni.greenmass import green_radial, mass_at_origin
from linni.radial_ode import Profile, RadialProblem, critical_exponent, integrate, second_derivative_at_origin

DIAGRAM_RADIUS = 9.0
BRANCH_BUDGET = 300.0


def _existence_reference(N, regime, u0):
    """Construction hypotheses written as plain inequalities, independent of c5."""
    if regime == "sub":
        if u0 == 0:
            return N >= 4
        return N >= 7 or (N == 6 and u0 < 0.5)
    if u0 == 0:
        return False
    return N <= 5 or (N == 6 and u0 > 0.5)


def _timed_trace(i, direction, step):
    start = time.perf_counter()
    br = trace_branch(4, DIAGRAM_RADIUS, i, direction, step=step)
    return br, time.perf_counter() - start


@pytest.fixture(scope="module")
def diagram_branches():
    """Branches of the N=4 diagram at the default step and at half of it, with timings."""
    out = {}
    for i in (2, 3, 4):
        for direction in ("upper", "lower"):
            out[i, direction] = (_timed_trace(i, direction, 0.02), _timed_trace(i, direction, 0.01))
    return out


def test_criterion_01(record):
    """exceptional radius R* from the CLI matches scalar bisection within 1e-8 in under 1 s"""
    out = io.StringIO()
    start = time.perf_counter()
    code = main(["rstar"], environ={}, out=out, err=io.StringIO())
    elapsed = time.perf_counter() - start
    value = float(out.getvalue().strip().split("=", 1)[1])
    ref = o.rstar_bisection()
    record(f"rstar={value:.12f} err={abs(value - ref):.1e} t={elapsed:.3f}s")
    assert code == 0
    assert abs(value - ref) <= 1e-8
    assert abs(ref - o.RSTAR) <= 1e-12
    assert elapsed < 1.0


def test_criterion_02(record):
    """dimension-3 Green function and mass match closed forms; sign law on 50 radii"""
    worst_G = worst_H = 0.0
    for R in (0.8, 1.2, 3.0):
        g = green_radial(3, R)
        r = np.linspace(1e-3 * R, R, 400)
        exact = o.green_dim3(r, R)
        worst_G = max(worst_G, float(np.max(np.abs(g.G(r) - exact) / np.abs(exact))))
        H = mass_at_origin(g).H
        worst_H = max(worst_H, abs(H - o.mass_dim3(R)) / abs(o.mass_dim3(R)))
    radii = np.linspace(0.4, 3.0, 50)
    signs = [np.sign(mass_at_origin(green_radial(3, R)).H) == np.sign(o.RSTAR - R) for R in radii]
    record(f"G rel={worst_G:.1e} H rel={worst_H:.1e} sign law {sum(signs)}/50")
    assert worst_G <= 1e-7
    assert worst_H <= 1e-7
    assert all(signs)


def test_criterion_03(record):
    """exact Pohozaev identity on the constant and on shooting solutions; coefficient gap is quadratic"""
    rep = pohozaev_residual(integrate(RadialProblem(4, 1.0, 3.0), 1.0, 1.0), 1.0)
    assert abs(rep.residual_exact) <= 1e-12
    assert rep.lhs_exact == pytest.approx(math.pi**2 / 3, rel=1e-12)
    assert rep.rhs_boundary == pytest.approx(math.pi**2 / 3, rel=1e-12)

    worst, count = 0.0, 0
    for N in range(3, 8):
        for shift in (-0.05, 0.05):
            p = critical_exponent(N) + shift
            for s in scan_solutions(RadialProblem(N, 10.0, p), 0.02, 4.0, 60):
                if not s.converged:
                    continue
                count += 1
                for delta in (5.0, 10.0):
                    worst = max(worst, pohozaev_residual(s.profile, delta).relative_residual)

    eps = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    gaps = []
    for e in eps:
        p = critical_exponent(4) + e
        r = pohozaev_residual(integrate(RadialProblem(4, 1.0, p), 1.0, 1.0), 1.0)
        gaps.append(abs(r.lhs_paper_coefficient - r.lhs_exact))
        assert abs(quadratic_gap_coefficient(4, p) - exact_coefficient(4, p)) > 0
    slope = float(np.polyfit(np.log(eps), np.log(gaps), 1)[0])
    record(f"constant {rep.residual_exact:.1e}, {count} solutions worst {worst:.1e}, slope {slope:.3f}")
    assert count > 0
    assert worst <= 1e-7
    assert slope >= 1.9


def test_criterion_04(record):
    """radial Neumann eigenvalues of the unit 3-ball match 1 + x_j^2 and give the bifurcation points"""
    lam = radial_neumann_eigenvalues(3, 1.0, 6)
    errs = [abs(lam[j] - (1.0 + x * x)) for j, x in enumerate(o.TAN_ROOTS[:5], start=1)]
    pts = detect_bifurcations(3, 1.0, 6)
    record(f"max err {max(errs):.1e}, p_2={pts[0][1]:.4f}")
    assert max(errs) <= 1e-8
    assert [i for i, _ in pts] == [2, 3, 4, 5, 6]
    for (i, p), value in zip(pts, lam[1:]):
        assert p == pytest.approx(1.0 + value, rel=1e-13)


def test_criterion_05(record):
    """dimension-6 entire profile: curvature at the origin, approach to 1, stable extrema"""
    prof = entire_profile(6, 3.0, 0.5, 60.0)
    curv = second_derivative_at_origin(prof)
    tail = abs(float(prof.u(60.0)) - 1.0)
    coarse = np.array(exceptional_radii_dim6(5, tolerance=1e-9))
    fine = np.array(exceptional_radii_dim6(5, tolerance=1e-11))
    drift = float(np.max(np.abs(coarse - fine)))
    gap = float(np.min(np.diff(np.concatenate([[0.0], fine]))))
    record(f"u''(0)-1/24={curv - 1 / 24:.1e} |u(60)-1|={tail:.1e} drift={drift:.1e} min gap={gap:.4f}")
    assert abs(curv - 1 / 24) <= 1e-6
    assert tail < 0.05
    assert drift <= 1e-7
    assert gap > 0
    assert fine == pytest.approx(o.DIM6_RADII, abs=1e-8)


def test_criterion_06(record):
    """existence map of the reduced-energy critical point reproduces the construction hypotheses"""
    table = t0_existence_map()
    mismatches = [key for key, exists in table.items() if exists != _existence_reference(*key)]
    assert len(table) == 6 * 2 * 5
    assert c5(6, 0.5) == 0
    assert c5(6, 0.49) * c5(6, 0.51) < 0
    t0 = critical_point(ReducedEnergyModel.build(4, "sub", 0.0))
    record(f"{len(table)} cells, {len(mismatches)} mismatches, t0-1/sqrt3={t0 - 1 / math.sqrt(3):.1e}")
    assert not mismatches
    assert abs(t0 - 1 / math.sqrt(3)) <= 1e-12


def test_criterion_07(record):
    """bubble constants: critical mass equals K_N^-N, C1(6) by quadrature, node-doubling stability"""
    worst = max(abs(mass_2star(N) - sobolev_constant(N) ** (-N)) / sobolev_constant(N) ** (-N)
                for N in range(3, 9))
    c1 = c1_moment(6)
    drift = 0.0
    for N in range(3, 9):
        drift = max(drift, abs(mass_2star(N, 64) - mass_2star(N, 128)) / mass_2star(N))
        drift = max(drift, abs(beta_constant(N, 64) - beta_constant(N, 128)) / max(1.0, abs(beta_constant(N))))
        if N >= 5:
            drift = max(drift, abs(c1_moment(N, 128) - c1_moment(N, 256)) / c1_moment(N))
    record(f"mass rel={worst:.1e} C1(6)={c1:.4f} (106 pi^3={106 * math.pi**3:.4f}) drift={drift:.1e}")
    assert worst <= 1e-6
    assert c1 == pytest.approx(o.C1[6], rel=1e-10)
    assert drift <= 1e-9


def test_criterion_08(record, diagram_branches):
    """N=4 bifurcation diagram: zero counts, no crossing of a=1, upper branches rise, step halving"""
    notes = []
    for (i, direction), ((br, elapsed), (half, _)) in sorted(diagram_branches.items()):
        sigma = 1 if direction == "upper" else -1
        assert len(br.points) > 10
        assert np.all(np.sign(br.a_values - 1.0) == sigma)
        for pt in br.points[::10]:
            assert pt.zeros_of_u_minus_1 == i - 1
            assert count_crossings(br.profile(pt)) == i - 1
        if direction == "upper":
            assert br.a_values[-1] > 10 * br.a_values[0]
            assert br.p_values[-1] > br.origin_p
            assert abs(br.p_values[-1] - 4.0) < abs(br.origin_p - 4.0)
        dist = hausdorff_distance(br, half)
        notes.append(f"i{i}{direction[0]} {elapsed:.0f}s H={dist:.1e}")
        assert dist <= 1e-4
        assert elapsed < BRANCH_BUDGET
    record(", ".join(notes))


def test_criterion_09(record, diagram_branches):
    """blow-up diagnostics: scale and residual on a synthetic bubble, weak-limit probe on a branch tail"""
    N, p, R, mu = 4, 3.9, 1.0, 0.01
    r = np.linspace(0.0, R, 4001)
    base = 0.3 + 0.1 * np.cos(r)
    bt = bubble_modified(BubbleParams(N, mu, p), r)
    u0 = Profile(r, base, -0.1 * np.sin(r), RadialProblem(N, R, p))
    u = Profile(r, base + bt, np.gradient(base + bt, r), RadialProblem(N, R, p))
    mu_hat = mu_from_center(N, p, float(u.values[0]))
    resid = decomposition_residual(u, u0, mu)

    (br, _), _ = diagram_branches[2, "upper"]
    rep = blowup_diagnostics(br, 20)
    centers = np.array([row["a"] for row in rep["points"]])
    probe = np.array([row["u_half_R"] for row in rep["points"]])
    record(f"mu err={abs(mu_hat / mu - 1):.1e} resid={resid:.1e} "
           f"u(R/2) {probe[0]:.3e}->{probe[-1]:.3e} as u(0) {centers[0]:.1f}->{centers[-1]:.1f}")
    assert abs(mu_hat / mu - 1) <= 0.02
    assert resid < 1e-10
    assert br.p_values[-1] < 4.0
    assert rep["growing"]
    assert np.all(np.diff(probe) < 0)


def test_criterion_10(record):
    """first three dimension-6 radii are separated from the critical points of the linearized solution"""
    seps = dim6_root_separation(3)
    record(", ".join(f"R{k}={s.radius:.4f} gap={s.distance:.3f} margin={s.margin:.3f}"
                     for k, s in enumerate(seps, start=1)))
    assert len(seps) == 3
    for s in seps:
        assert s.distance > 0
        assert s.margin > 0
        assert s.slope == pytest.approx(o.dim6_linear_slope(s.radius), rel=1e-6)
