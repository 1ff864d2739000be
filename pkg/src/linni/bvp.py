"""Neumann boundary-value problem by shooting on the center value ``a = u(0)``.

The shooting map is ``S(a) = u'(R; a)``.  Also here: entire-space profiles,
the dimension-6 exceptional radii, radial Neumann eigenvalues, the
nondegeneracy test and the potential-rescaling transport.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .errors import InsufficientRange, NoSignChange, NonConvergence
from .radial_ode import (
    DEFAULT_TOLERANCE,
    DEFAULT_OVERFLOW_CAP,
    Profile,
    RadialProblem,
    integrate,
    find_extrema,
    integrate_linearized,
    problem_metadata,
    write_metadata,
    write_profile_csv,
)

SHOOTING_TOLERANCE = 1e-10
DEGENERACY_THRESHOLD = 1e-6
DEDUP_RADIUS = 1e-8
MAX_ITERATIONS = 200


@dataclass(frozen=True, eq=False)
class ShootingResult:
    profile: Profile
    center_value: float
    boundary_slope: float
    converged: bool
    iterations: int

    @property
    def problem(self) -> RadialProblem:
        return self.profile.problem

    def metadata(self) -> dict:
        meta = problem_metadata(self.problem)
        meta.update(a=self.center_value, residual=self.boundary_slope, converged=self.converged)
        return meta

    def to_csv(self, path) -> None:
        """Profile CSV plus the ``key=value`` sidecar (``<path>.meta``)."""
        write_profile_csv(self.profile, path, self.metadata())


@dataclass(frozen=True, eq=False)
class NondegReport:
    v_profile: Profile
    v_slope_at_R: float
    degenerate: bool
    margin: float
    threshold: float = DEGENERACY_THRESHOLD

    def metadata(self) -> dict:
        return {
            "v_slope_at_R": self.v_slope_at_R,
            "margin": self.margin,
            "threshold": self.threshold,
            "degenerate": self.degenerate,
        }


def shoot(problem: RadialProblem, a: float, tolerance: float = DEFAULT_TOLERANCE, *,
          overflow_cap: float = DEFAULT_OVERFLOW_CAP) -> Profile:
    """Integrate the IVP from ``u(0) = a`` up to the ball radius."""
    return integrate(problem, a, problem.radius, tolerance, overflow_cap=overflow_cap, extrema=False)


def boundary_slope(problem: RadialProblem, a: float, tolerance: float = DEFAULT_TOLERANCE, *,
                   overflow_cap: float = DEFAULT_OVERFLOW_CAP) -> float:
    """The shooting map ``S(a)``; NaN when the IVP overflows before ``R``."""
    prof = shoot(problem, a, tolerance, overflow_cap=overflow_cap)
    if prof.truncated:
        return math.nan
    return float(prof.derivatives[-1])


def solve_neumann(
    problem: RadialProblem,
    a_lo: float,
    a_hi: float,
    *,
    tolerance: float = SHOOTING_TOLERANCE,
    integration_tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
) -> ShootingResult:
    """Find ``a`` in ``[a_lo, a_hi]`` with ``|u'(R; a)| <= tolerance``.

    Bisection shrinks the bracket until the secant model is trustworthy, then
    Illinois-modified regula falsi finishes.  Overflowing trials (NaN slope)
    replace the endpoint farther from zero, keeping its sign.
    """
    evals = 0

    def S(a):
        nonlocal evals
        evals += 1
        prof = shoot(problem, a, integration_tolerance, overflow_cap=overflow_cap)
        slope = math.nan if prof.truncated else float(prof.derivatives[-1])
        return slope, prof

    def done(a, s, prof, converged=True):
        full = integrate(problem, a, problem.radius, integration_tolerance, overflow_cap=overflow_cap)
        return ShootingResult(full, float(a), float(s), converged and abs(s) <= tolerance, evals)

    a_lo, a_hi = float(a_lo), float(a_hi)
    if a_lo > a_hi:
        a_lo, a_hi = a_hi, a_lo
    if a_lo == a_hi:
        s, prof = S(a_lo)
        if abs(s) <= tolerance:
            return done(a_lo, s, prof)
        return _secant_polish(problem, a_lo, s, S, done, tolerance, max_iterations)

    s_lo, p_lo = S(a_lo)
    s_hi, p_hi = S(a_hi)
    # an overflowing endpoint is pulled toward the other one until finite
    for _ in range(60):
        if math.isfinite(s_lo) and math.isfinite(s_hi):
            break
        if not math.isfinite(s_hi):
            a_hi = 0.5 * (a_lo + a_hi)
            s_hi, p_hi = S(a_hi)
        else:
            a_lo = 0.5 * (a_lo + a_hi)
            s_lo, p_lo = S(a_lo)
    else:
        raise NoSignChange(f"shooting map undefined on [{a_lo}, {a_hi}]")
    if abs(s_lo) <= tolerance:
        return done(a_lo, s_lo, p_lo)
    if abs(s_hi) <= tolerance:
        return done(a_hi, s_hi, p_hi)
    if np.sign(s_lo) == np.sign(s_hi):
        raise NoSignChange(f"S({a_lo})={s_lo:.3e} and S({a_hi})={s_hi:.3e} share a sign")

    width0 = a_hi - a_lo
    side = 0
    best = (a_lo, s_lo, p_lo) if abs(s_lo) < abs(s_hi) else (a_hi, s_hi, p_hi)
    for it in range(max_iterations):
        width = a_hi - a_lo
        if width > 1e-3 * width0 and width > 1e-6 * (1 + abs(a_lo)):
            x = 0.5 * (a_lo + a_hi)
        else:
            x = (a_lo * s_hi - a_hi * s_lo) / (s_hi - s_lo)
            if not (a_lo < x < a_hi):
                x = 0.5 * (a_lo + a_hi)
        s, prof = S(x)
        if not math.isfinite(s):
            # overflow: treat like the endpoint with larger |a|
            if abs(a_hi) >= abs(a_lo):
                a_hi, s_hi = x, s_hi
            else:
                a_lo, s_lo = x, s_lo
            continue
        if abs(s) < abs(best[1]):
            best = (x, s, prof)
        if abs(s) <= tolerance:
            return done(x, s, prof)
        if np.sign(s) == np.sign(s_lo):
            a_lo, s_lo = x, s
            if side == -1:
                s_hi *= 0.5
            side = -1
        else:
            a_hi, s_hi = x, s
            if side == 1:
                s_lo *= 0.5
            side = 1
        if a_hi - a_lo <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            return done(*best, converged=False)
    raise NonConvergence(f"no root to {tolerance:g} after {max_iterations} iterations")


def _secant_polish(problem, a, s, S, done, tolerance, max_iterations):
    h = 1e-7 * max(1.0, abs(a))
    a_prev, s_prev = a + h, S(a + h)[0]
    for _ in range(max_iterations):
        if not (math.isfinite(s) and math.isfinite(s_prev)) or s == s_prev:
            break
        a_new = a - s * (a - a_prev) / (s - s_prev)
        a_prev, s_prev = a, s
        a = a_new
        s, prof = S(a)
        if abs(s) <= tolerance:
            return done(a, s, prof)
    raise NonConvergence(f"secant iteration from a={a} did not converge")


def scan_solutions(
    problem: RadialProblem,
    a_min: float,
    a_max: float,
    samples: int,
    *,
    tolerance: float = SHOOTING_TOLERANCE,
    integration_tolerance: float = DEFAULT_TOLERANCE,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
) -> list:
    """All roots of the shooting map detected on a uniform grid of ``a`` values."""
    if samples < 2:
        raise ValueError("samples must be at least 2")
    grid = np.linspace(a_min, a_max, samples)
    slopes = np.array([boundary_slope(problem, a, integration_tolerance, overflow_cap=overflow_cap)
                       for a in grid])
    opts = dict(tolerance=tolerance, integration_tolerance=integration_tolerance, overflow_cap=overflow_cap)
    found = []
    for i, a in enumerate(grid):
        if slopes[i] == 0.0:
            found.append(solve_neumann(problem, a, a, **opts))
    for i in range(samples - 1):
        s0, s1 = slopes[i], slopes[i + 1]
        if not (math.isfinite(s0) and math.isfinite(s1)) or s0 == 0.0 or s1 == 0.0:
            continue
        if np.sign(s0) != np.sign(s1):
            try:
                found.append(solve_neumann(problem, grid[i], grid[i + 1], **opts))
            except (NoSignChange, NonConvergence):
                continue
    found.sort(key=lambda res: res.center_value)
    unique = []
    for res in found:
        if unique and abs(res.center_value - unique[-1].center_value) < DEDUP_RADIUS:
            continue
        unique.append(res)
    return unique


def entire_profile(N: int, p: float, a: float, r_max: float,
                   tolerance: float = DEFAULT_TOLERANCE) -> Profile:
    """IVP solution on ``[0, r_max]`` (``mu = 1``) with its extrema recorded."""
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    return integrate(RadialProblem(N, r_max, p), a, r_max, tolerance)


def exceptional_radii_dim6(count: int, r_max: Optional[float] = None,
                           tolerance: float = DEFAULT_TOLERANCE) -> list:
    """First ``count`` extrema of the ``N=6, p=3, u(0)=1/2`` entire profile.

    Without ``r_max`` the integration window grows until enough extrema appear.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if r_max is not None:
        prof = entire_profile(6, 3.0, 0.5, r_max, tolerance)
        if len(prof.extrema) < count:
            raise InsufficientRange(
                f"only {len(prof.extrema)} extrema before r_max={r_max}, {count} requested")
        return list(prof.extrema[:count])
    window = 10.0 + 4.0 * count
    while True:
        prof = entire_profile(6, 3.0, 0.5, window, tolerance)
        if len(prof.extrema) >= count:
            return list(prof.extrema[:count])
        window *= 2


@dataclass(frozen=True)
class RootSeparation:
    """Gap between one extremum ``R`` of ``u0`` and the critical points of ``v0``.

    ``distance`` is the gap to the nearest root of ``v0'`` and ``margin`` is
    ``|v0'(R)|`` divided by ``max |v0'|`` on ``[0, R]``.
    """

    radius: float
    nearest_root: float
    distance: float
    slope: float
    margin: float


def dim6_root_separation(count: int = 3, tolerance: float = DEFAULT_TOLERANCE) -> list:
    """Compare the first ``count`` extrema of the ``N=6`` entire profile with the roots of ``v0'``.

    ``v0`` solves the linearization about the ``u(0)=1/2`` profile with
    ``v0(0)=1``.  A positive distance means the radius is not degenerate.
    """
    radii = exceptional_radii_dim6(count, tolerance=tolerance)
    r_max = radii[-1] + 3.0
    u0 = entire_profile(6, 3.0, 0.5, r_max, tolerance)
    v = integrate_linearized(u0, r_max, tolerance)
    roots = np.asarray(find_extrema(v))
    out = []
    for R in radii:
        k = int(np.argmin(np.abs(roots - R))) if roots.size else -1
        nearest = float(roots[k]) if k >= 0 else math.inf
        fine = v.fine_grid(4)
        slopes = v.evaluate(fine[fine <= R])[1]
        slope = float(v.evaluate(R)[1])
        vmax = float(np.max(np.abs(slopes)))
        out.append(RootSeparation(R, nearest, abs(nearest - R), slope,
                                  abs(slope) / vmax if vmax > 0 else 0.0))
    return out


def helmholtz_slope(N: int, R: float, nu):
    """``phi'(R)`` for ``phi'' + (N-1)/r phi' + nu phi = 0``, ``phi(0)=1``.

    Uses ``phi(r) = Gamma(N/2) (2/(k r))^{N/2-1} J_{N/2-1}(k r)`` with
    ``k = sqrt(nu)``, whose derivative is proportional to ``-J_{N/2}(k r)``.
    """
    nu = np.asarray(nu, dtype=float)
    k = np.sqrt(np.maximum(nu, 0.0))
    x = k * R
    m = N / 2.0 - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -k * math.gamma(N / 2.0) * (2.0 / x) ** m * special.jv(m + 1.0, x)
    return np.where(x > 0, val, 0.0)


def radial_neumann_eigenvalues(N: int, R: float, count: int) -> list:
    """Radial Neumann eigenvalues of ``-Delta + 1`` on ``B_R``, ascending.

    Entry 1 is the constant mode (1); entry ``i > 1`` is ``1 + nu_{i-1}`` with
    ``nu_j`` the successive positive roots of ``phi'(R; nu) = 0``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    step = 0.1 / R**2
    out = [1.0]
    lo = step * 1e-3
    window = 50.0 / R**2
    while len(out) < count:
        nus = np.arange(lo, window + step, step)
        slopes = helmholtz_slope(N, R, nus)
        for i in range(len(nus) - 1):
            if len(out) >= count:
                break
            if np.sign(slopes[i]) != np.sign(slopes[i + 1]) and slopes[i] != 0:
                root = brentq(lambda v: float(helmholtz_slope(N, R, v)), nus[i], nus[i + 1],
                              xtol=1e-300, rtol=1e-13, maxiter=200)
                out.append(1.0 + root)
        lo = nus[-1]
        window *= 2
    return out


def nondegeneracy_check(base: ShootingResult, *, threshold: float = DEGENERACY_THRESHOLD,
                        tolerance: float = DEFAULT_TOLERANCE) -> NondegReport:
    """Integrate the linearization from ``v(0)=1`` and inspect ``v'(R)``.

    The margin is ``|v'(R)|`` divided by ``max |v'|`` on ``[0, R]``.
    """
    prof = base.profile
    R = prof.problem.radius
    v = integrate_linearized(prof, R, tolerance)
    slopes = v.evaluate(v.fine_grid(4))[1]
    vmax = float(np.max(np.abs(slopes)))
    slope_R = float(v.derivatives[-1])
    margin = abs(slope_R) / vmax if vmax > 0 else 0.0
    return NondegReport(v, slope_R, margin < threshold, margin, threshold)


def scaling_transport(profile: Profile, mu_new: float) -> Profile:
    """Carry a solution for potential ``mu`` to potential ``mu_new``.

    ``v(x) = c u(k x)`` with ``k = sqrt(mu_new/mu)`` and ``c = k^{2/(p-2)}``;
    the ball radius becomes ``R/k``.  At ``p = 2*`` the amplitude factor is
    ``(mu_new/mu)^{(N-2)/4}``.
    """
    if not mu_new > 0:
        raise ValueError("mu_new must be positive")
    prob = profile.problem
    k = math.sqrt(mu_new / prob.potential)
    c = k ** (2.0 / (prob.exponent - 2.0))
    new_prob = RadialProblem(prob.dimension, prob.radius / k, prob.exponent, mu_new)
    old_dense = profile.dense

    def dense(r):
        u, du = old_dense(np.minimum(np.asarray(r, dtype=float) * k, profile.r_max))
        return c * np.asarray(u), c * k * np.asarray(du)

    return Profile(
        profile.grid / k,
        c * profile.values,
        c * k * profile.derivatives,
        new_prob,
        extrema=tuple(x / k for x in profile.extrema),
        truncated=profile.truncated,
        center_value=c * profile.center_value,
        dense=dense,
    )


def write_nondeg_report(report: NondegReport, path) -> None:
    meta = problem_metadata(report.v_profile.problem)
    meta.update(report.metadata())
    write_metadata(path, meta)
