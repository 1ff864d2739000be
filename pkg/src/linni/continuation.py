"""Pseudo-arclength continuation of radial Neumann solutions in the exponent.

Branches leave the trivial solution ``u = 1`` at the exponents where the
linearization ``-Delta v = (p - 2) v`` acquires a radial Neumann kernel.  The
continuation runs in the plane ``(p, ln a)`` with ``a = u(0)``: the log keeps
blow-up tails (``a`` up to 1e4) at a scale comparable to the ``p`` axis and
makes positivity automatic.  The corrector solves the bordered system
``S(a, p) = 0``, ``T . (x - x_pred) = 0`` with the exact Jacobian of the
shooting map from variational equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .bvp import radial_neumann_eigenvalues
from .errors import InsufficientTail, NonConvergence, StallError
from .radial_ode import (
    DEFAULT_TOLERANCE,
    Profile,
    RadialProblem,
    _atomic_write,
    _fmt,
    critical_exponent,
    integrate_sensitivities,
)

RESIDUAL_TOLERANCE = 1e-8
SEED_OFFSET = 1e-3
MIN_STEP = 1e-12
# largest tangent turn (radians, in the (p, ln a) plane) accepted per step
MAX_TURN = 0.1
GROWTH = 1.3


@dataclass(frozen=True)
class StopCriteria:
    p_min: float = 2.05
    p_max: Optional[float] = None  # defaults to 2* + 2
    a_max: float = 1e4
    a_min: float = 1e-8

    def upper_p(self, N: int) -> float:
        return critical_exponent(N) + 2.0 if self.p_max is None else self.p_max


@dataclass(frozen=True)
class BranchPoint:
    p: float
    a: float
    profile_ref: Optional[int]
    zeros_of_u_minus_1: int
    arclength: float
    residual: float = 0.0


@dataclass
class Branch:
    N: int
    R: float
    origin_index: int
    origin_p: float
    direction: str
    points: list = field(default_factory=list)
    profiles: list = field(default_factory=list)
    stop_reason: str = ""

    def profile(self, point: BranchPoint) -> Optional[Profile]:
        if point.profile_ref is None:
            return None
        return self.profiles[point.profile_ref]

    def add(self, p, a, profile, residual, arclength, zeros=None) -> BranchPoint:
        ref = None
        if profile is not None:
            ref = len(self.profiles)
            self.profiles.append(profile)
        if zeros is None:
            zeros = count_crossings(profile) if profile is not None else -1
        pt = BranchPoint(float(p), float(a), ref, zeros, float(arclength), float(residual))
        self.points.append(pt)
        return pt

    @property
    def p_values(self) -> np.ndarray:
        return np.array([pt.p for pt in self.points])

    @property
    def a_values(self) -> np.ndarray:
        return np.array([pt.a for pt in self.points])

    def filename(self) -> str:
        return f"branch_N{self.N}_R{_fmt(float(self.R))}_i{self.origin_index}_{self.direction}.csv"


def count_crossings(profile: Profile, subdivisions: int = 4) -> int:
    """Number of sign changes of ``u - 1`` on ``[0, R]``."""
    u = profile.evaluate(profile.fine_grid(subdivisions))[0] - 1.0
    s = np.sign(u)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def detect_bifurcations(N: int, R: float, i_max: int) -> list:
    """Exponents ``p_i`` (``i = 2..i_max``) where branches leave ``u = 1``.

    With ``lambda_i`` the radial Neumann eigenvalues of ``-Delta + 1`` the
    kernel condition ``-Delta v = (p - 2) v`` gives ``p_i = 1 + lambda_i``,
    i.e. ``2 + nu_{i-1}`` with ``nu`` the eigenvalues of ``-Delta``.
    """
    if i_max < 2:
        raise ValueError("i_max must be at least 2")
    lam = radial_neumann_eigenvalues(N, R, i_max)
    return [(i, 1.0 + lam[i - 1]) for i in range(2, i_max + 1)]


class _Shooter:
    """Evaluates ``S`` and its gradient in the ``(p, ln a)`` coordinates."""

    def __init__(self, N, R, tolerance):
        self.N, self.R, self.tolerance = N, R, tolerance
        self.evaluations = 0

    def __call__(self, p, s):
        self.evaluations += 1
        if p <= 2.0:
            return math.nan, None, None
        a = math.exp(s)
        prof, sens = integrate_sensitivities(RadialProblem(self.N, self.R, p), a, self.R, self.tolerance)
        if sens.truncated or not math.isfinite(sens.slope):
            return math.nan, None, prof
        return sens.slope, np.array([sens.slope_p, sens.slope_a * a]), prof


def _seed(shooter, p_i, s0, tol, max_iter=30):
    """Newton in ``p`` at fixed ``ln a = s0`` starting from the bifurcation point."""
    p = p_i
    for _ in range(max_iter):
        F, grad, prof = shooter(p, s0)
        if grad is None:
            break
        if abs(F) <= tol:
            return p, F, prof
        if grad[0] == 0:
            break
        step = -F / grad[0]
        p += float(np.clip(step, -0.25, 0.25))
    raise NonConvergence(f"could not seed the branch from p={p_i} at a={math.exp(s0)}")


def trace_branch(
    N: int,
    R: float,
    i: int,
    direction: str = "upper",
    step: float = 0.02,
    max_points: int = 2000,
    stop: Optional[StopCriteria] = None,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    residual_tolerance: float = RESIDUAL_TOLERANCE,
    max_step: Optional[float] = None,
    keep_profiles: bool = True,
) -> Branch:
    """Trace the branch leaving ``(p_i, 1)`` with ``u(0) > 1`` (upper) or ``< 1`` (lower).

    Step control: halve after a failed or rejected corrector (including a
    tangent turn above ``MAX_TURN``), shrink after a turn above half of it,
    grow by 1.3 after a corrector converging in at most three iterations on
    a nearly straight stretch, capped at
    ``max_step`` (default ``8 * step``).  Raises :class:`StallError` with the
    partial branch attached when the step falls below 1e-12.
    """
    if i < 2:
        raise ValueError("branch index must be at least 2")
    if not step > 0:
        raise ValueError("step must be positive")
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    stop = stop or StopCriteria()
    p_hi = stop.upper_p(N)
    h_max = 8.0 * step if max_step is None else max_step
    sigma = 1.0 if direction == "upper" else -1.0
    p_i = dict(detect_bifurcations(N, R, i))[i]
    branch = Branch(N, R, i, p_i, direction)
    shooter = _Shooter(N, R, tolerance)
    tol_F = 0.1 * residual_tolerance

    s = sigma * math.log1p(SEED_OFFSET)
    p, F, prof = _seed(shooter, p_i, s, tol_F)
    x = np.array([p, s])
    zeros = count_crossings(prof)
    branch.add(p, math.exp(s), prof if keep_profiles else None, F, 0.0, zeros)
    arclength = 0.0

    _, grad, _ = shooter(*x)
    tangent = np.array([-grad[1], grad[0]])
    tangent /= np.linalg.norm(tangent)
    if np.sign(tangent[1]) != sigma:
        tangent = -tangent
    h = step

    def finish(reason):
        branch.stop_reason = reason
        return branch

    while len(branch.points) < max_points:
        if h < MIN_STEP:
            branch.stop_reason = "stall"
            raise StallError(f"step underflow at p={x[0]:.6g}, a={math.exp(x[1]):.6g}", branch)
        x_pred = x + h * tangent
        y = x_pred.copy()
        accepted = None
        for it in range(1, 9):
            if y[0] <= 2.0 + 1e-9:
                break
            F, grad, prof = shooter(*y)
            if grad is None or not np.all(np.isfinite(grad)):
                break
            if abs(F) <= tol_F and it > 1:
                accepted = (y.copy(), F, grad, prof, it)
                break
            J = np.array([grad, tangent])
            rhs = -np.array([F, tangent @ (y - x_pred)])
            try:
                dy = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(dy)):
                break
            y = y + dy
            if abs(F) <= tol_F and np.linalg.norm(dy) < 1e-13:
                accepted = (y - dy, F, grad, prof, it)
                break
        if accepted is None:
            h *= 0.5
            continue
        y, F, grad, prof, its = accepted
        new_tangent = np.array([-grad[1], grad[0]])
        new_tangent /= np.linalg.norm(new_tangent)
        if new_tangent @ tangent < 0:
            new_tangent = -new_tangent
        drift = np.linalg.norm(y - x_pred)
        crossed = np.sign(y[1]) != sigma
        # u - 1 cannot gain or lose a zero along a branch of nonconstant
        # solutions (that would need u = 1, u' = 0 at r = 0 or r = R), so a
        # changed count means the corrector landed on a neighbouring branch
        jumped = count_crossings(prof) != zeros
        turn = math.acos(min(1.0, float(new_tangent @ tangent)))
        if drift > 0.5 * h or turn > MAX_TURN or crossed or jumped:
            h *= 0.5
            continue
        arclength += float(np.linalg.norm(y - x))
        x, tangent = y, new_tangent
        p, a = float(x[0]), math.exp(x[1])
        branch.add(p, a, prof if keep_profiles else None, F, arclength, zeros)
        if p < stop.p_min:
            return finish("p_min")
        if p > p_hi:
            return finish("p_max")
        if a > stop.a_max:
            return finish("a_max")
        if a < stop.a_min:
            return finish("a_min")
        if turn > 0.5 * MAX_TURN:
            h /= GROWTH
        elif its <= 3 and turn < 0.25 * MAX_TURN:
            h = min(h * GROWTH, h_max)
    return finish("max_points")


# ------------------------------------------------------------- datasets


def branch_rows(branch: Branch) -> list:
    rows = ["p,u0,a,zeros,arclength"]
    for pt in branch.points:
        rows.append(",".join(_fmt(v) for v in (pt.p, pt.a, pt.a, pt.zeros_of_u_minus_1, pt.arclength)))
    return rows


def bifurcation_diagram(N: int, R: float, branches: list, directory) -> dict:
    """Write one CSV per branch plus ``index.csv``; returns the index entries.

    The index lists every branch file with its metadata and records the
    reference line ``p = 2*``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for br in branches:
        name = br.filename()
        _atomic_write(directory / name, "\n".join(branch_rows(br)) + "\n")
        entries.append({
            "file": name,
            "N": br.N,
            "R": br.R,
            "i": br.origin_index,
            "direction": br.direction,
            "origin_p": br.origin_p,
            "points": len(br.points),
            "stop": br.stop_reason,
        })
    header = "file,N,R,i,direction,origin_p,points,stop"
    lines = [f"# N={N}", f"# R={_fmt(float(R))}", f"# critical_p={_fmt(critical_exponent(N))}", header]
    for e in entries:
        lines.append(",".join(_fmt(e[k]) for k in header.split(",")))
    _atomic_write(directory / "index.csv", "\n".join(lines) + "\n")
    return {"critical_p": critical_exponent(N), "branches": entries}


def read_branch_csv(path, N: int, R: float, origin_index: int = 0, direction: str = "upper") -> Branch:
    data = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
    br = Branch(N, R, origin_index, math.nan, direction)
    for row in data:
        br.points.append(BranchPoint(float(row["p"]), float(row["a"]), None, int(row["zeros"]),
                                     float(row["arclength"])))
    return br


# ----------------------------------------------------------- comparisons


def _dense_curve(branch: Branch, per_segment: int = 16) -> np.ndarray:
    """Cubic interpolant of the branch in ``(p, ln a)`` over arclength, mapped to ``(p, a)``."""
    s = np.array([pt.arclength for pt in branch.points])
    xy = np.column_stack([branch.p_values, np.log(branch.a_values)])
    keep = np.concatenate([[True], np.diff(s) > 0])
    s, xy = s[keep], xy[keep]
    if len(s) >= 3:
        frac = np.arange(per_segment) / per_segment
        t = np.concatenate([(s[:-1, None] + np.diff(s)[:, None] * frac[None, :]).ravel(), s[-1:]])
        xy = CubicSpline(s, xy, axis=0)(t)
    return np.column_stack([xy[:, 0], np.exp(xy[:, 1])])


def _distance_to_polyline(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    if len(curve) == 1:
        return np.linalg.norm(points - curve[0], axis=1)
    best = np.full(len(points), np.inf)
    A, B = curve[:-1], curve[1:]
    D = B - A
    L2 = np.maximum(np.einsum("ij,ij->i", D, D), 1e-300)
    for start in range(0, len(A), 2048):
        a, d, l2 = A[start:start + 2048], D[start:start + 2048], L2[start:start + 2048]
        rel = points[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("mnk,nk->mn", rel, d) / l2, 0.0, 1.0)
        gap = rel - t[:, :, None] * d[None, :, :]
        best = np.minimum(best, np.sqrt(np.einsum("mnk,mnk->mn", gap, gap)).min(axis=1))
    return best


def hausdorff_distance(first: Branch, second: Branch) -> float:
    """Hausdorff distance of two traced ``(p, u(0))`` curves on their common arclength range.

    Each point set is measured against a dense polyline through the other
    branch (cubic in the continuation coordinates), so the result reflects
    disagreement between the curves rather than their sampling density.
    """
    common = min(first.points[-1].arclength, second.points[-1].arclength)
    out = 0.0
    for one, other in ((first, second), (second, first)):
        pts = np.column_stack([one.p_values, one.a_values])
        mask = np.array([pt.arclength for pt in one.points]) <= common
        if np.any(mask):
            out = max(out, float(_distance_to_polyline(pts[mask], _dense_curve(other)).max()))
    return out


# ------------------------------------------------------------ blow-up tail


def blowup_diagnostics(branch: Branch, tail: int, u0_profile: Optional[Profile] = None) -> dict:
    """Concentration diagnostics on the last ``tail`` points of ``branch``.

    For each point: the concentration scale from ``u(0)``, the single-bubble
    decomposition residual against ``u0_profile`` (zero when omitted), the
    exact Pohozaev residual at ``R``, and the weak-limit probe ``u(R/2)``.
    The trend entry is the least-squares slope of ``ln|2* - p|`` against
    ``ln mu``.
    """
    from .asymptotics import decomposition_residual, mu_from_center
    from .diagnostics import pohozaev_residual

    if tail < 1 or len(branch.points) < tail:
        raise InsufficientTail(f"branch has {len(branch.points)} points, {tail} requested")
    pts = branch.points[-tail:]
    N = branch.N
    crit = critical_exponent(N)
    rows = []
    for pt in pts:
        prof = branch.profile(pt)
        row = {"p": pt.p, "a": pt.a, "mu": mu_from_center(N, pt.p, pt.a)}
        if prof is not None:
            row["decomposition_residual"] = decomposition_residual(prof, u0_profile, row["mu"])
            rep = pohozaev_residual(prof, prof.r_max)
            row["pohozaev_residual"] = rep.residual_exact
            row["pohozaev_scale"] = abs(rep.lhs_exact) + abs(rep.rhs_boundary)
            row["u_half_R"] = float(prof.u(0.5 * prof.r_max))
        rows.append(row)
    a_vals = np.array([r["a"] for r in rows])
    mu_vals = np.array([r["mu"] for r in rows])
    gaps = np.abs(crit - np.array([r["p"] for r in rows]))
    trend = math.nan
    ok = (gaps > 0) & (mu_vals > 0)
    if np.count_nonzero(ok) >= 2 and np.ptp(np.log(mu_vals[ok])) > 0:
        trend = float(np.polyfit(np.log(mu_vals[ok]), np.log(gaps[ok]), 1)[0])
    return {
        "N": N,
        "R": branch.R,
        "origin_index": branch.origin_index,
        "direction": branch.direction,
        "tail": tail,
        "growing": bool(np.all(np.diff(a_vals) > 0)),
        "points": rows,
        "gap_vs_mu_slope": trend,
    }
