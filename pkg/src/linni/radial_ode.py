"""Radial ODE  -u'' - (N-1)/r u' + mu u = |u|^{p-2} u  and its linearization.

Profiles start at r = 0 with a second-order Taylor expansion up to a small
seam radius, then switch to an adaptive 8(5,3) Dormand-Prince integrator with
dense output.  Every profile keeps its dense interpolant, so downstream code
(event refinement, quadrature, the linearized equation) can evaluate ``u``
and ``u'`` anywhere on ``[0, r_max]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq

from .errors import IntegrationError

DEFAULT_TOLERANCE = 1e-10
DEFAULT_OVERFLOW_CAP = 1e12
# the step controller runs this much tighter than the requested per-step bound
_SAFETY = 1e-2
_MIN_RTOL = 2.5e-14


@dataclass(frozen=True)
class RadialProblem:
    """One instance of the radial Neumann problem on the ball ``B_R``."""

    dimension: int
    radius: float
    exponent: float
    potential: float = 1.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.dimension}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.exponent > 2:
            raise ValueError(f"exponent must exceed 2, got {self.exponent}")
        if not self.potential > 0:
            raise ValueError(f"potential must be positive, got {self.potential}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "exponent", float(self.exponent))
        object.__setattr__(self, "potential", float(self.potential))

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self.dimension)

    @property
    def constant_solution(self) -> float:
        """The positive constant solution ``mu^{1/(p-2)}``."""
        return self.potential ** (1.0 / (self.exponent - 2.0))

    def with_exponent(self, exponent: float) -> "RadialProblem":
        return RadialProblem(self.dimension, self.radius, exponent, self.potential)


def critical_exponent(N: int) -> float:
    return 2.0 * N / (N - 2)


def nonlinearity(u, p):
    """``|u|^{p-2} u`` written as ``sign(u)|u|^{p-1}`` (valid for real ``p``)."""
    return np.sign(u) * np.abs(u) ** (p - 1.0)


@dataclass(frozen=True, eq=False)
class Profile:
    """A radial trajectory ``(r_i, u_i, u'_i)`` on ``[0, r_max]``.

    ``dense`` maps an array of radii to ``(u, u')``; profiles built from
    samples (CSV import, synthetic data) fall back to spline interpolation.
    """

    grid: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    problem: RadialProblem
    extrema: tuple = ()
    truncated: bool = False
    center_value: Optional[float] = None
    dense: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        derivs = np.array(self.derivatives, dtype=float)
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("grid must be a 1-d array with at least two nodes")
        if not (len(grid) == len(values) == len(derivs)):
            raise ValueError("grid, values and derivatives must have equal length")
        if grid[0] != 0.0:
            raise ValueError("grid must start at r = 0")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        for arr in (grid, values, derivs):
            arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivatives", derivs)
        object.__setattr__(self, "extrema", tuple(float(x) for x in self.extrema))
        if self.center_value is None:
            object.__setattr__(self, "center_value", float(values[0]))
        if self.dense is None:
            object.__setattr__(self, "dense", _spline_dense(grid, values, derivs))

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    def evaluate(self, r):
        """Return ``(u(r), u'(r))``; stored node values are reproduced exactly."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-14)):
            raise ValueError(f"radius outside [0, {self.r_max}]")
        u, du = self.dense(np.minimum(r, self.r_max))
        u = np.array(u, dtype=float)
        du = np.array(du, dtype=float)
        idx = np.searchsorted(self.grid, r)
        idx = np.clip(idx, 0, len(self.grid) - 1)
        hit = self.grid[idx] == r
        u[hit] = self.values[idx[hit]]
        du[hit] = self.derivatives[idx[hit]]
        if scalar:
            return float(u[0]), float(du[0])
        return u, du

    def u(self, r):
        return self.evaluate(r)[0]

    def du(self, r):
        return self.evaluate(r)[1]

    def fine_grid(self, subdivisions: int = 4) -> np.ndarray:
        """Grid with every interval split into ``subdivisions`` pieces."""
        g = self.grid
        parts = [g[:-1] + (g[1:] - g[:-1]) * k / subdivisions for k in range(subdivisions)]
        return np.concatenate([np.sort(np.concatenate(parts)), g[-1:]])

    def to_csv(self, path, metadata: Optional[dict] = None) -> None:
        write_profile_csv(self, path, metadata)


def _spline_dense(grid, values, derivs):
    u_spline = CubicHermiteSpline(grid, values, derivs)
    du_spline = CubicSpline(grid, derivs) if len(grid) > 2 else None

    def dense(r):
        du = du_spline(r) if du_spline is not None else np.interp(r, grid, derivs)
        return u_spline(r), du

    return dense


def _taylor_dense(a, curvature, seam, ode_solution):
    """Dense output: Taylor quadratic on [0, seam), ODE interpolant beyond."""

    def dense(r):
        r = np.asarray(r, dtype=float)
        u = np.empty_like(r)
        du = np.empty_like(r)
        inner = r < seam
        u[inner] = a + 0.5 * curvature * r[inner] ** 2
        du[inner] = curvature * r[inner]
        if np.any(~inner):
            if ode_solution is None:
                u[~inner] = a + 0.5 * curvature * r[~inner] ** 2
                du[~inner] = curvature * r[~inner]
            else:
                y = ode_solution(r[~inner])
                u[~inner] = y[0]
                du[~inner] = y[1]
        return u, du

    return dense


def _default_seam(r_max, a=0.0, p=3.0, mu=1.0):
    # stay well inside the core length scale (|a|^{p-2} + mu)^{-1/2}
    core = (abs(a) ** (p - 2.0) + abs(mu)) ** -0.5
    return min(1e-4 * max(1.0, r_max), 1e-3 * core, 0.25 * r_max)


def _run(rhs, y_seam, seam, r_max, tolerance, overflow_cap, max_step, n_state):
    """Integrate ``rhs`` from ``seam`` to ``r_max``; returns (t, y, sol, truncated)."""
    if abs(y_seam[0]) >= overflow_cap:
        return np.array([seam]), np.zeros((n_state, 0)), None, True
    if seam >= r_max:
        return np.array([r_max]), np.zeros((n_state, 0)), None, False

    def overflow(r, y):
        return overflow_cap - abs(y[0])

    overflow.terminal = True
    overflow.direction = -1

    def guarded(r, y):
        dy = rhs(r, y)
        if not math.isfinite(dy.sum()):
            raise IntegrationError(f"non-finite state at r={r:.6g}: y={y}")
        return dy

    res = solve_ivp(
        guarded,
        (seam, r_max),
        y_seam,
        method="DOP853",
        rtol=max(_SAFETY * tolerance, _MIN_RTOL),
        atol=_SAFETY * tolerance,
        max_step=max_step if max_step is not None else r_max / 50.0,
        dense_output=True,
        events=overflow,
    )
    if res.status < 0:
        raise IntegrationError(res.message)
    truncated = res.status == 1
    return res.t, res.y, res.sol, truncated


def integrate(
    problem: RadialProblem,
    center_value: float,
    r_max: float,
    tolerance: float = DEFAULT_TOLERANCE,
    *,
    seam: Optional[float] = None,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
    max_step: Optional[float] = None,
    extrema: bool = True,
) -> Profile:
    """Solve the initial value problem ``u(0) = a, u'(0) = 0`` on ``[0, r_max]``.

    If ``|u|`` exceeds ``overflow_cap`` the integration stops and the returned
    profile is flagged ``truncated``; its grid then ends at the overflow radius.
    """
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    N, p, mu = problem.dimension, problem.exponent, problem.potential
    a = float(center_value)
    seam = _default_seam(r_max, a, p, mu) if seam is None else float(seam)
    # N u''(0) = mu a - f(a)
    curvature = (mu * a - float(nonlinearity(a, p))) / N

    def rhs(r, y):
        u, du = y
        return np.array([du, -(N - 1) / r * du + mu * u - abs(u) ** (p - 2.0) * u])

    y_seam = np.array([a + 0.5 * curvature * seam**2, curvature * seam])
    t, y, sol, truncated = _run(rhs, y_seam, seam, r_max, tolerance, overflow_cap, max_step, 2)
    if sol is None:
        grid = np.array([0.0, t[-1]])
        values = a + 0.5 * curvature * grid**2
        derivs = curvature * grid
    else:
        grid = np.concatenate([[0.0], t])
        values = np.concatenate([[a], y[0]])
        derivs = np.concatenate([[0.0], y[1]])
    prof = Profile(
        grid,
        values,
        derivs,
        problem,
        truncated=truncated,
        center_value=a,
        dense=_taylor_dense(a, curvature, seam, sol),
    )
    if extrema and not truncated:
        object.__setattr__(prof, "extrema", tuple(find_extrema(prof)))
    return prof


def integrate_linearized(
    base: Profile,
    r_max: Optional[float] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    *,
    seam: Optional[float] = None,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
    max_step: Optional[float] = None,
) -> Profile:
    """Solve ``-v'' - (N-1)/r v' + mu v = (p-1)|u|^{p-2} v``, ``v(0)=1, v'(0)=0``.

    ``u`` is read from the dense interpolant of ``base``.
    """
    r_max = base.r_max if r_max is None else float(r_max)
    if r_max > base.r_max * (1 + 1e-14):
        raise ValueError("base profile does not cover [0, r_max]")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    prob = base.problem
    N, p, mu = prob.dimension, prob.exponent, prob.potential
    a = float(base.u(0.0))
    seam = _default_seam(r_max, a, p, mu) if seam is None else float(seam)
    curvature = (mu - (p - 1.0) * abs(a) ** (p - 2.0)) / N

    def rhs(r, y):
        v, dv = y
        u = base.dense(np.array([r]))[0][0]
        return np.array([dv, -(N - 1) / r * dv + (mu - (p - 1.0) * abs(u) ** (p - 2.0)) * v])

    y_seam = np.array([1.0 + 0.5 * curvature * seam**2, curvature * seam])
    t, y, sol, truncated = _run(rhs, y_seam, seam, r_max, tolerance, overflow_cap, max_step, 2)
    if sol is None:
        grid = np.array([0.0, t[-1]])
        values = 1.0 + 0.5 * curvature * grid**2
        derivs = curvature * grid
    else:
        grid = np.concatenate([[0.0], t])
        values = np.concatenate([[1.0], y[0]])
        derivs = np.concatenate([[0.0], y[1]])
    prof = Profile(
        grid,
        values,
        derivs,
        prob,
        truncated=truncated,
        center_value=1.0,
        dense=_taylor_dense(1.0, curvature, seam, sol),
    )
    if not truncated:
        object.__setattr__(prof, "extrema", tuple(find_extrema(prof)))
    return prof


@dataclass(frozen=True)
class Sensitivities:
    """Boundary data of ``u`` and of its derivatives in ``a`` and ``p`` at ``r_max``."""

    slope: float
    slope_a: float
    slope_p: float
    truncated: bool


def integrate_sensitivities(
    problem: RadialProblem,
    center_value: float,
    r_max: Optional[float] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    *,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
) -> tuple:
    """Integrate ``u`` together with its variations ``du/da`` and ``du/dp``.

    Returns ``(profile, Sensitivities)``; the sensitivities give the exact
    Jacobian of the shooting map ``(a, p) -> u'(r_max)``.
    """
    r_max = problem.radius if r_max is None else float(r_max)
    N, p, mu = problem.dimension, problem.exponent, problem.potential
    a = float(center_value)
    seam = _default_seam(r_max, a, p, mu)

    def dfdp(u):
        # d/dp of |u|^{p-2} u
        au = abs(u)
        return math.copysign(au ** (p - 1.0), u) * math.log(au) if au > 0 else 0.0

    def rhs(r, y):
        u, du, ua, dua, up, dup = y
        au = abs(u)
        w = au ** (p - 2.0)
        k = mu - (p - 1.0) * w
        c = (N - 1) / r
        return np.array([
            du, -c * du + mu * u - w * u,
            dua, -c * dua + k * ua,
            dup, -c * dup + k * up - dfdp(u),
        ])

    curv = (mu * a - float(nonlinearity(a, p))) / N
    curv_a = (mu - (p - 1.0) * abs(a) ** (p - 2.0)) / N
    curv_p = -float(dfdp(a)) / N
    s = seam
    y_seam = np.array([a + 0.5 * curv * s**2, curv * s,
                       1.0 + 0.5 * curv_a * s**2, curv_a * s,
                       0.5 * curv_p * s**2, curv_p * s])
    t, y, sol, truncated = _run(rhs, y_seam, seam, r_max, tolerance, overflow_cap, None, 6)
    if sol is None:
        grid = np.array([0.0, t[-1]])
        values = a + 0.5 * curv * grid**2
        derivs = curv * grid
        end = t[-1]
        final = np.array([values[-1], derivs[-1], 1 + 0.5 * curv_a * end**2, curv_a * end,
                          0.5 * curv_p * end**2, curv_p * end])
    else:
        grid = np.concatenate([[0.0], t])
        values = np.concatenate([[a], y[0]])
        derivs = np.concatenate([[0.0], y[1]])
        final = y[:, -1]
    prof = Profile(grid, values, derivs, problem, truncated=truncated, center_value=a,
                   dense=_taylor_dense(a, curv, seam, sol))
    sens = Sensitivities(float(final[1]), float(final[3]), float(final[5]), truncated)
    return prof, sens


def find_extrema(profile: Profile, subdivisions: int = 4) -> list:
    """Radii in ``(0, r_max]`` where ``u'`` changes sign, refined by Brent's method."""
    r = profile.fine_grid(subdivisions)
    du = profile.evaluate(r)[1]
    if np.all(du == 0):
        return []
    scale = np.max(np.abs(du))
    # ignore sign flips of pure round-off around an identically-zero slope
    du = np.where(np.abs(du) <= 1e-13 * max(scale, 1e-300), 0.0, du)
    sign = np.sign(du)
    roots = []

    def slope(x):
        return profile.evaluate(x)[1]

    i = 1
    n = len(r)
    while i < n:
        if sign[i - 1] != 0 and sign[i] != 0 and sign[i - 1] != sign[i]:
            roots.append(brentq(slope, r[i - 1], r[i], xtol=1e-14, rtol=1e-13, maxiter=200))
        elif sign[i] == 0 and i + 1 < n and r[i] > 0:
            j = i
            while j + 1 < n and sign[j] == 0:
                j += 1
            if sign[i - 1] != 0 and sign[j] != 0 and sign[i - 1] != sign[j] and j == i + 1:
                roots.append(float(r[i]))
            i = j
            continue
        i += 1
    return sorted(x for x in roots if x > 0)


def energy_density(profile: Profile, r):
    """``E(r) = u'^2/2 + |u|^p/p - mu u^2/2``; nonincreasing along true solutions."""
    p, mu = profile.problem.exponent, profile.problem.potential
    u, du = profile.evaluate(r)
    return 0.5 * du**2 + np.abs(u) ** p / p - 0.5 * mu * u**2


def second_derivative_at_origin(profile: Profile, h: float = 1e-3) -> float:
    """Symmetric difference of ``u'`` at 0, using ``u'(-h) = -u'(h)``."""
    return profile.du(h) / h


def ode_residual(profile: Profile, r) -> np.ndarray:
    """Pointwise residual of the ODE using ``u''`` from a finite difference of ``u'``."""
    prob = profile.problem
    r = np.asarray(r, dtype=float)
    h = 1e-5 * max(1.0, profile.r_max)
    u, du = profile.evaluate(r)
    d2u = (profile.du(np.minimum(r + h, profile.r_max)) - profile.du(np.maximum(r - h, 0.0))) / (
        np.minimum(r + h, profile.r_max) - np.maximum(r - h, 0.0)
    )
    return -d2u - (prob.dimension - 1) / r * du + prob.potential * u - nonlinearity(u, prob.exponent)


# --------------------------------------------------------------------- I/O


def write_metadata(path, metadata: dict) -> None:
    lines = [f"{k}={_fmt(v)}" for k, v in metadata.items()]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_metadata(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def metadata_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def problem_metadata(problem: RadialProblem) -> dict:
    return {"N": problem.dimension, "R": problem.radius, "p": problem.exponent, "mu": problem.potential}


def problem_from_metadata(meta: dict) -> RadialProblem:
    return RadialProblem(int(meta["N"]), float(meta["R"]), float(meta["p"]), float(meta.get("mu", 1.0)))


def write_profile_csv(profile: Profile, path, metadata: Optional[dict] = None) -> None:
    """Write ``r,u,du`` rows at 17 significant digits plus a ``.meta`` sidecar."""
    rows = ["r,u,du"]
    for r, u, du in zip(profile.grid, profile.values, profile.derivatives):
        rows.append(f"{_fmt(r)},{_fmt(u)},{_fmt(du)}")
    _atomic_write(Path(path), "\n".join(rows) + "\n")
    meta = problem_metadata(profile.problem)
    meta["a"] = profile.center_value
    meta["truncated"] = profile.truncated
    if metadata:
        meta.update(metadata)
    write_metadata(metadata_path(path), meta)


def read_profile_csv(path, problem: Optional[RadialProblem] = None) -> Profile:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["r", "u", "du"]:
            raise ValueError(f"{path}: expected header r,u,du, got {header}")
        data = np.array([[float(x) for x in row] for row in reader if row])
    meta = {}
    if metadata_path(path).exists():
        meta = read_metadata(metadata_path(path))
    if problem is None:
        if not meta:
            raise ValueError(f"{path}: no problem given and no metadata sidecar found")
        problem = problem_from_metadata(meta)
    truncated = meta.get("truncated", "False") == "True"
    return Profile(data[:, 0], data[:, 1], data[:, 2], problem, truncated=truncated)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v) or math.isinf(v):
            return repr(float(v))
        return f"{float(v):.17g}"
    return str(v)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    tmp.replace(path)
