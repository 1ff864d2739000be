"""Radial Neumann Green's function of ``-Delta + h`` on ``B_R`` and its mass at 0.

With ``w = r^{N-2} G`` the radial equation ``G'' + (N-1)/r G' = h G`` turns
into ``w'' + (3-N)/r w' = h w``, whose solution regular at the origin is
bounded with ``w(0) = c0``.  We integrate ``w`` inward from the Neumann data
``G(R) = 1, G'(R) = 0`` (a stable direction: the competing homogeneous modes
decay toward 0) and rescale so that ``c0 = 1/((N-2) omega_{N-1})``.
"""

from __future__ import annotations

import math
from pathlib import Path
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .asymptotics import sphere_area
from .errors import KernelError, NonConvergence, UnsupportedDimension
from .radial_ode import _atomic_write, _fmt, write_metadata

R_MIN_FACTOR = 1e-6
KERNEL_THRESHOLD = 1e-6
POLY_DEGREE = 7
# (main window, check window) as fractions of min(R, 1); index 1 is for N = 4
FIT_WINDOWS = (((1e-2, 1e-1), (2e-2, 2e-1)), ((1e-4, 1e-1), (1e-4, 5e-2)))
_RTOL = 1e-13


def singular_coefficient(N: int) -> float:
    """``1/((N-2) omega_{N-1})``, the coefficient of ``r^{2-N}`` in ``G``."""
    return 1.0 / ((N - 2) * sphere_area(N - 1))


class Potential:
    """A radial potential ``h(r)``: a constant, a callable, or samples ``(r, h)``."""

    def __init__(self, source: Union[float, Callable, tuple]):
        self.constant: Optional[float] = None
        if isinstance(source, Potential):
            self.constant, self._f = source.constant, source._f
        elif callable(source):
            self._f = source
        elif isinstance(source, tuple) and len(source) == 2:
            r, h = (np.asarray(x, dtype=float) for x in source)
            spline = CubicSpline(r, h)
            self._f = lambda x: spline(np.clip(x, r[0], r[-1]))
        else:
            self.constant = float(source)
            c = self.constant
            self._f = lambda x: c + 0.0 * np.asarray(x, dtype=float)

    def __call__(self, r):
        return self._f(r)

    def at(self, r: float) -> float:
        return float(np.asarray(self._f(r)).reshape(-1)[0]) if self.constant is None else self.constant

    def describe(self) -> str:
        return _fmt(self.constant) if self.constant is not None else "sampled"


@dataclass(frozen=True, eq=False)
class GreenProfile:
    N: int
    R: float
    potential: Potential
    grid: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    normalization: float
    c0: float = field(repr=False, default=math.nan)
    w_dense: Optional[Callable] = field(repr=False, default=None)

    def w(self, r):
        """Normalized ``r^{N-2} G(r)``."""
        return self.normalization * self.w_dense(np.asarray(r, dtype=float))[0]

    def G(self, r):
        r = np.asarray(r, dtype=float)
        return self.w(r) * r ** (2.0 - self.N)

    def to_csv(self, path) -> None:
        rows = ["r,G"] + [f"{_fmt(r)},{_fmt(g)}" for r, g in zip(self.grid, self.values)]
        _atomic_write(Path(path), "\n".join(rows) + "\n")


@dataclass(frozen=True)
class MassResult:
    H: float
    extrapolation_error: float
    N: int
    R: float
    alpha4: Optional[float] = None

    def metadata(self) -> dict:
        meta = {"N": self.N, "R": self.R, "H": self.H, "extrapolation_error": self.extrapolation_error}
        if self.alpha4 is not None:
            meta["alpha4"] = self.alpha4
        return meta

    def write(self, path) -> None:
        write_metadata(path, self.metadata())


def kernel_margin(N: int, R: float, potential) -> float:
    """``|phi'(R)| / max |phi'|`` for ``phi'' + (N-1)/r phi' = h phi``, ``phi(0)=1``.

    Zero (or tiny) margin means ``-Delta + h`` has a radial Neumann kernel.
    """
    h = Potential(potential)
    seam = 1e-6 * R
    c = h.at(0.0) / N

    def rhs(r, y):
        return [y[1], h.at(r) * y[0] - (N - 1) / r * y[1]]

    sol = solve_ivp(rhs, (seam, R), [1.0 + 0.5 * c * seam**2, c * seam], method="DOP853",
                    rtol=_RTOL, atol=1e-15, max_step=R / 50.0, dense_output=True)
    if sol.status < 0:
        raise NonConvergence(sol.message)
    r = np.linspace(seam, R, 2001)
    dphi = sol.sol(r)[1]
    peak = float(np.max(np.abs(dphi)))
    return abs(float(sol.y[1, -1])) / peak if peak > 0 else 0.0


def green_radial(N: int, R: float, potential=1.0, *, r_min_factor: float = R_MIN_FACTOR,
                 check_kernel: bool = True) -> GreenProfile:
    """Radial Green's function of ``-Delta + potential`` on ``B_R`` with pole at 0."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    if not R > 0:
        raise ValueError("radius must be positive")
    h = Potential(potential)
    if check_kernel:
        margin = kernel_margin(N, R, h)
        if margin < KERNEL_THRESHOLD:
            raise KernelError(f"radial Neumann kernel detected (margin {margin:.3e})")
    r_min = r_min_factor * R
    wR = R ** (N - 2)

    def rhs(r, y):
        return [y[1], h.at(r) * y[0] - (3 - N) / r * y[1]]

    sol = solve_ivp(rhs, (R, r_min), [wR, (N - 2) * wR / R], method="DOP853", rtol=_RTOL,
                    atol=1e-15 * max(1.0, wR), max_step=R / 50.0, dense_output=True)
    if sol.status < 0:
        raise NonConvergence(sol.message)

    def w_dense(r):
        y = sol.sol(np.asarray(r, dtype=float))
        return y[0], y[1]

    # c0 = w(0+): quadratic fit over the smallest decade of radii
    rs = np.linspace(r_min, 10 * r_min, 41)
    c0 = float(np.polynomial.polynomial.polyfit(rs, w_dense(rs)[0], 2)[0])
    scale = singular_coefficient(N) / c0
    t = sol.t[::-1]
    w, dw = sol.y[0][::-1], sol.y[1][::-1]
    G = scale * w * t ** (2.0 - N)
    dG = scale * (dw * t ** (2.0 - N) + (2.0 - N) * w * t ** (1.0 - N))
    return GreenProfile(N, float(R), h, t, G, dG, scale, c0, w_dense)


def _expansion_basis(N: int, r: np.ndarray) -> tuple:
    """Columns for ``(w - c0) r^{2-N}`` and the index of the constant column.

    The leading ``r^{2-N}`` column absorbs a residual error in the singular
    normalization, which would otherwise be amplified near the origin.
    """
    cols = [r ** (2.0 - N)]
    if N == 4:
        L = np.log(1.0 / r)
        cols += [L, np.ones_like(r), r**2 * L, r**2, r**4 * L, r**4]
    else:
        cols += [r**k for k in range(POLY_DEGREE + 1)]
    return np.column_stack(cols), (2 if N == 4 else 1)


def _fit_constant(f, N: int, scale: float, window: tuple, samples: int = 60) -> np.ndarray:
    rs = np.logspace(math.log10(window[0] * scale), math.log10(window[1] * scale), samples)
    basis, k = _expansion_basis(N, rs)
    coef = np.linalg.lstsq(basis, np.array([f(r) for r in rs]), rcond=None)[0]
    return coef, k


def mass_at_origin(green: GreenProfile) -> MassResult:
    """Constant term ``H`` of ``G(r) = c0 r^{2-N} [+ alpha_4 ln(1/r)] + H + o(1)``.

    Dimension 3 (any potential), 4, and 5 when the potential and its
    derivative vanish at the origin.  ``H`` comes from a least-squares fit of
    ``G - c0 r^{2-N}`` in its small-``r`` expansion over a window of radii
    proportional to ``min(R, 1)``; the error estimate is the change under a
    second window.
    """
    N, R, h = green.N, green.R, green.potential
    if N >= 6:
        raise UnsupportedDimension(f"no constant term in the expansion for N={N}")
    if N == 5:
        d = 1e-3 * R
        h0 = h.at(0.0)
        h1 = (4.0 * h.at(d) - h.at(2 * d) - 3.0 * h0) / (2.0 * d)
        if abs(h0) > 1e-10 or abs(h1) > 1e-6:
            raise UnsupportedDimension("N=5 needs a potential with h(0) = h'(0) = 0")
    c = singular_coefficient(N)

    def f(r):
        return (float(green.w(r)) - c) * r ** (2.0 - N)

    scale = min(R, 1.0)
    windows = FIT_WINDOWS[N == 4]
    (coef, k), (alt, _) = (_fit_constant(f, N, scale, w) for w in windows)
    H = float(coef[k])
    alpha4 = float(coef[1]) if N == 4 else None
    return MassResult(H, float(abs(H - alt[k])), N, R, alpha4)


# ------------------------------------------------------ dimension 3, constant mu


def closed_form_coefficient_dim3(R: float, mu: float = 1.0) -> float:
    """``A`` in ``G = (e^{-k r} + A sinh(k r)) / (4 pi r)``, ``k = sqrt(mu)``."""
    s = R * math.sqrt(mu)
    return math.exp(-s) * (s + 1.0) / (s * math.cosh(s) - math.sinh(s))


def green_closed_form_dim3(r, R: float, mu: float = 1.0):
    k = math.sqrt(mu)
    r = np.asarray(r, dtype=float)
    A = closed_form_coefficient_dim3(R, mu)
    return (np.exp(-k * r) + A * np.sinh(k * r)) / (4.0 * math.pi * r)


def mass_closed_form_dim3(R: float, mu: float = 1.0) -> float:
    return math.sqrt(mu) * (closed_form_coefficient_dim3(R, mu) - 1.0) / (4.0 * math.pi)


def exceptional_radius_dim3(mu: float = 1.0, *, method: str = "closed_form") -> float:
    """Radius at which the mass of ``-Delta + mu`` on the 3-ball vanishes.

    ``closed_form`` solves ``e^{2s} = (s+1)/(s-1)`` for ``s = R sqrt(mu)``;
    ``numerical`` finds the zero of the extracted mass instead.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    if method == "closed_form":
        s = brentq(lambda s: 2.0 * s - math.log((s + 1.0) / (s - 1.0)), 1.0 + 1e-6, 10.0,
                   xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        return s / math.sqrt(mu)
    if method == "numerical":
        mass = lambda R: mass_at_origin(green_radial(3, R, mu)).H  # noqa: E731
        k = math.sqrt(mu)
        return brentq(mass, 1.05 / k, 3.0 / k, xtol=1e-12, maxiter=200)
    raise ValueError(f"unknown method {method!r}")
