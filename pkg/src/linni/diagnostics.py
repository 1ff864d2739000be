"""Integral audits of computed profiles.

Pohozaev identity on ``B_delta`` for ``-u'' - (N-1)/r u' + mu u = |u|^{p-2}u``,
obtained with the multiplier ``r u' + (N-2)/2 u``::

    mu int u^2 + (N-2)(p-2*)/(2p) int |u|^p
        = omega_{N-1} delta^{N-1} ( -delta/2 u'^2 - (N-2)/2 u u'
                                    + mu delta/2 u^2 - delta/p |u|^p )

(boundary values at ``r = delta``).  The variant with the interior
coefficient ``(N-2)^2 (p-2*)/(4N)`` agrees with it only at ``p = 2*``; both
are reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .asymptotics import sphere_area
from .errors import DimensionError
from .radial_ode import Profile, critical_exponent, energy_density, write_metadata

GL_ORDER = 8


def _panels(profile: Profile, upper: float) -> np.ndarray:
    edges = profile.grid[profile.grid < upper]
    return np.concatenate([edges, [upper]])


def radial_quadrature(profile: Profile, integrand: Callable, upper: Optional[float] = None,
                      order: int = GL_ORDER) -> float:
    """``int_0^upper integrand(r, u, u') dr`` with Gauss-Legendre on every grid interval."""
    upper = profile.r_max if upper is None else float(upper)
    edges = _panels(profile, upper)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    u, du = profile.evaluate(r)
    return float(np.sum(weights * integrand(r, u, du)))


@dataclass(frozen=True)
class PohozaevReport:
    delta: float
    lhs_exact: float
    rhs_boundary: float
    residual_exact: float
    lhs_paper_coefficient: float
    quadrature_error: float

    @property
    def relative_residual(self) -> float:
        scale = abs(self.lhs_exact) + abs(self.rhs_boundary)
        return abs(self.residual_exact) / scale if scale > 0 else abs(self.residual_exact)

    @property
    def residual_quadratic_gap(self) -> float:
        return self.lhs_paper_coefficient - self.rhs_boundary

    def metadata(self) -> dict:
        return {
            "delta": self.delta,
            "lhs_exact": self.lhs_exact,
            "rhs_boundary": self.rhs_boundary,
            "residual_exact": self.residual_exact,
            "lhs_paper_coefficient": self.lhs_paper_coefficient,
            "quadrature_error": self.quadrature_error,
        }

    def write(self, path) -> None:
        write_metadata(path, self.metadata())


def exact_coefficient(N: int, p: float) -> float:
    return (N - 2) * (p - critical_exponent(N)) / (2.0 * p)


def quadratic_gap_coefficient(N: int, p: float) -> float:
    return (N - 2) ** 2 * (p - critical_exponent(N)) / (4.0 * N)


def pohozaev_residual(profile: Profile, delta: float) -> PohozaevReport:
    """Both sides of the Pohozaev identity on ``B_delta``."""
    if not 0 < delta <= profile.r_max * (1 + 1e-14):
        raise ValueError(f"delta must lie in (0, {profile.r_max}]")
    delta = min(float(delta), profile.r_max)
    prob = profile.problem
    N, p, mu = prob.dimension, prob.exponent, prob.potential
    omega = sphere_area(N - 1)

    def sides(order):
        i2 = radial_quadrature(profile, lambda r, u, du: r ** (N - 1) * u * u, delta, order)
        ip = radial_quadrature(profile, lambda r, u, du: r ** (N - 1) * np.abs(u) ** p, delta, order)
        return omega * i2, omega * ip

    I2, Ip = sides(2 * GL_ORDER)
    I2c, Ipc = sides(GL_ORDER)
    k_exact = exact_coefficient(N, p)
    lhs = mu * I2 + k_exact * Ip
    lhs_coarse = mu * I2c + k_exact * Ipc
    u, du = profile.evaluate(delta)
    rhs = omega * delta ** (N - 1) * (
        -0.5 * delta * du**2 - 0.5 * (N - 2) * u * du + 0.5 * mu * delta * u**2 - delta / p * abs(u) ** p
    )
    lhs_paper = mu * I2 + quadratic_gap_coefficient(N, p) * Ip
    return PohozaevReport(delta, lhs, rhs, lhs - rhs, lhs_paper, abs(lhs - lhs_coarse))


@dataclass(frozen=True)
class PotentialPohozaevReport:
    delta: float
    lhs: float
    rhs_boundary: float
    residual: float

    @property
    def relative_residual(self) -> float:
        scale = abs(self.lhs) + abs(self.rhs_boundary)
        return abs(self.residual) / scale if scale > 0 else abs(self.residual)

    def metadata(self) -> dict:
        return {"delta": self.delta, "lhs": self.lhs, "rhs_boundary": self.rhs_boundary,
                "residual": self.residual}


def _potential_pair(h0, h0_prime):
    if isinstance(h0, Profile):
        raise TypeError("pass the potential as samples, a constant or a callable")
    if isinstance(h0, tuple) and len(h0) == 2:
        spline = CubicSpline(np.asarray(h0[0], float), np.asarray(h0[1], float))
        return spline, spline.derivative()
    if callable(h0):
        if h0_prime is None:
            def h0_prime(r, f=h0):
                step = 1e-6 * np.maximum(1.0, np.abs(r))
                return (f(r + step) - f(r - step)) / (2 * step)
        return h0, h0_prime
    c = float(h0)
    return (lambda r: c + 0.0 * np.asarray(r)), (lambda r: 0.0 * np.asarray(r))


def pohozaev_potential_residual(v_profile: Profile, h0: Union[float, tuple, Callable], delta: float,
                                h0_prime: Optional[Callable] = None) -> PotentialPohozaevReport:
    """Dimension-6 identity for ``-Delta v + h0 v = v^2`` on ``B_delta``::

        int (h0 + r h0'/2) v^2 = omega_5 delta^5 ( -delta/2 v'^2 - 2 v v'
                                                   + delta h0(delta)/2 v^2 - delta/3 v^3 )
    """
    if v_profile.problem.dimension != 6:
        raise DimensionError("this identity holds in dimension 6 only")
    if not 0 < delta <= v_profile.r_max * (1 + 1e-14):
        raise ValueError(f"delta must lie in (0, {v_profile.r_max}]")
    delta = min(float(delta), v_profile.r_max)
    h, dh = _potential_pair(h0, h0_prime)
    omega = sphere_area(5)
    lhs = omega * radial_quadrature(
        v_profile, lambda r, v, dv: r**5 * (h(r) + 0.5 * r * dh(r)) * v * v, delta, 2 * GL_ORDER)
    v, dv = v_profile.evaluate(delta)
    hd = float(np.asarray(h(delta)))
    rhs = omega * delta**5 * (-0.5 * delta * dv**2 - 2.0 * v * dv + 0.5 * delta * hd * v**2 - delta / 3.0 * v**3)
    return PotentialPohozaevReport(delta, lhs, rhs, lhs - rhs)


def lp_norm(profile: Profile, exponent: float) -> float:
    """``||u||_{L^q(B_R)}`` with the radial measure ``omega_{N-1} r^{N-1} dr``."""
    if exponent < 1:
        raise ValueError("exponent must be at least 1")
    N = profile.problem.dimension
    val = sphere_area(N - 1) * radial_quadrature(
        profile, lambda r, u, du: r ** (N - 1) * np.abs(u) ** exponent, None, 2 * GL_ORDER)
    return val ** (1.0 / exponent)


def alpha_exponent(N: int, p: float) -> float:
    """``max(2*, N p / 2 - N)``."""
    return max(critical_exponent(N), 0.5 * N * p - N)


def monotonicity_audit(profile: Profile, subdivisions: int = 8) -> float:
    """Largest increase of ``E(r) = u'^2/2 + |u|^p/p - mu u^2/2`` between dense samples."""
    r = profile.fine_grid(subdivisions)
    E = energy_density(profile, r)
    jumps = np.diff(E)
    return float(max(0.0, np.max(jumps))) if len(jumps) else 0.0
