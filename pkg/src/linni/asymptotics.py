"""Bubbles, Sobolev constants, reduced energies and the blow-up classification.

Sphere areas follow the convention ``omega_n = |S^n|`` with ``S^n`` the unit
sphere of ``R^{n+1}`` (so ``omega_5 = pi^3``).  ``epsilon`` denotes the
distance to criticality ``p = 2* - epsilon``: ``epsilon > 0`` is the
subcritical regime.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DivergentMoment, RegimeError, UnsupportedDimension
from .radial_ode import Profile, _atomic_write, _fmt, critical_exponent

QUAD_TOLERANCE = 1e-10
REGIMES = ("sub", "crit", "super")


# ------------------------------------------------------------------ bubbles


@dataclass(frozen=True)
class BubbleParams:
    N: int
    lam: float
    p: Optional[float] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("concentration scale must be positive")
        if self.p is not None and not self.p > 2:
            raise ValueError("exponent must exceed 2")


def bubble(params: BubbleParams, r):
    """``B_lam(r) = (N(N-2))^{(N-2)/4} (lam/(lam^2 + r^2))^{(N-2)/2}``."""
    N, lam = params.N, params.lam
    r = np.asarray(r, dtype=float)
    return (N * (N - 2)) ** ((N - 2) / 4.0) * (lam / (lam**2 + r**2)) ** ((N - 2) / 2.0)


def bubble_modified(params: BubbleParams, r):
    """``lam^{(N-2)/2 - 2/(p-2)} B_lam(r)``; equals ``B_lam`` at ``p = 2*``."""
    if params.p is None:
        raise ValueError("the modified bubble needs an exponent")
    N, lam, p = params.N, params.lam, params.p
    return lam ** ((N - 2) / 2.0 - 2.0 / (p - 2.0)) * bubble(params, r)


def bubble_unit(N: int, r):
    """``B_0``: the bubble at scale 1."""
    return bubble(BubbleParams(N, 1.0), r)


def v0(N: int, r):
    """``(r^2 - 1)/(1 + r^2)^{N/2}``."""
    r = np.asarray(r, dtype=float)
    return (r**2 - 1.0) / (1.0 + r**2) ** (N / 2.0)


# --------------------------------------------------------------- constants


def sphere_area(n: int) -> float:
    """Area of the unit sphere ``S^n`` in ``R^{n+1}``."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def sphere_ratio(N: int) -> float:
    """``omega_{N-1}/omega_N = Gamma((N+1)/2) / (sqrt(pi) Gamma(N/2))``."""
    return math.gamma((N + 1) / 2.0) / (math.sqrt(math.pi) * math.gamma(N / 2.0))


def sphere_ratio_exact(N: int) -> Fraction:
    """``omega_{N-1}/omega_N`` as a fraction, for even ``N``.

    ``Gamma(N/2) = (N/2 - 1)!`` and ``Gamma((N+1)/2) = (N-1)!! sqrt(pi) / 2^{N/2}``.
    """
    if N % 2:
        raise ValueError("the ratio is rational only for even N")
    m = N // 2
    return Fraction(math.prod(range(N - 1, 0, -2)), 2**m * math.factorial(m - 1))


def sobolev_constant(N: int) -> float:
    """Sharp constant ``K_N = sqrt(4/(N(N-2) omega_N^{2/N}))``."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    return math.sqrt(4.0 / (N * (N - 2) * sphere_area(N) ** (2.0 / N)))


def _half_line(f, panels: Optional[int] = None, order: int = 16) -> float:
    """``int_0^inf f(x) dx`` through ``x = s/(1-s)``.

    ``panels=None`` uses adaptive Gauss-Kronrod; otherwise a composite
    Gauss-Legendre rule with ``panels`` equal pieces of ``order`` nodes.
    """

    def g(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        ok = s < 1.0
        x = s[ok] / (1.0 - s[ok])
        out[ok] = f(x) / (1.0 - s[ok]) ** 2
        return out

    if panels is None:
        val, _ = integrate.quad(lambda s: float(g(np.array([s]))[0]), 0.0, 1.0,
                                epsabs=QUAD_TOLERANCE, epsrel=1e-13, limit=500)
        return float(val)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return float(np.sum(w * g(s)))


def _radial_integral(N: int, f, panels=None) -> float:
    """``int_{R^N} f(|x|) dx``."""
    return sphere_area(N - 1) * _half_line(lambda r: r ** (N - 1) * f(r), panels)


@lru_cache(maxsize=None)
def mass_2star(N: int, panels: Optional[int] = None) -> float:
    """``int_{R^N} B_0^{2*} dx`` by quadrature (equals ``K_N^{-N}``)."""
    q = critical_exponent(N)
    return _radial_integral(N, lambda r: bubble_unit(N, r) ** q, panels)


@lru_cache(maxsize=None)
def c1_moment(N: int, panels: Optional[int] = None) -> float:
    """``C_1(N) = int_{R^N} B_0^2 dx``, finite for ``N >= 5``."""
    if N <= 4:
        raise DivergentMoment(f"int B_0^2 diverges for N={N}")
    return _radial_integral(N, lambda r: bubble_unit(N, r) ** 2, panels)


def bubble_moments(N: int, panels: Optional[int] = None) -> dict:
    """``{"mass_2star": ..., "C1": ... or None}``; ``C1`` only for ``N >= 5``."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    return {"mass_2star": mass_2star(N, panels), "C1": c1_moment(N, panels) if N >= 5 else None}


def c1_closed_form(N: int) -> float:
    """``C_1(N) = omega_{N-1} (N(N-2))^{(N-2)/2} B(N/2, N/2-2) / 2`` for ``N >= 5``."""
    if N <= 4:
        raise DivergentMoment(f"int B_0^2 diverges for N={N}")
    beta = math.gamma(N / 2.0) * math.gamma(N / 2.0 - 2.0) / math.gamma(N - 2.0)
    return sphere_area(N - 1) * (N * (N - 2)) ** ((N - 2) / 2.0) * 0.5 * beta


@lru_cache(maxsize=None)
def beta_log_integral(N: int, panels: Optional[int] = None) -> float:
    """``int_0^inf r^{(N-2)/2} ln(1+r)/(1+r)^N dr`` (computed with ``r = x^2``)."""
    return _half_line(lambda x: 2.0 * x ** (N - 1) * np.log1p(x * x) / (1.0 + x * x) ** N, panels)


@lru_cache(maxsize=None)
def beta_constant(N: int, panels: Optional[int] = None) -> float:
    """Energy-expansion constant ``beta_N``: quadrature term plus closed algebraic part."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    quad = 2.0 ** (N - 3) * (N - 2) ** 2 * sphere_ratio(N) * beta_log_integral(N, panels)
    closed = (N - 2) ** 2 / (4.0 * N) * (1.0 - 2.0 * N * math.log(math.sqrt(N * (N - 2))))
    return quad + closed


def constants_table(N_values=range(3, 9)) -> list:
    """Rows ``(name, N, value, method, tolerance)`` of the computed constants."""
    rows = []
    for N in N_values:
        rows.append(("K_N", N, sobolev_constant(N), "closed_form", 0.0))
        rows.append(("mass_2star", N, mass_2star(N), "quadrature", QUAD_TOLERANCE))
        if N >= 5:
            rows.append(("C1", N, c1_moment(N), "quadrature", QUAD_TOLERANCE))
        rows.append(("beta_N", N, beta_constant(N), "quadrature", QUAD_TOLERANCE))
        rows.append(("omega_ratio", N, sphere_ratio(N), "gamma", 0.0))
    return rows


def write_constants_csv(path, N_values=range(3, 9)) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "N", "value", "method", "tolerance"])
    for name, N, value, method, tol in constants_table(N_values):
        writer.writerow([name, N, _fmt(float(value)), method, _fmt(float(tol))])
    _atomic_write(Path(path), buf.getvalue())


# ---------------------------------------------------------- reduced energy


def c5(N: int, u0_center: float) -> float:
    """The linear reduced-energy coefficient, with its dimension indicators.

    ``(1/N) K_N^{-N} ( 2(N-1)/((N-2)(N-4)) [N >= 6]
    - 2^N u0(0) omega_{N-1} / ((N(N-2))^{(N-2)/4} omega_N) [N <= 6] )``.
    For ``N = 6`` the bracket is evaluated in exact rational arithmetic, so
    the sign change at ``u0(0) = 1/2`` is exact.
    """
    if N < 3:
        raise ValueError("dimension must be at least 3")
    if u0_center < 0:
        raise ValueError("u0_center must be nonnegative")
    pref = sobolev_constant(N) ** (-N) / N
    if N == 6:
        # (N(N-2))^{(N-2)/4} = 24 and omega_5/omega_6 = 15/16
        ratio = sphere_ratio_exact(6)
        u = Fraction(u0_center)
        bracket = Fraction(2 * 5, 4 * 2) - Fraction(2**6) * u * ratio / 24
        return pref * float(bracket)
    first = 2.0 * (N - 1) / ((N - 2) * (N - 4)) if N >= 6 else 0.0
    second = 0.0
    if N <= 6:
        second = 2.0**N * u0_center * sphere_ratio(N) / (N * (N - 2)) ** ((N - 2) / 4.0)
    return pref * (first - second)


def lambda_eps(N: int, eps: float, t: float, u0_zero: bool) -> float:
    """Concentration scale of the ansatz as a function of ``t`` and ``epsilon``."""
    e = abs(eps)
    if e == 0 or e >= 1:
        raise ValueError("need 0 < |epsilon| < 1")
    if not t > 0:
        raise ValueError("t must be positive")
    if N == 3:
        return (e * t) ** 2
    if N == 4:
        return math.sqrt(e / math.log(1.0 / e)) * t if u0_zero else e * t
    if N == 5 and not u0_zero:
        return (e * t) ** (2.0 / 3.0)
    return math.sqrt(e * t)


def _scale_exponent(N: int, u0_zero: bool) -> float:
    """``d ln lambda / d ln t`` for the scaling above."""
    if N == 3:
        return 2.0
    if N == 4:
        return 1.0
    if N == 5 and not u0_zero:
        return 2.0 / 3.0
    return 0.5


def c4(N: int, u0_zero: bool = False) -> float:
    """Coefficient of ``epsilon ln(1/t)``: ``(1/N) K_N^{-N} ((N-2)/2)^2 d ln lambda / d ln t``."""
    return sobolev_constant(N) ** (-N) / N * ((N - 2) / 2.0) ** 2 * _scale_exponent(N, u0_zero)


def _sign(regime: str) -> float:
    if regime == "sub":
        return 1.0
    if regime == "super":
        return -1.0
    raise RegimeError(f"reduced energy needs regime 'sub' or 'super', got {regime!r}")


@dataclass(frozen=True)
class ReducedEnergyModel:
    """Reduced energy divided by ``epsilon`` with ``t``-independent terms dropped.

    ``c5`` holds the effective coefficient of ``|epsilon| t``.  For ``N = 5``
    with ``u0 = 0`` the scale ``lambda = sqrt(|eps| t)`` turns the ``lambda^2``
    term into an order-``epsilon`` contribution, which the indicator in
    :func:`c5` leaves out; the model adds it back.
    """

    N: int
    regime: str
    u0_center: float
    special_N4_typeB: bool
    c4: float
    c5: float
    t0: Optional[float]

    @classmethod
    def build(cls, N: int, regime: str, u0_center: float = 0.0) -> "ReducedEnergyModel":
        s = _sign(regime)
        u0_zero = u0_center == 0
        if N == 4 and u0_zero:
            t0 = 1.0 / math.sqrt(3.0) if s > 0 else None
            return cls(N, regime, 0.0, True, 1.0, 1.5, t0)
        k4 = c4(N, u0_zero)
        k5 = c5(N, u0_center)
        if N == 5 and u0_zero:
            k5 += sobolev_constant(N) ** (-N) / N * 2.0 * (N - 1) / ((N - 2) * (N - 4))
        t0 = k4 / (s * k5) if s * k5 > 0 else None
        return cls(N, regime, float(u0_center), False, k4, k5, t0)

    @property
    def sign(self) -> float:
        return _sign(self.regime)

    def energy(self, t):
        t = np.asarray(t, dtype=float)
        if self.special_N4_typeB:
            return np.log(1.0 / t) + self.sign * 1.5 * t**2
        return self.c4 * np.log(1.0 / t) + self.sign * self.c5 * t

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.special_N4_typeB:
            return -1.0 / t + self.sign * 3.0 * t
        return -self.c4 / t + self.sign * self.c5


def reduced_energy(model: ReducedEnergyModel, t):
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")
    return model.energy(t)


def critical_point(model: ReducedEnergyModel) -> Optional[float]:
    return model.t0


def t0_existence_map(N_values=range(3, 9), u0_values=(0.0, 0.3, 0.5, 0.7, 1.0)) -> dict:
    """``{(N, regime, u0): bool}`` telling whether the reduced energy has a critical point."""
    return {
        (N, regime, u0): ReducedEnergyModel.build(N, regime, u0).t0 is not None
        for N in N_values for regime in ("sub", "super") for u0 in u0_values
    }


# ---------------------------------------------------------------- blow-up


def mu_from_center(N: int, p: float, u_center: float) -> float:
    """Concentration scale read off the maximum: ``(N(N-2))^{(N-2)(p-2)/8} u(0)^{-(p-2)/2}``."""
    if not p > 2:
        raise ValueError("exponent must exceed 2")
    if not u_center > 0:
        raise ValueError("u_center must be positive")
    return (N * (N - 2)) ** ((N - 2) * (p - 2) / 8.0) * u_center ** (-(p - 2) / 2.0)


def decomposition_residual(profile: Profile, u0_profile: Optional[Profile], mu: float,
                           kappa: int = 1) -> float:
    """Weighted sup-residual of ``u - u0 - kappa * B~_mu`` on the profile grid.

    The weight is ``||u0||_inf + B~_mu(r) + mu^{N-2-2/(p-2)}``; ``u0_profile``
    of ``None`` means ``u0 = 0``.
    """
    if kappa not in (1, -1):
        raise ValueError("kappa must be +1 or -1")
    prob = profile.problem
    N, p = prob.dimension, prob.exponent
    r = profile.grid
    u = profile.values
    if u0_profile is None:
        u0 = np.zeros_like(r)
        u0_sup = 0.0
    else:
        if u0_profile.problem.dimension != N or abs(u0_profile.r_max - profile.r_max) > 1e-12 * profile.r_max:
            raise ValueError("profile and u0_profile must share dimension and radius")
        u0 = u0_profile.u(r)
        u0_sup = float(np.max(np.abs(u0_profile.u(u0_profile.fine_grid(4)))))
    bt = bubble_modified(BubbleParams(N, mu, p), r)
    weight = u0_sup + bt + mu ** (N - 2 - 2.0 / (p - 2.0))
    return float(np.max(np.abs(u - u0 - kappa * bt) / weight))


def tower_ratio_prediction(N: int, p: float, ratios) -> list:
    """Implied constants ``C_i = ratio^{(N-2)/2} / (p - 2*)`` for candidate scale ratios."""
    if not 3 <= N <= 6:
        raise UnsupportedDimension("the tower ratio law concerns 3 <= N <= 6")
    gap = p - critical_exponent(N)
    if gap <= 0:
        raise RegimeError("the tower ratio law needs p > 2*")
    return [float(r) ** ((N - 2) / 2.0) / gap for r in ratios]


# ------------------------------------------------------- classification

NONE, TYPE_B, U0_PLUS_B, TOWERS = "none", "B", "u0_plus_B", "towers_possible"


@dataclass(frozen=True)
class ClassificationEntry:
    """One assertion of the blow-up classification.

    ``kind`` is ``excluded`` (only ``allowed`` can happen), ``occurs`` (a
    construction exists) or ``expected`` (towers might exist).  ``u0_interval``
    ``(lo, hi, lo_closed, hi_closed)`` restricts ``u0(0)`` when relevant;
    ``radius`` is ``"<R*"``, ``">R*"``, ``"!=R*"``, ``"large"``, ``"small"``
    or ``"not R_l"``; ``external`` marks results proved elsewhere.
    """

    N: int
    regime: str
    statement: str
    kind: str
    allowed: frozenset
    conditions: tuple = ()
    u0_interval: Optional[tuple] = None
    radius: Optional[str] = None
    external: bool = False

    def admits_u0(self, u0: float) -> bool:
        if self.u0_interval is None:
            return True
        lo, hi, lo_closed, hi_closed = self.u0_interval
        above = u0 >= lo if lo_closed else u0 > lo
        below = u0 <= hi if hi_closed else u0 < hi
        return above and below

    def radius_holds(self, R: float) -> Optional[bool]:
        """Evaluate a radius condition against the dimension-3 exceptional radius."""
        if self.radius is None:
            return True
        if self.radius in ("<R*", ">R*", "!=R*"):
            from .greenmass import exceptional_radius_dim3

            rs = exceptional_radius_dim3(1.0)
            return {"<R*": R < rs, ">R*": R > rs, "!=R*": R != rs}[self.radius]
        return None


def _entries():
    E = ClassificationEntry
    inf = math.inf
    pos = (0.0, inf, False, True)
    table = []
    # dimension 3
    table += [
        E(3, "sub", "no blow-up if R < R*", "excluded", frozenset({NONE}), ("R < R*",), radius="<R*"),
        E(3, "sub", "single bubble only", "excluded", frozenset({TYPE_B, U0_PLUS_B})),
        E(3, "sub", "only type B is possible", "excluded", frozenset({TYPE_B})),
        E(3, "sub", "type B occurs for large R", "occurs", frozenset({TYPE_B}), ("R large",),
          (0.0, 0.0, True, True), "large", True),
        E(3, "crit", "no blow-up (R = R* open)", "excluded", frozenset({NONE}), ("R != R*",), radius="!=R*"),
        E(3, "super", "towers might exist", "expected", frozenset({TOWERS})),
        E(3, "super", "no type B if R > R*", "excluded", frozenset({U0_PLUS_B, TOWERS}), ("R > R*",),
          radius=">R*"),
        E(3, "super", "type B occurs for small R", "occurs", frozenset({TYPE_B}), ("R small",),
          (0.0, 0.0, True, True), "small", True),
        E(3, "super", "type u0+B with u0 > 0 occurs", "occurs", frozenset({U0_PLUS_B}), ("u0 > 0",), pos),
    ]
    for N in (4, 5):
        table += [
            E(N, "sub", "single bubble only", "excluded", frozenset({TYPE_B, U0_PLUS_B})),
            E(N, "sub", "only type B is possible", "excluded", frozenset({TYPE_B}), ("u0 = 0",),
              (0.0, 0.0, True, True)),
            E(N, "sub", "type B occurs", "occurs", frozenset({TYPE_B}), ("u0 = 0",), (0.0, 0.0, True, True)),
            E(N, "crit", "no blow-up", "excluded", frozenset({NONE})),
            E(N, "super", "towers might exist", "expected", frozenset({TOWERS})),
            E(N, "super", "no type B", "excluded", frozenset({U0_PLUS_B, TOWERS}), ("u0 > 0",), pos),
            E(N, "super", "type u0+B with u0 > 0 occurs", "occurs", frozenset({U0_PLUS_B}), ("u0 > 0",), pos),
        ]
    table += [
        E(6, "sub", "single bubble only", "excluded", frozenset({TYPE_B, U0_PLUS_B})),
        E(6, "sub", "only type u0+B with u0(0) <= 1/2 is possible", "excluded",
          frozenset({TYPE_B, U0_PLUS_B}), ("u0(0) <= 1/2",), (0.0, 0.5, True, True)),
        E(6, "sub", "type u0+B with u0(0) < 1/2 occurs", "occurs", frozenset({TYPE_B, U0_PLUS_B}),
          ("u0(0) < 1/2",), (0.0, 0.5, True, False)),
        E(6, "crit", "no blow-up (R = R_l open)", "excluded", frozenset({NONE}), ("R not in {R_l}",),
          radius="not R_l"),
        E(6, "super", "towers might exist", "expected", frozenset({TOWERS})),
        E(6, "super", "only type u0+B with u0(0) >= 1/2 is possible", "excluded",
          frozenset({U0_PLUS_B, TOWERS}), ("u0(0) >= 1/2",), (0.5, inf, True, True)),
        E(6, "super", "type u0+B with u0(0) > 1/2 occurs", "occurs", frozenset({U0_PLUS_B}),
          ("u0(0) > 1/2",), (0.5, inf, False, True)),
    ]
    table += [
        E(7, "sub", "towers might exist", "expected", frozenset({TOWERS})),
        E(7, "sub", "type B occurs", "occurs", frozenset({TYPE_B}), ("u0 = 0",), (0.0, 0.0, True, True)),
        E(7, "sub", "type u0+B with u0 > 0 occurs", "occurs", frozenset({U0_PLUS_B}), ("u0 > 0",), pos),
        E(7, "crit", "no blow-up", "excluded", frozenset({NONE})),
        E(7, "super", "no blow-up", "excluded", frozenset({NONE})),
    ]
    return tuple(table)


_TABLE = _entries()


def classify_blowup(N: int, regime: str) -> list:
    """Rows of the classification for dimension ``N`` (rows for 7 cover all ``N >= 7``)."""
    if N < 3:
        raise ValueError("dimension must be at least 3")
    if regime not in REGIMES:
        raise RegimeError(f"regime must be one of {REGIMES}")
    key = min(N, 7)
    from dataclasses import replace

    return [replace(e, N=N) for e in _TABLE if e.N == key and e.regime == regime]


def construction_consistent(N: int, regime: str, u0_values=(0.0, 0.3, 0.5, 0.7, 1.0)) -> bool:
    """No ``occurs``/``excluded`` row contradicts the reduced-energy critical point.

    Rows proved elsewhere (``external``) or depending on ``R`` are skipped.
    """
    if regime == "crit":
        return True
    rows = [e for e in classify_blowup(N, regime) if not e.external and e.radius is None]
    for u0 in u0_values:
        exists = ReducedEnergyModel.build(N, regime, u0).t0 is not None
        for e in rows:
            if e.kind == "occurs" and e.admits_u0(u0) and not exists:
                return False
            if e.kind == "excluded" and NONE in e.allowed and exists:
                return False
            if e.kind == "excluded" and e.u0_interval is not None and not e.admits_u0(u0) and exists:
                return False
    return True
