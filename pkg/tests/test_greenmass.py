import math

import numpy as np
import pytest

import oracles as o
from linni.errors import KernelError, UnsupportedDimension
from linni.greenmass import (
    closed_form_coefficient_dim3,
    exceptional_radius_dim3,
    green_closed_form_dim3,
    green_radial,
    kernel_margin,
    mass_at_origin,
    mass_closed_form_dim3,
    singular_coefficient,
)
from linni.radial_ode import read_metadata


# ---------------------------------------------------------- the profile


@pytest.mark.parametrize("R", [0.5, 1.2, 3.0])
def test_dim3_profile_matches_closed_form(R):
    g = green_radial(3, R)
    r = np.linspace(0.01 * R, R, 200)
    exact = o.green_dim3(r, R)
    assert np.max(np.abs(g.G(r) - exact) / np.abs(exact)) < 1e-8
    assert np.all(g.values > 0)


def test_dim3_closed_form_helpers_agree_with_oracle():
    for R in (0.8, 1.2, 3.0):
        assert closed_form_coefficient_dim3(R) == pytest.approx(o.green_coefficient_dim3(R), rel=1e-14)
        r = np.linspace(0.1, R, 5)
        assert np.allclose(green_closed_form_dim3(r, R), o.green_dim3(r, R), rtol=1e-14)
        assert mass_closed_form_dim3(R) == pytest.approx(o.MASS_DIM3[R], rel=1e-12)


def test_dim4_profile_matches_bessel():
    R = 1.5
    g = green_radial(4, R)
    for r in np.linspace(0.01 * R, R, 25):
        exact = float(o.green_dim4(r, R))
        assert float(g.G(r)) == pytest.approx(exact, rel=1e-8)


def test_constant_and_callable_potential_agree():
    a = green_radial(3, 1.3, 2.0)
    b = green_radial(3, 1.3, lambda r: 2.0 + 0.0 * np.asarray(r))
    r = np.linspace(0.05, 1.3, 30)
    assert np.max(np.abs(a.G(r) - b.G(r)) / a.G(r)) < 1e-10


def test_sampled_potential():
    rs = np.linspace(0.0, 2.0, 400)
    a = green_radial(3, 2.0, (rs, 1.0 + rs**2))
    b = green_radial(3, 2.0, lambda r: 1.0 + np.asarray(r) ** 2)
    r = np.linspace(0.05, 2.0, 20)
    assert np.max(np.abs(a.G(r) - b.G(r)) / b.G(r)) < 1e-7


@pytest.mark.parametrize("N", [3, 4, 5, 7])
def test_neumann_condition_and_singular_part(N):
    R = 1.1
    g = green_radial(N, R)
    assert abs(g.derivatives[-1]) < 1e-9 * abs(g.values[-1])
    # w = r^{N-2} G tends to the singular coefficient; in dimension 3 the gap is H r
    assert float(g.w(1e-5 * R)) == pytest.approx(singular_coefficient(N), rel=1e-4)
    assert float(g.w(1e-6 * R)) == pytest.approx(singular_coefficient(N), rel=1e-5)


@pytest.mark.parametrize("R", [0.3, 0.7, 1.2])
def test_small_balls_normalization_stable(R):
    """Halving the innermost radius leaves the profile unchanged."""
    a = green_radial(3, R)
    b = green_radial(3, R, r_min_factor=0.5e-6)
    r = np.linspace(0.01 * R, R, 20)
    assert np.max(np.abs(a.G(r) - b.G(r)) / a.G(r)) < 1e-6


def test_csv(tmp_path):
    g = green_radial(3, 1.0)
    path = tmp_path / "g.csv"
    g.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,G"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], g.grid)
    assert np.array_equal(data[:, 1], g.values)


# ------------------------------------------------------------------ mass


@pytest.mark.parametrize("R", sorted(o.MASS_DIM3))
def test_dim3_mass(R):
    m = mass_at_origin(green_radial(3, R))
    assert m.H == pytest.approx(o.MASS_DIM3[R], abs=1e-9)
    assert m.extrapolation_error < 1e-8


def test_dim3_mass_limits():
    assert mass_at_origin(green_radial(3, 0.5)).H > 0
    assert mass_at_origin(green_radial(3, 12.0)).H == pytest.approx(-1 / (4 * math.pi), abs=1e-9)


def test_dim3_sign_law():
    for R in np.linspace(0.4, 3.0, 50):
        H = mass_at_origin(green_radial(3, R)).H
        if abs(R - o.RSTAR) > 1e-3:
            assert np.sign(H) == np.sign(o.RSTAR - R)


@pytest.mark.parametrize("R", sorted(o.MASS_DIM4))
def test_dim4_mass(R):
    m = mass_at_origin(green_radial(4, R))
    assert m.H == pytest.approx(o.MASS_DIM4[R], abs=1e-7, rel=1e-8)
    assert m.alpha4 == pytest.approx(o.ALPHA_DIM4, rel=1e-6)
    assert m.extrapolation_error < 1e-6


@pytest.mark.parametrize("R", sorted(o.MASS_DIM5_R2))
def test_dim5_mass_vanishing_potential(R):
    m = mass_at_origin(green_radial(5, R, lambda r: np.asarray(r) ** 2))
    assert m.H == pytest.approx(o.MASS_DIM5_R2[R], rel=1e-7, abs=1e-9)
    assert m.extrapolation_error < 1e-6 * max(1.0, abs(m.H))
    again = mass_at_origin(green_radial(5, R, lambda r: np.asarray(r) ** 2, r_min_factor=0.5e-6))
    assert again.H == pytest.approx(m.H, rel=1e-9, abs=1e-9)


def test_dim5_mass_needs_flat_potential():
    with pytest.raises(UnsupportedDimension):
        mass_at_origin(green_radial(5, 1.0))


def test_dim6_mass_unsupported():
    with pytest.raises(UnsupportedDimension):
        mass_at_origin(green_radial(6, 1.0))


def test_mass_stable_under_inner_radius():
    a = mass_at_origin(green_radial(3, 2.0)).H
    b = mass_at_origin(green_radial(3, 2.0, r_min_factor=0.5e-6)).H
    assert abs(a - b) < 1e-8


def test_mass_result_write(tmp_path):
    m = mass_at_origin(green_radial(4, 1.0))
    m.write(tmp_path / "m.txt")
    meta = read_metadata(tmp_path / "m.txt")
    assert float(meta["H"]) == m.H
    assert "alpha4" in meta


# ------------------------------------------------------- exceptional radius


def test_exceptional_radius_closed_form():
    assert exceptional_radius_dim3() == pytest.approx(o.RSTAR, abs=1e-12)


def test_exceptional_radius_numerical():
    assert exceptional_radius_dim3(method="numerical") == pytest.approx(o.RSTAR, abs=1e-8)


def test_exceptional_radius_scaling():
    assert exceptional_radius_dim3(4.0) == pytest.approx(o.RSTAR / 2, abs=1e-12)


def test_mass_changes_sign_at_exceptional_radius():
    assert mass_at_origin(green_radial(3, o.RSTAR - 0.1)).H > 0
    assert mass_at_origin(green_radial(3, o.RSTAR + 0.1)).H < 0


def test_exceptional_radius_rejects():
    with pytest.raises(ValueError):
        exceptional_radius_dim3(0.0)
    with pytest.raises(ValueError):
        exceptional_radius_dim3(method="guess")


# ----------------------------------------------------------------- kernel


def test_kernel_detected():
    # -Delta - nu has a radial Neumann mode on the unit 3-ball when sqrt(nu) solves tan x = x
    nu = o.TAN_ROOTS[0] ** 2
    assert kernel_margin(3, 1.0, -nu) < 1e-8
    with pytest.raises(KernelError):
        green_radial(3, 1.0, -nu)


def test_kernel_margin_positive_mass():
    assert kernel_margin(3, 1.0, 1.0) > 0.1


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        green_radial(2, 1.0)
    with pytest.raises(ValueError):
        green_radial(3, 0.0)
