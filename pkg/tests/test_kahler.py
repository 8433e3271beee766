import numpy as np
import pytest

from conftest import sample_flat, sample_sphere
from magtube import oracles as orc
from magtube.flow import FlowOpts
from magtube.geometry import PhasePoint
from magtube.kahler import (
    dbar_residual,
    holomorphic_extension,
    kappa1_flat,
    kappa2_flat,
    kde_residual,
    kde_residual_many,
    potential_f,
    potential_f_many,
    potential_sample,
    resolve_kappa1_coefficient,
    section_weight,
    theta_A_covector,
)
from magtube.structure import assemble_J, frame_at


# ---------------------------------------------------------------------------
# the generating scalar f
# ---------------------------------------------------------------------------

def test_f_vanishes_at_time_zero(flat_geo):
    z = PhasePoint([0.3, -0.1], [0.5, 0.2])
    assert abs(potential_f(flat_geo, z, 0.0)) < 1e-14


def test_f_real_time_closed_form(flat_geo, rng):
    for row in sample_flat(rng, 6):
        for sigma in (0.7, -0.4):
            got = potential_f(flat_geo, PhasePoint(row[:2], row[2:]), sigma)
            ref = orc.flat_f_sigma(1.0, 1.0, row, sigma)
            assert abs(got - ref) < 1e-11
            assert abs(got.imag) < 1e-11  # real for real times


def test_f_conjugation_symmetry(sphere_geo, rng):
    for row in sample_sphere(rng, 4):
        z = PhasePoint(row[:2], row[2:])
        fm = potential_f(sphere_geo, z, -1j)
        fp = potential_f(sphere_geo, z, 1j)
        assert abs(np.conj(fm) - fp) < 1e-8


def test_two_i_f_minus_i_closed_form(flat_geo, rng):
    # 2i f_{-i} = -B(uy - vx) + B coth(Bt)(v^2+y^2) - i B tanh(Bt/2)(uv + xy)
    for row in sample_flat(rng, 6):
        z1, z2 = orc.flat_complex_coordinates(1.0, 1.0, row)
        x, y, u, v = z1.real, z1.imag, z2.real, z2.imag
        ref = (
            -(u * y - v * x)
            + (v**2 + y**2) / np.tanh(1.0)
            - 1j * np.tanh(0.5) * (u * v + x * y)
        )
        got = 2j * potential_f(flat_geo, PhasePoint(row[:2], row[2:]), -1j)
        assert abs(got - ref) < 1e-10


def test_distinguished_point_value(flat_geo):
    got = 2j * potential_f(flat_geo, PhasePoint([0, 0], [1, 0]), -1j)
    assert abs(got - np.sinh(1.0)) < 1e-11


# ---------------------------------------------------------------------------
# defining differential equation
# ---------------------------------------------------------------------------

def test_kde_residual_flat(flat_geo, rng):
    Z = sample_flat(rng, 5, xmax=0.5, pmax=0.8)
    assert kde_residual_many(flat_geo, Z, 0.3).max() < 1e-6


def test_kde_residual_sphere(sphere_geo):
    z = PhasePoint([0.1, -0.05], [0.3, 0.2])
    assert kde_residual(sphere_geo, z, 0.2) < 1e-5


def test_kde_slope_at_zero(flat_geo):
    # f_0 = 0 and X_E f_0 = 0, so df/dsigma|_0 = theta^A(X_E) - E = E + A(gp)
    z = PhasePoint([0.4, -0.2], [0.7, 0.1])
    h = 1e-4
    slope = (
        potential_f(flat_geo, z, h) - potential_f(flat_geo, z, -h)
    ).real / (2 * h)
    from magtube.flow import field_components
    from magtube.geometry import energy

    xdot, _ = field_components(flat_geo, z.x, z.p)
    rhs = np.real(energy(flat_geo, z.x, z.p) + flat_geo.potential(z.x) @ xdot)
    assert abs(slope - rhs) < 1e-7


# ---------------------------------------------------------------------------
# dbar identity
# ---------------------------------------------------------------------------

def test_dbar_residual_flat(flat_geo, rng):
    for row in sample_flat(rng, 3, xmax=0.5, pmax=0.8):
        z = PhasePoint(row[:2], row[2:])
        frame_conj = frame_at(flat_geo, z, 1j).F.conj()
        assert dbar_residual(flat_geo, z, frame_conj) < 1e-6


def test_dbar_residual_sphere(sphere_geo):
    z = PhasePoint([0.1, -0.05], [0.3, 0.2])
    frame_conj = frame_at(sphere_geo, z, 1j).F.conj()
    assert dbar_residual(sphere_geo, z, frame_conj) < 1e-5


def test_theta_A_on_zero_section(sphere_geo):
    # theta = p dx vanishes at p = 0, leaving only the pullback of A
    z = PhasePoint([0.2, -0.1], [0.0, 0.0])
    cov = theta_A_covector(sphere_geo, z)
    assert np.allclose(cov[:2], sphere_geo.potential(z.x))
    assert np.abs(cov[2:]).max() == 0.0


# ---------------------------------------------------------------------------
# closed-form potentials on the plane
# ---------------------------------------------------------------------------

def test_kappa1_origin():
    assert kappa1_flat(1.0, 1.0, 0.0, 0.0) == 0.0


def test_kappa_small_field_series():
    # B coth(B/mf) -> mf + B^2/(3 mf) and B tanh(B/(2 mf)) -> B^2/(2 mf)
    mf = 1.0
    z1, z2 = 0.3 + 0.4j, -0.2 + 0.1j
    y, v = z1.imag, z2.imag
    x, u = z1.real, z2.real
    for B in (1e-4, 1e-2):
        expected = (
            -B * (u * y - v * x)
            + (mf + B**2 / (3 * mf)) * (v**2 + y**2)
            + 0.5 * (B**2 / (2 * mf)) * (x**2 - y**2 + u**2 - v**2)
        )
        assert kappa1_flat(B, mf, z1, z2) == pytest.approx(expected, abs=5 * B**4)
    # continuous through B = 0: the geodesic-case potential |Im z|^2 (mf = 1)
    assert kappa1_flat(0.0, mf, z1, z2) == pytest.approx(v**2 + y**2)


def test_kappa1_equals_2if_plus_g(flat_geo, rng):
    # kappa1 = 2i f_{-i} + g with g = (B/2) tanh(Bt/2)(z1^2 + z2^2): the sum
    # is real and matches the closed form with the resolved B/2 coefficient
    for row in sample_flat(rng, 5):
        z = PhasePoint(row[:2], row[2:])
        z1, z2 = orc.flat_complex_coordinates(1.0, 1.0, row)
        g = 0.5 * np.tanh(0.5) * (z1**2 + z2**2)
        val = 2j * potential_f(flat_geo, z, -1j) + g
        assert abs(val.imag) < 1e-10
        assert abs(val.real - kappa1_flat(1.0, 1.0, z1, z2)) < 1e-9


def test_kappa2_matches_engine(flat_geo, rng):
    for row in sample_flat(rng, 5):
        z1, z2 = orc.flat_complex_coordinates(1.0, 1.0, row)
        num = (2j * potential_f(flat_geo, PhasePoint(row[:2], row[2:]), -1j)).real
        assert abs(num - kappa2_flat(1.0, 1.0, z1, z2)) < 1e-10


def test_kappa1_coefficient_resolution(flat_geo, rng):
    z = PhasePoint([0.2, 0.1], [0.6, -0.3])
    acs = assemble_J(frame_at(flat_geo, z, 1j), flat_geo)
    coeff, residuals = resolve_kappa1_coefficient(1.0, 1.0, acs.J, sample_flat(rng, 6))
    assert coeff == 0.5
    assert residuals[0.5] < 1e-8
    assert residuals[1.0] > 1e-2  # the alternative candidate coefficient fails


# ---------------------------------------------------------------------------
# holomorphic extensions and weights
# ---------------------------------------------------------------------------

def test_extension_of_coordinates(flat_geo, rng):
    for row in sample_flat(rng, 4):
        z = PhasePoint(row[:2], row[2:])
        z1, z2 = orc.flat_complex_coordinates(1.0, 1.0, row)
        assert abs(holomorphic_extension(flat_geo, lambda x: x[0], z) - z1) < 1e-9
        assert abs(holomorphic_extension(flat_geo, lambda x: x[1], z) - z2) < 1e-9


def test_extension_fixes_zero_section(sphere_geo):
    z = PhasePoint([0.2, -0.1], [0.0, 0.0])
    val = holomorphic_extension(sphere_geo, lambda x: x[0] + 2 * x[1], z)
    assert abs(val - (0.2 - 0.2)) < 1e-12


def test_extension_is_ring_homomorphism(flat_geo):
    z = PhasePoint([0.3, -0.1], [0.5, 0.2])
    e1 = holomorphic_extension(flat_geo, lambda x: x[0], z)
    e2 = holomorphic_extension(flat_geo, lambda x: x[0] ** 2, z)
    assert abs(e2 - e1**2) < 1e-9


def test_section_weight_identities(flat_geo):
    z0 = PhasePoint([0.4, -0.1], [0.0, 0.0])
    assert abs(section_weight(flat_geo, z0, 1) - 1.0) < 1e-12
    z = PhasePoint([0.3, -0.1], [0.5, 0.2])
    w1 = section_weight(flat_geo, z, 1)
    w2 = section_weight(flat_geo, z, 2)
    assert abs(w2 - w1**2) < 1e-12
    with pytest.raises(ValueError):
        section_weight(flat_geo, z, 0)


def test_weight_modulus_is_heat_kernel_density(rng):
    # |weight|^2 = e^{-kappa2}; with B = lambda and mass_freq = 1/(2t) the
    # exponent is lambda(uy - vx) - lambda coth(2 lambda t)(v^2 + y^2)
    from magtube.geometry import make_flat_magnetic

    lam, tt = 0.7, 0.4
    geo = make_flat_magnetic(2, [[0.0, lam], [-lam, 0.0]], 1.0 / (2 * tt))
    for row in sample_flat(rng, 4, pmax=0.8):
        z = PhasePoint(row[:2], row[2:])
        w = section_weight(geo, z, 1)
        z1, z2 = orc.flat_complex_coordinates(lam, 1.0 / (2 * tt), row)
        x, y, u, v = z1.real, z1.imag, z2.real, z2.imag
        exponent = lam * (u * y - v * x) - lam / np.tanh(2 * lam * tt) * (v**2 + y**2)
        assert abs(abs(w) ** 2 - np.exp(exponent)) < 1e-10


def test_potential_sample_assembly(flat_geo):
    ps = potential_sample(flat_geo, PhasePoint([0.3, -0.1], [0.5, 0.2]))
    assert ps.conjugation_defect < 1e-10
    assert abs(ps.kappa2 - (2j * ps.f_minus_i).real) < 1e-14
    assert ps.kde_residual < 1e-6
    assert ps.dbar_residual < 1e-6


def test_potential_f_many_flags_failures(flat_geo):
    # at imaginary time the momentum grows like cosh; a tight cap trips it
    Z = np.array([[0.0, 0.0, 0.5, 0.0], [0.0, 0.0, 90.0, 0.0]])
    vals, ok, reasons = potential_f_many(flat_geo, Z, -1j, FlowOpts(p_cap=100.0))
    assert ok[0] and not ok[1]
    assert reasons[1] == "BLOWUP"
    assert np.isnan(vals[1].real)
