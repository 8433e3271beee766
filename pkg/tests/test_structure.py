import dataclasses

import numpy as np
import pytest

from conftest import sample_flat, sample_sphere
from magtube import oracles as orc
from magtube.flow import flow_complex
from magtube.geometry import PhasePoint, twisted_symplectic_matrix
from magtube.structure import (
    acs_point,
    assemble_J,
    frame_at,
    frames_at_many,
    integrability_residual,
    normalized_zero_section_frame_change,
    orthonormalize,
    positivity_matrix,
    subspace_distance,
    transversality_check,
)


# ---------------------------------------------------------------------------
# frame transport
# ---------------------------------------------------------------------------

def test_frame_at_time_zero_is_vertical(flat_geo):
    fr = frame_at(flat_geo, PhasePoint([0.3, 0.1], [0.5, -0.2]), 0.0)
    vertical = np.vstack([np.zeros((2, 2)), np.eye(2)])
    assert subspace_distance(fr.F, vertical) < 1e-12


def test_frame_matches_flat_closed_form(flat_geo, rng):
    Fo = orc.flat_frame_columns(1.0, 1.0, 1j)
    for row in sample_flat(rng, 5):
        fr = frame_at(flat_geo, PhasePoint(row[:2], row[2:]), 1j)
        assert subspace_distance(fr.F, Fo) < 1e-9
        assert fr.inverse_residual < 1e-8


def test_frame_on_zero_section_matches_block_exponential(sphere_geo):
    x0 = np.array([0.15, -0.1])
    for t in (1j, 0.3 + 0.8j):
        fr = frame_at(sphere_geo, PhasePoint(x0, [0, 0]), t)
        ref = orc.zero_section_frame(sphere_geo.beta(x0), t, sphere_geo.inv_metric(x0))
        assert subspace_distance(fr.F, ref) < 1e-9


def test_frames_at_many_agrees_with_single(flat_geo, rng):
    Z = sample_flat(rng, 4)
    F, ok, reasons, inv = frames_at_many(flat_geo, Z, 1j)
    assert ok.all()
    fr0 = frame_at(flat_geo, PhasePoint(Z[0, :2], Z[0, 2:]), 1j)
    assert subspace_distance(F[0], fr0.F) < 1e-9


def test_conjugate_frame_spans_conjugate_time(sphere_geo):
    z = PhasePoint([0.1, -0.05], [0.3, 0.2])
    fp = frame_at(sphere_geo, z, 0.2 + 0.9j)
    fm = frame_at(sphere_geo, z, 0.2 - 0.9j)
    assert subspace_distance(fp.F.conj(), fm.F) < 1e-9


# ---------------------------------------------------------------------------
# transversality
# ---------------------------------------------------------------------------

def test_transversality_zero_at_real_time(flat_geo):
    fr = frame_at(flat_geo, PhasePoint([0.2, 0.1], [0.6, -0.3]), 0.5)
    assert transversality_check(fr) < 1e-8


def test_transversality_positive_in_tube(sphere_geo, rng):
    for row in sample_sphere(rng, 5):
        fr = frame_at(sphere_geo, PhasePoint(row[:2], row[2:]), 1j)
        assert transversality_check(fr) > 1e-3


def test_conjugate_pair_determinant(flat_geo_heavy):
    # raw transported columns: det[F, conj F] = -4 sinh^2(Btilde)/B^2
    st = flow_complex(flat_geo_heavy, PhasePoint([0.0, 0.0], [0.0, 0.0]), 1j)
    Fraw = st.jac[:, 2:]
    det = np.linalg.det(np.concatenate([Fraw, Fraw.conj()], axis=1))
    assert abs(det - (-4 * np.sinh(2.0) ** 2)) < 1e-8


# ---------------------------------------------------------------------------
# the almost complex structure
# ---------------------------------------------------------------------------

def test_assemble_J_properties(flat_geo, sphere_geo, rng):
    cases = [(flat_geo, sample_flat), (sphere_geo, sample_sphere)]
    for geo, sampler in cases:
        for row in sampler(rng, 3):
            z = PhasePoint(row[:2], row[2:])
            acs = acs_point(geo, z, 1j)
            assert np.abs(acs.J @ acs.J + np.eye(4)).max() < 1e-7
            assert acs.imag_residual < 1e-7
            om = twisted_symplectic_matrix(geo, z.x).real
            assert np.abs(acs.J.T @ om @ acs.J - om).max() < 1e-7
            assert acs.positivity_spectrum.min() > 0
            # compatibility metric omega(X, JX) is positive definite
            sym = om @ acs.J
            assert np.linalg.eigvalsh(0.5 * (sym + sym.T)).min() > 0


def test_assemble_J_rejects_degenerate_frame(flat_geo):
    fr = frame_at(flat_geo, PhasePoint([0.2, 0.1], [0.6, -0.3]), 0.5)  # real time
    with pytest.raises(np.linalg.LinAlgError):
        assemble_J(fr, flat_geo)


def test_conjugate_time_gives_opposite_J(sphere_geo):
    z = PhasePoint([0.1, -0.05], [0.3, 0.2])
    a = acs_point(sphere_geo, z, 0.3 + 0.8j)
    b = acs_point(sphere_geo, z, 0.3 - 0.8j)
    assert np.abs(a.J + b.J).max() < 1e-8


def test_positivity_zero_section_free_case():
    # beta = 0, mass_freq = 0.5: the Hermitian form on the transported
    # vertical columns is 2 tau g = (2 tau / mass_freq) I
    from magtube.geometry import make_flat_magnetic

    geo = make_flat_magnetic(2, np.zeros((2, 2)), 0.5)
    tau = 0.8
    st = flow_complex(geo, PhasePoint([0.1, 0.2], [0, 0]), 1j * tau)
    F = st.jac[:, 2:]
    M = positivity_matrix(geo, PhasePoint([0.1, 0.2], [0, 0]), F)
    assert np.abs(M - (2 * tau / 0.5) * np.eye(2)).max() < 1e-9


def test_positivity_zero_section_general_field(flat_geo_heavy, sphere_geo):
    # normalized coordinates: i F* Om F = 2 tau (e^{2 i tau beta}-1)/(2 i tau beta)
    for geo in (flat_geo_heavy, sphere_geo):
        x0 = np.array([0.12, -0.2]) * (1.0 if geo is flat_geo_heavy else 0.5)
        T, btil = normalized_zero_section_frame_change(geo, x0)
        L = T[:2, :2]
        for t in (1j, 0.3 + 0.8j):
            st = flow_complex(geo, PhasePoint(x0, [0, 0]), t)
            Fn = T @ st.jac[:, 2:] @ L.T
            om_t = np.block([[-btil, np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
            M = 1j * Fn.conj().T @ om_t @ Fn
            ref = orc.zero_section_positivity_matrix(btil, t)
            assert np.abs(M - ref).max() < 1e-8
            assert np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min() > 0


def test_totally_real_zero_section(flat_geo, sphere_geo):
    # no (1,0) vector is tangent to the zero-section: the vertical block of
    # the frame is uniformly nonsingular, and J kicks horizontal vectors out
    for geo in (flat_geo, sphere_geo):
        x0 = np.array([0.1, -0.08])
        fr = frame_at(geo, PhasePoint(x0, [0, 0]), 1j)
        assert np.linalg.svd(fr.F[2:], compute_uv=False)[-1] > 1e-6
        acs = assemble_J(fr, geo)
        Eh = np.vstack([np.eye(2), np.zeros((2, 2))])
        assert np.linalg.svd(np.hstack([Eh, acs.J @ Eh]), compute_uv=False)[-1] > 1e-6


def test_gauge_invariance(sphere_geo, rng):
    z = PhasePoint([0.1, -0.05], [0.3, 0.2])
    fr = frame_at(sphere_geo, z, 1j)
    acs = assemble_J(fr, sphere_geo)
    for _ in range(5):
        G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        fr2 = dataclasses.replace(fr, F=orthonormalize(fr.F @ G))
        acs2 = assemble_J(fr2, sphere_geo)
        assert np.abs(acs2.J - acs.J).max() < 1e-9
        assert np.abs(acs2.positivity_spectrum - acs.positivity_spectrum).max() < 1e-9
        assert abs(acs2.transversality - acs.transversality) < 1e-9


# ---------------------------------------------------------------------------
# involutivity of the distribution
# ---------------------------------------------------------------------------

def test_integrability_flat(flat_geo):
    res = integrability_residual(flat_geo, PhasePoint([0.2, 0.1], [0.6, -0.3]), 1j)
    assert res < 1e-6  # frames are constant in the chart for a constant field


def test_integrability_real_time(sphere_geo):
    # pushforward of the vertical distribution by a real diffeomorphism
    res = integrability_residual(sphere_geo, PhasePoint([0.1, -0.05], [0.25, 0.15]), 0.4)
    assert res < 1e-6


def test_integrability_sphere_complex_time(sphere_geo):
    for t in (1j, 0.3 + 0.8j):
        res = integrability_residual(sphere_geo, PhasePoint([0.1, -0.05], [0.3, 0.2]), t)
        assert res < 1e-4


# ---------------------------------------------------------------------------
# linear-algebra helpers
# ---------------------------------------------------------------------------

def test_subspace_distance_extremes():
    a = np.vstack([np.eye(2), np.zeros((2, 2))]).astype(complex)
    b = np.vstack([np.zeros((2, 2)), np.eye(2)]).astype(complex)
    assert subspace_distance(a, a) < 1e-14
    assert subspace_distance(a, b) == pytest.approx(1.0)


def test_orthonormalize_phase_convention(rng):
    F = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    Q = orthonormalize(F)
    assert np.abs(Q.conj().T @ Q - np.eye(2)).max() < 1e-12
    # canonical phase: idempotent, and invariant under positive rescalings
    assert np.abs(orthonormalize(Q) - Q).max() < 1e-12
    Q2 = orthonormalize(F @ np.diag([2.0, 0.3]))
    assert np.abs(Q - Q2).max() < 1e-12
    # complex rescalings only rotate column phases, never mix the span
    Q3 = orthonormalize(F @ np.diag([2.0 + 1.0j, -0.3j]))
    assert subspace_distance(Q3, Q) < 1e-12
    assert np.abs(np.abs(Q3) - np.abs(Q)).max() < 1e-12
