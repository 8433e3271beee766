import numpy as np
import pytest

from conftest import sample_flat, sample_sphere
from magtube import oracles as orc
from magtube.flow import (
    BlowUpError,
    ChartExitError,
    ComplexTime,
    FlowOpts,
    StepSizeError,
    flow_complex,
    flow_many,
    flow_real,
    hamiltonian_field,
    radius_estimate,
)
from magtube.geometry import (
    PhasePoint,
    energy,
    pointwise_geometry,
    twisted_symplectic_matrix,
)


# ---------------------------------------------------------------------------
# Hamiltonian vector field
# ---------------------------------------------------------------------------

def test_field_flat_unit(flat_geo):
    X = hamiltonian_field(flat_geo, PhasePoint([0, 0], [1, 0]))
    assert np.allclose(X, [1.0, 0.0, 0.0, -1.0])


def test_field_vanishes_on_zero_section(flat_geo, sphere_geo):
    for geo in (flat_geo, sphere_geo):
        X = hamiltonian_field(geo, PhasePoint([0.2, -0.1], [0, 0]))
        assert np.abs(X).max() == 0.0


def test_field_matches_symplectic_inversion(sphere_geo, rng):
    # X solves omega(X, .) = dE with dE from central finite differences
    h = 1e-6
    for row in sample_sphere(rng, 10):
        X = hamiltonian_field(sphere_geo, PhasePoint(row[:2], row[2:]))
        dE = np.zeros(4)
        for m in range(4):
            e = np.zeros(4)
            e[m] = h
            dE[m] = np.real(
                energy(sphere_geo, row[:2] + e[:2], row[2:] + e[2:])
                - energy(sphere_geo, row[:2] - e[:2], row[2:] - e[2:])
            ) / (2 * h)
        om = twisted_symplectic_matrix(sphere_geo, row[:2]).real
        assert np.abs(np.linalg.solve(om.T, dE) - X).max() < 1e-7


# ---------------------------------------------------------------------------
# real-time flow
# ---------------------------------------------------------------------------

def test_flow_real_quarter_turn(flat_geo):
    st = flow_real(flat_geo, PhasePoint([0, 0], [1, 0]), np.pi / 2)
    assert np.abs(st.as_vector() - np.array([1.0, -1.0, 0.0, -1.0])).max() < 1e-10


def test_flow_zero_time_is_identity(flat_geo, sphere_geo):
    for geo in (flat_geo, sphere_geo):
        z0 = PhasePoint([0.1, -0.05], [0.3, 0.2])
        st = flow_real(geo, z0, 0.0)
        assert np.abs(st.as_vector() - z0.as_vector()).max() == 0.0
        assert np.allclose(st.jac, np.eye(4))
        assert st.quad == 0.0


def test_flow_preserves_energy(sphere_geo, rng):
    for row in sample_sphere(rng, 5):
        z0 = PhasePoint(row[:2], row[2:])
        st = flow_real(sphere_geo, z0, 0.7)
        e0 = energy(sphere_geo, z0.x, z0.p)
        e1 = energy(sphere_geo, st.x, st.p)
        assert abs(e1 - e0) < 1e-10


def test_flow_group_law(flat_geo, rng):
    for row in sample_flat(rng, 5):
        s1, s2 = rng.uniform(-0.8, 0.8, 2)
        a = flow_real(flat_geo, PhasePoint(row[:2], row[2:]), s1)
        b = flow_real(flat_geo, a.phase_point, s2)
        c = flow_real(flat_geo, PhasePoint(row[:2], row[2:]), s1 + s2)
        assert np.abs(b.as_vector() - c.as_vector()).max() < 1e-9


def test_flow_is_symplectic(flat_geo, sphere_geo, rng):
    for geo, sampler in ((flat_geo, sample_flat), (sphere_geo, sample_sphere)):
        for row in sampler(rng, 4):
            st = flow_real(geo, PhasePoint(row[:2], row[2:]), 0.45)
            om0 = twisted_symplectic_matrix(geo, row[:2])
            om1 = twisted_symplectic_matrix(geo, st.x)
            assert np.abs(st.jac.T @ om1 @ st.jac - om0).max() < 1e-8
            assert st.det_min > 1e-6


def test_flow_real_stays_real(sphere_geo):
    st = flow_real(sphere_geo, PhasePoint([0.1, -0.05], [0.3, 0.2]), 0.6)
    assert st.is_real(1e-12)


def test_flow_real_requires_real_start(flat_geo):
    with pytest.raises(ValueError):
        flow_real(flat_geo, PhasePoint([0.1 + 0.2j, 0], [1, 0]), 0.5)


# ---------------------------------------------------------------------------
# complex-time flow
# ---------------------------------------------------------------------------

def test_flow_complex_reaches_complex_coordinates(flat_geo):
    st = flow_complex(flat_geo, PhasePoint([0, 0], [1, 0]), 1j)
    assert abs(st.x[0] - 1j * np.sinh(1.0)) < 1e-10
    assert abs(st.x[1] - (np.cosh(1.0) - 1.0)) < 1e-10
    assert abs(st.p[0] - np.cosh(1.0)) < 1e-10
    assert abs(st.p[1] + 1j * np.sinh(1.0)) < 1e-10


def test_flow_complex_zero_section(flat_geo_heavy, sphere_geo):
    # zero-section points are fixed; the tangent map is the block exponential
    for geo in (flat_geo_heavy, sphere_geo):
        x0 = np.array([0.2, -0.1])
        st = flow_complex(geo, PhasePoint(x0, [0, 0]), 0.3 + 0.8j)
        assert np.abs(st.x - x0).max() < 1e-12
        assert np.abs(st.p).max() < 1e-12
        ref = orc.zero_section_linearization(geo.beta(x0), 0.3 + 0.8j, geo.inv_metric(x0))
        assert np.abs(st.jac - ref).max() < 1e-9


def test_flow_complex_path_independent(flat_geo, sphere_geo, rng):
    for geo, sampler in ((flat_geo, sample_flat), (sphere_geo, sample_sphere)):
        row = sampler(rng, 1)[0]
        z0 = PhasePoint(row[:2], row[2:])
        a = flow_complex(geo, z0, ComplexTime(1j))
        b = flow_complex(geo, z0, ComplexTime(1j, (0.8 + 0.1j, 1j)))
        assert np.abs(a.as_vector() - b.as_vector()).max() < 1e-9


def test_flow_complex_inverse_consistency(flat_geo):
    from magtube.flow import _flow_complex_from

    z0 = PhasePoint([0.3, -0.2], [0.8, 0.4])
    t = ComplexTime(0.3 + 0.8j)
    out = flow_complex(flat_geo, z0, t)
    back = _flow_complex_from(
        flat_geo, np.concatenate([out.x, out.p]), t.reversed(), FlowOpts()
    )
    assert np.abs(back.as_vector() - z0.as_vector()).max() < 1e-8


def test_complex_time_validation():
    with pytest.raises(ValueError):
        ComplexTime(1.5j)  # outside the default disk of radius 1.25
    with pytest.raises(ValueError):
        ComplexTime(1j, (1.3 + 0.3j, 1j))  # waypoint outside the disk
    with pytest.raises(ValueError):
        ComplexTime(1j, (0.5, 0.9j))  # path must end at the target
    t = ComplexTime(1j, (0.5 + 0.2j, 1j))
    assert t.reversed().waypoints == (0.0, -0.5 - 0.2j, -1j)


# ---------------------------------------------------------------------------
# failure modes
# ---------------------------------------------------------------------------

def _tiny_validity_geometry():
    # analytic data with a complex singularity close to the real chart
    return pointwise_geometry(
        dim=2,
        inv_metric=lambda x: np.eye(2) / (1.0 - (x[0] ** 2 + x[1] ** 2)),
        beta=lambda x: np.array([[0.0, 1.0], [-1.0, 0.0]]),
        potential=lambda x: 0.5 * np.array([-x[1], x[0]]),
        chart_box=0.9,
        complex_radius=0.7,
        inv_metric_deriv=lambda x: np.einsum(
            "jk,l->jkl", np.eye(2), 2.0 * x / (1.0 - (x[0] ** 2 + x[1] ** 2)) ** 2
        ),
        name="tight",
    )


def test_chart_exit_detected(flat_geo_free):
    with pytest.raises(ChartExitError):
        flow_real(flat_geo_free, PhasePoint([0, 0], [80.0, 0]), 1.0)


def test_blow_up_detected():
    geo = _tiny_validity_geometry()
    with pytest.raises(BlowUpError):
        flow_complex(geo, PhasePoint([0.0, 0.0], [2.5, 0.0]), 1j,
                     FlowOpts(max_steps=2000))


def test_step_budget_exhaustion(flat_geo):
    with pytest.raises(StepSizeError):
        flow_real(flat_geo, PhasePoint([0, 0], [1, 0]), 1.0, FlowOpts(max_steps=3))


def test_flow_many_records_per_row_failures(flat_geo_free):
    Z = np.array(
        [[0.0, 0.0, 0.5, 0.0],
         [0.0, 0.0, 80.0, 0.0],   # exits the chart box
         [0.1, 0.1, -0.4, 0.2]]
    )
    res = flow_many(flat_geo_free, Z, 1.0)
    assert list(res.ok) == [True, False, True]
    assert res.reasons[1] == "CHART_EXIT"
    assert np.abs(res.x[0] - np.array([0.5, 0.0])).max() < 1e-12


def test_flow_many_matches_single(flat_geo, rng):
    Z = sample_flat(rng, 6)
    res = flow_many(flat_geo, Z, ComplexTime(1j))
    st = flow_complex(flat_geo, PhasePoint(Z[0, :2], Z[0, 2:]), 1j)
    assert np.abs(res.x[0] - st.x).max() < 1e-10
    assert np.abs(res.jac[0] - st.jac).max() < 1e-9


# ---------------------------------------------------------------------------
# guaranteed-radius estimate
# ---------------------------------------------------------------------------

def test_radius_estimate_value():
    assert radius_estimate(1.0, 1.0, float(np.exp(-1.2))) == pytest.approx(1.2)


def test_radius_estimate_boundary_warns():
    with pytest.warns(UserWarning):
        assert radius_estimate(2.0, 1.0, 1.0) == 0.0


def test_radius_estimate_diverges_near_fixed_point():
    r1 = radius_estimate(1.0, 1.0, 1e-4)
    r2 = radius_estimate(1.0, 1.0, 1e-12)
    assert r2 > r1 > 0
    assert radius_estimate(1.0, 1.0, 1e-300) > 600


def test_radius_estimate_rejects_bad_args():
    with pytest.raises(ValueError):
        radius_estimate(-1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        radius_estimate(1.0, 1.0, 0.0)
