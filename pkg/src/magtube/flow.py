"""Twisted Hamiltonian flow in real and complex time.

The equations of motion in a chart are

    dx^l/ds = g^{lj}(x) p_j
    dp_l/ds = -(1/2) dg^{jk}/dx^l p_j p_k + beta_{lj}(x) g^{jk}(x) p_k

integrated together with the first variational equation dJ/ds = DX(z) J for
the transported tangent map and the line integral dq/ds = A_j(x) dx^j/ds of
the vector potential along the base trajectory.

Complex time: the system is integrated along a polyline in the complex time
disk; since the right-hand side is holomorphic the result is path independent
wherever the continuation exists, which the verification suite checks rather
than assumes.  The integrator is an embedded Dormand-Prince 5(4) pair acting
on the complexified state, shared-stepsize over an optional batch axis with
per-row failure masking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import ChartedGeometry, PhasePoint

__all__ = [
    "ComplexTime",
    "FlowOpts",
    "FlowState",
    "BatchFlowResult",
    "FlowError",
    "BlowUpError",
    "ChartExitError",
    "StepSizeError",
    "hamiltonian_field",
    "field_components",
    "flow_real",
    "flow_complex",
    "flow_many",
    "radius_estimate",
]

DISK_RADIUS_DEFAULT = 1.25  # 1 + epsilon with the default epsilon = 0.25

REASON_BLOWUP = "BLOWUP"
REASON_CHART_EXIT = "CHART_EXIT"
REASON_TOL = "TOL"


class FlowError(RuntimeError):
    reason = "FLOW"

    def __init__(self, msg, time=None):
        super().__init__(msg)
        self.time = time


class BlowUpError(FlowError):
    """Trajectory left the geometry's complex validity region: the initial
    point is outside the continuation tube (expected far from the
    zero-section, not a bug)."""

    reason = REASON_BLOWUP


class ChartExitError(FlowError):
    """Real trajectory left the real chart box."""

    reason = REASON_CHART_EXIT


class StepSizeError(FlowError):
    """Requested accuracy unreachable / step size underflow."""

    reason = REASON_TOL


@dataclass(frozen=True)
class ComplexTime:
    """A complex time target with a continuation path from 0.

    The path is a polyline given by its waypoints after the origin; the
    default is the single straight segment 0 -> target.  Everything must stay
    inside the disk of radius ``disk_radius`` (waypoints suffice: the disk is
    convex).
    """

    target: complex
    path: tuple = ()
    disk_radius: float = DISK_RADIUS_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "target", complex(self.target))
        path = tuple(complex(w) for w in self.path) or (self.target,)
        if abs(path[-1] - self.target) > 0:
            raise ValueError("path must end at the target")
        object.__setattr__(self, "path", path)
        for w in path:
            if abs(w) > self.disk_radius + 1e-12:
                raise ValueError(
                    f"waypoint {w} outside the time disk of radius {self.disk_radius}"
                )

    @property
    def waypoints(self):
        return (0.0 + 0.0j,) + self.path

    def segments(self):
        w = self.waypoints
        return [(w[i], w[i + 1]) for i in range(len(w) - 1)]

    def reversed(self) -> "ComplexTime":
        """Path from 0 to -target, mirror image of this path."""
        return ComplexTime(-self.target, tuple(-w for w in self.path), self.disk_radius)


def as_complex_time(t) -> ComplexTime:
    if isinstance(t, ComplexTime):
        return t
    return ComplexTime(complex(t))


@dataclass
class FlowOpts:
    """Integrator options.

    Defaults target ~1e-8 end-to-end accuracy for the verification suites.
    """

    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_steps: int = 100_000
    min_step: float = 1e-14
    p_cap: float = 1e8
    track_det: bool = True


@dataclass
class FlowState:
    """Flowed phase point with transported tangent map and quadrature."""

    x: np.ndarray
    p: np.ndarray
    jac: np.ndarray
    quad: complex
    time: complex
    det_min: float = np.inf
    steps: int = 0

    @property
    def phase_point(self) -> PhasePoint:
        return PhasePoint(self.x, self.p)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    def is_real(self, tol: float = 1e-9) -> bool:
        return bool(
            np.abs(self.x.imag).max() < tol
            and np.abs(self.p.imag).max() < tol
            and np.abs(self.jac.imag).max() < tol
        )


@dataclass
class BatchFlowResult:
    """Vectorized flow result; failed rows carry a reason code."""

    x: np.ndarray
    p: np.ndarray
    jac: np.ndarray
    quad: np.ndarray
    ok: np.ndarray
    reasons: list
    det_min: np.ndarray
    steps: int
    time: complex

    def state(self, i: int) -> FlowState:
        if not self.ok[i]:
            raise FlowError(f"row {i} failed: {self.reasons[i]}")
        return FlowState(
            self.x[i], self.p[i], self.jac[i], complex(self.quad[i]),
            self.time, float(self.det_min[i]), self.steps,
        )


# ---------------------------------------------------------------------------
# vector field and its derivative
# ---------------------------------------------------------------------------

def field_components(geo: ChartedGeometry, x: np.ndarray, p: np.ndarray):
    """(dx/ds, dp/ds) of the twisted Hamiltonian field, batched."""
    g = geo.inv_metric(x)
    dg = geo.inv_metric_deriv(x)
    b = geo.beta(x)
    gp = np.einsum("...jk,...k->...j", g, p)
    pdot = -0.5 * np.einsum("...jkl,...j,...k->...l", dg, p, p) + np.einsum(
        "...lj,...j->...l", b, gp
    )
    return gp, pdot


def hamiltonian_field(geo: ChartedGeometry, z: PhasePoint) -> np.ndarray:
    """The Hamiltonian vector field of E for the twisted form, at one point."""
    if not geo.in_complex_region(z.x):
        raise BlowUpError("point outside the geometry's complex validity region")
    xdot, pdot = field_components(geo, z.x, z.p)
    return np.concatenate([xdot, pdot])


def _field_jacobian(geo: ChartedGeometry, x: np.ndarray, p: np.ndarray, gp=None):
    """DX of the field w.r.t. (x, p), shape (..., 2n, 2n)."""
    n = geo.dim
    g = geo.inv_metric(x)
    dg = geo.inv_metric_deriv(x)
    b = geo.beta(x)
    d2g = geo.inv_metric_deriv2_or_fd(x)
    db = geo.beta_deriv_or_fd(x)
    if gp is None:
        gp = np.einsum("...jk,...k->...j", g, p)
    DX = np.zeros(x.shape[:-1] + (2 * n, 2 * n), dtype=complex)
    DX[..., :n, :n] = np.einsum("...ljw,...j->...lw", dg, p)
    DX[..., :n, n:] = g
    DX[..., n:, :n] = (
        -0.5 * np.einsum("...jklw,...j,...k->...lw", d2g, p, p)
        + np.einsum("...ljw,...j->...lw", db, gp)
        + np.einsum("...lj,...jkw,...k->...lw", b, dg, p)
    )
    DX[..., n:, n:] = -np.einsum("...wkl,...k->...lw", dg, p) + np.einsum(
        "...lj,...jw->...lw", b, g
    )
    return DX


def _rhs(geo: ChartedGeometry, Y: np.ndarray) -> np.ndarray:
    """Right-hand side for the packed state [x, p, q, vec(jac)]."""
    m = Y.shape[0]
    n = geo.dim
    n2 = 2 * n
    x = Y[:, :n]
    p = Y[:, n:n2]
    J = Y[:, n2 + 1 :].reshape(m, n2, n2)
    xdot, pdot = field_components(geo, x, p)
    A = geo.potential(x)
    qdot = np.einsum("mj,mj->m", A, xdot)
    DX = _field_jacobian(geo, x, p, gp=xdot)
    out = np.empty_like(Y)
    out[:, :n] = xdot
    out[:, n:n2] = pdot
    out[:, n2] = qdot
    out[:, n2 + 1 :] = (DX @ J).reshape(m, -1)
    return out


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4), complex state, batched with per-row masking
# ---------------------------------------------------------------------------

_DP_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _pack(Z0: np.ndarray, n: int) -> np.ndarray:
    m = Z0.shape[0]
    D = 2 * n + 1 + 4 * n * n
    Y = np.zeros((m, D), dtype=complex)
    Y[:, : 2 * n] = Z0
    Y[:, 2 * n + 1 :] = np.eye(2 * n, dtype=complex).reshape(-1)
    return Y


def _check_rows(geo, Y, opts, real_mode):
    """Per-row validity; returns (bad mask, reason array)."""
    n = geo.dim
    x = Y[:, :n]
    p = Y[:, n : 2 * n]
    finite = np.isfinite(Y).all(axis=1)
    if real_mode:
        chart_bad = (np.abs(x.real) >= geo.chart_box).any(axis=1)
        reason_chart = REASON_CHART_EXIT
    else:
        chart_bad = (np.abs(x) >= geo.complex_radius).any(axis=1)
        reason_chart = REASON_BLOWUP
    p_bad = (np.abs(p) > opts.p_cap).any(axis=1) | ~finite
    reasons = np.where(p_bad, REASON_BLOWUP, np.where(chart_bad, reason_chart, ""))
    return chart_bad | p_bad, reasons


def _integrate_path(
    geo: ChartedGeometry,
    Z0: np.ndarray,
    waypoints: Sequence[complex],
    opts: FlowOpts,
    real_mode: bool,
):
    """Integrate the packed system along a complex-time polyline.

    Z0: (m, 2n) complex start states. Returns (Y, ok, reasons, det_min, steps).
    """
    Z0 = np.asarray(Z0, dtype=complex)
    m = Z0.shape[0]
    n = geo.dim
    Y = _pack(Z0, n)
    active = np.ones(m, dtype=bool)
    reasons = np.array([""] * m, dtype=object)
    det_min = np.full(m, np.inf)
    Yfail = Y.copy()
    benign = _pack(np.zeros((1, 2 * n)), n)[0]  # chart origin, jac = 1
    steps = 0

    def fail_rows(mask, why):
        """Record failing rows and park them at a benign state."""
        nonlocal Y
        Yfail[mask] = Y[mask]
        if isinstance(why, str):
            reasons[mask] = why
        else:
            reasons[mask] = why[mask]
        active[mask] = False
        Y[mask] = benign

    bad, why = _check_rows(geo, Y, opts, real_mode)
    if bad.any():
        fail_rows(bad, why)

    k = np.empty((7,) + Y.shape, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for a, b in zip(waypoints[:-1], waypoints[1:]):
            seg = complex(b) - complex(a)
            length = abs(seg)
            if length == 0 or not active.any():
                continue
            direction = seg / length
            s = 0.0
            h = min(0.1, length)
            k[0] = _rhs(geo, Y)
            while s < length and active.any():
                steps += 1
                if steps > opts.max_steps:
                    fail_rows(active.copy(), REASON_TOL)
                    break
                h = min(h, length - s)
                H = h * direction
                for i, row in enumerate(_DP_A):
                    incr = sum(c * k[j] for j, c in enumerate(row) if c != 0.0)
                    k[i + 1] = _rhs(geo, Y + H * incr)
                y5 = Y + H * sum(c * k[j] for j, c in enumerate(_DP_B5) if c != 0.0)
                err = H * sum(c * k[j] for j, c in enumerate(_DP_ERR) if c != 0.0)
                scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(Y), np.abs(y5))
                with np.errstate(divide="ignore"):
                    ratio = np.abs(err) / scale
                ratio[~np.isfinite(ratio)] = np.inf
                err_row = np.sqrt(np.mean(ratio**2, axis=1))
                err_row[~active] = 0.0
                err_row[~np.isfinite(y5).all(axis=1) & active] = np.inf
                err_norm = err_row.max()
                if err_norm <= 1.0:
                    Y = y5
                    s += h
                    k[0] = k[6]  # FSAL
                    bad, why = _check_rows(geo, Y, opts, real_mode)
                    bad &= active
                    if bad.any():
                        fail_rows(bad, why)
                        if active.any():
                            k[0] = _rhs(geo, Y)
                    if opts.track_det and active.any():
                        J = Y[:, 2 * n + 1 :].reshape(m, 2 * n, 2 * n)
                        d = np.abs(np.linalg.det(J[active]))
                        det_min[active] = np.minimum(det_min[active], d)
                    fac = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
                    h = h * fac
                else:
                    if h <= opts.min_step * max(1.0, length):
                        # cannot resolve: fail the offending rows, keep going
                        fail_rows(active & (err_row > 1.0), REASON_TOL)
                        if active.any():
                            k[0] = _rhs(geo, Y)
                        continue
                    h = h * max(0.1, 0.9 * err_norm ** -0.2)

    failed = reasons != ""
    Y[failed] = Yfail[failed]
    ok = ~failed
    return Y, ok, [r if r else None for r in reasons], det_min, steps


def _unpack_result(geo, Y, ok, reasons, det_min, steps, time) -> BatchFlowResult:
    n = geo.dim
    m = Y.shape[0]
    return BatchFlowResult(
        x=Y[:, :n],
        p=Y[:, n : 2 * n],
        jac=Y[:, 2 * n + 1 :].reshape(m, 2 * n, 2 * n),
        quad=Y[:, 2 * n],
        ok=ok,
        reasons=reasons,
        det_min=det_min,
        steps=steps,
        time=time,
    )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _raise_for(reason, time):
    if reason == REASON_CHART_EXIT:
        raise ChartExitError("trajectory left the chart box", time)
    if reason == REASON_TOL:
        raise StepSizeError("step size underflow / accuracy unreachable", time)
    raise BlowUpError("trajectory left the continuation tube", time)


def flow_real(
    geo: ChartedGeometry,
    z0: PhasePoint,
    sigma: float,
    opts: Optional[FlowOpts] = None,
) -> FlowState:
    """Flow a real phase point for a real time, with tangent map and
    potential quadrature.  Raises on chart exit or integration failure."""
    opts = opts or FlowOpts()
    if not z0.is_real(1e-9):
        raise ValueError("flow_real requires a real initial point")
    sigma = float(sigma)
    Z0 = z0.as_vector()[None, :]
    Y, ok, reasons, det_min, steps = _integrate_path(
        geo, Z0, [0.0, sigma], opts, real_mode=True
    )
    if not ok[0]:
        _raise_for(reasons[0], sigma)
    res = _unpack_result(geo, Y, ok, reasons, det_min, steps, sigma)
    return res.state(0)


def flow_complex(
    geo: ChartedGeometry,
    z0: PhasePoint,
    t,
    opts: Optional[FlowOpts] = None,
) -> FlowState:
    """Analytic continuation of the flow along a complex-time path.

    ``t`` is a ComplexTime (or a bare complex target, meaning the straight
    path).  The start point must be real; holomorphy makes the result path
    independent, which is a verified property rather than an assumption.
    """
    opts = opts or FlowOpts()
    if not z0.is_real(1e-9):
        raise ValueError("flow_complex requires a real initial point")
    t = as_complex_time(t)
    return _flow_complex_from(geo, z0.as_vector(), t, opts)


def _flow_complex_from(geo, z0_vector, t: ComplexTime, opts) -> FlowState:
    """Internal: complex start states allowed (used for frame transport)."""
    Y, ok, reasons, det_min, steps = _integrate_path(
        geo, np.asarray(z0_vector, dtype=complex)[None, :], t.waypoints, opts,
        real_mode=False,
    )
    if not ok[0]:
        _raise_for(reasons[0], t.target)
    return _unpack_result(geo, Y, ok, reasons, det_min, steps, t.target).state(0)


def flow_many(
    geo: ChartedGeometry,
    Z0: np.ndarray,
    t,
    opts: Optional[FlowOpts] = None,
    real_mode: Optional[bool] = None,
) -> BatchFlowResult:
    """Flow a batch of phase points (rows of Z0 = [x, p]) to a common time.

    Rows that exit the chart / continuation region are reported through
    ``ok`` and ``reasons`` instead of raising.  Real times carry no disk
    constraint (the disk bounds the analytic continuation only).
    """
    opts = opts or FlowOpts()
    if not isinstance(t, ComplexTime) and complex(t).imag == 0.0:
        waypoints = (0.0, complex(t).real)
        target = complex(t).real
        if real_mode is None:
            real_mode = True
    else:
        tt = as_complex_time(t)
        waypoints = tt.waypoints
        target = tt.target
        if real_mode is None:
            real_mode = tt.target.imag == 0.0 and all(w.imag == 0.0 for w in tt.waypoints)
    Y, ok, reasons, det_min, steps = _integrate_path(
        geo, np.asarray(Z0, dtype=complex), waypoints, opts, real_mode=real_mode
    )
    return _unpack_result(geo, Y, ok, reasons, det_min, steps, target)


def radius_estimate(C: float, A: float, dist: float) -> float:
    """Guaranteed complex-time radius (1/C) log(A / dist) near a fixed point.

    C is a Lipschitz-type bound |F(z)| <= C |z - z0| on the ball of radius A,
    dist = |w - z0| the distance of the start point from the fixed point.
    The radius diverges as dist -> 0 and is zero (with a warning) once
    dist >= A.
    """
    if not (C > 0):
        raise ValueError("C must be positive")
    if not (dist > 0):
        raise ValueError("dist must be positive")
    if dist >= A:
        warnings.warn("start point outside the bound ball: zero guaranteed radius")
        return 0.0
    return float(np.log(A / dist) / C)
