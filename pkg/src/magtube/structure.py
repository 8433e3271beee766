"""Lagrangian frames, the induced almost complex structure, and its checks.

The frame at (z, t) spans the analytic continuation of the flow-transported
vertical subspace: the vertical frame at w = Phi_{-t}(z) is pushed forward by
the tangent map of Phi_{t}, computed by integrating the variational equations
back along the reversed path.  Frames are column-orthonormalized (with a
deterministic phase convention) after transport; every reported quantity is
invariant under right multiplication of the frame by an invertible matrix, so
this is a pure conditioning device.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .flow import (
    FlowOpts,
    as_complex_time,
    flow_many,
    _flow_complex_from,
    _integrate_path,
    _unpack_result,
)
from .geometry import ChartedGeometry, PhasePoint, twisted_symplectic_matrix

__all__ = [
    "LagrangianFrame",
    "ACSPointData",
    "orthonormalize",
    "subspace_distance",
    "frame_at",
    "frames_at_many",
    "transversality_check",
    "assemble_J",
    "acs_point",
    "acs_many",
    "integrability_residual",
    "integrability_residual_many",
    "normalized_zero_section_frame_change",
    "TRANSVERSALITY_THRESHOLD",
]

TRANSVERSALITY_THRESHOLD = 1e-6


# ---------------------------------------------------------------------------
# frame linear algebra
# ---------------------------------------------------------------------------

def orthonormalize(F: np.ndarray) -> np.ndarray:
    """QR-orthonormalize columns with positive-real diagonal of R.

    The phase convention makes the result a smooth function of a smoothly
    varying full-rank input, which the finite-difference bracket computation
    relies on.  Batched over leading axes.
    """
    Q, R = np.linalg.qr(np.asarray(F))
    d = np.diagonal(R, axis1=-2, axis2=-1).copy()
    d = np.where(np.abs(d) == 0, 1.0, d)
    phase = d / np.abs(d)
    return Q * phase.conj()[..., None, :]


def subspace_distance(A: np.ndarray, B: np.ndarray) -> float:
    """sin of the largest principal angle between the column spans.

    Computed as the spectral norm of the difference of orthogonal projectors,
    which stays accurate down to ~1e-15 for nearly equal spans.
    """
    Qa = orthonormalize(A)
    Qb = orthonormalize(B)
    Pa = Qa @ Qa.conj().swapaxes(-1, -2)
    Pb = Qb @ Qb.conj().swapaxes(-1, -2)
    return float(np.linalg.norm(Pa - Pb, ord=2))


@dataclass
class LagrangianFrame:
    """Orthonormal frame spanning the transported vertical subspace."""

    base: PhasePoint
    time: complex
    F: np.ndarray
    inverse_residual: float = 0.0  # |Phi_t(Phi_{-t}(z)) - z| from the transport

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    def conjugate_pair(self) -> np.ndarray:
        return np.concatenate([self.F, self.F.conj()], axis=1)


@dataclass
class ACSPointData:
    """Almost complex structure data at one accepted point."""

    base: PhasePoint
    J: np.ndarray
    positivity_spectrum: np.ndarray
    transversality: float
    imag_residual: float  # |Im| left over when realifying J


# ---------------------------------------------------------------------------
# frame transport
# ---------------------------------------------------------------------------

def frame_at(
    geo: ChartedGeometry,
    z: PhasePoint,
    t,
    opts: Optional[FlowOpts] = None,
) -> LagrangianFrame:
    """Transported vertical frame at a real point for complex time t.

    Flows z backwards along the reversed path to w, then transports the
    vertical frame [0; 1] at w forward by the variational tangent map; the
    returned columns are orthonormalized.  The defect of the round trip
    (which must return to z) is reported as ``inverse_residual``.
    """
    opts = opts or FlowOpts()
    t = as_complex_time(t)
    back = _flow_complex_from(geo, z.as_vector(), t.reversed(), opts)
    w = np.concatenate([back.x, back.p])
    fwd = _flow_complex_from(geo, w, t, opts)
    n = geo.dim
    F = fwd.jac[:, n:]
    residual = float(np.abs(np.concatenate([fwd.x, fwd.p]) - z.as_vector()).max())
    return LagrangianFrame(base=z, time=t.target, F=orthonormalize(F),
                           inverse_residual=residual)


def frames_at_many(
    geo: ChartedGeometry,
    Z: np.ndarray,
    t,
    opts: Optional[FlowOpts] = None,
):
    """Batch frame transport.

    Returns (F, ok, reasons, inverse_residuals) with F of shape (m, 2n, n).
    """
    opts = opts or FlowOpts()
    t = as_complex_time(t)
    Z = np.asarray(Z, dtype=complex)
    back = flow_many(geo, Z, t.reversed(), opts, real_mode=False)
    W = np.concatenate([back.x, back.p], axis=1)
    W[~back.ok] = 0.0  # parked; masked out below
    Yf, okf, reasons_f, _, _ = _integrate_path(geo, W, t.waypoints, opts, real_mode=False)
    fwd = _unpack_result(geo, Yf, okf, reasons_f, None, 0, t.target)
    n = geo.dim
    ok = back.ok & fwd.ok
    reasons = [rb or rf for rb, rf in zip(back.reasons, fwd.reasons)]
    F = orthonormalize(fwd.jac[:, :, n:])
    endpoints = np.concatenate([fwd.x, fwd.p], axis=1)
    inv_res = np.abs(endpoints - Z).max(axis=1)
    inv_res[~ok] = np.inf
    return F, ok, reasons, inv_res


# ---------------------------------------------------------------------------
# pointwise structure checks
# ---------------------------------------------------------------------------

def transversality_check(frame) -> float:
    """Smallest singular value of [F, conj F]; > threshold certifies that the
    subspace meets its conjugate only at zero."""
    F = frame.F if isinstance(frame, LagrangianFrame) else np.asarray(frame)
    S = np.concatenate([F, F.conj()], axis=-1)
    return float(np.linalg.svd(S, compute_uv=False)[..., -1].min())


def positivity_matrix(geo: ChartedGeometry, z: PhasePoint, F: np.ndarray) -> np.ndarray:
    """Hermitian matrix of the pairing -i omega(Z, conj Z) on frame columns.

    With the convention omega(X, Y) = X . Omega . Y, Omega = [[-beta, 1],
    [-1, 0]], the matrix is i F* Omega F; its positive definiteness for
    Im t > 0 is the Kaehler condition.
    """
    Om = twisted_symplectic_matrix(geo, z.x)
    M = 1j * F.conj().T @ Om @ F
    return 0.5 * (M + M.conj().T)


def assemble_J(frame: LagrangianFrame, geo: ChartedGeometry) -> ACSPointData:
    """Unique linear complex structure with the frame span as +i eigenspace.

    J = Re(S diag(+i, -i) S^{-1}) with S = [F, conj F]; the discarded
    imaginary part is reported.  The positivity spectrum is computed on the
    orthonormalized frame, which makes it frame-gauge invariant.
    """
    F = frame.F
    n2, n = F.shape
    S = np.concatenate([F, F.conj()], axis=1)
    smin = float(np.linalg.svd(S, compute_uv=False)[-1])
    if smin < TRANSVERSALITY_THRESHOLD:
        raise np.linalg.LinAlgError(
            f"frame not transversal to its conjugate (smin={smin:.3e}); "
            "no almost complex structure at this point/time"
        )
    D = np.diag(np.concatenate([np.full(n, 1j), np.full(n, -1j)]))
    Jc = S @ D @ np.linalg.inv(S)
    M = positivity_matrix(geo, frame.base, F)
    return ACSPointData(
        base=frame.base,
        J=Jc.real.copy(),
        positivity_spectrum=np.linalg.eigvalsh(M),
        transversality=smin,
        imag_residual=float(np.abs(Jc.imag).max()),
    )


def acs_point(geo, z: PhasePoint, t, opts=None) -> ACSPointData:
    """Convenience: transport the frame and assemble J in one call."""
    return assemble_J(frame_at(geo, z, t, opts), geo)


def acs_many(geo, pairs, opts=None):
    """Batch form: a list of (z, t) pairs to a list of ACSPointData.

    Grid evaluation parallelizes trivially; this serial form is the
    reference implementation the CSV emitters build on.
    """
    return [acs_point(geo, z, t, opts) for z, t in pairs]


# ---------------------------------------------------------------------------
# integrability
# ---------------------------------------------------------------------------

def integrability_residual_many(
    geo: ChartedGeometry,
    Z: np.ndarray,
    t,
    h: float = 1e-4,
    opts: Optional[FlowOpts] = None,
) -> np.ndarray:
    """Bracket-closure defects for all rows of Z, stencil-batched."""
    opts = opts or FlowOpts()
    Z = np.asarray(Z, dtype=float)
    mpts, n2 = Z.shape
    n = geo.dim
    width = 1 + 2 * n2
    stencil = np.repeat(Z, width, axis=0)
    shift = np.zeros((width, n2))
    for m in range(n2):
        shift[1 + 2 * m, m] = h
        shift[2 + 2 * m, m] = -h
    stencil += np.tile(shift, (mpts, 1))
    F_all, ok, reasons, _ = frames_at_many(geo, stencil, t, opts)
    if not ok.all():
        bad = [r for r in reasons if r]
        raise RuntimeError(f"stencil point left the tube: {bad[0]}")
    F_all = F_all.reshape(mpts, width, n2, n)
    out = np.empty(mpts)
    for i in range(mpts):
        Fc = F_all[i, 0]
        dF = (F_all[i, 1::2] - F_all[i, 2::2]) / (2 * h)  # (n2, 2n, n)
        proj_out = np.eye(n2) - Fc @ Fc.conj().T
        worst = 0.0
        for a in range(n):
            for b in range(a + 1, n):
                bracket = np.einsum("m,mk->k", Fc[:, a], dF[:, :, b]) - np.einsum(
                    "m,mk->k", Fc[:, b], dF[:, :, a]
                )
                worst = max(worst, float(np.linalg.norm(proj_out @ bracket)))
        out[i] = worst
    return out


def integrability_residual(
    geo: ChartedGeometry,
    z: PhasePoint,
    t,
    h: float = 1e-4,
    opts: Optional[FlowOpts] = None,
) -> float:
    """Bracket-closure defect of the frame distribution at z.

    Frame vector fields are sampled on a central-difference stencil in the 2n
    real phase coordinates; Lie brackets of frame columns are projected onto
    the orthogonal complement of the frame span at z.  The max projection
    norm vanishes for an involutive (integrable) distribution.
    """
    return float(
        integrability_residual_many(geo, z.as_vector().real[None, :], t, h, opts)[0]
    )


# ---------------------------------------------------------------------------
# coordinate normalization at the zero-section
# ---------------------------------------------------------------------------

def normalized_zero_section_frame_change(geo: ChartedGeometry, x0: np.ndarray):
    """Linear chart change making the metric the identity at a point.

    Returns (T, beta_tilde): T = diag(L, L^{-T}) maps tangent vectors of the
    original chart to the normalized one (L g L^T = 1), and beta_tilde is the
    field matrix in normalized coordinates.  Frames transform as T F, and the
    closed-form zero-section expressions hold verbatim with beta_tilde.
    """
    x0 = np.asarray(x0)
    g = np.real(geo.inv_metric(x0))
    R = np.linalg.cholesky(g)  # g = R R^T
    L = np.linalg.inv(R)
    n = geo.dim
    T = np.zeros((2 * n, 2 * n))
    T[:n, :n] = L
    T[n:, n:] = R.T
    beta_tilde = R.T @ np.real(geo.beta(x0)) @ R
    return T, beta_tilde
