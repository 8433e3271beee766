"""Generating functions, Kaehler potentials, holomorphic weights and
extensions.

The scalar f_t(z) = t E(z) + int_{-t}^0 A(d(pi o Phi_s)/ds) ds is produced by
the flow module's potential quadrature along the path to -t.  Its value at
t = -i drives everything else here:

* kappa2 = Re(2i f_{-i}) is a Kaehler potential (not adapted to theta^A);
* exp(-i k f_{-i}) is the local holomorphic section weight, |w|^2 = e^{-k kappa2};
* the defining differential equation in t and the dbar identity
  dbar f_{-i} = (theta^A)^(0,1) are exposed as residual checks.

For the constant-field plane the closed-form potentials kappa1 (adapted) and
kappa2 are provided in the complex coordinates (z1, z2).  The coefficient of
the tanh term in kappa1 is pinned empirically by the adaptedness identity
Im dbar kappa1 = theta^A, which holds for B/2 and fails for B; see
``resolve_kappa1_coefficient``.

Derivatives of computed scalars use central differences with step 1e-4 and
one level of Richardson extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .flow import FlowOpts, as_complex_time, flow_many, _flow_complex_from
from .geometry import ChartedGeometry, PhasePoint, energy

__all__ = [
    "PotentialSample",
    "potential_f",
    "potential_f_many",
    "theta_A_covector",
    "theta_A_apply",
    "kde_residual",
    "kde_residual_many",
    "dbar_residual",
    "dbar_residual_many",
    "phase_gradient",
    "kappa1_flat",
    "kappa2_flat",
    "resolve_kappa1_coefficient",
    "holomorphic_extension",
    "section_weight",
    "potential_sample",
    "FD_STEP",
]

FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# finite differences (central, one Richardson level)
# ---------------------------------------------------------------------------

def _richardson_pairs(h: float):
    """Offsets and weights so that sum_k w_k f(x + o_k) approximates f'(x)
    with O(h^4) error."""
    offsets = np.array([h, -h, h / 2, -h / 2])
    weights = np.array([-1 / (6 * h), 1 / (6 * h), 4 / (3 * h), -4 / (3 * h)])
    return offsets, weights


# ---------------------------------------------------------------------------
# the generating scalar f_t
# ---------------------------------------------------------------------------

def potential_f(geo: ChartedGeometry, z: PhasePoint, t, opts: Optional[FlowOpts] = None) -> complex:
    """f_t(z) = t E(z) + int_{-t}^0 A(d(pi o Phi_s)(z)/ds) ds.

    The integral is the flow quadrature along the path from 0 to -t with the
    orientation int_{-t}^0 = -int_0^{-t}; f_0 = 0 and conj(f_t) = f_conj(t).
    """
    opts = opts or FlowOpts()
    t = as_complex_time(t)
    st = _flow_complex_from(geo, z.as_vector(), t.reversed(), opts)
    E = complex(energy(geo, z.x, z.p))
    return t.target * E - complex(st.quad)


def potential_f_many(geo, Z: np.ndarray, t, opts: Optional[FlowOpts] = None):
    """Batch f_t over rows of Z = [x, p]; returns (values, ok, reasons)."""
    opts = opts or FlowOpts()
    t = as_complex_time(t)
    Z = np.asarray(Z, dtype=complex)
    res = flow_many(geo, Z, t.reversed(), opts, real_mode=False)
    n = geo.dim
    E = energy(geo, Z[:, :n], Z[:, n:])
    vals = t.target * E - res.quad
    vals[~res.ok] = np.nan
    return vals, res.ok, res.reasons


# ---------------------------------------------------------------------------
# the symplectic potential theta^A
# ---------------------------------------------------------------------------

def theta_A_covector(geo: ChartedGeometry, z: PhasePoint) -> np.ndarray:
    """Components of theta^A = (p_j + A_j(x)) dx^j at z, length 2n."""
    A = geo.potential(z.x)
    return np.concatenate([z.p + A, np.zeros(geo.dim, dtype=complex)])


def theta_A_apply(geo: ChartedGeometry, z: PhasePoint, V: np.ndarray) -> complex:
    """theta^A contracted with a (complex) tangent vector V = (dx, dp)."""
    return complex(theta_A_covector(geo, z) @ np.asarray(V, dtype=complex))


# ---------------------------------------------------------------------------
# residual checks of the defining identities
# ---------------------------------------------------------------------------

def kde_residual_many(
    geo: ChartedGeometry,
    Z: np.ndarray,
    sigma: float,
    h: float = FD_STEP,
    opts: Optional[FlowOpts] = None,
) -> np.ndarray:
    """Vectorized defect of df/dsigma + X_E(f) - (theta^A(X_E) - E).

    One batched flow per sigma offset plus one for the full phase-space
    stencil of all rows of Z.
    """
    opts = opts or FlowOpts()
    Z = np.asarray(Z, dtype=float)
    m, d = Z.shape
    n = geo.dim
    offs, wts = _richardson_pairs(h)

    df_dsigma = np.zeros(m, dtype=complex)
    for o, w in zip(offs, wts):
        vals, ok, reasons = potential_f_many(geo, Z, sigma + o, opts)
        if not ok.all():
            raise RuntimeError(f"stencil failure: {[r for r in reasons if r][0]}")
        df_dsigma += w * vals

    rows = np.repeat(Z, d * len(offs), axis=0)
    shift = np.zeros((d * len(offs), d))
    for mm in range(d):
        for io, o in enumerate(offs):
            shift[mm * len(offs) + io, mm] = o
    rows += np.tile(shift, (m, 1))
    vals, ok, reasons = potential_f_many(geo, rows, sigma, opts)
    if not ok.all():
        raise RuntimeError(f"stencil failure: {[r for r in reasons if r][0]}")
    grad = vals.reshape(m, d, len(offs)) @ wts

    from .flow import field_components

    x, p = Z[:, :n], Z[:, n:]
    xdot, pdot = field_components(geo, x, p)
    XE = np.concatenate([xdot, pdot], axis=1)
    E = energy(geo, x, p)
    A = geo.potential(x)
    rhs = E + np.einsum("mj,mj->m", A, xdot)
    return np.abs(df_dsigma + np.einsum("md,md->m", grad, XE) - rhs)


def kde_residual(
    geo: ChartedGeometry,
    z: PhasePoint,
    sigma: float,
    h: float = FD_STEP,
    opts: Optional[FlowOpts] = None,
) -> float:
    """Defect of df_sigma/dsigma + X_E(f_sigma) - (theta^A(X_E) - E) at (z, sigma).

    theta^A(X_E) - E = E + A(g p); both derivative terms are computed by
    Richardson-extrapolated central differences of the flow-quadrature f.
    """
    return float(kde_residual_many(geo, z.as_vector().real[None, :], sigma, h, opts)[0])


def dbar_residual_many(
    geo: ChartedGeometry,
    Z: np.ndarray,
    frames_conj: np.ndarray,
    h: float = FD_STEP,
    opts: Optional[FlowOpts] = None,
) -> np.ndarray:
    """Vectorized defect of dbar f_{-i} = (theta^A)^(0,1).

    ``frames_conj`` is (m, 2n, n): per-row (0,1) direction columns.
    """
    opts = opts or FlowOpts()
    Z = np.asarray(Z, dtype=float)
    m, d = Z.shape
    offs, wts = _richardson_pairs(h)
    rows = np.repeat(Z, d * len(offs), axis=0)
    shift = np.zeros((d * len(offs), d))
    for mm in range(d):
        for io, o in enumerate(offs):
            shift[mm * len(offs) + io, mm] = o
    rows += np.tile(shift, (m, 1))
    vals, ok, reasons = potential_f_many(geo, rows, -1j, opts)
    if not ok.all():
        raise RuntimeError(f"stencil failure: {[r for r in reasons if r][0]}")
    grad = vals.reshape(m, d, len(offs)) @ wts  # (m, 2n) complex

    n = geo.dim
    A = geo.potential(Z[:, :n])
    theta = np.concatenate([Z[:, n:] + A, np.zeros((m, n))], axis=1)
    defect = np.einsum("md,mdk->mk", grad, frames_conj) - np.einsum(
        "md,mdk->mk", theta.astype(complex), frames_conj
    )
    return np.abs(defect).max(axis=1)


def dbar_residual(
    geo: ChartedGeometry,
    z: PhasePoint,
    frame_conj: np.ndarray,
    h: float = FD_STEP,
    opts: Optional[FlowOpts] = None,
) -> float:
    """Defect of dbar f_{-i} = (theta^A)^(0,1) at z.

    ``frame_conj`` holds (0,1) direction columns (the conjugate of the frame
    spanning the +i transported subspace).  For each column Zbar the residual
    is |Zbar(f_{-i}) - theta^A(Zbar)|; the max over columns is returned.
    """
    return float(
        dbar_residual_many(geo, z.as_vector().real[None, :], frame_conj[None], h, opts)[0]
    )


def phase_gradient(batch_fun: Callable, z0: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Richardson central-difference gradient of a batched scalar function
    over the 2n real phase coordinates."""
    d = z0.shape[0]
    offs, wts = _richardson_pairs(h)
    rows = []
    for m in range(d):
        e = np.zeros(d)
        e[m] = 1.0
        for o in offs:
            rows.append(z0 + o * e)
    vals, ok, reasons = batch_fun(np.array(rows))
    if not np.all(ok):
        raise RuntimeError(f"stencil failure: {[r for r in reasons if r][0]}")
    return np.asarray(vals).reshape(d, len(offs)) @ wts


# ---------------------------------------------------------------------------
# closed-form flat potentials
# ---------------------------------------------------------------------------

def _coth_times(B: float, mass_freq: float) -> float:
    """B coth(B/mass_freq), continued through B = 0 (limit mass_freq)."""
    Bt = B / mass_freq
    if abs(Bt) < 1e-3:
        return mass_freq * (1 + Bt**2 / 3 - Bt**4 / 45)
    return B / math.tanh(Bt)


def kappa2_flat(B: float, mass_freq: float, z1: complex, z2: complex) -> float:
    """Kaehler potential Re(2i f_{-i}) on the plane, in complex coordinates:

    kappa2 = -B (u y - v x) + B coth(B/mass_freq) (v^2 + y^2),
    z1 = x + i y, z2 = u + i v.  Not adapted to theta^A.
    """
    x, y = z1.real, z1.imag
    u, v = z2.real, z2.imag
    return -B * (u * y - v * x) + _coth_times(B, mass_freq) * (v**2 + y**2)


def kappa1_flat(
    B: float,
    mass_freq: float,
    z1: complex,
    z2: complex,
    tanh_coefficient: float = 0.5,
) -> float:
    """Adapted Kaehler potential 2i f_{-i} + g on the plane.

    kappa1 = kappa2 + c B tanh(B/(2 mass_freq)) (x^2 - y^2 + u^2 - v^2) with
    c = ``tanh_coefficient``.  Both c = 1/2 and c = 1 are candidate values;
    the identity Im dbar kappa1 = theta^A holds only for c = 1/2, which is
    the default.  Pass c = 1 to evaluate the rejected variant.
    """
    x, y = z1.real, z1.imag
    u, v = z2.real, z2.imag
    Bt = B / mass_freq
    return kappa2_flat(B, mass_freq, z1, z2) + tanh_coefficient * B * math.tanh(
        Bt / 2
    ) * (x**2 - y**2 + u**2 - v**2)


def resolve_kappa1_coefficient(
    B: float,
    mass_freq: float,
    J: np.ndarray,
    samples: np.ndarray,
    h: float = FD_STEP,
    tol: float = 1e-6,
):
    """Empirically select the tanh coefficient of kappa1 by the dbar test.

    For each candidate c in (1/2, 1) evaluates the worst defect of
    (1/2) d kappa1 (J X) = theta^A(X) over the sample points (J is the flat
    complex structure matrix, constant on the plane).  Returns
    (coefficient, residuals dict).
    """
    from .oracles import flat_complex_coordinates

    residuals = {}
    for c in (0.5, 1.0):
        worst = 0.0
        for row in np.asarray(samples, dtype=float):
            # gradient of kappa1 over phase coordinates (cheap closed form)
            d = 4
            offs, wts = _richardson_pairs(h)
            grad = np.zeros(d)
            for m in range(d):
                e = np.zeros(d)
                e[m] = 1.0
                vals = []
                for o in offs:
                    zc = flat_complex_coordinates(B, mass_freq, row + o * e)
                    vals.append(kappa1_flat(B, mass_freq, zc[0], zc[1], c))
                grad[m] = np.asarray(vals) @ wts
            lhs = 0.5 * (J.T @ grad)
            A = 0.5 * np.array([-B * row[1], B * row[0]])
            theta = np.concatenate([row[2:] + A, np.zeros(2)])
            worst = max(worst, float(np.abs(lhs - theta).max()))
        residuals[c] = worst
    chosen = 0.5 if residuals[0.5] <= residuals[1.0] else 1.0
    if residuals[chosen] > tol:
        raise RuntimeError(
            f"neither tanh coefficient satisfies the dbar identity: {residuals}"
        )
    return chosen, residuals


# ---------------------------------------------------------------------------
# holomorphic extensions and section weights
# ---------------------------------------------------------------------------

def holomorphic_extension(
    geo: ChartedGeometry,
    f: Callable[[np.ndarray], complex],
    z: PhasePoint,
    t=1j,
    opts: Optional[FlowOpts] = None,
) -> complex:
    """Value of the holomorphic extension f o pi o Phi_i at z.

    ``f`` must itself be evaluable at complex base points reached by the
    flow (any analytic closed form qualifies).
    """
    opts = opts or FlowOpts()
    st = _flow_complex_from(geo, z.as_vector(), as_complex_time(t), opts)
    return complex(f(st.x))


def section_weight(geo: ChartedGeometry, z: PhasePoint, k: int, opts=None) -> complex:
    """Local holomorphic section weight exp(-i k f_{-i}(z)).

    |weight|^2 = exp(-k kappa2), the Gaussian-type density weighting the
    inner product of holomorphic sections of the k-th tensor power.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    return complex(np.exp(-1j * k * potential_f(geo, z, -1j, opts)))


@dataclass
class PotentialSample:
    """f at -i and +i with the derived potential and identity residuals."""

    base: PhasePoint
    f_minus_i: complex
    f_plus_i: complex
    kappa2: float
    kde_residual: float
    dbar_residual: float

    @property
    def conjugation_defect(self) -> float:
        return abs(np.conj(self.f_minus_i) - self.f_plus_i)


def potential_sample(
    geo: ChartedGeometry,
    z: PhasePoint,
    frame_conj: Optional[np.ndarray] = None,
    kde_sigma: float = 0.3,
    h: float = FD_STEP,
    opts: Optional[FlowOpts] = None,
) -> PotentialSample:
    """Assemble the full potential data at one real phase point."""
    opts = opts or FlowOpts()
    fm = potential_f(geo, z, -1j, opts)
    fp = potential_f(geo, z, 1j, opts)
    kappa2 = float((2j * fm).real)
    kde = kde_residual(geo, z, kde_sigma, h, opts)
    if frame_conj is None:
        from .structure import frame_at

        frame_conj = frame_at(geo, z, 1j, opts).F.conj()
    dbar = dbar_residual(geo, z, frame_conj, h, opts)
    return PotentialSample(
        base=z,
        f_minus_i=fm,
        f_plus_i=fp,
        kappa2=kappa2,
        kde_residual=kde,
        dbar_residual=dbar,
    )
