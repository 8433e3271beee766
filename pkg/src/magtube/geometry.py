"""Chart-local analytic data for a magnetic cotangent-bundle system.

A chart is described by the inverse metric g^{jk}(x), its first derivatives,
the magnetic 2-form beta_{jk}(x) and a local vector potential A_j(x) with
dA = beta.  All evaluators must be complex-analytic closed forms (polynomial,
rational, trig/hyperbolic compositions) so that they can be fed complex
arguments: the imaginary-time flow integrates the equations of motion off the
real chart.

Evaluator convention: every callable broadcasts over leading axes, i.e. it
maps an (..., n) array of chart points to

    inv_metric       -> (..., n, n)
    inv_metric_deriv -> (..., n, n, n)   [..., j, k, l] = d g^{jk} / dx^l
    beta             -> (..., n, n)
    potential        -> (..., n)

Use :func:`pointwise_geometry` to wrap per-point evaluators that do not
broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "ChartedGeometry",
    "PhasePoint",
    "make_flat_magnetic",
    "make_sphere_magnetic",
    "pointwise_geometry",
    "validate_geometry",
    "GeometryReport",
    "energy",
    "twisted_symplectic_matrix",
    "stereographic_point",
    "stereographic_frame",
    "conformal_factor",
]

Array = np.ndarray

REAL_TOL = 1e-12  # |Im| threshold under which a value counts as real


class GeometryError(ValueError):
    """Invalid chart data (wrong shapes, broken symmetries, bad parameters)."""


@dataclass(frozen=True)
class ChartedGeometry:
    """Analytic chart data (M, g, beta, A), immutable and complex-extendable.

    Attributes
    ----------
    dim : int
        Chart dimension n.
    inv_metric, inv_metric_deriv, beta, potential : callable
        Broadcasting evaluators, see module docstring.
    chart_box : float
        Half-width rho of the real box (-rho, rho)^n of chart validity.
    complex_radius : float
        Bound on |x_j| (complex modulus, per component) inside which the
        holomorphically extended evaluators are trusted.  Trajectories of the
        complex-time flow are aborted once they leave this region.
    inv_metric_deriv2 : callable, optional
        Exact second derivatives (..., j, k, l, m) = d^2 g^{jk}/dx^l dx^m.
        When absent the variational equations fall back to central finite
        differences of ``inv_metric_deriv``.
    beta_deriv : callable, optional
        Exact (..., j, k, m) = d beta_{jk}/dx^m, same fallback rule.
    """

    dim: int
    inv_metric: Callable[[Array], Array]
    inv_metric_deriv: Callable[[Array], Array]
    beta: Callable[[Array], Array]
    potential: Callable[[Array], Array]
    chart_box: float
    complex_radius: float
    name: str = "custom"
    inv_metric_deriv2: Optional[Callable[[Array], Array]] = None
    beta_deriv: Optional[Callable[[Array], Array]] = None
    fd_step: float = 1e-5  # step for the finite-difference fallbacks

    def __post_init__(self):
        if self.dim < 1:
            raise GeometryError(f"dim must be a positive integer, got {self.dim}")
        if not (self.chart_box > 0):
            raise GeometryError("chart_box must be positive")
        if not (self.complex_radius > 0):
            raise GeometryError("complex_radius must be positive")

    # -- derived evaluators -------------------------------------------------

    def inv_metric_deriv2_or_fd(self, x: Array) -> Array:
        if self.inv_metric_deriv2 is not None:
            return self.inv_metric_deriv2(x)
        return _fd_last_axis(self.inv_metric_deriv, x, self.fd_step)

    def beta_deriv_or_fd(self, x: Array) -> Array:
        if self.beta_deriv is not None:
            return self.beta_deriv(x)
        return _fd_last_axis(self.beta, x, self.fd_step)

    def in_chart(self, x: Array) -> bool:
        """Real point inside the chart box."""
        return bool(np.all(np.abs(np.real(x)) < self.chart_box))

    def in_complex_region(self, x: Array) -> bool:
        return bool(np.all(np.abs(x) < self.complex_radius))

    def with_negated_field(self) -> "ChartedGeometry":
        """The same metric with beta and A both negated (the -beta system)."""
        beta_fn, pot_fn = self.beta, self.potential
        bder = self.beta_deriv
        return replace(
            self,
            beta=lambda x: -beta_fn(x),
            potential=lambda x: -pot_fn(x),
            beta_deriv=(None if bder is None else (lambda x: -bder(x))),
            name=self.name + "(-beta)",
        )


def _fd_last_axis(fn: Callable[[Array], Array], x: Array, h: float) -> Array:
    """Central finite difference of fn over each chart coordinate.

    Returns fn(x) with one extra trailing axis of length n holding d/dx^m.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    cols = []
    for m in range(n):
        e = np.zeros(n, dtype=x.dtype)
        e[m] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass
class PhasePoint:
    """A point (x, p) of the (complexified) cotangent bundle in a chart."""

    x: Array
    p: Array

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=complex))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=complex))
        if self.x.shape != self.p.shape or self.x.ndim != 1:
            raise GeometryError("x and p must be 1-d arrays of equal length")

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def as_vector(self) -> Array:
        return np.concatenate([self.x, self.p])

    @staticmethod
    def from_vector(v: Array) -> "PhasePoint":
        v = np.asarray(v)
        n = v.shape[0] // 2
        return PhasePoint(v[:n], v[n:])

    def is_real(self, tol: float = REAL_TOL) -> bool:
        return bool(
            np.max(np.abs(self.x.imag), initial=0.0) < tol
            and np.max(np.abs(self.p.imag), initial=0.0) < tol
        )

    def in_tube(self, geo: ChartedGeometry, radius: float) -> bool:
        """Membership test g(p, p) < radius^2 at a real point."""
        return bool(np.real(energy(geo, self.x, self.p)) * 2.0 < radius**2)


# ---------------------------------------------------------------------------
# scalar quantities on phase space
# ---------------------------------------------------------------------------

def energy(geo: ChartedGeometry, x: Array, p: Array) -> Array:
    """Kinetic energy E = (1/2) g^{jk}(x) p_j p_k (complex-bilinear)."""
    g = geo.inv_metric(x)
    return 0.5 * np.einsum("...jk,...j,...k->...", g, p, p)


def twisted_symplectic_matrix(geo: ChartedGeometry, x: Array) -> Array:
    """Matrix of the twisted form against tangent vectors (dx, dp).

    omega(X, Y) = X . Omega . Y with Omega = [[-beta(x), 1], [-1, 0]].
    """
    x = np.asarray(x)
    n = geo.dim
    b = geo.beta(x)
    eye = np.eye(n)
    shape = b.shape[:-2] + (2 * n, 2 * n)
    om = np.zeros(shape, dtype=b.dtype)
    om[..., :n, :n] = -b
    om[..., :n, n:] = eye
    om[..., n:, :n] = -eye
    return om


# ---------------------------------------------------------------------------
# built-in geometries
# ---------------------------------------------------------------------------

def make_flat_magnetic(dim: int, B_matrix, mass_freq: float) -> ChartedGeometry:
    """Euclidean chart with a constant magnetic 2-form.

    The inverse metric is delta^{jk}/mass_freq, so that the energy is
    |p|^2 / (2 mass_freq); the vector potential is the linear gauge
    A_j = (1/2) B_{kj} x^k.
    """
    B = np.asarray(B_matrix, dtype=float)
    if B.shape != (dim, dim):
        raise GeometryError(f"B_matrix must be {dim}x{dim}, got {B.shape}")
    if np.abs(B + B.T).max() > 1e-12:
        raise GeometryError("B_matrix must be antisymmetric")
    if not (mass_freq > 0):
        raise GeometryError("mass_freq must be positive")

    ginv = np.eye(dim) / mass_freq

    def inv_metric(x):
        x = np.asarray(x)
        return np.broadcast_to(ginv, x.shape[:-1] + (dim, dim)).astype(x.dtype)

    def inv_metric_deriv(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim, dim, dim), dtype=x.dtype)

    def inv_metric_deriv2(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim, dim, dim, dim), dtype=x.dtype)

    def beta(x):
        x = np.asarray(x)
        return np.broadcast_to(B, x.shape[:-1] + (dim, dim)).astype(x.dtype)

    def beta_deriv(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (dim, dim, dim), dtype=x.dtype)

    def potential(x):
        x = np.asarray(x)
        # A_j = (1/2) B_{kj} x^k
        return 0.5 * np.einsum("kj,...k->...j", B, x)

    return ChartedGeometry(
        dim=dim,
        inv_metric=inv_metric,
        inv_metric_deriv=inv_metric_deriv,
        beta=beta,
        potential=potential,
        chart_box=50.0,
        complex_radius=math.inf,
        name=f"flat(dim={dim}, mass_freq={mass_freq})",
        inv_metric_deriv2=inv_metric_deriv2,
        beta_deriv=beta_deriv,
    )


# -- stereographic chart of the round 2-sphere ------------------------------
#
# Projection from the north pole (0, 0, r) onto the equatorial plane; the
# chart origin is the south pole.  q := r^2 + u.u is the only denominator, so
# every evaluator extends to complex u as long as q stays away from zero.

def stereographic_point(u: Array, r: float) -> Array:
    """Embedding point X(u) on the radius-r sphere, (..., 2) -> (..., 3)."""
    u = np.asarray(u)
    q = r**2 + np.einsum("...j,...j->...", u, u)
    s = 2.0 * r**2 / q
    x3 = r * (q - 2.0 * r**2) / q
    return np.stack([s * u[..., 0], s * u[..., 1], x3], axis=-1)


def stereographic_frame(u: Array, r: float) -> Array:
    """Coordinate frame dX/du, shape (..., 3, 2)."""
    u = np.asarray(u)
    q = r**2 + np.einsum("...j,...j->...", u, u)
    s = 2.0 * r**2 / q
    out = np.zeros(u.shape[:-1] + (3, 2), dtype=u.dtype)
    for j in range(2):
        out[..., 0, j] = s * (1.0 if j == 0 else 0.0) - 4.0 * r**2 * u[..., 0] * u[..., j] / q**2
        out[..., 1, j] = s * (1.0 if j == 1 else 0.0) - 4.0 * r**2 * u[..., 1] * u[..., j] / q**2
        out[..., 2, j] = 4.0 * r**3 * u[..., j] / q**2
    return out


def conformal_factor(u: Array, r: float) -> Array:
    """lambda(u) with pulled-back metric lambda * delta_{jk}."""
    u = np.asarray(u)
    q = r**2 + np.einsum("...j,...j->...", u, u)
    return 4.0 * r**4 / q**2


def make_sphere_magnetic(r: float, B: float) -> ChartedGeometry:
    """Stereographic chart of the radius-r sphere with invariant field B.

    The 2-form is the pullback of (B/r)(x1 dx2^dx3 + cyc.) restricted to the
    sphere; in this chart it reads beta_12(u) = -B lambda(u).  The potential
    is the rotationally invariant primitive that is regular on the whole
    chart (its singularity sits at the antipodal point |u| = infinity):

        A = -(2 B r^2 / q) (u1 du2 - u2 du1),   q = r^2 + u.u.
    """
    if not (r > 0):
        raise GeometryError("radius must be positive")
    B = float(B)

    def _q(u):
        return r**2 + np.einsum("...j,...j->...", u, u)

    def inv_metric(u):
        u = np.asarray(u)
        q = _q(u)
        out = np.zeros(u.shape[:-1] + (2, 2), dtype=q.dtype)
        val = q**2 / (4.0 * r**4)
        out[..., 0, 0] = val
        out[..., 1, 1] = val
        return out

    def inv_metric_deriv(u):
        u = np.asarray(u)
        q = _q(u)
        out = np.zeros(u.shape[:-1] + (2, 2, 2), dtype=q.dtype)
        for l in range(2):
            val = q * u[..., l] / r**4
            out[..., 0, 0, l] = val
            out[..., 1, 1, l] = val
        return out

    def inv_metric_deriv2(u):
        u = np.asarray(u)
        q = _q(u)
        out = np.zeros(u.shape[:-1] + (2, 2, 2, 2), dtype=q.dtype)
        for l in range(2):
            for m in range(2):
                val = (2.0 * u[..., l] * u[..., m] + (q if l == m else 0.0)) / r**4
                out[..., 0, 0, l, m] = val
                out[..., 1, 1, l, m] = val
        return out

    def beta(u):
        u = np.asarray(u)
        q = _q(u)
        out = np.zeros(u.shape[:-1] + (2, 2), dtype=q.dtype)
        b12 = -4.0 * B * r**4 / q**2
        out[..., 0, 1] = b12
        out[..., 1, 0] = -b12
        return out

    def beta_deriv(u):
        u = np.asarray(u)
        q = _q(u)
        out = np.zeros(u.shape[:-1] + (2, 2, 2), dtype=q.dtype)
        for m in range(2):
            d12 = 16.0 * B * r**4 * u[..., m] / q**3
            out[..., 0, 1, m] = d12
            out[..., 1, 0, m] = -d12
        return out

    def potential(u):
        u = np.asarray(u)
        q = _q(u)
        h = 2.0 * B * r**2 / q
        return np.stack([h * u[..., 1], -h * u[..., 0]], axis=-1)

    return ChartedGeometry(
        dim=2,
        inv_metric=inv_metric,
        inv_metric_deriv=inv_metric_deriv,
        beta=beta,
        potential=potential,
        # the real chart covers the sphere minus the projection pole; the
        # box guards against pole passages (|u| -> infinity).  The complex
        # validity radius keeps q = r^2 + u.u away from its complex zeros.
        chart_box=3.0 * r,
        complex_radius=0.6 * r,
        name=f"sphere(r={r}, B={B})",
        inv_metric_deriv2=inv_metric_deriv2,
        beta_deriv=beta_deriv,
    )


def pointwise_geometry(
    dim: int,
    inv_metric,
    beta,
    potential,
    chart_box: float,
    complex_radius: float,
    inv_metric_deriv=None,
    name: str = "custom",
) -> ChartedGeometry:
    """Build a ChartedGeometry from per-point (non-broadcasting) evaluators.

    ``inv_metric_deriv`` defaults to central finite differences of
    ``inv_metric`` with the geometry's fd_step.
    """

    def vectorize(fn, out_rank):
        def wrapped(x):
            x = np.asarray(x)
            if x.ndim == 1:
                return np.asarray(fn(x))
            flat = x.reshape(-1, x.shape[-1])
            vals = np.stack([np.asarray(fn(row)) for row in flat])
            return vals.reshape(x.shape[:-1] + vals.shape[1:])

        return wrapped

    gv = vectorize(inv_metric, 2)
    if inv_metric_deriv is None:
        gd = lambda x: _fd_last_axis(gv, x, 1e-5)
    else:
        gd = vectorize(inv_metric_deriv, 3)
    return ChartedGeometry(
        dim=dim,
        inv_metric=gv,
        inv_metric_deriv=gd,
        beta=vectorize(beta, 2),
        potential=vectorize(potential, 1),
        chart_box=chart_box,
        complex_radius=complex_radius,
        name=name,
    )


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class GeometryReport:
    """Max residual per invariant plus the location of the worst offender."""

    residuals: dict = field(default_factory=dict)
    worst_points: dict = field(default_factory=dict)
    tolerance: float = 1e-8
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_geometry(
    geo: ChartedGeometry,
    samples: Sequence,
    fd_step: float = 1e-5,
    tol: float = 1e-8,
) -> GeometryReport:
    """Run the chart invariants on real sample points.

    Checks: g symmetric and positive definite, beta antisymmetric, the
    finite-difference exterior derivative dA against beta, inv_metric_deriv
    against finite differences of inv_metric, and reality of all evaluators
    at real arguments.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != geo.dim:
        raise GeometryError("samples have wrong dimension")
    if not np.all(np.abs(pts) < geo.chart_box):
        raise GeometryError("samples must lie inside the chart box")

    report = GeometryReport(tolerance=tol)
    g = geo.inv_metric(pts)
    dg = geo.inv_metric_deriv(pts)
    b = geo.beta(pts)
    A = geo.potential(pts)

    def record(name, res_per_point):
        res_per_point = np.asarray(res_per_point)
        i = int(np.argmax(res_per_point))
        val = float(res_per_point[i])
        report.residuals[name] = val
        report.worst_points[name] = pts[i]
        if not val < tol:
            report.failures.append(name)

    flat = lambda a: np.abs(a).reshape(a.shape[0], -1).max(axis=1)
    record("metric_symmetry", flat(g - np.swapaxes(g, -1, -2)))
    record("beta_antisymmetry", flat(b + np.swapaxes(b, -1, -2)))
    record(
        "reality",
        np.maximum.reduce([flat(np.imag(g)), flat(np.imag(b)), flat(np.imag(A)),
                           flat(np.imag(dg))]),
    )

    eigmin = np.linalg.eigvalsh(np.real(g)).min(axis=-1)
    report.residuals["metric_min_eigenvalue"] = float(eigmin.min())
    report.worst_points["metric_min_eigenvalue"] = pts[int(np.argmin(eigmin))]
    if not np.all(eigmin > 0):
        report.failures.append("metric_min_eigenvalue")

    # dA = beta via central differences of the potential
    dA = _fd_last_axis(geo.potential, pts, fd_step)  # (..., k, j) = dA_k/dx^j
    ext = np.swapaxes(dA, -1, -2) - dA  # (dA)_{jk} = d_j A_k - d_k A_j
    record("exterior_derivative", flat(ext - b))

    # inv_metric_deriv against finite differences of inv_metric
    dg_fd = _fd_last_axis(geo.inv_metric, pts, fd_step)
    record("inv_metric_deriv", flat(dg - dg_fd))

    if geo.inv_metric_deriv2 is not None:
        d2_fd = _fd_last_axis(geo.inv_metric_deriv, pts, fd_step)
        record("inv_metric_deriv2", flat(geo.inv_metric_deriv2(pts) - d2_fd))
    if geo.beta_deriv is not None:
        db_fd = _fd_last_axis(geo.beta, pts, fd_step)
        record("beta_deriv", flat(geo.beta_deriv(pts) - db_fd))

    return report
