"""Covariant Hessians, curvature and the convexity / admissibility diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .._fd import spatial_gradient
from ..errors import DegeneratePlane
from .fields import FD_STEP, PD_MARGIN, MetricField, christoffel, christoffel_from
from .scalar import QuadraticFunction, ScalarField


def covariant_hessian(field: MetricField, f: ScalarField, t, z):
    """``Hess f_ij = d_i d_j f - Gamma^k_ij d_k f`` with respect to ``g(t)``."""
    gamma = christoffel(field, t, z)
    hess = f.hessian(t, z) - np.einsum("...kij,...k->...ij", gamma, f.gradient(t, z))
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))


def _relative_eigvals(h, g):
    """Eigenvalues of ``h`` relative to ``g`` (roots of det(h - lambda g))."""
    chol = np.linalg.cholesky(g)
    inv = np.linalg.inv(chol)
    a = inv @ h @ np.swapaxes(inv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, -1, -2)))


def hessian_min_eig(field: MetricField, f: ScalarField, t, z):
    """Smallest eigenvalue of the covariant Hessian of ``f``, measured against ``g(t)``.

    Measuring against ``g`` makes the value a scalar invariant: it does not
    change when both ``f`` and ``g`` are transported by a diffeomorphism.
    """
    hess = covariant_hessian(field, f, t, z)
    return _relative_eigvals(hess, field.metric(t, z))[..., 0]


def riemann(field: MetricField, t, z):
    """``Rm[..., l, k, i, j] = R^l_{kij}`` with ``R(d_i, d_j) d_k = R^l_{kij} d_l``.

    Derivatives of the Christoffel symbols are taken by 4th-order central
    differences.
    """
    gamma = christoffel(field, t, z)
    dgamma = spatial_gradient(lambda tt, zz: christoffel(field, tt, zz), t, z,
                              FD_STEP * field.R, order=4)
    # dgamma[..., i, l, j, k] = d_i Gamma^l_jk
    term = np.einsum("...iljk->...lkij", dgamma)
    quad = np.einsum("...lim,...mjk->...lkij", gamma, gamma)
    return term - np.swapaxes(term, -1, -2) + quad - np.swapaxes(quad, -1, -2)


def _sectional_from(rm, g, X, Y):
    num = np.einsum("...pl,...lkij,...p,...i,...j,...k->...", g, rm, X, X, Y, Y)
    xx = np.einsum("...i,...ij,...j->...", X, g, X)
    yy = np.einsum("...i,...ij,...j->...", Y, g, Y)
    xy = np.einsum("...i,...ij,...j->...", X, g, Y)
    den = xx * yy - xy * xy
    return num, den


def sectional_curvature(field: MetricField, t, z, X, Y):
    """Sectional curvature of ``g(t)`` at ``z`` on the plane spanned by ``X`` and ``Y``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    num, den = _sectional_from(riemann(field, t, z), field.metric(t, z), X, Y)
    if np.any(den < 1e-14):
        raise DegeneratePlane("X and Y do not span a 2-plane")
    return num / den


@dataclass(frozen=True)
class AdmissibilityGrid:
    """Product grid on [-T, T] x B_R(0): ``n_time`` slices and ``n_space`` nodes per axis."""

    n_time: int = 21
    n_space: int = 21
    shell_count: int = 200
    chunk: int = 2048

    def points(self, dim, R, T):
        times = np.linspace(-T, T, self.n_time) if self.n_time > 1 else np.zeros(1)
        axis = np.linspace(-R, R, self.n_space)
        mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        mesh = mesh[np.einsum("bi,bi->b", mesh, mesh) <= R * R * (1 + 1e-12)]
        t = np.repeat(times, len(mesh))
        z = np.tile(mesh, (len(times), 1))
        return t, z


@dataclass
class AdmissibilityReport:
    dim: int
    n_points: int
    margin: float
    min_hessian_eig: float
    argmin_hessian: list
    min_metric_eig: float
    metric_valid: bool
    max_shell_deviation: float
    min_sectional_curvature: float
    max_sectional_curvature: float
    n_curvature_negative: int
    n_curvature_positive: int
    n_curvature_zero: int
    admissible: bool
    rigidity_dimension_ok: bool
    notes: list = dc_field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def admissibility_report(field: MetricField, f: ScalarField | None = None,
                         grid: AdmissibilityGrid | None = None, margin: float = 1e-6,
                         curvature_tol: float = 1e-8) -> AdmissibilityReport:
    """Sweep a grid and collect the convexity, positivity, support and curvature diagnostics."""
    f = f or QuadraticFunction(field.dim)
    grid = grid or AdmissibilityGrid()
    n = field.dim
    t_all, z_all = grid.points(n, field.R, field.T)
    planes = [(i, j) for i in range(n) for j in range(i + 1, n)]
    eye = np.eye(n)

    min_hess, arg = np.inf, None
    min_eig = np.inf
    curv = []
    for lo in range(0, len(t_all), grid.chunk):
        t = t_all[lo:lo + grid.chunk]
        z = z_all[lo:lo + grid.chunk]
        g, dg = field.metric_derivative(t, z)
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(g)[:, 0])))
        gamma = christoffel_from(g, dg)
        hess = f.hessian(t, z) - np.einsum("bkij,bk->bij", gamma, f.gradient(t, z))
        lam = _relative_eigvals(0.5 * (hess + np.swapaxes(hess, -1, -2)), g)[:, 0]
        k = int(np.argmin(lam))
        if lam[k] < min_hess:
            min_hess, arg = float(lam[k]), [float(t[k])] + [float(x) for x in z[k]]
        rm = riemann(field, t, z)
        for i, j in planes:
            X = np.broadcast_to(eye[i], z.shape)
            Y = np.broadcast_to(eye[j], z.shape)
            num, den = _sectional_from(rm, g, X, Y)
            curv.append(num / den)
    curv = np.concatenate(curv)

    from .fields import support_shell

    ts, zs = support_shell(n, field.R, field.T, grid.shell_count, radii=(1.0, 1.025, 1.05, 1.075, 1.1))
    shell_dev = float(np.max(np.abs(field.metric(ts, zs) - eye)))

    notes = []
    if n < 3:
        notes.append("boundary rigidity for lens data requires dimension >= 3")
    metric_valid = min_eig >= PD_MARGIN
    if not metric_valid:
        notes.append(f"metric eigenvalue {min_eig:.3g} below {PD_MARGIN:g}")
    if shell_dev > 1e-12:
        notes.append("metric is not Euclidean on the shell R <= |z| <= 1.1R")
    return AdmissibilityReport(
        dim=n,
        n_points=int(len(t_all)),
        margin=margin,
        min_hessian_eig=min_hess,
        argmin_hessian=arg,
        min_metric_eig=min_eig,
        metric_valid=bool(metric_valid),
        max_shell_deviation=shell_dev,
        min_sectional_curvature=float(np.min(curv)),
        max_sectional_curvature=float(np.max(curv)),
        n_curvature_negative=int(np.sum(curv < -curvature_tol)),
        n_curvature_positive=int(np.sum(curv > curvature_tol)),
        n_curvature_zero=int(np.sum(np.abs(curv) <= curvature_tol)),
        admissible=bool(min_hess > margin and metric_valid),
        rigidity_dimension_ok=n >= 3,
        notes=notes,
    )
