"""Time-dependent Riemannian metrics on R^n that are flat outside [-T,T] x B_R(0).

Every field evaluates on batches: ``t`` has shape ``(...)`` (or broadcasts to
it) and ``z`` has shape ``(..., n)``; matrices come back as ``(..., n, n)``
and spatial derivatives as ``(..., n, n, n)`` indexed ``[..., k, i, j]`` for
``d g_ij / d z_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, ClassVar

import numpy as np
from scipy import ndimage

from .._fd import spatial_gradient
from .._profiles import bump_profile
from ..errors import NonPositiveDefinite, SupportViolation

#: finite-difference step for metrics without analytic derivatives, in units of R
FD_STEP = 1e-4
#: metrics whose smallest eigenvalue falls below this on a validation grid are rejected
PD_MARGIN = 1e-6


def _batch(t, z):
    z = np.asarray(z, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), z.shape[:-1])
    return t, z


def _identity(batch_shape, n):
    return np.broadcast_to(np.eye(n), tuple(batch_shape) + (n, n)).copy()


@dataclass(frozen=True, eq=False)
class MetricField:
    """Base class. Subclasses implement :meth:`metric` and may override
    :meth:`metric_derivative` with analytic derivatives."""

    dim: int
    R: float
    T: float

    family: ClassVar[str] = "custom"
    #: True only for fields that are identically Euclidean
    is_flat: ClassVar[bool] = False

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dim}")
        if not (self.R > 0 and self.T > 0):
            raise ValueError("support radii R and T must be positive")

    def metric(self, t, z):
        raise NotImplementedError

    def metric_derivative(self, t, z):
        """Return ``(g, dg)``. Default: 4th-order central differences."""
        t, z = _batch(t, z)
        g = self.metric(t, z)
        dg = spatial_gradient(self.metric, t, z, FD_STEP * self.R, order=4)
        return g, dg

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        """JSON-compatible description, the inverse of :func:`lenscat.metric.metric_from_spec`."""
        return {
            "dim": self.dim,
            "R": self.R,
            "T": self.T,
            "family": self.family,
            "params": self.params(),
        }


@dataclass(frozen=True, eq=False)
class FlatMetric(MetricField):
    family: ClassVar[str] = "flat"
    is_flat: ClassVar[bool] = True

    def metric(self, t, z):
        t, z = _batch(t, z)
        return _identity(z.shape[:-1], self.dim)

    def metric_derivative(self, t, z):
        t, z = _batch(t, z)
        n = self.dim
        return self.metric(t, z), np.zeros(z.shape[:-1] + (n, n, n))


@dataclass(frozen=True, eq=False)
class _BumpMetric(MetricField):
    amplitude: float = 0.1
    center: tuple = ()
    width: float = 1.0
    time_width: float | None = None
    support_radius: float | None = None

    def __post_init__(self):
        super().__post_init__()
        center = tuple(float(c) for c in self.center) or (0.0,) * self.dim
        if len(center) != self.dim:
            raise ValueError("bump center has the wrong dimension")
        object.__setattr__(self, "center", center)
        if self.time_width is None:
            object.__setattr__(self, "time_width", float(self.T))
        if self.support_radius is None:
            object.__setattr__(self, "support_radius", float(self.R))
        if not 0 < self.time_width <= self.T:
            raise SupportViolation("time_width must lie in (0, T]")
        if not 0 < self.support_radius <= self.R:
            raise SupportViolation("support_radius must lie in (0, R]")
        if self.width <= 0:
            raise ValueError("bump width must be positive")

    def profile(self, t, z):
        """Bump profile ``s(t, z)`` and its spatial gradient."""
        t, z = _batch(t, z)
        return bump_profile(t, z, np.array(self.center), self.width,
                            self.support_radius, self.time_width)

    def params(self):
        return {
            "amplitude": self.amplitude,
            "center": list(self.center),
            "width": self.width,
            "time_width": self.time_width,
            "support_radius": self.support_radius,
        }


@dataclass(frozen=True, eq=False)
class ConformalBump(_BumpMetric):
    """``g = exp(2 phi) delta`` with ``phi = amplitude * s(t, z)``."""

    family: ClassVar[str] = "conformal_bump"

    def phi(self, t, z):
        s, ds = self.profile(t, z)
        return self.amplitude * s, self.amplitude * ds

    def metric(self, t, z):
        phi, _ = self.phi(t, z)
        return np.exp(2.0 * phi)[..., None, None] * np.eye(self.dim)

    def metric_derivative(self, t, z):
        phi, dphi = self.phi(t, z)
        scale = np.exp(2.0 * phi)
        g = scale[..., None, None] * np.eye(self.dim)
        dg = (2.0 * scale[..., None] * dphi)[..., :, None, None] * np.eye(self.dim)
        return g, dg


@dataclass(frozen=True, eq=False)
class RankOneBump(_BumpMetric):
    """Anisotropic ``g = delta + amplitude * s(t, z) * v v^T`` with unit ``v``."""

    family: ClassVar[str] = "rank_one_bump"
    direction: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        v = np.array(self.direction or (1.0,) + (0.0,) * (self.dim - 1), dtype=float)
        if v.shape != (self.dim,):
            raise ValueError("direction has the wrong dimension")
        v = v / np.linalg.norm(v)
        object.__setattr__(self, "direction", tuple(v))
        if self.amplitude <= -1.0 + PD_MARGIN:
            raise NonPositiveDefinite("rank-one amplitude must exceed -1")

    def _vv(self):
        v = np.array(self.direction)
        return np.outer(v, v)

    def metric(self, t, z):
        s, _ = self.profile(t, z)
        return np.eye(self.dim) + self.amplitude * s[..., None, None] * self._vv()

    def metric_derivative(self, t, z):
        s, ds = self.profile(t, z)
        vv = self._vv()
        g = np.eye(self.dim) + self.amplitude * s[..., None, None] * vv
        dg = self.amplitude * ds[..., :, None, None] * vv
        return g, dg

    def params(self):
        out = super().params()
        out["direction"] = list(self.direction)
        return out


@dataclass(frozen=True, eq=False)
class CallableMetric(MetricField):
    """Wraps a user function ``func(t, z) -> (..., n, n)``; derivatives by finite differences.

    The function must accept batched arguments. Such fields cannot be
    serialised.
    """

    func: Callable = None

    def metric(self, t, z):
        t, z = _batch(t, z)
        return np.asarray(self.func(t, z), dtype=float)


def _sandwich(jac, g):
    a = np.swapaxes(jac, -1, -2) @ (g @ jac)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class PullbackMetric(MetricField):
    """``(psi^* g)(t, z) = D psi_1^T g(t, psi_1(t, z)) D psi_1``."""

    family: ClassVar[str] = "pullback"
    base: MetricField = None
    diffeo: object = None

    def metric(self, t, z):
        t, z = _batch(t, z)
        w, jac = self.diffeo.psi1_and_jacobian(t, z)
        return _sandwich(jac, self.base.metric(t, w))

    def metric_derivative(self, t, z):
        # chain rule: derivatives of J from the diffeo, of g from the base metric
        t, z = _batch(t, z)
        w, jac, djac = self.diffeo.second_derivative(t, z)
        g, dg = self.base.metric_derivative(t, w)
        gj = g @ jac
        out = _sandwich(jac, g)
        term = np.einsum("...kai,...aj->...kij", djac, gj)
        dg_z = np.einsum("...lab,...lk->...kab", dg, jac)
        chain = np.swapaxes(jac, -1, -2)[..., None, :, :] @ dg_z @ jac[..., None, :, :]
        return out, term + np.swapaxes(term, -1, -2) + chain

    def params(self):
        return {"metric": self.base.describe(), "diffeo": self.diffeo.describe()}


@dataclass(frozen=True, eq=False)
class TabulatedMetric(MetricField):
    """Spline interpolation (quintic by default) of ``g - I`` on a regular (t, z) grid.

    ``values`` has shape ``(N_t, N_1, ..., N_n, n(n+1)/2)`` holding the upper
    triangle (row-major) of ``g - I``. Grid nodes are ``times`` along t and
    ``coords`` along every spatial axis. Outside the grid, for ``|z| >= R`` and
    for ``|t| >= T`` the field is exactly Euclidean.
    """

    family: ClassVar[str] = "tabulated"
    times: np.ndarray = None
    coords: np.ndarray = None
    values: np.ndarray = None
    source: str | None = None
    order: int = 5
    _coeffs: np.ndarray = dc_field(default=None, repr=False)

    def __post_init__(self):
        super().__post_init__()
        times = np.asarray(self.times, dtype=float)
        coords = np.asarray(self.coords, dtype=float)
        values = np.asarray(self.values, dtype=float)
        ncomp = self.dim * (self.dim + 1) // 2
        expected = (len(times),) + (len(coords),) * self.dim + (ncomp,)
        if values.shape != expected:
            raise ValueError(f"tabulated values have shape {values.shape}, expected {expected}")
        coeffs = np.stack(
            [ndimage.spline_filter(values[..., c], order=self.order, mode="nearest")
             for c in range(ncomp)],
            axis=-1,
        )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_coeffs", coeffs)

    @classmethod
    def from_field(cls, field: MetricField, step: float, time_step: float | None = None,
                   source: str | None = None, order: int = 5) -> "TabulatedMetric":
        """Sample ``field`` on a grid of spacing ``step`` covering [-T,T] x [-R,R]^n."""
        n, R, T = field.dim, field.R, field.T
        m = int(np.ceil(R / step))
        coords = np.linspace(-R, R, 2 * m + 1)
        time_step = step if time_step is None else time_step
        k = int(np.ceil(T / time_step))
        times = np.linspace(-T, T, 2 * k + 1)
        iu = np.triu_indices(n)
        mesh = np.stack(np.meshgrid(*([coords] * n), indexing="ij"), axis=-1)
        values = np.empty((len(times),) + mesh.shape[:-1] + (len(iu[0]),))
        eye = np.eye(n)
        for a, t in enumerate(times):
            g = field.metric(np.full(mesh.shape[:-1], t), mesh)
            values[a] = (g - eye)[..., iu[0], iu[1]]
        return cls(n, R, T, times=times, coords=coords, values=values, source=source, order=order)

    def metric(self, t, z):
        t, z = _batch(t, z)
        n = self.dim
        batch = z.shape[:-1]
        flat_t = t.reshape(-1)
        flat_z = z.reshape(-1, n)
        out = _identity((flat_t.size,), n)
        ok = (
            (np.abs(flat_t) < self.T)
            # the boundary sphere itself (up to rounding) counts as outside
            & (np.einsum("bi,bi->b", flat_z, flat_z) < self.R**2 * (1.0 - 1e-12))
            & (flat_t >= self.times[0]) & (flat_t <= self.times[-1])
            & np.all((flat_z >= self.coords[0]) & (flat_z <= self.coords[-1]), axis=-1)
        )
        if np.any(ok):
            dt = self.times[1] - self.times[0]
            dx = self.coords[1] - self.coords[0]
            idx = np.vstack([(flat_t[ok] - self.times[0]) / dt,
                             ((flat_z[ok] - self.coords[0]) / dx).T])
            iu = np.triu_indices(n)
            delta = np.zeros((idx.shape[1], n, n))
            for c, (i, j) in enumerate(zip(*iu)):
                vals = ndimage.map_coordinates(self._coeffs[..., c], idx, order=self.order,
                                               mode="nearest", prefilter=False)
                delta[:, i, j] = vals
                delta[:, j, i] = vals
            out[ok] += delta
        return out.reshape(batch + (n, n))

    def params(self):
        return {"data": self.source, "order": self.order}


# ---------------------------------------------------------------------------
# module-level operations


def eval_metric(field: MetricField, t, z):
    """Evaluate ``g`` and ``g^{-1}``; raise :class:`NonPositiveDefinite` on a bad matrix."""
    g = field.metric(t, z)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    eig = np.linalg.eigvalsh(g)
    if np.any(eig[..., 0] <= 0.0) or not np.all(np.isfinite(g)):
        raise NonPositiveDefinite(
            f"metric {field.family} has minimum eigenvalue {np.min(eig[..., 0]):.3g}")
    return g, np.linalg.inv(g)


def christoffel_from(g, dg):
    """``Gamma^k_ij`` from a metric and its derivatives, shape ``(..., n, n, n)`` as ``[k, i, j]``."""
    ginv = np.linalg.inv(g)
    # lower[l, i, j] = d_i g_lj + d_j g_li - d_l g_ij
    lower = (np.swapaxes(dg, -3, -2) + np.moveaxis(np.swapaxes(dg, -3, -2), -1, -2)
             - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lower)


def christoffel(field: MetricField, t, z):
    """Christoffel symbols of the second kind of ``g(t)`` at ``z``."""
    g, dg = field.metric_derivative(t, z)
    return christoffel_from(g, dg)


def pullback(g2: MetricField, psi, check: bool = True) -> PullbackMetric:
    """Pull ``g2`` back along a time-slice preserving diffeomorphism.

    With ``check`` the result is evaluated on a shell outside ``B_R`` and on
    time slices ``|t| >= T``; any deviation from the identity larger than
    1e-12 raises :class:`SupportViolation`.
    """
    if g2.dim != psi.dim:
        raise ValueError(f"dimension mismatch: metric {g2.dim}, diffeo {psi.dim}")
    out = PullbackMetric(g2.dim, g2.R, g2.T, base=g2, diffeo=psi)
    if check:
        dev = support_deviation(out)
        if dev > 1e-12:
            raise SupportViolation(
                f"pullback is not Euclidean outside [-T,T] x B_R(0) (deviation {dev:.3g})")
    return out


def support_shell(dim, R, T, count=200, radii=(1.0, 1.1, 1.5, 2.0), seed=0):
    """Sample points ``(t, z)`` where a compactly supported field must be flat.

    Returns spatial shell points ``|z| in radii * R`` at times in ``[-2T, 2T]``
    together with interior points on the slices ``|t| in {T, 1.5T}``.
    """
    from ..sampling import sphere_lattice

    rng = np.random.default_rng(seed)
    dirs = sphere_lattice(count, dim)
    r = np.asarray(radii)[rng.integers(0, len(radii), count)] * R
    z_shell = dirs * r[:, None]
    t_shell = rng.uniform(-2 * T, 2 * T, count)
    z_in = sphere_lattice(count, dim) * (R * rng.uniform(0, 1, count) ** (1.0 / dim))[:, None]
    t_in = rng.choice([-1.5 * T, -T, T, 1.5 * T], count)
    return np.concatenate([t_shell, t_in]), np.concatenate([z_shell, z_in])


def support_deviation(field: MetricField, count=200) -> float:
    """Largest entrywise ``|g - I|`` over :func:`support_shell` samples."""
    t, z = support_shell(field.dim, field.R, field.T, count)
    g = field.metric(t, z)
    return float(np.max(np.abs(g - np.eye(field.dim))))
