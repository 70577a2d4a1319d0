"""Time-slice preserving diffeomorphisms ``psi(t, z) = (t, psi_1(t, z))``.

The builtin families are time-1 flows of compactly supported vector fields
(one per frozen t), so they are global diffeomorphisms equal to the identity
outside their support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .._fd import spatial_gradient
from .._profiles import mollifier, mollifier_second
from ..errors import SupportViolation


def _batch(t, z):
    z = np.asarray(z, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), z.shape[:-1])
    return t, z


@dataclass(frozen=True, eq=False)
class DiffeoField:
    dim: int
    R: float
    T: float

    family: ClassVar[str] = "custom"

    def psi1(self, t, z):
        return self.psi1_and_jacobian(t, z)[0]

    def jacobian(self, t, z):
        """Spatial Jacobian ``J[..., a, b] = d psi_a / d z_b``."""
        return self.psi1_and_jacobian(t, z)[1]

    def psi1_and_jacobian(self, t, z):
        raise NotImplementedError

    def second_derivative(self, t, z):
        """Return ``(psi_1, J, dJ)`` with ``dJ[..., k, a, b] = d J_ab / d z_k``.

        Default: central differences of the Jacobian.
        """
        t, z = _batch(t, z)
        w, jac = self.psi1_and_jacobian(t, z)
        djac = spatial_gradient(self.jacobian, t, z, 1e-4 * self.R, order=4)
        return w, jac, djac

    def inverse(self, t, w, tol=1e-14, max_iter=50):
        """Solve ``psi_1(t, z) = w`` by Newton iteration started at ``z = w``."""
        t, w = _batch(t, w)
        z = w.copy()
        for _ in range(max_iter):
            p, jac = self.psi1_and_jacobian(t, z)
            r = p - w
            if np.max(np.abs(r), initial=0.0) <= tol * max(1.0, self.R):
                break
            z = z - np.linalg.solve(jac, r[..., None])[..., 0]
        return z

    @property
    def support_radius(self) -> float:
        return self.R

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"dim": self.dim, "R": self.R, "T": self.T,
                "family": self.family, "params": self.params()}


@dataclass(frozen=True, eq=False)
class IdentityDiffeo(DiffeoField):
    family: ClassVar[str] = "identity"

    def psi1_and_jacobian(self, t, z):
        t, z = _batch(t, z)
        jac = np.broadcast_to(np.eye(self.dim), z.shape + (self.dim,)).copy()
        return z.copy(), jac

    def second_derivative(self, t, z):
        w, jac = self.psi1_and_jacobian(t, z)
        return w, jac, np.zeros(jac.shape[:-2] + (self.dim,) * 3)

    def inverse(self, t, w, tol=1e-14, max_iter=50):
        return np.array(w, dtype=float)


def _plane_generators(dim, plane):
    i, j = plane
    if i == j or not (0 <= i < dim and 0 <= j < dim):
        raise ValueError(f"invalid rotation plane {plane} for dimension {dim}")
    gen = np.zeros((dim, dim))
    gen[j, i] = 1.0
    gen[i, j] = -1.0
    proj = -gen @ gen
    return gen, proj


@dataclass(frozen=True, eq=False)
class _ProfileDiffeo(DiffeoField):
    """Shared bump ``b(t, z) = m(|z-c|^2/radius^2) m(t^2/time_width^2)``."""

    amplitude: float = 0.3
    center: tuple = ()
    radius: float = 1.0
    time_width: float | None = None

    def __post_init__(self):
        center = tuple(float(c) for c in self.center) or (0.0,) * self.dim
        if len(center) != self.dim:
            raise ValueError("diffeo center has the wrong dimension")
        object.__setattr__(self, "center", center)
        if self.time_width is None:
            object.__setattr__(self, "time_width", float(self.T))
        if self.radius <= 0 or self.time_width <= 0:
            raise ValueError("radius and time_width must be positive")

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius

    def check_support(self):
        """Raise :class:`SupportViolation` unless the support lies in [-T,T] x B_R(0)."""
        if self.support_radius > self.R or self.time_width > self.T:
            raise SupportViolation(
                f"{self.family} support (radius {self.support_radius:.3g}, time "
                f"{self.time_width:.3g}) exceeds R={self.R:.3g}, T={self.T:.3g}")

    def profile(self, t, z):
        t, z = _batch(t, z)
        d = z - np.array(self.center)
        m_space, dm_space = mollifier(np.sum(d * d, axis=-1) / self.radius**2)
        m_time, _ = mollifier(t * t / self.time_width**2)
        b = m_space * m_time
        db = (2.0 / self.radius**2) * d * (dm_space * m_time)[..., None]
        return b, db

    def profile_hessian(self, t, z):
        """Return ``(b, grad b, Hess b)`` in the spatial variable."""
        t, z = _batch(t, z)
        d = z - np.array(self.center)
        rho = np.sum(d * d, axis=-1) / self.radius**2
        m_space, dm = mollifier(rho)
        ddm = mollifier_second(rho)
        m_time, _ = mollifier(t * t / self.time_width**2)
        r2 = self.radius**2
        b = m_space * m_time
        db = (2.0 / r2) * d * (dm * m_time)[..., None]
        hess = ((4.0 / r2**2) * (ddm * m_time)[..., None, None] * d[..., :, None] * d[..., None, :]
                + (2.0 / r2) * (dm * m_time)[..., None, None] * np.eye(self.dim))
        return b, db, hess

    def params(self):
        return {"amplitude": self.amplitude, "center": list(self.center),
                "radius": self.radius, "time_width": self.time_width}


@dataclass(frozen=True, eq=False)
class SwirlDiffeo(_ProfileDiffeo):
    """Rotation about ``center`` in a coordinate plane by the angle ``amplitude * b(t, z)``.

    This is the exact time-1 flow of ``X = amplitude * b * J (z - c)``: the
    angle depends on ``|z - c|`` only, which the flow preserves.
    """

    family: ClassVar[str] = "swirl"
    plane: tuple = (0, 1)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "plane", tuple(int(p) for p in self.plane))
        _plane_generators(self.dim, self.plane)

    def psi1_and_jacobian(self, t, z):
        t, z = _batch(t, z)
        gen, proj = _plane_generators(self.dim, self.plane)
        b, db = self.profile(t, z)
        theta = self.amplitude * b
        dtheta = self.amplitude * db
        c, s = np.cos(theta), np.sin(theta)
        delta = (c - 1.0)[..., None, None] * proj + s[..., None, None] * gen
        rot = np.eye(self.dim) + delta
        d = z - np.array(self.center)
        # written as z + (rot - I) d so that the map is exactly the identity where theta = 0
        w = z + np.einsum("...ij,...j->...i", delta, d)
        drot_d = (-s[..., None] * (d @ proj.T)) + c[..., None] * (d @ gen.T)
        jac = rot + drot_d[..., :, None] * dtheta[..., None, :]
        return w, jac

    def second_derivative(self, t, z):
        t, z = _batch(t, z)
        gen, proj = _plane_generators(self.dim, self.plane)
        b, db, hb = self.profile_hessian(t, z)
        a = self.amplitude
        theta, dth, hth = a * b, a * db, a * hb
        c, s = np.cos(theta)[..., None, None], np.sin(theta)[..., None, None]
        eye = np.eye(self.dim)
        delta = (c - 1.0) * proj + s * gen
        rot = eye + delta
        rot1 = -s * proj + c * gen      # d rot / d theta
        rot2 = -c * proj - s * gen      # d^2 rot / d theta^2
        d = z - np.array(self.center)
        w = z + np.einsum("...ij,...j->...i", delta, d)
        r1d = np.einsum("...ij,...j->...i", rot1, d)
        r2d = np.einsum("...ij,...j->...i", rot2, d)
        jac = rot + r1d[..., :, None] * dth[..., None, :]
        # d_k J_ab = rot1_ab th_k + rot1_ak th_b + (rot2 d)_a th_b th_k + (rot1 d)_a th_bk
        djac = (rot1[..., None, :, :] * dth[..., :, None, None]
                + np.swapaxes(rot1, -1, -2)[..., :, :, None] * dth[..., None, None, :]
                + r2d[..., None, :, None] * (dth[..., :, None] * dth[..., None, :])[..., :, None, :]
                + r1d[..., None, :, None] * hth[..., :, None, :])
        return w, jac, djac

    def inverse(self, t, w, tol=1e-14, max_iter=50):
        # |w - c| = |z - c|, so the angle can be read off at w
        t, w = _batch(t, w)
        gen, proj = _plane_generators(self.dim, self.plane)
        b, _ = self.profile(t, w)
        theta = -self.amplitude * b
        delta = (np.cos(theta) - 1.0)[..., None, None] * proj + np.sin(theta)[..., None, None] * gen
        d = w - np.array(self.center)
        return w + np.einsum("...ij,...j->...i", delta, d)

    def params(self):
        out = super().params()
        out["plane"] = list(self.plane)
        return out


@dataclass(frozen=True, eq=False)
class FlowDiffeo(_ProfileDiffeo):
    """Time-1 flow of a bump vector field, integrated with ``steps`` RK4 substeps.

    ``field="shear"`` uses ``X = amplitude * b * e`` with a fixed unit vector
    ``e``; ``field="swirl"`` uses the rotation field of :class:`SwirlDiffeo`.
    The Jacobian is obtained by applying the same RK4 scheme to the
    variational equation ``dJ/ds = DX J``, which makes it the exact
    derivative of the discrete map. Where ``b = 0`` the map is exactly the
    identity.
    """

    family: ClassVar[str] = "flow"
    field: str = "shear"
    direction: tuple = ()
    plane: tuple = (0, 1)
    steps: int = 8

    def __post_init__(self):
        super().__post_init__()
        if self.field not in ("shear", "swirl"):
            raise ValueError(f"unknown flow field {self.field!r}")
        e = np.array(self.direction or (1.0,) + (0.0,) * (self.dim - 1), dtype=float)
        if e.shape != (self.dim,):
            raise ValueError("direction has the wrong dimension")
        object.__setattr__(self, "direction", tuple(e / np.linalg.norm(e)))
        object.__setattr__(self, "plane", tuple(int(p) for p in self.plane))
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    def vector_field(self, t, z):
        """Return ``X(t, z)`` and ``DX(t, z)``."""
        b, db = self.profile(t, z)
        a = self.amplitude
        if self.field == "shear":
            e = np.array(self.direction)
            x = a * b[..., None] * e
            dx = a * e[:, None] * db[..., None, :]
        else:
            gen, _ = _plane_generators(self.dim, self.plane)
            jd = (z - np.array(self.center)) @ gen.T
            x = a * b[..., None] * jd
            dx = a * (b[..., None, None] * gen + jd[..., :, None] * db[..., None, :])
        return x, dx

    def vector_field_hessian(self, t, z):
        """Return ``X``, ``DX`` and ``D2X[..., a, p, q] = d_p d_q X_a``."""
        b, db, hb = self.profile_hessian(t, z)
        a = self.amplitude
        if self.field == "shear":
            e = np.array(self.direction)
            x = a * b[..., None] * e
            dx = a * e[:, None] * db[..., None, :]
            d2x = a * e[:, None, None] * hb[..., None, :, :]
        else:
            gen, _ = _plane_generators(self.dim, self.plane)
            jd = (z - np.array(self.center)) @ gen.T
            x = a * b[..., None] * jd
            dx = a * (b[..., None, None] * gen + jd[..., :, None] * db[..., None, :])
            gdb = gen[:, :, None] * db[..., None, None, :]
            d2x = a * (jd[..., :, None, None] * hb[..., None, :, :]
                       + gdb + np.swapaxes(gdb, -1, -2))
        return x, dx, d2x

    def second_derivative(self, t, z):
        # RK4 on (y, J, K) with dK/ds = D2X[J, J] + DX K, the exact
        # second derivative of the discrete map
        t, z = _batch(t, z)
        h = 1.0 / self.steps
        y = z.copy()
        jac = np.broadcast_to(np.eye(self.dim), z.shape + (self.dim,)).copy()
        k2 = np.zeros(z.shape + (self.dim, self.dim))

        def rhs(yy, jj, kk):
            x, dx, d2x = self.vector_field_hessian(t, yy)
            dk = (np.einsum("...apq,...pb,...qc->...abc", d2x, jj, jj)
                  + np.einsum("...ap,...pbc->...abc", dx, kk))
            return x, dx @ jj, dk

        for _ in range(self.steps):
            a1 = rhs(y, jac, k2)
            a2 = rhs(y + 0.5 * h * a1[0], jac + 0.5 * h * a1[1], k2 + 0.5 * h * a1[2])
            a3 = rhs(y + 0.5 * h * a2[0], jac + 0.5 * h * a2[1], k2 + 0.5 * h * a2[2])
            a4 = rhs(y + h * a3[0], jac + h * a3[1], k2 + h * a3[2])
            y = y + (h / 6.0) * (a1[0] + 2 * a2[0] + 2 * a3[0] + a4[0])
            jac = jac + (h / 6.0) * (a1[1] + 2 * a2[1] + 2 * a3[1] + a4[1])
            k2 = k2 + (h / 6.0) * (a1[2] + 2 * a2[2] + 2 * a3[2] + a4[2])
        return y, jac, np.moveaxis(k2, -1, -3)

    def psi1_and_jacobian(self, t, z):
        t, z = _batch(t, z)
        h = 1.0 / self.steps
        y = z.copy()
        jac = np.broadcast_to(np.eye(self.dim), z.shape + (self.dim,)).copy()
        for _ in range(self.steps):
            k1, a1 = self.vector_field(t, y)
            l1 = a1 @ jac
            k2, a2 = self.vector_field(t, y + 0.5 * h * k1)
            l2 = a2 @ (jac + 0.5 * h * l1)
            k3, a3 = self.vector_field(t, y + 0.5 * h * k2)
            l3 = a3 @ (jac + 0.5 * h * l2)
            k4, a4 = self.vector_field(t, y + h * k3)
            l4 = a4 @ (jac + h * l3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            jac = jac + (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
        return y, jac

    def params(self):
        out = super().params()
        out.update(field=self.field, direction=list(self.direction),
                   plane=list(self.plane), steps=self.steps)
        return out


@dataclass(frozen=True, eq=False)
class ComposedDiffeo(DiffeoField):
    """``outer o inner``."""

    family: ClassVar[str] = "compose"
    outer: DiffeoField = None
    inner: DiffeoField = None

    def psi1_and_jacobian(self, t, z):
        w, j_in = self.inner.psi1_and_jacobian(t, z)
        u, j_out = self.outer.psi1_and_jacobian(t, w)
        return u, j_out @ j_in

    def second_derivative(self, t, z):
        w, j_in, dj_in = self.inner.second_derivative(t, z)
        u, j_out, dj_out = self.outer.second_derivative(t, w)
        # d_k (J_out(w) J_in) = (d_l J_out) J_in[l, k] J_in + J_out d_k J_in
        dj_out_z = np.einsum("...lab,...lk->...kab", dj_out, j_in)
        return u, j_out @ j_in, dj_out_z @ j_in[..., None, :, :] + j_out[..., None, :, :] @ dj_in

    def inverse(self, t, w, tol=1e-14, max_iter=50):
        return self.inner.inverse(t, self.outer.inverse(t, w, tol, max_iter), tol, max_iter)

    @property
    def support_radius(self) -> float:
        return max(self.outer.support_radius, self.inner.support_radius)

    def params(self):
        return {"outer": self.outer.describe(), "inner": self.inner.describe()}


def compose(outer: DiffeoField, inner: DiffeoField) -> ComposedDiffeo:
    if outer.dim != inner.dim:
        raise ValueError("cannot compose diffeos of different dimension")
    return ComposedDiffeo(outer.dim, outer.R, outer.T, outer=outer, inner=inner)


def diffeo_report(psi: DiffeoField, count=200, seed=0) -> dict:
    """Sampled checks: minimum Jacobian determinant, identity on the support shell,
    and the inverse round-trip error."""
    from .fields import support_shell
    from ..sampling import sphere_lattice

    rng = np.random.default_rng(seed)
    z = sphere_lattice(count, psi.dim) * (psi.R * rng.uniform(0, 1, count) ** (1 / psi.dim))[:, None]
    t = rng.uniform(-psi.T, psi.T, count)
    w, jac = psi.psi1_and_jacobian(t, z)
    ts, zs = support_shell(psi.dim, psi.R, psi.T, count)
    ws = psi.psi1(ts, zs)
    back = psi.inverse(t, w)
    return {
        "min_jacobian_det": float(np.min(np.linalg.det(jac))),
        "max_shell_displacement": float(np.max(np.abs(ws - zs))),
        "max_roundtrip_error": float(np.max(np.abs(back - z))),
    }
