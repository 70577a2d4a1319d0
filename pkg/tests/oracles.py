"""Independent reference computations used to freeze test fixtures.

Nothing here imports lenscat. The conformal bump is re-derived from its
definition, the geodesic equation is integrated in second-order (tangent)
form with classical fixed-step RK4, and the exit event is refined by
bisection on a partial step.
"""

import numpy as np


def mollifier(rho):
    """``exp(1 - 1/(1 - rho))`` on ``rho < 1``, zero beyond, with its derivative."""
    rho = np.asarray(rho, dtype=float)
    inside = rho < 1.0
    r = np.where(inside, rho, 0.0)
    val = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - r)), 0.0)
    der = np.where(inside, -val / (1.0 - r) ** 2, 0.0)
    return val, der


class ConformalBumpOracle:
    """``phi = A exp(-|z-c|^2/w^2) m(|z|^2/R^2) m(t^2/tau^2)``, metric ``exp(2 phi) delta``."""

    def __init__(self, amplitude, center, width, R, tau):
        self.A = float(amplitude)
        self.c = np.asarray(center, dtype=float)
        self.w = float(width)
        self.R = float(R)
        self.tau = float(tau)

    def phi_grad(self, t, z):
        d = z - self.c
        gauss = np.exp(-np.sum(d * d, axis=-1) / self.w**2)
        ms, dms = mollifier(np.sum(z * z, axis=-1) / self.R**2)
        mt, _ = mollifier(t * t / self.tau**2)
        phi = self.A * gauss * ms * mt
        grad = self.A * mt[..., None] * (
            gauss[..., None] * dms[..., None] * 2.0 * z / self.R**2
            - 2.0 * d / self.w**2 * (gauss * ms)[..., None])
        return phi, grad

    def accel(self, t, z, u):
        # Gamma^k_ij u^i u^j = 2 u_k (grad phi . u) - |u|^2 d_k phi
        _, gp = self.phi_grad(t, z)
        return -(2.0 * u * np.sum(gp * u, axis=-1, keepdims=True)
                 - np.sum(u * u, axis=-1, keepdims=True) * gp)


def _rk4(model, t, z, u, h):
    h = np.asarray(h, dtype=float)[..., None]
    k1z, k1u = u, model.accel(t, z, u)
    k2z, k2u = u + 0.5 * h * k1u, model.accel(t, z + 0.5 * h * k1z, u + 0.5 * h * k1u)
    k3z, k3u = u + 0.5 * h * k2u, model.accel(t, z + 0.5 * h * k2z, u + 0.5 * h * k2u)
    k4z, k4u = u + h * k3u, model.accel(t, z + h * k3z, u + h * k3u)
    z_new = z + h / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
    u_new = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    return z_new, u_new


def trace_exit(model, t, z0, v0, h=1e-5, radius=None, max_length=100.0, tol=1e-12):
    """Fixed-step RK4 from inward boundary data to the first exit from ``B_radius``.

    ``v0`` is a Euclidean unit vector at the boundary where the metric is flat,
    so it is also the unit g-velocity. Returns ``(z_exit, u_exit, length)``.
    """
    r2 = (model.R if radius is None else radius) ** 2
    t = np.asarray(t, dtype=float)
    z = np.array(z0, dtype=float)
    u = np.array(v0, dtype=float)
    m = len(t)
    s = np.zeros(m)
    active = np.ones(m, dtype=bool)
    armed = np.zeros(m, dtype=bool)
    z_out = z.copy()
    u_out = u.copy()
    n_steps = int(np.ceil(max_length / h))
    for _ in range(n_steps):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        zn, un = _rk4(model, t[idx], z[idx], u[idx], np.full(len(idx), h))
        f_new = np.sum(zn * zn, axis=-1) - r2
        crossed = armed[idx] & (f_new >= 0)
        if crossed.any():
            j = idx[crossed]
            lo = np.zeros(len(j))
            hi = np.full(len(j), h)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                zm, um = _rk4(model, t[j], z[j], u[j], mid)
                fm = np.sum(zm * zm, axis=-1) - r2
                up = fm >= 0
                hi = np.where(up, mid, hi)
                lo = np.where(up, lo, mid)
                if np.all(np.abs(fm) <= tol * r2) or np.all(hi - lo <= 1e-20):
                    break
            z_out[j] = zm
            u_out[j] = um
            s[j] += mid
            active[j] = False
        keep = idx[~crossed]
        z[keep] = zn[~crossed]
        u[keep] = un[~crossed]
        s[keep] += h
        armed[keep] |= f_new[~crossed] < 0
    if active.any():
        raise RuntimeError("oracle ray did not exit")
    return z_out, u_out, s


def trace_length(model, t, z0, v0, length, h=1e-5):
    """Fixed-step RK4 for exactly ``length`` units of arc length (``length/h`` integral)."""
    z = np.array(z0, dtype=float)
    u = np.array(v0, dtype=float)
    t = np.asarray(t, dtype=float)
    n = int(round(length / h))
    for _ in range(n):
        z, u = _rk4(model, t, z, u, np.full(len(t), h))
    return z, u


def unit_speed_start(model, t, z, direction):
    """Tangent vector of unit g-length along ``direction`` and the matching covector."""
    phi, _ = model.phi_grad(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    u = d * np.exp(-phi)[..., None]
    zeta = np.exp(2.0 * phi)[..., None] * u
    return u, zeta


def covector(model, t, z, u):
    phi, _ = model.phi_grad(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
    return np.exp(2.0 * phi)[..., None] * u


def diametral_length(model, t=0.0):
    """Length of the straight ray along the first axis through a centred symmetric bump,
    by adaptive quadrature of ``exp(phi)``."""
    from scipy.integrate import quad

    R = model.R
    n = len(model.c)

    def integrand(x):
        z = np.zeros(n)
        z[0] = x
        phi, _ = model.phi_grad(np.asarray(t), z)
        return float(np.exp(phi))

    val, _ = quad(integrand, -R, R, epsabs=1e-13, epsrel=1e-13, limit=400)
    return val
