"""Frozen-time geodesic flow in cotangent form, with boundary event detection.

For the symbol ``p = tau + g^{ij}(t, z) zeta_i zeta_j`` the Hamilton field has
spatial part ``dz = 2 g^{-1} zeta``, ``dzeta_k = -d_k g^{ij} zeta_i zeta_j`` and
leaves ``t`` fixed. It moves at g-speed ``2 |zeta|_g``; everything here is
rescaled by ``1 / (2 |zeta|_g)`` so the flow parameter is arc length.

Rays are integrated in batches: each ray carries its own step size and is
accepted, rejected or stopped independently, so a ray's result does not
depend on the rest of its batch (up to floating-point reduction order).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import StepFailure, TrappedRay, ZeroMomentum

_NS = _dop.N_STAGES
_A = _dop.A[:_NS, :_NS]
_B = _dop.B
_E3 = _dop.E3
_E5 = _dop.E5

DONE, TRAPPED, STEP_FAILURE, GRAZING = 0, 1, 2, 3

# 1e-10 leaves relative energy drift near 1e-8 on glancing rays; 1e-12 keeps it below 1e-9
RTOL = ATOL = 1e-12


# ---------------------------------------------------------------------------
# states and stop conditions


@dataclass(frozen=True, eq=False)
class CotangentState:
    """Phase-space point ``(t; z; zeta)``; ``t`` is a frozen parameter."""

    t: float
    z: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "z", np.array(self.z, dtype=float))
        object.__setattr__(self, "zeta", np.array(self.zeta, dtype=float))

    def energy(self, field) -> float:
        return float(energy(field, self.t, self.z, self.zeta))


@dataclass(frozen=True)
class ExitBall:
    """Stop on the first outward crossing of ``|z| = radius``."""

    radius: float

    def value(self, z):
        return np.einsum("...i,...i->...", z, z) - self.radius**2

    @property
    def scale(self):
        return self.radius**2


@dataclass(frozen=True)
class PlaneCrossing:
    """Stop when ``normal . z - offset`` changes sign from negative to non-negative."""

    normal: tuple
    offset: float = 0.0

    def value(self, z):
        return z @ np.asarray(self.normal, dtype=float) - self.offset

    @property
    def scale(self):
        return max(1.0, abs(self.offset))


@dataclass(frozen=True)
class ArcLength:
    """Stop after exactly ``length`` units of arc length."""

    length: float


def energy(field, t, z, zeta):
    """``g^{ij} zeta_i zeta_j``."""
    g = field.metric(t, z)
    w = np.linalg.solve(g, np.asarray(zeta, dtype=float)[..., None])[..., 0]
    return np.einsum("...i,...i->...", zeta, w)


def _rhs(field, t, y):
    n = y.shape[-1] // 2
    z, zeta = y[:, :n], y[:, n:]
    g, dg = field.metric_derivative(t, z)
    w = np.linalg.solve(g, zeta[..., None])[..., 0]
    speed = np.sqrt(np.einsum("bi,bi->b", zeta, w))[:, None]
    dzeta = 0.5 * np.einsum("bkij,bi,bj->bk", dg, w, w)
    return np.concatenate([w / speed, dzeta / speed], axis=1)


def hamilton_rhs(field, state: CotangentState):
    """Unit-speed Hamilton field at ``state``: returns ``(dz/ds, dzeta/ds)``."""
    if np.linalg.norm(state.zeta) < 1e-14:
        raise ZeroMomentum("covector is zero; the ray has no direction")
    y = np.concatenate([state.z, state.zeta])[None]
    out = _rhs(field, np.array([state.t]), y)[0]
    n = state.z.shape[0]
    return out[:n], out[n:]


# ---------------------------------------------------------------------------
# DOP853 machinery


def _step(field, t, y, f0, h):
    k = np.empty((_NS + 1,) + y.shape)
    k[0] = f0
    for s in range(1, _NS):
        dy = np.tensordot(_A[s, :s], k[:s], axes=(0, 0)) * h[:, None]
        k[s] = _rhs(field, t, y + dy)
    y_new = y + h[:, None] * np.tensordot(_B, k[:_NS], axes=(0, 0))
    return y_new, k


def _error_norm(k, h, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    err5 = np.tensordot(_E5, k, axes=(0, 0)) / scale
    err3 = np.tensordot(_E3, k, axes=(0, 0)) / scale
    e5 = np.sum(err5**2, axis=1)
    e3 = np.sum(err3**2, axis=1)
    denom = e5 + 0.01 * e3
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, np.abs(h) * e5 / np.sqrt(safe * y.shape[1]), 0.0)


def _dense(field, t, y, y_new, k, h):
    """Coefficients of the 7th-order DOP853 interpolant over one accepted step."""
    m, d = y.shape
    kx = np.empty((_dop.N_STAGES_EXTENDED, m, d))
    kx[:_NS + 1] = k
    for s in range(_NS + 1, _dop.N_STAGES_EXTENDED):
        dy = np.tensordot(_dop.A[s, :s], kx[:s], axes=(0, 0)) * h[:, None]
        kx[s] = _rhs(field, t, y + dy)
    dy = y_new - y
    coef = np.empty((_dop.INTERPOLATOR_POWER, m, d))
    coef[0] = dy
    coef[1] = h[:, None] * k[0] - dy
    coef[2] = 2.0 * dy - h[:, None] * (k[_NS] + k[0])
    coef[3:] = h[None, :, None] * np.tensordot(_dop.D, kx, axes=(1, 0))
    return coef


def _dense_eval(y, coef, x):
    out = np.zeros_like(y)
    for i, c in enumerate(coef[::-1]):
        out += c
        out *= (x if i % 2 == 0 else 1.0 - x)[:, None]
    return y + out


def _locate(stop, y, coef, fa, fb, ftol, max_iter=100):
    """Illinois regula falsi for the event on the step's interpolant.

    Returns the state at the root and the root as a fraction of the step.
    """
    n = y.shape[1] // 2
    m = len(y)
    a = np.zeros(m)
    b = np.ones(m)
    fa = fa.copy()
    fb = fb.copy()
    x = np.ones(m)
    side = np.zeros(m, dtype=int)
    work = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        if not work.any():
            break
        denom = fb - fa
        c = np.where(denom != 0, b - fb * (b - a) / np.where(denom != 0, denom, 1.0), 0.5 * (a + b))
        c = np.where((c > a) & (c < b), c, 0.5 * (a + b))
        fc = stop.value(_dense_eval(y, coef, c)[:, :n])
        up = fc >= 0
        # Illinois: halve the retained endpoint's value when the same side repeats
        fa = np.where(work & up & (side == 1), 0.5 * fa, fa)
        fb = np.where(work & ~up & (side == -1), 0.5 * fb, fb)
        b = np.where(work & up, c, b)
        fb = np.where(work & up, fc, fb)
        a = np.where(work & ~up, c, a)
        fa = np.where(work & ~up, fc, fa)
        side = np.where(up, 1, -1)
        x = np.where(work, c, x)
        work &= (np.abs(fc) > ftol) & (b - a > 1e-15)
    return _dense_eval(y, coef, x), x


@dataclass
class BatchResult:
    z: np.ndarray
    zeta: np.ndarray
    length: np.ndarray
    status: np.ndarray
    energy_start: np.ndarray
    energy_end: np.ndarray
    samples: list | None = None

    @property
    def energy_drift(self):
        return np.abs(self.energy_end - self.energy_start) / self.energy_start


def integrate_batch(field, t, z0, zeta0, stop, *, rtol=RTOL, atol=ATOL,
                    max_length=None, first_step=None, renormalize=False, record=False):
    """Integrate many rays of one metric until ``stop``.

    Status codes per ray: ``DONE``, ``TRAPPED`` (arc length exceeded
    ``max_length``, default ``50 R``), ``STEP_FAILURE`` and ``GRAZING``
    (started on the stop surface without entering it; length 0).
    """
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    zeta0 = np.atleast_2d(np.asarray(zeta0, dtype=float))
    nb, n = z0.shape
    t = np.broadcast_to(np.asarray(t, dtype=float), (nb,)).copy()
    if np.any(np.linalg.norm(zeta0, axis=1) < 1e-14):
        raise ZeroMomentum("covector is zero; the ray has no direction")
    y = np.concatenate([z0, zeta0], axis=1)
    f = _rhs(field, t, y)
    e_start = energy(field, t, z0, zeta0)
    s = np.zeros(nb)
    status = np.full(nb, DONE)
    done = np.zeros(nb, dtype=bool)
    h = np.full(nb, 0.05 * field.R if first_step is None else float(first_step))
    samples = [[(0.0, y[i].copy())] for i in range(nb)] if record else None

    is_event = isinstance(stop, (ExitBall, PlaneCrossing))
    if is_event:
        budget = 50.0 * field.R if max_length is None else float(max_length)
        ev = stop.value(z0)
        surf_tol = 1e-9 * stop.scale
        if np.any(ev > surf_tol):
            raise ValueError("ray starts beyond its stop surface")
        armed = ev < -surf_tol
        on_surface = ~armed
        if isinstance(stop, ExitBall):
            # on the sphere z.v is minus the flat half-chord; cap the first step there
            radial = np.einsum("bi,bi->b", z0, f[:, :n])
            grazing = on_surface & (radial >= -1e-12 * stop.radius)
            h = np.where(on_surface & ~grazing, np.minimum(h, np.abs(radial)), h)
        else:
            normal_speed = f[:, :n] @ np.asarray(stop.normal, dtype=float)
            grazing = on_surface & (normal_speed >= 0)
        status[grazing] = GRAZING
        done[grazing] = True
    else:
        budget = float(stop.length)
        armed = np.zeros(nb, dtype=bool)

    while True:
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        ta, ya, fa_, ha = t[act], y[act], f[act], h[act]
        if not is_event:
            ha = np.minimum(ha, budget - s[act])
        y_new, k = _step(field, ta, ya, fa_, ha)
        f_new = _rhs(field, ta, y_new)
        k[_NS] = f_new
        err = _error_norm(k, ha, ya, y_new, rtol, atol)
        finite = np.all(np.isfinite(y_new), axis=1) & np.isfinite(err)
        accept = finite & (err < 1.0)
        with np.errstate(divide="ignore"):
            factor = np.where(err > 0, 0.9 * err ** (-1.0 / 8.0), 10.0)
        factor = np.where(accept, np.clip(factor, 0.2, 10.0), np.clip(factor, 0.2, 1.0))
        factor = np.where(finite, factor, 0.1)
        h_next = ha * factor

        if is_event:
            ev_new = stop.value(y_new[:, :n])
            premature = accept & ~armed[act] & (ev_new >= 0)
            accept &= ~premature
            h_next = np.where(premature, 0.25 * ha, h_next)
            cross = accept & armed[act] & (ev_new >= 0)
            if np.any(cross):
                idx = np.flatnonzero(cross)
                ev_old = stop.value(ya[idx, :n])
                coef = _dense(field, ta[idx], ya[idx], y_new[idx], k[:, idx], ha[idx])
                y_root, x_root = _locate(stop, ya[idx], coef, ev_old, ev_new[idx],
                                         1e-13 * stop.scale)
                c_root = x_root * ha[idx]
                rays = act[idx]
                y[rays] = y_root
                s[rays] += c_root
                done[rays] = True
                status[rays] = DONE
                if record:
                    for r, yr, sr in zip(rays, y_root, s[rays]):
                        samples[r].append((sr, yr.copy()))
            step_ok = accept & ~cross
        else:
            step_ok = accept

        if np.any(step_ok):
            idx = np.flatnonzero(step_ok)
            rays = act[idx]
            yn = y_new[idx]
            fn = f_new[idx]
            if renormalize:
                e_now = energy(field, t[rays], yn[:, :n], yn[:, n:])
                yn = yn.copy()
                yn[:, n:] *= np.sqrt(e_start[rays] / e_now)[:, None]
                fn = _rhs(field, t[rays], yn)
            y[rays] = yn
            f[rays] = fn
            s[rays] += ha[idx]
            if is_event:
                armed[rays] |= ev_new[idx] < 0
            if record:
                for r, yr, sr in zip(rays, yn, s[rays]):
                    samples[r].append((sr, yr.copy()))
            if is_event:
                over = s[rays] > budget
                status[rays[over]] = TRAPPED
                done[rays[over]] = True
            else:
                fin = s[rays] >= budget * (1.0 - 1e-15)
                s[rays[fin]] = budget
                done[rays[fin]] = True

        h[act] = np.where(done[act], h[act], h_next)
        tiny = ~done[act] & (h[act] < 1e-14 * np.maximum(1.0, s[act]))
        if np.any(tiny):
            status[act[tiny]] = STEP_FAILURE
            done[act[tiny]] = True

    zf, zetaf = y[:, :n], y[:, n:]
    e_end = energy(field, t, zf, zetaf)
    return BatchResult(zf.copy(), zetaf.copy(), s, status, e_start, e_end, samples)


# ---------------------------------------------------------------------------
# single rays


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples ``(s_k, z_k, zeta_k)`` along one ray, ``s`` being arc length."""

    t: float
    s: np.ndarray
    z: np.ndarray
    zeta: np.ndarray
    length: float
    exited: bool
    grazing: bool = False
    energy_drift: float = 0.0

    @property
    def final_state(self) -> CotangentState:
        return CotangentState(self.t, self.z[-1], self.zeta[-1])

    def energies(self, field):
        return energy(field, np.full(len(self.s), self.t), self.z, self.zeta)

    def to_csv(self, path_or_file, field):
        """Write columns ``s, z_1..z_n, zeta_1..zeta_n, energy``."""
        n = self.z.shape[1]
        header = (["s"] + [f"z_{i + 1}" for i in range(n)]
                  + [f"zeta_{i + 1}" for i in range(n)] + ["energy"])
        rows = np.column_stack([self.s, self.z, self.zeta, self.energies(field)])
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(x)) for x in row])
        finally:
            if own:
                fh.close()


def integrate_ray(field, start: CotangentState, stop, *, rtol=RTOL, atol=ATOL,
                  max_length=None, first_step=None, renormalize=False,
                  energy_tol=1e-9) -> Trajectory:
    """Integrate one ray and return its recorded :class:`Trajectory`.

    Raises :class:`TrappedRay` if an event stop is not reached within
    ``max_length`` (default ``50 R``) and :class:`StepFailure` if the step
    size underflows.
    """
    res = integrate_batch(field, [start.t], start.z[None], start.zeta[None], stop,
                          rtol=rtol, atol=atol, max_length=max_length,
                          first_step=first_step, renormalize=renormalize, record=True)
    code = res.status[0]
    if code == TRAPPED:
        raise TrappedRay(
            f"ray did not reach its stop surface within arc length {res.length[0]:.6g}",
            t=start.t, z=start.z, zeta=start.zeta, length=float(res.length[0]))
    if code == STEP_FAILURE:
        raise StepFailure(f"step size underflow at arc length {res.length[0]:.6g}")
    pts = res.samples[0]
    n = start.z.shape[0]
    s = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    drift = float(res.energy_drift[0])
    if drift > energy_tol:
        warnings.warn(f"relative energy drift {drift:.3g} exceeds {energy_tol:g}", RuntimeWarning)
    return Trajectory(start.t, s, ys[:, :n], ys[:, n:], float(res.length[0]),
                      exited=code in (DONE, GRAZING) and not isinstance(stop, ArcLength),
                      grazing=code == GRAZING, energy_drift=drift)
