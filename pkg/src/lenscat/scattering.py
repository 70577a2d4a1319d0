"""Lens data on the sphere ``|z| = R``: scattering relation, lengths and sojourn times."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from . import _parallel
from .errors import StepFailure, TrappedRay
from .flow import DONE, GRAZING, STEP_FAILURE, TRAPPED, CotangentState, ExitBall, integrate_batch, integrate_ray
from .sampling import hemisphere_lattice, random_inward_entries, rotate_axis, sphere_lattice

INWARD, OUTWARD = "inward", "outward"


@dataclass(frozen=True, eq=False)
class BoundaryRay:
    """A unit vector ``v`` at a point ``z`` of the sphere ``|z| = R`` on the slice ``t``.

    The metric is Euclidean on the sphere, so ``v`` is a Euclidean unit vector
    and the sign of ``z . v`` decides the orientation. ``R`` defaults to
    ``|z|``; pass it to have the point checked.
    """

    t: float
    z: np.ndarray
    v: np.ndarray
    orientation: str | None = None
    R: float | None = None

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        v = np.array(self.v, dtype=float)
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "v", v)
        r = float(np.linalg.norm(z))
        if self.R is None:
            object.__setattr__(self, "R", r)
        elif abs(r - self.R) > 1e-10 * self.R:
            raise ValueError(f"|z| = {r!r} is not on the sphere of radius {self.R!r}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError("v must be a unit vector")
        radial = float(z @ v) / r
        if abs(radial) < 1e-12:
            raise ValueError("tangential boundary ray")
        side = INWARD if radial < 0 else OUTWARD
        if self.orientation is None:
            object.__setattr__(self, "orientation", side)
        elif self.orientation != side:
            raise ValueError(f"ray labelled {self.orientation} points {side}")

    def reversed(self) -> "BoundaryRay":
        return BoundaryRay(self.t, self.z, -self.v, R=self.R)

    def to_dict(self):
        return {"t": self.t, "z": self.z.tolist(), "v": self.v.tolist(),
                "orientation": self.orientation}


@dataclass(frozen=True, eq=False)
class ScatterResult:
    entry: BoundaryRay
    exit: BoundaryRay
    length: float
    sojourn: float
    trajectory: object = None


class SojournLimit(NamedTuple):
    """Finite-``s`` value of the renormalized limit, its estimated residual, and the extrapolation."""

    value: float
    decay_estimate: float
    extrapolated: float


# ---------------------------------------------------------------------------
# batched core


@dataclass
class LensTable:
    """Lens data for a batch of inward entries (arrays indexed by ray)."""

    t: np.ndarray
    z_in: np.ndarray
    v_in: np.ndarray
    z_out: np.ndarray
    v_out: np.ndarray
    length: np.ndarray
    sojourn: np.ndarray
    status: np.ndarray
    energy_drift: np.ndarray

    def __len__(self):
        return len(self.t)

    def columns(self):
        n = self.z_in.shape[1]
        names = ["t"]
        for tag in ("z_in", "v_in", "z_out", "v_out"):
            names += [f"{tag}_{i + 1}" for i in range(n)]
        return names + ["length", "sojourn"]

    def rows(self):
        return np.column_stack([self.t, self.z_in, self.v_in, self.z_out, self.v_out,
                                self.length, self.sojourn])

    def to_csv(self, fh, header_comment=None):
        """CSV with columns ``t, z_in, v_in, z_out, v_out, length, sojourn``."""
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.columns())
        for row in self.rows():
            writer.writerow(["%.17g" % x for x in row])

    @classmethod
    def concatenate(cls, tables):
        return cls(*(np.concatenate([getattr(tb, k) for tb in tables])
                     for k in cls.__dataclass_fields__))


def _flat_chords(z, v):
    length = -2.0 * np.einsum("bi,bi->b", z, v)
    return z + length[:, None] * v, v.copy(), length


def lens_batch(field, t, z, v, *, radius=None, rtol=None, atol=None, max_length=None) -> LensTable:
    """Trace inward entries on the sphere ``|z| = radius`` (default ``R``) to their exits.

    Rays on slices ``|t| >= T`` or through a flat field use the exact chord.
    Trapped rays keep their last state and are marked by ``status``.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    r = field.R if radius is None else float(radius)
    if r < field.R:
        raise ValueError("truncation radius must be at least R")
    nb = len(t)
    z_out, v_out, length = _flat_chords(z, v)
    status = np.full(nb, DONE)
    drift = np.zeros(nb)
    radial = np.einsum("bi,bi->b", z, v) / r
    grazing = np.abs(radial) < 1e-12
    length[grazing] = 0.0
    z_out[grazing] = z[grazing]
    status[grazing] = GRAZING
    curved = ~grazing & (np.abs(t) < field.T) & (not field.is_flat)
    if np.any(curved):
        kw = {}
        if rtol is not None:
            kw["rtol"] = rtol
        if atol is not None:
            kw["atol"] = atol
        idx = np.flatnonzero(curved)
        res = integrate_batch(field, t[idx], z[idx], v[idx], ExitBall(r),
                              max_length=max_length, **kw)
        z_out[idx] = res.z
        # the metric is Euclidean on the sphere, so the covector is the velocity
        v_out[idx] = res.zeta / np.linalg.norm(res.zeta, axis=1, keepdims=True)
        length[idx] = res.length
        status[idx] = res.status
        drift[idx] = res.energy_drift
    sojourn = (-np.einsum("bi,bi->b", z_out, v_out) + length
               + np.einsum("bi,bi->b", z, v))
    return LensTable(t, z, v, z_out, v_out, length, sojourn, status, drift)


def lens_sweep(field, t, z, v, *, workers=None, chunk=_parallel.CHUNK, **kw) -> LensTable:
    """:func:`lens_batch` in fixed-size chunks, optionally over a process pool."""
    t = np.asarray(t, dtype=float).reshape(-1)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    jobs = [(field, t[sl], z[sl], v[sl], kw) for sl in _parallel.chunk_slices(len(t), chunk)]
    if not jobs:
        return lens_batch(field, t, z, v, **kw)
    return LensTable.concatenate(_parallel.ordered_map(_lens_job, jobs, workers))


def _lens_job(field, t, z, v, kw):
    return lens_batch(field, t, z, v, **kw)


# ---------------------------------------------------------------------------
# single-ray operations


def _check_entry(field, entry, radius):
    r = field.R if radius is None else float(radius)
    if entry.orientation != INWARD:
        raise ValueError("entry ray must point inward")
    if abs(np.linalg.norm(entry.z) - r) > 1e-10 * r:
        raise ValueError(f"entry is not on the sphere of radius {r}")
    if entry.z.shape[0] != field.dim:
        raise ValueError("entry dimension does not match the metric")
    return r


def scatter(field, entry: BoundaryRay, *, radius=None, record=False, max_length=None,
            **kw) -> ScatterResult:
    """Trace one inward entry; raises :class:`TrappedRay` if it does not exit."""
    r = _check_entry(field, entry, radius)
    table = lens_batch(field, [entry.t], entry.z[None], entry.v[None], radius=r,
                       max_length=max_length, **kw)
    code = table.status[0]
    if code == TRAPPED:
        raise TrappedRay(f"ray did not leave B_{r:g} within arc length {table.length[0]:.6g}",
                         t=entry.t, z=entry.z, zeta=entry.v, length=float(table.length[0]))
    if code == STEP_FAILURE:
        raise StepFailure("step size underflow while tracing the entry ray")
    trajectory = None
    if record:
        trajectory = integrate_ray(field, CotangentState(entry.t, entry.z, entry.v), ExitBall(r),
                                   max_length=max_length, **kw)
    exit_ray = _exit_ray(entry, table.z_out[0], table.v_out[0], r, code)
    return ScatterResult(entry, exit_ray, float(table.length[0]), float(table.sojourn[0]),
                         trajectory)


def _exit_ray(entry, z, v, r, code):
    if code == GRAZING:
        return entry
    # project onto the sphere: the event is located to ~1e-13 R
    z = z * (r / np.linalg.norm(z))
    return BoundaryRay(entry.t, z, v / np.linalg.norm(v), orientation=OUTWARD, R=r)


def scattering_relation(field, entry: BoundaryRay, *, radius=None, **kw) -> BoundaryRay:
    """First outward crossing of ``|z| = R`` along the frozen-time geodesic from ``entry``."""
    return scatter(field, entry, radius=radius, **kw).exit


def geodesic_length(field, entry: BoundaryRay, *, radius=None, **kw) -> float:
    """Arc length of the geodesic from ``entry`` to its exit."""
    return scatter(field, entry, radius=radius, **kw).length


def sojourn_closed(field, entry: BoundaryRay, *, radius=None, **kw) -> float:
    """``-z'.v' + length + z.v`` for the traversal starting at ``entry``; zero for flat space."""
    return scatter(field, entry, radius=radius, **kw).sojourn


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _limit_at(s, t, z, v, z_out, v_out, length):
    """``s - s' - <gamma(s)> - <gamma(s')>`` at ``s' = -s``, with ``<x> = sqrt(1 + t^2 + |x|^2)``.

    The ray is parametrized so that ``gamma(0) = z`` and the exit is reached
    at ``s = length``; both ends are straight lines. The forward and
    backward pieces are written in cancellation-free form.
    """
    c = 1.0 + t * t
    a_out = _dot(z_out, v_out)
    zz_out = _dot(z_out, z_out)
    fwd_sq = c + zz_out + 2.0 * (s - length) * a_out + (s - length) ** 2
    fwd = (2.0 * s * length - length**2 - 2.0 * (s - length) * a_out - zz_out - c) / (
        s + np.sqrt(fwd_sq))
    a_in = _dot(z, v)
    zz = _dot(z, z)
    bwd = (2.0 * s * a_in - zz - c) / (s + np.sqrt(c + zz - 2.0 * s * a_in + s * s))
    return fwd + bwd


def _richardson(s_max, *args):
    v1, v2, v4 = (_limit_at(k * s_max, *args) for k in (1.0, 2.0, 4.0))
    r1 = 2.0 * v2 - v1
    r2 = 2.0 * v4 - v2
    extrapolated = (4.0 * r2 - r1) / 3.0
    return v1, v1 - extrapolated, extrapolated


def sojourn_limit(field, entry: BoundaryRay, s_max: float, *, radius=None, **kw) -> SojournLimit:
    """Renormalized total sojourn time evaluated at ``s = s_max``.

    ``decay_estimate`` is the value minus its Richardson extrapolation from
    ``s_max``, ``2 s_max`` and ``4 s_max`` (the error decays like ``1/s``).
    """
    r = _check_entry(field, entry, radius)
    if s_max < 10.0 * r:
        raise ValueError("s_max must be at least 10 R")
    res = scatter(field, entry, radius=r, **kw)
    out = _richardson(s_max, entry.t, entry.z, entry.v, res.exit.z, res.exit.v, res.length)
    return SojournLimit(*(float(x) for x in out))


def sojourn_limit_table(table: LensTable, s_max: float):
    """Arrays ``(value, decay_estimate, extrapolated)`` for every row of a lens table."""
    return _richardson(s_max, table.t, table.z_in, table.v_in, table.z_out, table.v_out,
                       table.length)


# ---------------------------------------------------------------------------
# non-trapping


@dataclass(frozen=True)
class BoundarySampling:
    """Inward entries for sweeps.

    ``lattice`` takes the product of a Fibonacci lattice of boundary points,
    a hemispherical lattice of inward directions and a uniform time grid.
    ``random`` draws ``points * directions * times`` entries from ``seed``.
    """

    points: int = 64
    directions: int = 16
    times: int = 5
    mode: str = "lattice"
    seed: int = 0
    max_angle: float = 0.49 * np.pi

    @property
    def count(self):
        return self.points * self.directions * self.times

    def entries(self, dim, R, T):
        if self.mode == "random":
            return random_inward_entries(np.random.default_rng(self.seed), self.count, dim, R, T)
        if self.mode != "lattice":
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        normals = sphere_lattice(self.points, dim)
        local = hemisphere_lattice(self.directions, dim, self.max_angle)
        dirs = rotate_axis(local[None, :, :], -normals[:, None, :])
        times = np.linspace(-T, T, self.times) if self.times > 1 else np.zeros(1)
        z = np.repeat(R * normals, self.directions, axis=0)
        v = dirs.reshape(-1, dim)
        t = np.repeat(times, len(z))
        return t, np.tile(z, (len(times), 1)), np.tile(v, (len(times), 1))


@dataclass
class NonTrappingReport:
    n_rays: int
    max_length: float
    argmax_entry: dict | None
    n_trapped: int
    n_step_failures: int
    L_max: float
    certificate: bool
    offending: list = dc_field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def check_non_trapping(field, samples=None, L_max=None, *,
                       workers=None, max_offending=20) -> NonTrappingReport:
    """Trace a sample of inward entries and certify that all of them exit within ``L_max``.

    ``samples`` is a :class:`BoundarySampling` or explicit arrays ``(t, z, v)``.
    """
    samples = samples or BoundarySampling()
    L = 50.0 * field.R if L_max is None else float(L_max)
    if isinstance(samples, BoundarySampling):
        t, z, v = samples.entries(field.dim, field.R, field.T)
    else:
        t, z, v = (np.asarray(a, dtype=float) for a in samples)
        t = np.broadcast_to(t, z.shape[:-1])
    table = lens_sweep(field, t, z, v, workers=workers, max_length=L)
    trapped = table.status == TRAPPED
    failed = table.status == STEP_FAILURE
    ok = ~(trapped | failed)
    argmax = None
    max_len = 0.0
    if np.any(ok):
        k = int(np.flatnonzero(ok)[np.argmax(table.length[ok])])
        max_len = float(table.length[k])
        argmax = _entry_dict(table, k)
    bad = np.flatnonzero(trapped | failed)[:max_offending]
    offending = [dict(_entry_dict(table, k), status=int(table.status[k]),
                      length=float(table.length[k])) for k in bad]
    return NonTrappingReport(
        n_rays=len(table), max_length=max_len, argmax_entry=argmax,
        n_trapped=int(trapped.sum()), n_step_failures=int(failed.sum()), L_max=L,
        certificate=bool(not trapped.any() and not failed.any()), offending=offending)


def _entry_dict(table, k):
    return {"t": float(table.t[k]), "z": table.z_in[k].tolist(), "v": table.v_in[k].tolist()}
