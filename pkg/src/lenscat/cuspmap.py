"""Free rays at infinity, the classical scattering map and the lens-equivalence comparator.

A free line ``{z0 + s y}`` on the time slice ``t`` is encoded frame-free as
``(y, xi1c, eta1c) = (y, -2 t, -(z0 - (z0 . y) y))``. The same convention
is used at both ends of a traversal; ``y`` is always the direction of travel.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from . import _parallel
from .errors import MissesBall, StepFailure, TrappedRay
from .flow import STEP_FAILURE, TRAPPED
from .sampling import disk_lattice, orthonormal_complement, sphere_lattice
from .scattering import OUTWARD, BoundaryRay, lens_batch, scatter


@dataclass(frozen=True, eq=False)
class CuspBoundaryPoint:
    y: np.ndarray
    xi1c: float
    eta1c: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        eta = np.array(self.eta1c, dtype=float)
        if abs(np.linalg.norm(y) - 1.0) > 1e-12:
            raise ValueError("y must be a unit vector")
        if abs(eta @ y) > 1e-10:
            raise ValueError("eta1c must be orthogonal to y")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "eta1c", eta)
        object.__setattr__(self, "xi1c", float(self.xi1c))

    @property
    def t(self):
        return -0.5 * self.xi1c

    def twisted(self) -> "CuspBoundaryPoint":
        """Fiber sign flipped, the orientation used when graphs are compared."""
        return CuspBoundaryPoint(self.y, -self.xi1c, -self.eta1c)

    def to_dict(self):
        return {"y": self.y.tolist(), "xi1c": self.xi1c, "eta1c": self.eta1c.tolist()}


@dataclass(frozen=True, eq=False)
class SojournGraphPoint:
    incoming: CuspBoundaryPoint
    outgoing: CuspBoundaryPoint
    n1: float
    length: float = 0.0


def _perp(z, y):
    return z - np.sum(z * y, axis=-1, keepdims=True) * y


def ray_to_cusp(t, z0, v) -> CuspBoundaryPoint:
    """Cusp datum of the free line through ``z0`` with direction ``v`` on slice ``t``."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    return CuspBoundaryPoint(v, 0.0 - 2.0 * float(t), 0.0 - _perp(np.asarray(z0, dtype=float), v))


def _chord_ends(eta, y, R):
    """First and last crossings of ``|z| = R`` by the line ``-eta + s y``."""
    half = np.sqrt(R * R - np.sum(eta * eta, axis=-1))[..., None]
    return -eta - half * y, -eta + half * y


def cusp_to_entry(p: CuspBoundaryPoint, R: float) -> BoundaryRay:
    """First point where the incoming free line of ``p`` meets ``|z| = R``."""
    if np.linalg.norm(p.eta1c) >= R - 1e-12:
        raise MissesBall(f"|eta1c| = {np.linalg.norm(p.eta1c):.6g} does not meet B_{R:g}")
    z, _ = _chord_ends(p.eta1c, p.y, R)
    return BoundaryRay(p.t, z * (R / np.linalg.norm(z)), p.y, R=R)


def cusp_to_exit(p: CuspBoundaryPoint, R: float) -> BoundaryRay:
    """Last point where the outgoing free line of ``p`` meets ``|z| = R``."""
    if np.linalg.norm(p.eta1c) >= R - 1e-12:
        raise MissesBall(f"|eta1c| = {np.linalg.norm(p.eta1c):.6g} does not meet B_{R:g}")
    _, z = _chord_ends(p.eta1c, p.y, R)
    return BoundaryRay(p.t, z * (R / np.linalg.norm(z)), p.y, orientation=OUTWARD, R=R)


def classical_scattering_map(field, p: CuspBoundaryPoint, *, radius=None, **kw) -> SojournGraphPoint:
    """Outgoing cusp datum and ``n1 = -sojourn`` of the ray arriving along ``p``.

    Lines that miss the ball never meet the perturbation and are returned
    unchanged with ``n1 = 0``.
    """
    R = field.R if radius is None else float(radius)
    if np.linalg.norm(p.eta1c) >= R - 1e-12:
        return SojournGraphPoint(p, p, 0.0, 0.0)
    res = scatter(field, cusp_to_entry(p, R), radius=R, **kw)
    out = ray_to_cusp(res.exit.t, res.exit.z, res.exit.v)
    return SojournGraphPoint(p, out, 0.0 - res.sojourn, res.length)


def truncated_map_via_infinity(field, entry: BoundaryRay, *, radius=None, **kw) -> BoundaryRay:
    """Scattering relation computed through infinity: extend back, map, intersect on the way out."""
    R = field.R if radius is None else float(radius)
    p = ray_to_cusp(entry.t, entry.z, entry.v)
    q = classical_scattering_map(field, p, radius=R, **kw).outgoing
    # an inward entry always meets the ball, and so does its image
    assert np.linalg.norm(q.eta1c) < R, "outgoing line misses the ball"
    return cusp_to_exit(q, R)


# ---------------------------------------------------------------------------
# batched graphs


@dataclass
class GraphTable:
    """Sampled graph of the classical scattering map with ``n1`` attached."""

    y_in: np.ndarray
    xi_in: np.ndarray
    eta_in: np.ndarray
    y_out: np.ndarray
    xi_out: np.ndarray
    eta_out: np.ndarray
    n1: np.ndarray
    length: np.ndarray
    status: np.ndarray

    def __len__(self):
        return len(self.xi_in)

    def point(self, k) -> SojournGraphPoint:
        return SojournGraphPoint(
            CuspBoundaryPoint(self.y_in[k], self.xi_in[k], self.eta_in[k]),
            CuspBoundaryPoint(self.y_out[k], self.xi_out[k], self.eta_out[k]),
            float(self.n1[k]), float(self.length[k]))

    def columns(self):
        n = self.y_in.shape[1]
        cols = []
        for end in ("in", "out"):
            cols += [f"y_{end}_{i + 1}" for i in range(n)] + [f"xi1c_{end}"]
            cols += [f"eta1c_{end}_{i + 1}" for i in range(n)]
        return cols + ["n1"]

    def rows(self):
        return np.column_stack([self.y_in, self.xi_in, self.eta_in,
                                self.y_out, self.xi_out, self.eta_out, self.n1])

    def to_csv(self, fh, header_comment=None):
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


def graph_batch(field, y, xi, eta, *, radius=None, max_length=None) -> GraphTable:
    """Vectorized :func:`classical_scattering_map` over arrays of cusp data."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi = np.asarray(xi, dtype=float).reshape(-1)
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    R = field.R if radius is None else float(radius)
    y_out, xi_out, eta_out = y.copy(), xi.copy(), eta.copy()
    n1 = np.zeros(len(xi))
    length = np.zeros(len(xi))
    status = np.zeros(len(xi), dtype=int)
    hits = np.flatnonzero(np.linalg.norm(eta, axis=1) < R - 1e-12)
    if hits.size:
        z_in, _ = _chord_ends(eta[hits], y[hits], R)
        z_in *= (R / np.linalg.norm(z_in, axis=1))[:, None]
        t = -0.5 * xi[hits]
        tab = lens_batch(field, t, z_in, y[hits], radius=R, max_length=max_length)
        v = tab.v_out
        y_out[hits] = v
        xi_out[hits] = 0.0 - 2.0 * t
        eta_out[hits] = 0.0 - _perp(tab.z_out, v)
        n1[hits] = 0.0 - tab.sojourn
        length[hits] = tab.length
        status[hits] = tab.status
    return GraphTable(y, xi, eta, y_out, xi_out, eta_out, n1, length, status)


def graph_sweep(field, y, xi, eta, *, workers=None, chunk=_parallel.CHUNK, **kw) -> GraphTable:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    xi = np.asarray(xi, dtype=float).reshape(-1)
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    jobs = [(field, y[sl], xi[sl], eta[sl], kw) for sl in _parallel.chunk_slices(len(xi), chunk)]
    if not jobs:
        return graph_batch(field, y, xi, eta, **kw)
    return GraphTable.concatenate(_parallel.ordered_map(_graph_job, jobs, workers))


def _graph_job(field, y, xi, eta, kw):
    return graph_batch(field, y, xi, eta, **kw)


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class CuspSampling:
    """Cusp data for comparison sweeps.

    ``lattice``: Fibonacci directions, a uniform ``xi1c`` grid on
    ``[-2T - 1, 2T + 1]`` and sunflower offsets of radius ``0.95 R`` in
    ``y^perp``. ``random`` draws the same ranges uniformly from ``seed``.
    """

    directions: int = 8
    xi: int = 9
    eta: int = 8
    mode: str = "lattice"
    seed: int = 0
    eta_fraction: float = 0.95

    @property
    def count(self):
        return self.directions * self.xi * self.eta

    def points(self, dim, R, T):
        lim = 2.0 * T + 1.0
        if self.mode == "random":
            rng = np.random.default_rng(self.seed)
            m = self.count
            y = rng.standard_normal((m, dim))
            y /= np.linalg.norm(y, axis=1, keepdims=True)
            xi = rng.uniform(-lim, lim, m)
            w = rng.standard_normal((m, dim))
            w = _perp(w, y)
            w /= np.linalg.norm(w, axis=1, keepdims=True)
            rad = self.eta_fraction * R * rng.uniform(0, 1, m) ** (1.0 / (dim - 1))
            return y, xi, w * rad[:, None]
        if self.mode != "lattice":
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        dirs = sphere_lattice(self.directions, dim)
        xis = np.linspace(-lim, lim, self.xi) if self.xi > 1 else np.zeros(1)
        disk = disk_lattice(self.eta, dim - 1) * self.eta_fraction * R
        ys, xs, es = [], [], []
        for y in dirs:
            frame = orthonormal_complement(y)
            offsets = disk @ frame
            for x in xis:
                ys.append(np.broadcast_to(y, offsets.shape))
                xs.append(np.full(len(offsets), x))
                es.append(offsets)
        return np.concatenate(ys), np.concatenate(xs), np.concatenate(es)


def _angle(a, b):
    return 2.0 * np.arcsin(np.clip(0.5 * np.linalg.norm(a - b, axis=-1), 0.0, 1.0))


@dataclass
class LensReport:
    n_samples: int
    tol: float
    R: float
    max_y_angle: float
    max_xi1c: float
    max_eta1c: float
    max_n1: float
    max_length: float
    max_normalized: float
    worst_sample: dict | None
    n_failed: int
    failed: list = dc_field(default_factory=list)
    equivalent: bool = False

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def lens_equivalent(g1, g2, samples: CuspSampling | None = None, tol: float = 1e-5, *,
                    workers=None, max_length=None, graphs=False):
    """Decide whether two metrics have the same scattering graph and the same ``n1`` on it.

    Outgoing directions are compared by their angle, ``eta1c`` and ``n1`` by
    their difference divided by ``R``, ``xi1c`` by its difference. Samples
    where either ray fails to exit are listed and make the verdict false.
    Pass ``graphs=True`` to get ``(report, table1, table2)``.
    """
    if (g1.dim, g1.R, g1.T) != (g2.dim, g2.R, g2.T):
        raise ValueError("metrics must share dim, R and T")
    samples = samples or CuspSampling()
    R = g1.R
    y, xi, eta = samples.points(g1.dim, R, g1.T)
    tab1 = graph_sweep(g1, y, xi, eta, workers=workers, max_length=max_length)
    tab2 = graph_sweep(g2, y, xi, eta, workers=workers, max_length=max_length)
    bad = (tab1.status == TRAPPED) | (tab1.status == STEP_FAILURE) \
        | (tab2.status == TRAPPED) | (tab2.status == STEP_FAILURE)
    ok = ~bad
    # both graphs are stored untwisted; the twist flips the fiber sign of the
    # outgoing factor of each and so cancels in every difference below
    d_y = _angle(tab1.y_out, tab2.y_out)
    d_xi = np.abs((-tab1.xi_out) - (-tab2.xi_out))
    d_eta = np.linalg.norm((-tab1.eta_out) - (-tab2.eta_out), axis=1)
    d_n1 = np.abs(tab1.n1 - tab2.n1)
    d_len = np.abs(tab1.length - tab2.length)
    score = np.maximum.reduce([d_y, d_xi, d_eta / R, d_n1 / R])
    score = np.where(ok, score, 0.0)

    def mx(a):
        return float(np.max(a[ok])) if ok.any() else 0.0

    worst = None
    if ok.any():
        k = int(np.argmax(score))
        worst = {"index": k, "incoming": tab1.point(k).incoming.to_dict(),
                 "outgoing_1": tab1.point(k).outgoing.to_dict(),
                 "outgoing_2": tab2.point(k).outgoing.to_dict(),
                 "n1_1": float(tab1.n1[k]), "n1_2": float(tab2.n1[k])}
    failed = [{"index": int(k), "incoming": tab1.point(k).incoming.to_dict(),
               "status_1": int(tab1.status[k]), "status_2": int(tab2.status[k])}
              for k in np.flatnonzero(bad)[:20]]
    report = LensReport(
        n_samples=len(xi), tol=tol, R=R, max_y_angle=mx(d_y), max_xi1c=mx(d_xi),
        max_eta1c=mx(d_eta), max_n1=mx(d_n1), max_length=mx(d_len),
        max_normalized=mx(score), worst_sample=worst, n_failed=int(bad.sum()), failed=failed,
        equivalent=bool(not bad.any() and mx(score) <= tol))
    if graphs:
        return report, tab1, tab2
    return report
