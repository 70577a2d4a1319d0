"""Deterministic lattices and seeded random draws on spheres, hemispheres and disks."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, qmc

GOLDEN = (1.0 + 5.0**0.5) / 2.0


def sphere_lattice(count: int, dim: int) -> np.ndarray:
    """``count`` nearly uniform unit vectors in R^dim.

    Evenly spaced angles on the circle, the Fibonacci lattice on S^2, and an
    unscrambled Halton sequence pushed through the Gaussian quantile for
    higher dimensions.
    """
    i = np.arange(count) + 0.5
    if dim == 2:
        phi = 2.0 * np.pi * i / count
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    if dim == 3:
        zc = 1.0 - 2.0 * i / count
        r = np.sqrt(np.clip(1.0 - zc * zc, 0.0, None))
        phi = 2.0 * np.pi * i / GOLDEN
        return np.stack([r * np.cos(phi), r * np.sin(phi), zc], axis=-1)
    u = qmc.Halton(dim, scramble=False).random(count + 1)[1:]
    x = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def orthonormal_complement(v: np.ndarray) -> np.ndarray:
    """Rows spanning ``v^perp`` for each unit vector in ``v`` (shape ``(..., n-1, n)``)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    # Householder reflection sending e_0 to v; its other columns span v^perp
    e0 = np.zeros(n)
    e0[0] = 1.0
    s = np.where(v[..., :1] >= 0, 1.0, -1.0)
    u = v + s * e0
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    house = np.eye(n) - 2.0 * u[..., :, None] * u[..., None, :]
    return np.swapaxes(house, -1, -2)[..., 1:, :]


def hemisphere_lattice(count: int, dim: int, max_angle: float = 0.5 * np.pi * 0.98) -> np.ndarray:
    """Unit vectors around the axis ``e_0`` making an angle below ``max_angle`` with it."""
    i = np.arange(count) + 0.5
    if dim == 2:
        a = (2.0 * i / count - 1.0) * max_angle
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    # equal-area rings in cos(angle), golden-angle azimuth
    cos_min = np.cos(max_angle)
    c = 1.0 - (1.0 - cos_min) * i / count
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    if dim == 3:
        phi = 2.0 * np.pi * i / GOLDEN
        return np.stack([c, s * np.cos(phi), s * np.sin(phi)], axis=-1)
    w = sphere_lattice(count, dim - 1)
    return np.concatenate([c[:, None], s[:, None] * w], axis=-1)


def rotate_axis(vectors: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Map vectors expressed around ``e_0`` to vectors around the unit ``axis``."""
    axis = np.asarray(axis, dtype=float)
    frame = np.concatenate([axis[..., None, :], orthonormal_complement(axis)], axis=-2)
    return np.einsum("...i,...ij->...j", vectors, frame)


def kronecker(count: int, dims: int, offset: float = 0.5) -> np.ndarray:
    """Additive-recurrence low-discrepancy points in [0, 1)^dims."""
    # generalized golden ratio: unique positive root of x^(d+1) = x + 1
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dims + 1))
    alpha = phi ** -(np.arange(dims) + 1.0)
    return (offset + np.outer(np.arange(1, count + 1), alpha)) % 1.0


def disk_lattice(count: int, dim: int) -> np.ndarray:
    """Sunflower points in the unit ball of R^dim (dim 1 or 2)."""
    i = np.arange(count) + 0.5
    if dim == 1:
        return (2.0 * i / count - 1.0)[:, None]
    r = np.sqrt(i / count)
    phi = 2.0 * np.pi * i / GOLDEN**2
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def random_inward_entries(rng: np.random.Generator, count: int, dim: int, R: float,
                          T: float, min_cos: float = 1e-6):
    """Seeded random entries: uniform time, uniform boundary point, uniform inward direction.

    Returns arrays ``t (count,)``, ``z (count, n)``, ``v (count, n)``.
    """
    t = rng.uniform(-T, T, count)
    x = rng.standard_normal((count, dim))
    normal = x / np.linalg.norm(x, axis=-1, keepdims=True)
    y = rng.standard_normal((count, dim))
    y -= np.sum(y * normal, axis=-1, keepdims=True) * normal
    y /= np.linalg.norm(y, axis=-1, keepdims=True)
    # uniform on the hemisphere: cos of the angle to the inward normal ~ U(0, 1] in 3D,
    # uniform angle in 2D
    if dim == 2:
        c = np.cos(rng.uniform(-0.5 * np.pi, 0.5 * np.pi, count))
    else:
        c = 1.0 - rng.uniform(0.0, 1.0, count)
    c = np.clip(np.abs(c), min_cos, 1.0)
    s = np.sqrt(1.0 - c * c)
    v = -c[:, None] * normal + s[:, None] * y
    return t, R * normal, v
