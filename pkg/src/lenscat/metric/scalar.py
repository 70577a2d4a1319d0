"""Candidate convex functions ``f(t, z)`` on [-T, T] x B_R(0)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .._fd import spatial_gradient, spatial_hessian


def _batch(t, z):
    z = np.asarray(z, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), z.shape[:-1])
    return t, z


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Base class; gradient and Hessian default to finite differences."""

    dim: int

    family: ClassVar[str] = "custom"
    fd_step: ClassVar[float] = 1e-2

    def value(self, t, z):
        raise NotImplementedError

    def gradient(self, t, z):
        return spatial_gradient(self.value, t, z, self.fd_step, order=6)

    def hessian(self, t, z):
        return spatial_hessian(self.value, t, z, self.fd_step, order=6)

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"dim": self.dim, "family": self.family, "params": self.params()}


@dataclass(frozen=True, eq=False)
class QuadraticFunction(ScalarField):
    """``f = scale * |z - center|^2``; the default candidate is ``|z|^2``."""

    family: ClassVar[str] = "quadratic"
    center: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        c = tuple(float(x) for x in self.center) or (0.0,) * self.dim
        object.__setattr__(self, "center", c)

    def value(self, t, z):
        t, z = _batch(t, z)
        d = z - np.array(self.center)
        return self.scale * np.sum(d * d, axis=-1)

    def gradient(self, t, z):
        t, z = _batch(t, z)
        return 2.0 * self.scale * (z - np.array(self.center))

    def hessian(self, t, z):
        t, z = _batch(t, z)
        return np.broadcast_to(2.0 * self.scale * np.eye(self.dim),
                               z.shape + (self.dim,)).copy()

    def params(self):
        return {"center": list(self.center), "scale": self.scale}


@dataclass(frozen=True, eq=False)
class LinearFunction(ScalarField):
    """``f = direction . z`` (degenerate: zero Hessian in flat space)."""

    family: ClassVar[str] = "linear"
    direction: tuple = ()

    def __post_init__(self):
        v = tuple(float(x) for x in self.direction) or (1.0,) + (0.0,) * (self.dim - 1)
        object.__setattr__(self, "direction", v)

    def value(self, t, z):
        t, z = _batch(t, z)
        return z @ np.array(self.direction)

    def gradient(self, t, z):
        t, z = _batch(t, z)
        return np.broadcast_to(np.array(self.direction), z.shape).copy()

    def hessian(self, t, z):
        t, z = _batch(t, z)
        return np.zeros(z.shape + (self.dim,))

    def params(self):
        return {"direction": list(self.direction)}


@dataclass(frozen=True, eq=False)
class PulledBackFunction(ScalarField):
    """``f o psi_1``: the same function read in the chart given by a diffeo."""

    family: ClassVar[str] = "pullback"
    base: ScalarField = None
    diffeo: object = None

    def value(self, t, z):
        t, z = _batch(t, z)
        return self.base.value(t, self.diffeo.psi1(t, z))

    def params(self):
        return {"function": self.base.describe(), "diffeo": self.diffeo.describe()}
