"""Compactly supported smooth profiles used by the builtin families."""

import numpy as np


def mollifier(rho):
    """Return ``exp(1 - 1/(1 - rho))`` for ``rho < 1`` and 0 otherwise, with d/drho.

    The argument is a squared, normalised radius so the profile is smooth at
    the origin. The value at ``rho = 0`` is exactly 1.
    """
    rho = np.asarray(rho, dtype=float)
    u = 1.0 - rho
    inside = u > 0.0
    safe = np.where(inside, u, 1.0)
    value = np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)
    deriv = np.where(inside, -value / safe**2, 0.0)
    return value, deriv


def mollifier_second(rho):
    """Second derivative of :func:`mollifier` in ``rho``."""
    rho = np.asarray(rho, dtype=float)
    u = 1.0 - rho
    inside = u > 0.0
    safe = np.where(inside, u, 1.0)
    value = np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)
    return np.where(inside, value * (2.0 * rho - 1.0) / safe**4, 0.0)


def bump_profile(t, z, center, width, radius, time_width):
    """Spatio-temporal bump ``s`` and its spatial gradient.

    ``s = exp(-|z-c|^2/w^2) * m(|z|^2/radius^2) * m(t^2/time_width^2)``, which
    vanishes identically for ``|z| >= radius`` or ``|t| >= time_width``.

    Returns ``(s, grad_s)`` with shapes ``(...)`` and ``(..., n)``.
    """
    d = z - center
    gauss = np.exp(-np.sum(d * d, axis=-1) / width**2)
    m_space, dm_space = mollifier(np.sum(z * z, axis=-1) / radius**2)
    m_time, _ = mollifier(t * t / time_width**2)
    s = gauss * m_space * m_time
    grad = (
        (-2.0 / width**2) * d * (gauss * m_space)[..., None]
        + (2.0 / radius**2) * z * (gauss * dm_space)[..., None]
    ) * m_time[..., None]
    return s, grad
