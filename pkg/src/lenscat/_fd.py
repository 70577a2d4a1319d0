"""Central finite differences in the spatial variable of batched fields."""

import numpy as np

# (offset multiples, weights) of central first-derivative stencils
_STENCILS = {
    2: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    4: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    6: (
        np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]),
        np.array([-1.0, 9.0, -45.0, 45.0, -9.0, 1.0]) / 60.0,
    ),
}


def spatial_gradient(fun, t, z, h, order=4):
    """Differentiate ``fun(t, z)`` with respect to each component of ``z``.

    ``fun`` must accept batched input ``t: (...)``, ``z: (..., n)``. All
    stencil points are evaluated in a single call. The derivative axis is
    inserted directly after the batch axes, so a matrix-valued ``fun`` with
    output ``(..., n, n)`` yields ``(..., n, n, n)`` indexed ``[..., k, i, j]``.
    """
    offsets, weights = _STENCILS[order]
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    batch = z.shape[:-1]
    t = np.broadcast_to(np.asarray(t, dtype=float), batch)
    m = len(offsets)
    # shifts: (m, n, n) -> displacement of stencil point j along axis k
    shifts = offsets[:, None, None] * h * np.eye(n)[None, :, :]
    zs = z[None, None] + shifts.reshape(m, n, *([1] * len(batch)), n)
    ts = np.broadcast_to(t, (m, n) + batch)
    values = np.asarray(fun(ts, zs))
    out_shape = values.shape[2 + len(batch):]
    deriv = np.tensordot(weights, values, axes=(0, 0)) / h  # (n, *batch, *out)
    return np.moveaxis(deriv, 0, len(batch)).reshape(batch + (n,) + out_shape)


def spatial_hessian(fun, t, z, h, order=6):
    """Second derivatives of a scalar ``fun`` by nested central differences."""
    grad = lambda tt, zz: spatial_gradient(fun, tt, zz, h, order)
    hess = spatial_gradient(grad, t, z, h, order)
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))
