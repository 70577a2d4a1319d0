"""Regenerate the frozen oracle fixtures in tests/fixtures/.

    python tests/make_fixtures.py [--step 1e-5]

Takes a few minutes at the default step. The output is committed; tests only
read it.
"""

import argparse
import json
import os
import time

import numpy as np

from oracles import ConformalBumpOracle, covector, diametral_length, trace_exit, trace_length, unit_speed_start

HERE = os.path.dirname(os.path.abspath(__file__))
R, T = 3.0, 1.0

CASES = {
    2: {"amplitude": 0.1, "center": [0.0, 0.0], "width": 1.0},
    3: {"amplitude": 0.1, "center": [0.3, 0.0, -0.2], "width": 1.0},
}


def entries(dim, count, rng):
    """Inward entries on |z| = R whose lines pass within 2.2 of the origin."""
    t = rng.uniform(-0.4, 0.4, count)
    v = rng.standard_normal((count, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    off = rng.standard_normal((count, dim))
    off -= np.sum(off * v, axis=1, keepdims=True) * v
    off /= np.linalg.norm(off, axis=1, keepdims=True)
    b = 2.2 * rng.uniform(0, 1, count) ** (1.0 / (dim - 1))
    foot = off * b[:, None]
    z = foot - np.sqrt(R * R - b * b)[:, None] * v
    if dim == 2:
        # the diametral ray and the unit-offset chord come first
        t[:2] = 0.0
        z[0], v[0] = [-3.0, 0.0], [1.0, 0.0]
        z[1], v[1] = [-np.sqrt(8.0), 1.0], [1.0, 0.0]
    return t, z, v


def interior_starts(dim, count, rng):
    t = rng.uniform(-0.4, 0.4, count)
    z = rng.uniform(-1.2, 1.2, (count, dim))
    d = rng.standard_normal((count, dim))
    return t, z, d / np.linalg.norm(d, axis=1, keepdims=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--step", type=float, default=1e-5)
    ap.add_argument("--rays", type=int, default=50)
    args = ap.parse_args()
    os.makedirs(os.path.join(HERE, "fixtures"), exist_ok=True)
    for dim, params in CASES.items():
        rng = np.random.default_rng(1000 + dim)
        model = ConformalBumpOracle(params["amplitude"], params["center"], params["width"], R, T)
        t, z, v = entries(dim, args.rays, rng)
        start = time.time()
        z_out, u_out, length = trace_exit(model, t, z, v, h=args.step)
        sojourn = -np.sum(z_out * u_out, axis=1) + length + np.sum(z * v, axis=1)
        ti, zi, di = interior_starts(dim, 10, rng)
        u0, zeta0 = unit_speed_start(model, ti, zi, di)
        z1, u1 = trace_length(model, ti, zi, u0, 1.0, h=args.step)
        zeta1 = covector(model, ti, z1, u1)
        data = {
            "dim": dim, "R": R, "T": T, "family": "conformal_bump", "params": params,
            "step": args.step,
            "rays": [
                {"t": float(t[k]), "z_in": z[k].tolist(), "v_in": v[k].tolist(),
                 "z_out": z_out[k].tolist(), "v_out": u_out[k].tolist(),
                 "length": float(length[k]), "sojourn": float(sojourn[k])}
                for k in range(len(t))
            ],
            "unit_length": [
                {"t": float(ti[k]), "z0": zi[k].tolist(), "zeta0": zeta0[k].tolist(),
                 "z1": z1[k].tolist(), "zeta1": zeta1[k].tolist()}
                for k in range(len(ti))
            ],
        }
        if dim == 2:
            data["diametral_quadrature"] = diametral_length(model)
        path = os.path.join(HERE, "fixtures", f"bump{dim}d_oracle.json")
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)
        print(f"{path}: {len(t)} rays in {time.time() - start:.1f}s")


if __name__ == "__main__":
    main()
