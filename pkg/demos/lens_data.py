"""Lens data of a conformal bump compared with the flat ball.

Traces a fan of parallel rays through B_3, prints exit points, lengths and
sojourn times, and checks the closed sojourn formula against its large-s
limit.
"""
import numpy as np

from lenscat import BoundaryRay, sojourn_closed, sojourn_limit
from lenscat.metric import ConformalBump, FlatMetric
from lenscat.scattering import lens_batch

R, T = 3.0, 1.0
flat = FlatMetric(2, R, T)
bump = ConformalBump(2, R, T, amplitude=0.1, width=1.0)

# horizontal rays entering at offsets b from the axis
b = np.linspace(-2.5, 2.5, 11)
z = np.column_stack([-np.sqrt(R * R - b * b), b])
v = np.tile([1.0, 0.0], (len(b), 1))
t = np.zeros(len(b))

for name, g in (("flat", flat), ("bump", bump)):
    tab = lens_batch(g, t, z, v)
    print(f"{name}:")
    print("     b    exit_x    exit_y   length  sojourn")
    for k in range(len(b)):
        print(f"{b[k]:6.2f} {tab.z_out[k, 0]:9.5f} {tab.z_out[k, 1]:9.5f} "
              f"{tab.length[k]:8.5f} {tab.sojourn[k]:8.5f}")

# the sojourn time is also a renormalized limit of arc length
e = BoundaryRay(0.0, [-R, 0.0], [1.0, 0.0], R=R)
closed = sojourn_closed(bump, e)
print(f"\ndiametral ray: closed sojourn {closed:.10f}")
for s in (1e2 * R, 1e3 * R, 1e4 * R):
    lim = sojourn_limit(bump, e, s)
    print(f"  s_max {s:8.0f}: value {lim.value:.10f}  extrapolated {lim.extrapolated:.10f}")
