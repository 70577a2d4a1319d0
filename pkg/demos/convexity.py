"""Convexity of |z|^2 and sectional curvature as a bump grows.

Small bumps keep |z|^2 strictly convex; large ones lose it.
"""
from lenscat.metric import AdmissibilityGrid, ConformalBump, FlatMetric, admissibility_report

R, T = 3.0, 1.0
grid = AdmissibilityGrid(n_time=5, n_space=21)

rep = admissibility_report(FlatMetric(2, R, T), grid=grid)
print(f"flat: min Hessian eig {rep.min_hessian_eig:.12f}, admissible={rep.admissible}")

for amp in (0.05, 0.5, 1.0, 2.0, 3.0, -0.5):
    rep = admissibility_report(ConformalBump(2, R, T, amplitude=amp, width=1.0), grid=grid)
    print(f"amplitude {amp:5.2f}: min Hessian eig {rep.min_hessian_eig:8.4f} "
          f"K in [{rep.min_sectional_curvature:8.4f}, {rep.max_sectional_curvature:8.4f}] "
          f"admissible={rep.admissible}")
