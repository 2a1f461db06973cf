"""Heat-ball mean values and the representation kernel.

Caloric functions equal their Watson-weighted means over heat balls.  The
same quadrature separates supercaloric (u >= mean) from subcaloric
functions.  A cut-off representation formula on a caloric disk reproduces
caloric functions from their values in the doubled disk.
"""

import numpy as np

from caloric.heatball import build_heat_ball_quadrature, mean_value
from caloric.kernels import CaloricDisk, reproduce

pole = (0.2, 0.5)
for r in (0.1, 0.5, 1.0):
    q = build_heat_ball_quadrature(pole, r)
    heat = lambda p: p[..., 0] ** 2 + 2 * p[..., 1]
    t = lambda p: p[..., 1]
    x2 = lambda p: p[..., 0] ** 2
    print(
        f"r={r:3.1f}  nodes={len(q.nodes):5d}  M(1)-1={mean_value(1.0, pole, r, q) - 1:+.1e}  "
        f"M(x^2+2t)-u={mean_value(heat, pole, r, q) - heat(np.array(pole)):+.1e}  "
        f"t-M(t)={t(np.array(pole)) - mean_value(t, pole, r, q):+.4f}  "
        f"x^2-M(x^2)={x2(np.array(pole)) - mean_value(x2, pole, r, q):+.4f}"
    )
print("t is supercaloric (positive gap), x^2 subcaloric (negative gap)")

disk = CaloricDisk((0.0, 0.0), 1.0)
u = lambda p: np.exp(p[..., 1]) * np.cosh(p[..., 0])
print("\nreproduction of exp(t) cosh(x) on the unit caloric disk")
for z in [(0.0, 0.0), (0.3, 0.2), (0.5, 0.5)]:
    derived, est = reproduce(u, z, disk)
    printed, _ = reproduce(u, z, disk, variant="printed")
    exact = u(np.array(z))
    print(f"  z={z}: derived error {abs(derived - exact):.1e} (estimate {est:.0e}), printed-formula residual {abs(printed - exact):.2f}")
