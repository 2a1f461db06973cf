"""Dirichlet problems on caloric bowls.

A bowl B(z0, r) is bounded below by the paraboloid t - t0 = |x - x0|^2 and
above by t - t0 = r^2.  Boundary data on the curved part are fitted by a
polynomial in x, the fit is extended exactly, and the maximum principle turns
the boundary residual into a certified error bound epsilon in the interior.
"""

import numpy as np

from caloric.bowl import CaloricBowl, approximate_h_f, solve_bowl

bowl = CaloricBowl((0.0, 0.0), 1.0)


def exp_cosh(p):
    return np.exp(p[..., 1]) * np.cosh(p[..., 0])


# smooth caloric data: epsilon falls quickly with the degree
print("degree  epsilon    interior error at (0, 0.5)")
for d in range(0, 13, 2):
    sol = solve_bowl(bowl, exp_cosh, degree=d)
    mid = np.array([[0.0, 0.5]])
    err = float(abs(sol(mid) - exp_cosh(mid))[0])
    print(f"{d:6d}  {sol.epsilon:.3e}  {err:.3e}")

# automatic degree escalation to a tolerance
sol = solve_bowl(bowl, exp_cosh, tol=1e-7)
print(f"\ntol 1e-7: met={sol.tolerance_met} at degree {sol.degree}, epsilon {sol.epsilon:.2e}")

# a kink at x = 0: the residual decays slowly and pairs up (odd terms are useless)
sol = solve_bowl(bowl, lambda p: np.abs(p[..., 0]), tol=1e-6, max_degree=10)
print("\n|x| data, epsilon by degree:")
for d, eps in sol.history:
    print(f"  d={d:2d}  {eps:.3e}")
print("tolerance met:", sol.tolerance_met)

# translation: the centred solution does not depend on where the bowl sits
moved = CaloricBowl((0.7, -2.0), 1.0)
a = solve_bowl(bowl, lambda p: p[..., 0] ** 4, degree=6)
b = solve_bowl(moved, lambda p: (p[..., 0] - 0.7) ** 4, degree=6)
print("\nsame centred polynomial after translation:", a.centered == b.centered)

# discontinuous data: h_f is approached from below by continuous problems
step = lambda p: (p[..., 0] > 0).astype(float)
pts = np.array([[0.0, 0.5], [0.5, 0.6], [-0.5, 0.6]])
approx = approximate_h_f(bowl, step, pts, ks=(1, 4, 16, 64))
print("\nstep data, running sup of the approximations at three points:")
for k, row in zip(approx.ks, approx.running_sup):
    print(f"  k={k:3d}  " + "  ".join(f"{v:.4f}" for v in row))
