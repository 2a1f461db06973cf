"""Exact caloric extensions of polynomials.

Every polynomial p agrees on the paraboloid t = |x|^2 with exactly one
caloric polynomial u_p = w q + p, where w = t - |x|^2.  This script builds a
few of them, checks the two defining properties in exact arithmetic and
shows that p and p + w s share an extension.
"""

from caloric.poly import (
    Polynomial,
    apply_heat,
    build_correction_system,
    caloric_extension,
    format_polynomial,
    parse_polynomial,
    substitute_paraboloid,
)

examples = [("x^2", 1), ("t", 1), ("x^4 - 3*x*t", 1), ("x1^2*x2 + 1/2*t^2", 2), ("x1*x2*x3", 3)]

for text, dim in examples:
    p = parse_polynomial(text, dim)
    u = caloric_extension(p)
    print(f"N={dim}  p = {text}")
    print(f"      u_p = {format_polynomial(u)}")
    print(f"      H u_p = {format_polynomial(apply_heat(u))},  (u_p - p) on t=|x|^2: {format_polynomial(substitute_paraboloid(u - p))}")

# x^2 and t differ by w, so they have the same extension
print()
print("x^2 and t share an extension:", caloric_extension(parse_polynomial("x^2", 1)) == caloric_extension(parse_polynomial("t", 1)))
s = parse_polynomial("3*x - 2/5*t", 1)
p = parse_polynomial("x^3 + t", 1)
print("p and p + w s share an extension:", caloric_extension(p) == caloric_extension(p + Polynomial.w(1) * s))

# the correction map q -> H(w q) is invertible on every P_m
print()
for dim in (1, 2, 3):
    dets = [build_correction_system(dim, m).determinant for m in range(5)]
    print(f"N={dim}: det of the correction system for m = 0..4: {dets}")
