"""Fraction-free (Bareiss) elimination over the integers.

All routines take square matrices as sequences of rows of Python ints and
never form intermediate fractions; every division performed is exact.
"""

from fractions import Fraction
from math import lcm


class SingularMatrixError(ArithmeticError):
    pass


def _as_int_matrix(a):
    rows = [list(map(int, row)) for row in a]
    n = len(rows)
    if any(len(row) != n for row in rows):
        raise ValueError("matrix must be square")
    return rows


def _exact_div(num, den):
    q, rem = divmod(num, den)
    if rem:
        raise ArithmeticError("inexact division in Bareiss step")
    return q


def bareiss_determinant(a):
    """Exact determinant of an integer matrix."""
    m = _as_int_matrix(a)
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = m[k][k]
        row_k = m[k]
        for i in range(k + 1, n):
            row_i = m[i]
            f = row_i[k]
            for j in range(k + 1, n):
                row_i[j] = _exact_div(pivot * row_i[j] - f * row_k[j], prev)
            row_i[k] = 0
        prev = pivot
    return sign * m[n - 1][n - 1]


def bareiss_adjugate(a):
    """Fraction-free Gauss-Jordan elimination of ``[A | I]``.

    Returns ``(adj, det)`` with ``adj`` an integer matrix satisfying
    ``A @ adj == det * I``. Raises :class:`SingularMatrixError` when
    ``det == 0``.
    """
    m = _as_int_matrix(a)
    n = len(m)
    aug = [row + [int(i == j) for j in range(n)] for i, row in enumerate(m)]
    width = 2 * n
    sign = 1
    prev = 1
    for k in range(n):
        if aug[k][k] == 0:
            for i in range(k + 1, n):
                if aug[i][k] != 0:
                    aug[k], aug[i] = aug[i], aug[k]
                    sign = -sign
                    break
            else:
                raise SingularMatrixError(f"zero pivot in column {k}")
        pivot = aug[k][k]
        row_k = aug[k]
        for i in range(n):
            if i == k:
                continue
            row_i = aug[i]
            f = row_i[k]
            for j in range(width):
                row_i[j] = _exact_div(pivot * row_i[j] - f * row_k[j], prev)
        prev = pivot
    # left block is now d*I with d = sign*det(A); right block is d*A^-1
    d = aug[0][0]
    det = sign * d
    adj = [[sign * v for v in row[n:]] for row in aug]
    return adj, det


def solve_with_adjugate(adj, det, b):
    """Solve ``A x = b`` for rational ``b`` given ``A``'s adjugate and det."""
    b = [Fraction(v) for v in b]
    scale = lcm(*(v.denominator for v in b)) if b else 1
    b_int = [v.numerator * (scale // v.denominator) for v in b]
    out = []
    for row in adj:
        acc = 0
        for coef, v in zip(row, b_int):
            if coef and v:
                acc += coef * v
        out.append(Fraction(acc, det * scale))
    return out


def bareiss_solve(a, b):
    """Exact solution of ``A x = b`` (integer ``A``, rational ``b``)."""
    adj, det = bareiss_adjugate(a)
    return solve_with_adjugate(adj, det, b)
