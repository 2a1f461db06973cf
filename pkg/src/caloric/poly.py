"""Exact polynomial algebra in ``(x_1, ..., x_N, t)``.

Polynomials carry rational coefficients (``fractions.Fraction``) keyed by
exponent tuples of length ``N + 1``; the last exponent belongs to ``t``.
The grading used throughout is the caloric height, in which ``t`` counts
twice.  The centrepiece is :func:`caloric_extension`, which maps any
polynomial ``p`` to the unique caloric polynomial agreeing with ``p`` on
the paraboloid ``t = |x|^2``.
"""

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from numbers import Rational
from types import MappingProxyType

import numpy as np

from .linalg import SingularMatrixError, bareiss_adjugate, solve_with_adjugate

#: Caloric degree of the zero polynomial.
NEG_INF = -math.inf


def caloric_height(alpha):
    """``alpha_1 + ... + alpha_N + 2 * alpha_{N+1}``."""
    if len(alpha) < 2:
        raise ValueError("multi-index needs at least one spatial and the time component")
    if any(a < 0 for a in alpha):
        raise ValueError(f"negative exponent in {alpha!r}")
    return sum(alpha[:-1]) + 2 * alpha[-1]


def _graded_key(alpha):
    return (caloric_height(alpha), tuple(alpha))


def multi_indices(dim, height):
    """All exponent tuples of exactly the given caloric height, lex order."""
    out = []
    for k in range(height // 2 + 1):
        rest = height - 2 * k
        for xs in _compositions(rest, dim):
            out.append(xs + (k,))
    out.sort()
    return out


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    return [(i,) + tail for i in range(total + 1) for tail in _compositions(total - i, parts - 1)]


def graded_basis(dim, m):
    """Monomial basis of ``P_m``: graded by caloric height, then lexicographic."""
    basis = []
    for h in range(m + 1):
        basis.extend(multi_indices(dim, h))
    return basis


class Polynomial:
    """Immutable sparse polynomial with rational coefficients."""

    __slots__ = ("dim", "_terms", "_hash")

    def __init__(self, dim, terms=None):
        if dim < 1:
            raise ValueError("spatial dimension must be >= 1")
        self.dim = int(dim)
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim + 1:
                raise ValueError(f"exponent {alpha!r} does not have {dim + 1} components")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha!r}")
            c = Fraction(c)
            if c:
                clean[alpha] = clean.get(alpha, 0) + c
                if not clean[alpha]:
                    del clean[alpha]
        self._terms = clean
        self._hash = None

    # construction helpers

    @classmethod
    def constant(cls, dim, c):
        return cls(dim, {(0,) * (dim + 1): c})

    @classmethod
    def monomial(cls, dim, alpha, c=1):
        return cls(dim, {tuple(alpha): c})

    @classmethod
    def variable(cls, dim, i):
        """``x_{i+1}`` for ``0 <= i < dim``; ``t`` for ``i == dim``."""
        alpha = [0] * (dim + 1)
        alpha[i] = 1
        return cls(dim, {tuple(alpha): 1})

    @classmethod
    def w(cls, dim):
        """``t - |x|^2``, vanishing exactly on the paraboloid."""
        terms = {(0,) * dim + (1,): 1}
        for i in range(dim):
            alpha = [0] * (dim + 1)
            alpha[i] = 2
            terms[tuple(alpha)] = -1
        return cls(dim, terms)

    @classmethod
    def parse(cls, text, dim):
        return parse_polynomial(text, dim)

    # basic queries

    @property
    def terms(self):
        return MappingProxyType(self._terms)

    def is_zero(self):
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    @property
    def degree(self):
        """Caloric degree; ``NEG_INF`` for the zero polynomial."""
        if not self._terms:
            return NEG_INF
        return max(caloric_height(a) for a in self._terms)

    def homogeneous_part(self, height):
        return Polynomial(self.dim, {a: c for a, c in self._terms.items() if caloric_height(a) == height})

    def coefficient(self, alpha):
        return self._terms.get(tuple(alpha), Fraction(0))

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, (Rational, int)):
            return Polynomial.constant(self.dim, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0) + c
        return Polynomial(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (Rational, int)):
            return Polynomial(self.dim, {a: c * other for a, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = {}
        for a, c in self._terms.items():
            for b, d in other._terms.items():
                key = tuple(i + j for i, j in zip(a, b))
                terms[key] = terms.get(key, 0) + c * d
        return Polynomial(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.constant(self.dim, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (Rational, int)):
            other = Polynomial.constant(self.dim, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self._terms.items())))
        return self._hash

    def derivative(self, var, order=1):
        """Partial derivative with respect to variable index ``var`` (``dim`` = t)."""
        terms = {}
        for a, c in self._terms.items():
            e = a[var]
            if e < order:
                continue
            factor = math.perm(e, order)
            b = list(a)
            b[var] = e - order
            terms[tuple(b)] = terms.get(tuple(b), 0) + c * factor
        return Polynomial(self.dim, terms)

    def __call__(self, *z):
        if len(z) == 1 and not isinstance(z[0], (int, float, Fraction)):
            z = tuple(z[0])
        return evaluate(self, z)

    def __str__(self):
        return format_polynomial(self)

    def __repr__(self):
        return f"Polynomial({self.dim}, {format_polynomial(self)!r})"

    # numeric evaluation

    def to_arrays(self):
        """Exponent matrix (terms x (N+1)) and float coefficients."""
        if not self._terms:
            return np.zeros((0, self.dim + 1), dtype=int), np.zeros(0)
        alphas = sorted(self._terms, key=_graded_key)
        exps = np.array(alphas, dtype=int)
        coefs = np.array([float(self._terms[a]) for a in alphas])
        return exps, coefs

    def evaluate_many(self, points):
        """Float evaluation at an ``(n, N+1)`` array of points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[-1] != self.dim + 1:
            raise ValueError(f"points must have {self.dim + 1} coordinates")
        exps, coefs = self.to_arrays()
        out = np.zeros(pts.shape[:-1])
        if not len(coefs):
            return out
        # power tables per variable keep this O(terms * n)
        powers = []
        for j in range(self.dim + 1):
            top = int(exps[:, j].max())
            table = np.ones((top + 1,) + pts.shape[:-1])
            for k in range(1, top + 1):
                table[k] = table[k - 1] * pts[..., j]
            powers.append(table)
        for alpha, c in zip(exps, coefs):
            term = np.full(pts.shape[:-1], c)
            for j, e in enumerate(alpha):
                if e:
                    term = term * powers[j][e]
            out += term
        return out


def evaluate(p, z):
    """Evaluate ``p`` at a point; exact if every coordinate is rational."""
    z = tuple(z)
    if len(z) != p.dim + 1:
        raise ValueError(f"point has {len(z)} coordinates, expected {p.dim + 1}")
    exact = all(isinstance(v, (int, Fraction)) for v in z)
    if exact:
        z = tuple(Fraction(v) for v in z)
        total = Fraction(0)
    else:
        z = tuple(float(v) for v in z)
        total = 0.0
    for alpha, c in p.terms.items():
        term = c if exact else float(c)
        for v, e in zip(z, alpha):
            if e:
                term *= v**e
        total += term
    return total


def apply_heat(p):
    """``Hp = Laplacian(p) - dp/dt``."""
    out = -p.derivative(p.dim)
    for i in range(p.dim):
        out = out + p.derivative(i, 2)
    return out


def apply_adjoint_heat(p):
    """``Laplacian(p) + dp/dt``."""
    out = p.derivative(p.dim)
    for i in range(p.dim):
        out = out + p.derivative(i, 2)
    return out


@lru_cache(maxsize=64)
def _sum_of_squares_power(dim, k):
    r2 = Polynomial(dim, {tuple(2 if j == i else 0 for j in range(dim + 1)): 1 for i in range(dim)})
    return r2**k


def substitute_paraboloid(p):
    """Replace ``t`` by ``|x|^2``; the result has no ``t`` dependence.

    The result is zero iff ``p`` vanishes on ``t = |x|^2``.
    """
    out = {}
    for alpha, c in p.terms.items():
        k = alpha[-1]
        base = alpha[:-1] + (0,)
        for beta, d in _sum_of_squares_power(p.dim, k).terms.items():
            key = tuple(a + b for a, b in zip(base, beta))
            out[key] = out.get(key, 0) + c * d
    return Polynomial(p.dim, out)


def translate(p, shift):
    """``q(z) = p(z - shift)`` for a rational shift vector of length ``N+1``."""
    shift = [Fraction(s) for s in shift]
    if len(shift) != p.dim + 1:
        raise ValueError("shift must have N+1 components")
    if not any(shift):
        return p
    out = {}
    for alpha, c in p.terms.items():
        # expand prod_j (z_j - s_j)^{a_j}
        factors = []
        for j, e in enumerate(alpha):
            factors.append([(i, math.comb(e, i) * (-shift[j]) ** (e - i)) for i in range(e + 1)])
        for combo in product(*factors):
            coef = c
            for _, f in combo:
                coef *= f
            if coef:
                key = tuple(i for i, _ in combo)
                out[key] = out.get(key, 0) + coef
    return Polynomial(p.dim, out)


# -- correction system ------------------------------------------------------


@dataclass(frozen=True)
class CorrectionSystem:
    """Matrix of ``T(q) = H(w q)`` on ``P_m`` in the graded monomial basis.

    ``T`` preserves caloric height, so the matrix is block diagonal with one
    block per height; ``blocks`` records the index ranges and the adjugate
    and determinant of each block.
    """

    dim: int
    degree: int
    basis: tuple
    matrix: tuple
    determinant: int
    blocks: tuple = field(repr=False)

    def solve(self, rhs):
        """Exact ``q`` in ``P_m`` with ``T(q) = rhs``."""
        if rhs.dim != self.dim:
            raise ValueError("dimension mismatch")
        if rhs.degree > self.degree:
            raise ValueError(f"right-hand side has caloric degree {rhs.degree} > {self.degree}")
        q = {}
        for start, stop, adj, det in self.blocks:
            idx = self.basis[start:stop]
            b = [rhs.coefficient(a) for a in idx]
            if not any(b):
                continue
            for a, v in zip(idx, solve_with_adjugate(adj, det, b)):
                q[a] = v
        return Polynomial(self.dim, q)


def _correction_column(dim, alpha):
    return apply_heat(Polynomial.w(dim) * Polynomial.monomial(dim, alpha))


@lru_cache(maxsize=None)
def _height_block(dim, h):
    idx = multi_indices(dim, h)
    pos = {a: i for i, a in enumerate(idx)}
    n = len(idx)
    mat = [[0] * n for _ in range(n)]
    for j, alpha in enumerate(idx):
        col = _correction_column(dim, alpha)
        for beta, c in col.terms.items():
            if beta not in pos:
                raise AssertionError(f"T(x^{alpha}) leaves height {h}: term {beta}")
            if c.denominator != 1:
                raise AssertionError("non-integer entry in correction matrix")
            mat[pos[beta]][j] = int(c)
    try:
        adj, det = bareiss_adjugate(mat)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"correction block (N={dim}, height={h}) is singular; "
            "the map q -> H(wq) must be injective, so this is a bug"
        ) from exc
    return idx, mat, adj, det


@lru_cache(maxsize=None)
def build_correction_system(dim, m):
    """Assemble the matrix of ``q -> H(w q)`` on ``P_m``."""
    if dim < 1 or m < 0:
        raise ValueError("need N >= 1 and m >= 0")
    basis = []
    blocks = []
    det = 1
    for h in range(m + 1):
        idx, _, adj, d = _height_block(dim, h)
        blocks.append((len(basis), len(basis) + len(idx), adj, d))
        basis.extend(idx)
        det *= d
    pos = {a: i for i, a in enumerate(basis)}
    n = len(basis)
    matrix = [[0] * n for _ in range(n)]
    for j, alpha in enumerate(basis):
        for beta, c in _correction_column(dim, alpha).terms.items():
            matrix[pos[beta]][j] = int(c)
    if det == 0:
        raise SingularMatrixError(f"correction system (N={dim}, m={m}) is singular")
    return CorrectionSystem(
        dim=dim,
        degree=m,
        basis=tuple(basis),
        matrix=tuple(tuple(r) for r in matrix),
        determinant=det,
        blocks=tuple(blocks),
    )


def solve_correction(p):
    """The unique polynomial ``q`` with ``H(w q) = -Hp``."""
    rhs = -apply_heat(p)
    if rhs.is_zero():
        return Polynomial(p.dim)
    system = build_correction_system(p.dim, int(rhs.degree))
    q = system.solve(rhs)
    residual = apply_heat(Polynomial.w(p.dim) * q) - rhs
    if not residual.is_zero():
        raise ArithmeticError(f"correction residual is not zero: {residual}")
    return q


def caloric_extension(p):
    """The unique caloric polynomial equal to ``p`` on ``t = |x|^2``."""
    return Polynomial.w(p.dim) * solve_correction(p) + p


def laplacian(p):
    out = Polynomial(p.dim)
    for i in range(p.dim):
        out = out + p.derivative(i, 2)
    return out


def heat_polynomial(f):
    """``sum_j t^j Lap^j f / j!``, the caloric polynomial with ``u(x, 0) = f``."""
    if any(a[-1] for a in f.terms):
        raise ValueError("heat_polynomial needs a polynomial in x only")
    out = {}
    term, j, fact = f, 0, 1
    while term:
        for a, c in term.terms.items():
            key = a[:-1] + (j,)
            out[key] = out.get(key, 0) + c / fact
        j += 1
        fact *= j
        term = laplacian(term)
    return Polynomial(f.dim, out)


def _paraboloid_trace_heat(f):
    return substitute_paraboloid(heat_polynomial(f))


def _fischer_eigenvalues(dim, d):
    """Eigenvalues of ``f -> heat_polynomial(f)`` restricted to ``t = |x|^2``.

    On homogeneous degree-``d`` polynomials this map acts on each piece
    ``|x|^(2i) h`` (``h`` harmonic of degree ``d - 2i``) as a scalar, since
    ``Lap^j (|x|^(2i) h)`` is a multiple of ``|x|^(2(i-j)) h``.
    """
    vals = set()
    for i in range(d // 2 + 1):
        m = d - 2 * i
        if dim == 1 and m > 1:
            continue
        lam, prod = Fraction(0), Fraction(1)
        for j in range(i + 1):
            lam += prod / math.factorial(j)
            k = i - j
            prod *= 2 * k * (2 * k + dim - 2 + 2 * m)
        vals.add(lam)
    return sorted(vals)


def spatial_caloric_extension(p):
    """Caloric extension of a polynomial in ``x`` alone, via heat polynomials.

    Each homogeneous part ``p_d`` is written as ``g(L) p_d`` where ``L`` is the
    trace map above and ``g`` interpolates ``1/lambda`` on its eigenvalues;
    the result is ``sum_d heat_polynomial(g(L) p_d)``.  Agrees with
    :func:`caloric_extension` (the extension is unique) but avoids building
    the correction system, which matters for high degree and ``N = 3``.
    """
    if any(a[-1] for a in p.terms):
        raise ValueError("spatial_caloric_extension needs a polynomial in x only")
    by_degree = {}
    for a, c in p.terms.items():
        by_degree.setdefault(sum(a), {})[a] = c
    out = Polynomial(p.dim)
    for d, terms in sorted(by_degree.items()):
        pd = Polynomial(p.dim, terms)
        lams = _fischer_eigenvalues(p.dim, d)
        n = len(lams)
        # g(lam) = sum_k c_k lam^k with g(lam_i) = 1 / lam_i
        vander = [[lam**k for k in range(n)] for lam in lams]
        coefs = _solve_rational(vander, [1 / lam for lam in lams])
        f, power = Polynomial(p.dim), pd
        for k, ck in enumerate(coefs):
            if ck:
                f = f + ck * power
            if k + 1 < n:
                power = _paraboloid_trace_heat(power)
        out = out + heat_polynomial(f)
    return out


def _solve_rational(a, b):
    n = len(a)
    m = [list(row) + [bi] for row, bi in zip(a, b)]
    for k in range(n):
        piv = next(i for i in range(k, n) if m[i][k] != 0)
        m[k], m[piv] = m[piv], m[k]
        for i in range(n):
            if i != k and m[i][k]:
                f = m[i][k] / m[k][k]
                m[i] = [x - f * y for x, y in zip(m[i], m[k])]
    return [m[i][n] / m[i][i] for i in range(n)]


# -- text format --------------------------------------------------------------


class PolynomialParseError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


def _var_names(dim):
    names = {"t": dim}
    for i in range(dim):
        names[f"x{i + 1}"] = i
    if dim == 1:
        names["x"] = 0
    return names


def _format_coef(c):
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_polynomial(p):
    """Render as ``c*x1^a1*...*t^k + ...``, highest caloric height first."""
    if p.is_zero():
        return "0"
    xnames = ["x"] if p.dim == 1 else [f"x{i + 1}" for i in range(p.dim)]
    names = xnames + ["t"]
    pieces = []
    for alpha in sorted(p.terms, key=_graded_key, reverse=True):
        c = p.terms[alpha]
        factors = []
        for name, e in zip(names, alpha):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        mag = abs(c)
        if not factors:
            body = _format_coef(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_format_coef(mag)] + factors)
        if not pieces:
            pieces.append(("-" if c < 0 else "") + body)
        else:
            pieces.append(("- " if c < 0 else "+ ") + body)
    return " ".join(pieces)


_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt:
            while text[pos].isspace():
                pos += 1
            raise PolynomialParseError(f"unexpected character {text[pos]!r}", pos)
        num, name, op = mt.groups()
        start = mt.start(mt.lastindex)
        if num is not None:
            tokens.append(("num", num, start))
        elif name is not None:
            tokens.append(("name", name, start))
        else:
            tokens.append(("op", "^" if op == "**" else op, start))
        pos = mt.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text, dim):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dim = dim
        self.names = _var_names(dim)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise PolynomialParseError(f"expected {op!r}", pos)

    def parse(self):
        result = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise PolynomialParseError(f"unexpected token {val!r}", pos)
        return result

    def expr(self):
        result = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self):
        result = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            _, op, pos = self.take()
            rhs = self.unary()
            if op == "*":
                result = result * rhs
            else:
                if rhs.degree > 0 or rhs.is_zero():
                    raise PolynomialParseError("division only by a nonzero constant", pos)
                result = result * (1 / rhs.coefficient((0,) * (self.dim + 1)))
        return result

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return -inner if val == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise PolynomialParseError("exponent must be a non-negative integer", pos)
            base = base ** int(val)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.dim, Fraction(val))
        if kind == "name":
            if val not in self.names:
                raise PolynomialParseError(f"unknown variable {val!r}", pos)
            return Polynomial.variable(self.dim, self.names[val])
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise PolynomialParseError(f"unexpected token {val!r}", pos)


def parse_polynomial(text, dim):
    """Parse the text format produced by :func:`format_polynomial`.

    Accepts ``+ - * / ^`` (or ``**``), parentheses, integer/decimal/rational
    constants and the variables ``x1..xN`` and ``t`` (plain ``x`` when N=1).
    """
    return _Parser(text, dim).parse()


def random_polynomial(rng, dim, m, density=0.6, max_num=9, max_den=7):
    """Random rational polynomial of caloric degree <= m.

    ``rng`` is a :class:`numpy.random.Generator`; each basis monomial is kept
    with probability ``density``.
    """
    terms = {}
    for alpha in graded_basis(dim, m):
        if rng.random() < density:
            num = int(rng.integers(-max_num, max_num + 1))
            den = int(rng.integers(1, max_den + 1))
            terms[alpha] = Fraction(num, den)
    return Polynomial(dim, terms)
