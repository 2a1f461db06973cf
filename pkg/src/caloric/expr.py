"""Small vectorised expression language for boundary data and domains.

Expressions use ``+ - * / ^`` (``**`` also works), the functions
``exp, cosh, sinh, abs, sqrt, log, sin, cos``, the constants ``pi`` and
``e``, the variables ``x1 .. xN`` and ``t`` (plain ``x`` when N = 1),
comparisons and ``and``/``or``/``not``.  Anything else is rejected with the
offending column.
"""

import ast

import numpy as np

FUNCTIONS = {
    "exp": np.exp,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_CMPOPS = {
    ast.Lt: np.less,
    ast.LtE: np.less_equal,
    ast.Gt: np.greater,
    ast.GtE: np.greater_equal,
    ast.Eq: np.equal,
    ast.NotEq: np.not_equal,
}


class ExpressionError(ValueError):
    def __init__(self, message, position, text=""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.text = text

    def caret(self):
        """The expression with a ``^`` under the offending column."""
        return f"{self.text}\n{' ' * self.position}^"


def variable_names(dim):
    names = {f"x{i + 1}": i for i in range(dim)}
    if dim == 1:
        names["x"] = 0
    names["t"] = dim
    return names


def _translate(text):
    """Python source for ``text`` plus the original column of each source char."""
    src, cols = [], []
    # leading blanks would be an indentation error
    lead = len(text) - len(text.lstrip())
    for i, ch in enumerate(text[lead:], start=lead):
        piece = "**" if ch == "^" else ch
        src.append(piece)
        cols.extend([i] * len(piece))
    cols.append(len(text))
    return "".join(src), cols


class Expression:
    """A parsed expression, callable on arrays of points ``(..., N+1)``."""

    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self._names = variable_names(dim)
        # '^' is exponentiation here, never xor
        src, self._cols = _translate(text)
        try:
            tree = ast.parse(src if src.strip() else "0", mode="eval")
        except SyntaxError as exc:
            pos = max((exc.offset or 1) - 1, 0)
            raise ExpressionError(f"syntax error: {exc.msg}", self._orig_pos(src, pos), text) from None
        self._check(tree.body, src)
        self._tree = tree.body

    def _orig_pos(self, src, pos):
        return self._cols[min(pos, len(self._cols) - 1)] if self._cols else 0

    def _fail(self, node, msg, src):
        raise ExpressionError(msg, self._orig_pos(src, getattr(node, "col_offset", 0)), self.text)

    def _check(self, node, src):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                self._fail(node, f"unsupported literal {node.value!r}", src)
        elif isinstance(node, ast.Name):
            if node.id not in self._names and node.id not in CONSTANTS:
                self._fail(node, f"unknown name '{node.id}' for N={self.dim}", src)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                self._fail(node, "unsupported operator", src)
            self._check(node.left, src)
            self._check(node.right, src)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd, ast.Not)):
                self._fail(node, "unsupported unary operator", src)
            self._check(node.operand, src)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                self._fail(node, "unknown function", src)
            if len(node.args) != 1 or node.keywords:
                self._fail(node, f"{node.func.id} takes one argument", src)
            self._check(node.args[0], src)
        elif isinstance(node, ast.Compare):
            if any(type(op) not in _CMPOPS for op in node.ops):
                self._fail(node, "unsupported comparison", src)
            for sub in [node.left] + node.comparators:
                self._check(sub, src)
        elif isinstance(node, ast.BoolOp):
            for sub in node.values:
                self._check(sub, src)
        else:
            self._fail(node, f"unsupported syntax ({type(node).__name__})", src)

    def _eval(self, node, cols):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in self._names:
                return cols[self._names[node.id]]
            return CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, cols), self._eval(node.right, cols))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, cols)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.Not):
                return np.logical_not(v)
            return v
        if isinstance(node, ast.Call):
            return FUNCTIONS[node.func.id](self._eval(node.args[0], cols))
        if isinstance(node, ast.Compare):
            out = True
            left = self._eval(node.left, cols)
            for op, comp in zip(node.ops, node.comparators):
                right = self._eval(comp, cols)
                out = np.logical_and(out, _CMPOPS[type(op)](left, right))
                left = right
            return out
        vals = [self._eval(v, cols) for v in node.values]
        combine = np.logical_and if isinstance(node.op, ast.And) else np.logical_or
        out = vals[0]
        for v in vals[1:]:
            out = combine(out, v)
        return out

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim + 1:
            raise ValueError(f"expected points with {self.dim + 1} coordinates, got {pts.shape[-1]}")
        cols = [pts[..., k] for k in range(self.dim + 1)]
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, cols)
        return np.broadcast_to(np.asarray(out), pts.shape[:-1]).copy()

    def __repr__(self):
        return f"Expression({self.text!r}, dim={self.dim})"


def parse_expression(text, dim):
    return Expression(text, dim)
