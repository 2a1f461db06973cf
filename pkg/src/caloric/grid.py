"""Space-time domains, lattices over them and grid functions.

A lattice covers the bounding box of a domain with ``n_i`` equispaced nodes
per axis (spatial axes first, time last).  Nodes are classified as
interior (in the open domain), boundary-adjacent (outside it but next to an
interior node, which includes nodes on the boundary) or exterior.
"""

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

INTERIOR, BOUNDARY, EXTERIOR = 0, 1, 2
CLASS_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary", EXTERIOR: "exterior"}


class StencilError(ValueError):
    """Interpolation needs lattice nodes that do not exist."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


@dataclass(frozen=True)
class DomainSpec:
    """Bounded open set in space-time.

    Membership is a union of open boxes, an arbitrary vectorised predicate,
    or (with neither given) the open bounding box itself.
    """

    lower: tuple
    upper: tuple
    boxes: tuple = ()
    predicate: object = field(default=None, compare=False)
    description: str = ""

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or len(lo) < 2:
            raise ValueError("bounding box needs matching corners with N+1 >= 2 components")
        if not all(np.isfinite(lo + hi)) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("bounding box must be finite and non-empty")
        boxes = tuple((tuple(map(float, a)), tuple(map(float, b))) for a, b in self.boxes)
        for a, b in boxes:
            if any(x < l - 1e-12 or y > h + 1e-12 for x, y, l, h in zip(a, b, lo, hi)):
                raise ValueError("union boxes must lie in the bounding box")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def box(cls, lower, upper):
        return cls(lower, upper, description="box")

    @classmethod
    def union(cls, boxes):
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        return cls(tuple(lo), tuple(hi), boxes=tuple(boxes), description="union of boxes")

    @classmethod
    def from_predicate(cls, lower, upper, predicate, description="predicate"):
        return cls(lower, upper, predicate=predicate, description=description)

    @property
    def dim(self):
        return len(self.lower) - 1

    def contains(self, points):
        pts = np.asarray(points, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        inside_bb = np.all((pts > lo) & (pts < hi), axis=-1)
        if self.predicate is not None:
            return inside_bb & np.asarray(self.predicate(pts), dtype=bool)
        if self.boxes:
            out = np.zeros(pts.shape[:-1], dtype=bool)
            for a, b in self.boxes:
                out |= np.all((pts > np.asarray(a)) & (pts < np.asarray(b)), axis=-1)
            return out
        return inside_bb

    def to_dict(self):
        out = {"lower": list(self.lower), "upper": list(self.upper), "kind": self.description or "box"}
        if self.boxes:
            out["boxes"] = [[list(a), list(b)] for a, b in self.boxes]
        return out


@dataclass(frozen=True, eq=False)
class Lattice:
    domain: DomainSpec
    shape: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != self.domain.dim + 1:
            raise ValueError("lattice shape needs one entry per axis")
        if any(n < 3 for n in shape):
            raise ValueError("need at least 3 nodes per axis")
        object.__setattr__(self, "shape", shape)
        axes = tuple(np.linspace(a, b, n) for a, b, n in zip(self.domain.lower, self.domain.upper, shape))
        object.__setattr__(self, "axes", axes)
        spacing = tuple((b - a) / (n - 1) for a, b, n in zip(self.domain.lower, self.domain.upper, shape))
        object.__setattr__(self, "spacing", spacing)
        grids = np.meshgrid(*axes, indexing="ij")
        points = np.stack(grids, axis=-1)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "classes", self._classify())

    @property
    def dim(self):
        return self.domain.dim

    @property
    def size(self):
        return int(np.prod(self.shape))

    def _classify(self):
        inside = self.domain.contains(self.points)
        near = np.zeros_like(inside)
        padded = np.pad(inside, 1, constant_values=False)
        for offs in itertools.product((-1, 0, 1), repeat=len(self.shape)):
            sl = tuple(slice(1 + o, 1 + o + n) for o, n in zip(offs, self.shape))
            near |= padded[sl]
        cls = np.full(self.shape, EXTERIOR, dtype=np.int8)
        cls[near] = BOUNDARY
        cls[inside] = INTERIOR
        cls.setflags(write=False)
        return cls

    def flat_index(self, idx):
        return np.ravel_multi_index(tuple(np.asarray(idx).T), self.shape)

    def fractional_index(self, points):
        pts = np.asarray(points, dtype=float)
        return (pts - np.asarray(self.domain.lower)) / np.asarray(self.spacing)


def _axis_weights(p, order):
    """Offsets and weights along one axis at fractional positions ``p``."""
    if order == 1:
        base = np.floor(p)
        frac = p - base
        return base.astype(np.int64), np.array([0, 1]), np.stack([1 - frac, frac], axis=-1)
    if order == 2:
        base = np.rint(p)
        u = p - base
        w = np.stack([u * (u - 1) / 2, 1 - u * u, u * (u + 1) / 2], axis=-1)
        return base.astype(np.int64), np.array([-1, 0, 1]), w
    raise ValueError("interpolation order must be 1 or 2")


def interpolation_stencil(lattice, points, order=1, clamp=False):
    """Tensor Lagrange stencil for off-lattice points.

    Returns ``(multi_index, weights)`` with shapes ``(P, S, N+1)`` and
    ``(P, S)``.  Nodes with zero weight are never required to exist.  With
    ``clamp=True`` quadratic windows are shifted inward at the lattice edge
    instead of failing.
    """
    pos = lattice.fractional_index(points)
    if pos.ndim == 1:
        pos = pos[None, :]
    shape = np.asarray(lattice.shape)
    # points on the hull edge may sit a rounding error outside it
    pos = np.where((pos < 0) & (pos > -1e-9), 0.0, pos)
    pos = np.where((pos > shape - 1) & (pos < shape - 1 + 1e-9), shape - 1.0, pos)
    bad = np.any((pos < 0) | (pos > shape - 1), axis=-1)
    if np.any(bad):
        raise StencilError(
            f"{int(bad.sum())} point(s) outside the lattice, e.g. {np.asarray(points).reshape(-1, pos.shape[-1])[bad][0].tolist()}",
            points=np.asarray(points).reshape(-1, pos.shape[-1])[bad],
        )
    per_axis = []
    for k in range(pos.shape[-1]):
        p = pos[:, k]
        if order == 2 and clamp:
            base = np.clip(np.rint(p), 1, shape[k] - 2)
            u = p - base
            w = np.stack([u * (u - 1) / 2, 1 - u * u, u * (u + 1) / 2], axis=-1)
            per_axis.append((base.astype(np.int64), np.array([-1, 0, 1]), w))
        else:
            per_axis.append(_axis_weights(p, order))
    n_pts = pos.shape[0]
    combos = list(itertools.product(*[range(len(a[1])) for a in per_axis]))
    idx = np.empty((n_pts, len(combos), pos.shape[-1]), dtype=np.int64)
    wts = np.ones((n_pts, len(combos)))
    for j, combo in enumerate(combos):
        for k, c in enumerate(combo):
            base, offs, w = per_axis[k]
            idx[:, j, k] = base + offs[c]
            wts[:, j] *= w[:, c]
    missing = (wts != 0) & np.any((idx < 0) | (idx >= shape), axis=-1)
    if np.any(missing):
        rows = np.where(np.any(missing, axis=1))[0]
        nodes = sorted({tuple(v) for v in idx[missing].tolist()})
        raise StencilError(
            f"interpolation stencil incomplete: needs lattice nodes {nodes[:5]} "
            f"({len(nodes)} missing) for {len(rows)} point(s)",
            points=np.asarray(points).reshape(n_pts, -1)[rows],
        )
    # zero-weight entries may point off the lattice; park them on a real node
    outside = np.any((idx < 0) | (idx >= shape), axis=-1)
    wts = np.where(outside, 0.0, wts)
    return np.clip(idx, 0, shape - 1), wts


class GridFunction:
    """Real values on every node of a lattice."""

    def __init__(self, lattice, values):
        values = np.array(values, dtype=float)
        if values.shape != lattice.shape:
            raise ValueError(f"values have shape {values.shape}, lattice has {lattice.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        self.lattice = lattice
        self.values = values

    @classmethod
    def sample(cls, lattice, f):
        from .kernels import as_field

        return cls(lattice, as_field(f)(lattice.points))

    @property
    def spacing(self):
        return self.lattice.spacing

    def copy(self):
        return GridFunction(self.lattice, self.values.copy())

    def interpolate(self, points, order=1):
        pts = np.asarray(points, dtype=float)
        idx, w = interpolation_stencil(self.lattice, pts.reshape(-1, pts.shape[-1]), order, clamp=True)
        vals = self.values[tuple(np.moveaxis(idx, -1, 0))]
        return np.sum(vals * w, axis=-1).reshape(pts.shape[:-1])

    def rows(self):
        pts = self.lattice.points.reshape(-1, self.lattice.dim + 1)
        return np.column_stack([pts, self.values.ravel()])

    def to_csv(self, path, name="value", extra=None):
        """One row per node: coordinates then value (and optional extra columns)."""
        names = [f"x{i + 1}" for i in range(self.lattice.dim)] + ["t", name]
        cols = [self.rows()]
        for key, arr in (extra or {}).items():
            names.append(key)
            cols.append(np.asarray(arr).reshape(-1, 1))
        table = np.column_stack(cols)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in table:
                w.writerow([repr(float(v)) for v in row])
