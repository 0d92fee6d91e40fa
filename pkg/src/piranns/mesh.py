"""Axis-aligned box partitions with bisection refinement, PoU weights and face enumeration."""

import csv
import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

_REL_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """A box ``[lo, hi]`` with optional box-shaped holes removed.

    Holes must be pairwise disjoint. The L-shape is the square ``[-1, 1]^2``
    minus the quadrant ``[0, 1] x [-1, 0]``.
    """

    lo: tuple
    hi: tuple
    holes: tuple = ()
    name: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        holes = tuple((tuple(map(float, hl)), tuple(map(float, hh))) for hl, hh in self.holes)
        object.__setattr__(self, "holes", holes)
        if len(self.lo) != len(self.hi) or not all(a < b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"invalid bounding box {self.lo} .. {self.hi}")

    @classmethod
    def box(cls, lo, hi):
        return cls(tuple(lo), tuple(hi))

    @classmethod
    def unit_cube(cls, dim):
        return cls((0.0,) * dim, (1.0,) * dim, name="unit")

    @classmethod
    def lshape(cls):
        return cls((-1.0, -1.0), (1.0, 1.0), (((0.0, -1.0), (1.0, 0.0)),), name="lshape")

    @property
    def dim(self):
        return len(self.lo)

    @property
    def diam(self):
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @property
    def volume(self):
        return box_volume(self.lo, self.hi) - sum(box_volume(hl, hh) for hl, hh in self.holes)

    def contains(self, x, tol=None):
        """Membership in the closed domain for points ``x`` of shape (P, dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tol = _REL_TOL * self.diam if tol is None else tol
        ok = np.all((x >= np.array(self.lo) - tol) & (x <= np.array(self.hi) + tol), axis=1)
        for hl, hh in self.holes:
            ok &= ~np.all((x > np.array(hl) + tol) & (x < np.array(hh) - tol), axis=1)
        return ok

    def overlap_volume(self, lo, hi):
        vol = box_volume(*box_intersection(lo, hi, self.lo, self.hi))
        for hl, hh in self.holes:
            vol -= box_volume(*box_intersection(lo, hi, hl, hh))
        return max(vol, 0.0)


def box_volume(lo, hi):
    return float(np.prod(np.maximum(np.subtract(hi, lo), 0.0)))


def box_intersection(lo1, hi1, lo2, hi2):
    return np.maximum(lo1, lo2), np.minimum(hi1, hi2)


@dataclass(frozen=True)
class Element:
    id: int
    lo: tuple
    hi: tuple
    level: int = 0
    parent: int | None = None
    children: tuple | None = None

    @property
    def center(self):
        return (np.array(self.lo) + np.array(self.hi)) / 2.0

    @property
    def width(self):
        return np.array(self.hi) - np.array(self.lo)

    @property
    def diam(self):
        return float(np.linalg.norm(self.width))

    @property
    def volume(self):
        return box_volume(self.lo, self.hi)

    def bisect(self, first_id):
        """The 2^d equal children, numbered from ``first_id`` in lexicographic corner order."""
        lo, hi = np.array(self.lo), np.array(self.hi)
        mid = (lo + hi) / 2.0
        kids = []
        for n, corner in enumerate(itertools.product((0, 1), repeat=len(lo))):
            corner = np.array(corner, dtype=bool)
            clo = np.where(corner, mid, lo)
            chi = np.where(corner, hi, mid)
            kids.append(Element(first_id + n, tuple(clo), tuple(chi), self.level + 1, self.id))
        return kids


@dataclass(frozen=True)
class Face:
    """A (d-1)-dimensional rectangle with ``lo[normal_axis] == hi[normal_axis]``.

    For interior faces the normal points from ``left`` (lower side) to ``right``.
    For boundary faces ``right`` is None and ``side`` is the sign of the outward
    normal along ``normal_axis``.
    """

    kind: str
    left: int
    right: int | None
    lo: tuple
    hi: tuple
    normal_axis: int
    side: int = 1
    area: float = field(default=0.0)

    @property
    def dim(self):
        return len(self.lo)

    @property
    def tangential_axes(self):
        return tuple(k for k in range(self.dim) if k != self.normal_axis)

    @property
    def normal(self):
        n = np.zeros(self.dim)
        n[self.normal_axis] = self.side
        return n

    @property
    def center(self):
        return (np.array(self.lo) + np.array(self.hi)) / 2.0

    def swapped(self):
        """The same interior face seen from the other side."""
        if self.kind != "interior":
            raise ValueError("only interior faces can be swapped")
        return replace(self, left=self.right, right=self.left, side=-self.side)


@dataclass(frozen=True)
class AffineMap:
    """Componentwise map ``y = scale * x + offset`` from an element onto [-1, 1]^d."""

    scale: np.ndarray
    offset: np.ndarray

    @classmethod
    def for_box(cls, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        return cls(2.0 / (hi - lo), -(hi + lo) / (hi - lo))

    def apply(self, x):
        return np.asarray(x, dtype=float) * self.scale + self.offset

    def invert(self, y):
        return (np.asarray(y, dtype=float) - self.offset) / self.scale

    def effective(self, a, b):
        """Physical-coordinate parameters ``(a * scale, b + a . offset)`` for reference parameters."""
        a = np.asarray(a, dtype=float)
        return a * self.scale, np.asarray(b, dtype=float) + a @ self.offset


def _subtract_rects(lo, hi, cuts, axes, tol):
    """Pieces of the rectangle [lo, hi] (restricted to ``axes``) not covered by ``cuts``."""
    if not cuts:
        return [(lo, hi)]
    breaks = []
    for k in axes:
        pts = {lo[k], hi[k]}
        for clo, chi in cuts:
            pts.update(v for v in (clo[k], chi[k]) if lo[k] < v < hi[k])
        breaks.append(sorted(pts))
    pieces = []
    for cell in itertools.product(*(range(len(b) - 1) for b in breaks)):
        plo, phi = lo.copy(), hi.copy()
        for n, k in enumerate(axes):
            plo[k], phi[k] = breaks[n][cell[n]], breaks[n][cell[n] + 1]
        if any(phi[k] - plo[k] <= tol for k in axes):
            continue
        mid = (plo + phi) / 2.0
        covered = any(all(clo[k] - tol <= mid[k] <= chi[k] + tol for k in axes) for clo, chi in cuts)
        if not covered:
            pieces.append((plo, phi))
    return pieces


class Partition:
    """Active leaves of a forest of boxes covering a :class:`Domain`.

    The object is immutable; :meth:`refine` returns a new partition sharing
    unchanged elements.
    """

    def __init__(self, domain, elements, active):
        self.domain = domain
        self.elements = tuple(elements)
        self.active = tuple(sorted(int(j) for j in active))
        self._index = {j: n for n, j in enumerate(self.active)}
        for j in self.active:
            e = self.elements[j]
            if e.children is not None:
                raise ValueError(f"element {j} has children and cannot be active")
            self._check_leaf(e)

    def _check_leaf(self, e):
        inside = self.domain.overlap_volume(e.lo, e.hi)
        if inside <= _REL_TOL * e.volume:
            raise ValueError(f"active element {e.id} does not intersect the domain")
        if inside < e.volume * (1 - 1e-10):
            raise ValueError(
                f"element {e.id} straddles the domain boundary; align the initial grid with the holes"
            )

    @classmethod
    def uniform(cls, domain, shape):
        """Tensor grid of ``shape`` level-0 boxes over the bounding box; boxes inside holes are dropped."""
        d = domain.dim
        shape = (int(shape),) * d if np.isscalar(shape) else tuple(int(s) for s in shape)
        if len(shape) != d or min(shape) < 1:
            raise ValueError(f"bad grid shape {shape} for dimension {d}")
        edges = [np.linspace(domain.lo[k], domain.hi[k], shape[k] + 1) for k in range(d)]
        elements, active = [], []
        for idx in itertools.product(*(range(s) for s in shape)):
            lo = tuple(edges[k][i] for k, i in enumerate(idx))
            hi = tuple(edges[k][i + 1] for k, i in enumerate(idx))
            e = Element(len(elements), lo, hi)
            elements.append(e)
            if domain.overlap_volume(lo, hi) > _REL_TOL * e.volume:
                active.append(e.id)
        return cls(domain, elements, active)

    @property
    def dim(self):
        return self.domain.dim

    def __len__(self):
        return len(self.active)

    def __contains__(self, j):
        return j in self._index

    def element(self, j):
        return self.elements[j]

    def index(self, j):
        """Position of active element ``j`` in :attr:`active` (its column block)."""
        try:
            return self._index[j]
        except KeyError:
            raise ValueError(f"element {j} is not an active leaf") from None

    def _require_active(self, j):
        self.index(j)

    @cached_property
    def leaf_lo(self):
        return np.array([self.elements[j].lo for j in self.active])

    @cached_property
    def leaf_hi(self):
        return np.array([self.elements[j].hi for j in self.active])

    @cached_property
    def leaf_tol(self):
        return _REL_TOL * np.linalg.norm(self.leaf_hi - self.leaf_lo, axis=1)

    def levels(self):
        return np.array([self.elements[j].level for j in self.active])

    def max_level(self):
        return int(self.levels().max())

    def deepest(self):
        """Active leaves at the maximal refinement level."""
        lv = self.levels()
        return [j for j, level in zip(self.active, lv) if level == lv.max()]

    def volume(self, j):
        """Measure of the element intersected with the domain."""
        e = self.elements[j]
        return self.domain.overlap_volume(e.lo, e.hi)

    def affine(self, j):
        self._require_active(j)
        e = self.elements[j]
        return AffineMap.for_box(e.lo, e.hi)

    def membership(self, x):
        """Boolean matrix (P, n_active): whether each point lies in each leaf's closure."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        tol = self.leaf_tol[None, :, None]
        return np.all(
            (x[:, None, :] >= self.leaf_lo[None] - tol) & (x[:, None, :] <= self.leaf_hi[None] + tol),
            axis=2,
        )

    def pou_weights(self, x):
        """Matrix (P, n_active) of PoU weights ``1 / #I(x)`` for the leaves containing each point."""
        member = self.membership(x)
        count = member.sum(axis=1)
        if np.any(count == 0):
            raise ValueError("point outside every active leaf")
        return member / count[:, None]

    def pou_weight(self, x, j):
        col = self.index(j)
        return float(self.pou_weights(np.atleast_2d(x))[0, col])

    def refine(self, marked):
        """Bisect every marked leaf into 2^d children; returns a new partition."""
        marked = sorted(set(int(j) for j in marked))
        for j in marked:
            if j >= len(self.elements) or j < 0:
                raise ValueError(f"unknown element {j}")
            if self.elements[j].children is not None:
                raise ValueError(f"element {j} is not a leaf")
            if j not in self._index:
                raise ValueError(f"element {j} is not active")
        if not marked:
            return self
        elements = list(self.elements)
        active = set(self.active)
        for j in marked:
            kids = elements[j].bisect(len(elements))
            elements[j] = replace(elements[j], children=tuple(k.id for k in kids))
            elements.extend(kids)
            active.discard(j)
            for k in kids:
                if self.domain.overlap_volume(k.lo, k.hi) > _REL_TOL * k.volume:
                    active.add(k.id)
        return Partition(self.domain, elements, active)

    @cached_property
    def faces(self):
        return tuple(self._enumerate_faces())

    def interior_faces(self):
        return [f for f in self.faces if f.kind == "interior"]

    def boundary_faces(self):
        return [f for f in self.faces if f.kind == "boundary"]

    def faces_of(self, j):
        return [f for f in self.faces if f.left == j or f.right == j]

    def _enumerate_faces(self):
        lo, hi = self.leaf_lo, self.leaf_hi
        d = self.dim
        tol = _REL_TOL * self.domain.diam
        out = []
        for k in range(d):
            other = [a for a in range(d) if a != k]
            for n, j in enumerate(self.active):
                for side in (1, -1):
                    plane = hi[n, k] if side == 1 else lo[n, k]
                    nb_plane = lo[:, k] if side == 1 else hi[:, k]
                    olo = np.maximum(lo[n], lo)
                    ohi = np.minimum(hi[n], hi)
                    touch = np.abs(nb_plane - plane) <= tol
                    if other:
                        touch &= np.all(ohi[:, other] - olo[:, other] > tol, axis=1)
                    cuts = []
                    for m in np.flatnonzero(touch):
                        flo, fhi = olo[m].copy(), ohi[m].copy()
                        flo[k] = fhi[k] = plane
                        cuts.append((flo, fhi))
                        if side == 1:
                            out.append(self._face("interior", j, self.active[m], flo, fhi, k, 1))
                    flo, fhi = lo[n].copy(), hi[n].copy()
                    flo[k] = fhi[k] = plane
                    for plo, phi in _subtract_rects(flo, fhi, cuts, other, tol):
                        out.append(self._face("boundary", j, None, plo, phi, k, side))
        return out

    @staticmethod
    def _face(kind, left, right, lo, hi, k, side):
        area = float(np.prod([hi[a] - lo[a] for a in range(len(lo)) if a != k]))
        return Face(kind, int(left), right if right is None else int(right),
                    tuple(float(v) for v in lo), tuple(float(v) for v in hi), k, side, area)

    def csv_rows(self):
        d = self.dim
        header = ["id", "level"] + [f"lo_{k + 1}" for k in range(d)] + [f"hi_{k + 1}" for k in range(d)]
        rows = [header + ["active"]]
        for e in self.elements:
            rows.append([e.id, e.level, *e.lo, *e.hi, int(e.id in self._index)])
        return rows

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.csv_rows())
