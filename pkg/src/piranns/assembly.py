"""Collocation points and weighted least-squares rows for PoU random-feature solves.

Row weights default to ``sqrt(measure / count)`` (times ``sqrt(lambda)`` for
penalty rows) so that the squared residual norm is a quadrature of the
continuous loss; ``plain_sums`` drops the measure factors.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from piranns.linalg import ROW_KINDS, LinearSystem
from piranns.sampling import element_seed

DEFAULT_INTERIOR = {1: 40, 2: 400, 3: 800}
DEFAULT_PER_FACE = {1: 1, 2: 40, 3: 100}


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class CollocationPlan:
    interior_per_element: int | None = None
    per_face: int | None = None
    placement: str = "tensor"
    jitter: float = 0.5
    seed: int = 0
    plain_sums: bool = False

    def __post_init__(self):
        if self.placement not in ("tensor", "random"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if not 0 <= self.jitter <= 1:
            raise ValueError("jitter must lie in [0, 1]")

    def interior_axis(self, dim):
        count = self.interior_per_element or DEFAULT_INTERIOR[dim]
        return max(1, int(round(count ** (1.0 / dim))))

    def interior_count(self, dim):
        if self.placement == "random":
            return self.interior_per_element or DEFAULT_INTERIOR[dim]
        return self.interior_axis(dim) ** dim

    def face_axis(self, dim):
        if dim == 1:
            return 1
        count = self.per_face or DEFAULT_PER_FACE[dim]
        return max(1, int(round(count ** (1.0 / (dim - 1)))))

    def face_count(self, dim):
        return self.face_axis(dim) ** (dim - 1)


@dataclass(frozen=True)
class PenaltyWeights:
    lambda_boundary: float = 100.0
    lambda_iface_l2: float = 100.0
    lambda_iface_h1: float = 10.0
    # penalize the jump of the normal derivative on interior faces as well
    flux_jump: bool = True

    def __post_init__(self):
        if min(self.lambda_boundary, self.lambda_iface_l2, self.lambda_iface_h1) < 0:
            raise ValueError("penalty weights must be non-negative")


def interior_points(part, j, plan):
    """Collocation points strictly inside element ``j`` (jittered tensor grid or uniform random)."""
    e = part.element(j)
    lo, hi = np.array(e.lo), np.array(e.hi)
    d = lo.size
    rng = np.random.default_rng(element_seed(plan.seed, j))
    if plan.placement == "random":
        return rng.uniform(lo, hi, size=(plan.interior_count(d), d))
    m = plan.interior_axis(d)
    idx = np.stack(np.meshgrid(*([np.arange(m)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    shift = rng.uniform(-plan.jitter / 2, plan.jitter / 2, size=idx.shape) if plan.jitter else 0.0
    return lo + (idx + 0.5 + shift) * (hi - lo) / m


def face_points(face, plan):
    """Midpoint tensor grid on a face."""
    d = face.dim
    m = plan.face_axis(d)
    axes = []
    for k in range(d):
        if k == face.normal_axis:
            axes.append(np.array([face.lo[k]]))
        else:
            axes.append(face.lo[k] + (np.arange(m) + 0.5) * (face.hi[k] - face.lo[k]) / m)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)


def local_derivatives(fs, part, j, x, order=2):
    """Basis values, gradient components and pure second derivatives, each (P, N)."""
    stack, a = fs.activations(part, j, x, max_order=order, check=False)
    d = a.shape[1]
    out = {"val": stack[0]}
    if order >= 1:
        out["grad"] = [stack[1] * a[:, k] for k in range(d)]
    if order >= 2:
        out["hdiag"] = [stack[2] * a[:, k] ** 2 for k in range(d)]
    return out


@dataclass
class RowBlock:
    """Rows sharing points and weights; ``cols`` maps column block -> (K, N) matrix."""

    kind: str
    ref: int
    points: np.ndarray
    weight: np.ndarray
    cols: dict
    rhs: np.ndarray

    @property
    def n_rows(self):
        return self.rhs.shape[0]


def _weight(plan, measure, count, penalty=1.0):
    scale = 1.0 if plan.plain_sums else measure / count
    return np.sqrt(penalty * scale)


def interface_blocks(fs, part, face, face_id, x, plan, pw, n_blocks=1):
    """Jump rows on an interior face: value jump, then one row per derivative direction.

    ``n_blocks=2`` repeats the rows for the imaginary column blocks.
    """
    col_l, col_r = part.index(face.left), part.index(face.right)
    n_el = len(part.active)
    left = local_derivatives(fs, part, face.left, x, order=1)
    right = local_derivatives(fs, part, face.right, x, order=1)
    count = x.shape[0]
    axes = list(face.tangential_axes)
    if pw.flux_jump:
        axes.append(face.normal_axis)
    blocks = []
    for b in range(n_blocks):
        off = b * n_el
        w = np.full(count, _weight(plan, face.area, count, pw.lambda_iface_l2))
        blocks.append(RowBlock("interface-l2", face_id, x, w,
                               {off + col_l: left["val"], off + col_r: -right["val"]}, np.zeros(count)))
        w = np.full(count, _weight(plan, face.area, count, pw.lambda_iface_h1))
        for a in axes:
            blocks.append(RowBlock("interface-h1", face_id, x, w,
                                   {off + col_l: left["grad"][a], off + col_r: -right["grad"][a]},
                                   np.zeros(count)))
    return blocks


def _interior_blocks(problem, fs, part, j, plan):
    x_all = interior_points(part, j, plan)
    x = x_all[part.domain.contains(x_all, tol=0.0)]
    skipped = x_all.shape[0] - x.shape[0]
    if x.shape[0] == 0:
        raise AssemblyError(f"element {j} has no collocation points inside the domain")
    loc = local_derivatives(fs, part, j, x, order=2)
    col = part.index(j)
    w = np.full(x.shape[0], _weight(plan, part.volume(j), x.shape[0]))
    lap = sum(loc["hdiag"])
    f = problem.f(x)
    if problem.operator == "poisson":
        return [RowBlock("interior", j, x, w, {col: -lap}, np.real(f))], skipped
    op = -lap - problem.k ** 2 * loc["val"]
    n_el = len(part.active)
    f = np.asarray(f, dtype=complex)
    return [RowBlock("interior", j, x, w, {col: op}, f.real),
            RowBlock("interior", j, x, w, {n_el + col: op}, f.imag)], skipped


def _boundary_blocks(problem, fs, part, face, face_id, plan, pw):
    kind = problem.boundary_kind(face)
    if kind == "none":
        return []
    x = face_points(face, plan)
    col = part.index(face.left)
    w = np.full(x.shape[0], _weight(plan, face.area, x.shape[0], pw.lambda_boundary))
    g = problem.g(x, face)
    if kind == "dirichlet":
        loc = local_derivatives(fs, part, face.left, x, order=0)
        if problem.is_complex:
            n_el = len(part.active)
            g = np.asarray(g, dtype=complex)
            return [RowBlock("boundary", face_id, x, w, {col: loc["val"]}, g.real),
                    RowBlock("boundary", face_id, x, w, {n_el + col: loc["val"]}, g.imag)]
        return [RowBlock("boundary", face_id, x, w, {col: loc["val"]}, np.real(g))]
    if kind != "impedance":
        raise ValueError(f"unknown boundary kind {kind!r}")
    loc = local_derivatives(fs, part, face.left, x, order=1)
    dn = face.side * loc["grad"][face.normal_axis]
    kv = problem.k * loc["val"]
    n_el = len(part.active)
    g = np.asarray(g, dtype=complex)
    # d_n u - i k u = g split into real and imaginary rows
    return [RowBlock("boundary", face_id, x, w, {col: dn, n_el + col: kv}, g.real),
            RowBlock("boundary", face_id, x, w, {n_el + col: dn, col: -kv}, g.imag)]


def face_row_blocks(problem, fs, part, plan, pw):
    n_blocks = 2 if problem.is_complex else 1
    blocks = []
    for fid, face in enumerate(part.faces):
        if face.kind == "interior":
            blocks.extend(interface_blocks(fs, part, face, fid, face_points(face, plan), plan, pw, n_blocks))
        else:
            blocks.extend(_boundary_blocks(problem, fs, part, face, fid, plan, pw))
    return blocks


def blocks_to_dense(blocks, n_col_blocks, n):
    k = sum(b.n_rows for b in blocks)
    h = np.zeros((k, n_col_blocks * n))
    t = np.empty(k)
    r = 0
    for b in blocks:
        rows = slice(r, r + b.n_rows)
        for c, mat in b.cols.items():
            h[rows, c * n:(c + 1) * n] = b.weight[:, None] * mat
        t[rows] = b.weight * b.rhs
        r += b.n_rows
    return h, t


def blocks_to_sparse(blocks, n_col_blocks, n):
    rows, cols, vals = [], [], []
    t = []
    r = 0
    for b in blocks:
        rr = np.arange(r, r + b.n_rows)
        for c, mat in b.cols.items():
            rows.append(np.repeat(rr, n))
            cols.append(np.tile(np.arange(c * n, (c + 1) * n), b.n_rows))
            vals.append((b.weight[:, None] * mat).ravel())
        t.append(b.weight * b.rhs)
        r += b.n_rows
    shape = (r, n_col_blocks * n)
    if r == 0:
        return sp.csr_matrix(shape), np.zeros(0)
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    return mat, np.concatenate(t)


def _tags(blocks):
    kind = np.concatenate([np.full(b.n_rows, ROW_KINDS.index(b.kind)) for b in blocks])
    ref = np.concatenate([np.full(b.n_rows, b.ref) for b in blocks])
    pts = np.vstack([b.points for b in blocks])
    return kind, ref, pts


def assemble_linear(problem, part, fs, plan=None, pw=None):
    """Weighted collocation system for a linear problem (Poisson or Helmholtz).

    Columns are ordered by (active element, feature); complex problems have all
    real blocks first, then all imaginary blocks.
    """
    if not problem.linear:
        raise ValueError("assemble_linear needs a linear operator")
    plan = plan or CollocationPlan()
    pw = pw or PenaltyWeights()
    blocks, skipped = [], 0
    for j in part.active:
        b, s = _interior_blocks(problem, fs, part, j, plan)
        blocks.extend(b)
        skipped += s
    blocks.extend(face_row_blocks(problem, fs, part, plan, pw))
    n_col_blocks = len(part.active) * (2 if problem.is_complex else 1)
    h, t = blocks_to_dense(blocks, n_col_blocks, fs.n_features)
    kind, ref, pts = _tags(blocks)
    if h.shape[0] < 2 * h.shape[1]:
        warnings.warn(f"system has {h.shape[0]} rows for {h.shape[1]} unknowns (less than 2x)", stacklevel=2)
    return LinearSystem(h, t, kind, ref, pts, problem.is_complex, skipped)


class BurgersResidual:
    """Weighted residual ``r(w)`` and sparse analytic Jacobian for space-time Burgers.

    Interior rows hold ``u_t + u u_x - nu u_xx - f``; face rows (initial, wall and
    interface jumps) are linear in ``w`` and precomputed.
    """

    def __init__(self, problem, part, fs, plan=None, pw=None):
        plan = plan or CollocationPlan()
        pw = pw or PenaltyWeights()
        self.problem, self.part, self.fs = problem, part, fs
        self.n = n = fs.n_features
        self.n_unknowns = len(part.active) * n
        self.nu = problem.nu
        self._local = []
        interior = []
        for j in part.active:
            x_all = interior_points(part, j, plan)
            x = x_all[part.domain.contains(x_all, tol=0.0)]
            if x.shape[0] == 0:
                raise AssemblyError(f"element {j} has no collocation points inside the domain")
            loc = local_derivatives(fs, part, j, x, order=2)
            w = np.full(x.shape[0], _weight(plan, part.volume(j), x.shape[0]))
            self._local.append((part.index(j), w, loc["val"], loc["grad"][0], loc["grad"][1],
                                loc["hdiag"][1], problem.f(x)))
            interior.append(RowBlock("interior", j, x, w, {}, np.zeros(x.shape[0])))
        face_blocks = face_row_blocks(problem, fs, part, plan, pw)
        self.face_h, self.face_t = blocks_to_sparse(face_blocks, len(part.active), n)
        self.row_kind, self.row_ref, self.points = _tags(interior + face_blocks)
        self.n_interior = sum(b.n_rows for b in interior)
        self.n_rows = self.n_interior + self.face_h.shape[0]

    def _fields(self, w, col, phi, phi_t, phi_x, phi_xx):
        wj = w[col * self.n:(col + 1) * self.n]
        return phi @ wj, phi_t @ wj, phi_x @ wj, phi_xx @ wj

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        parts = []
        for col, wt, phi, phi_t, phi_x, phi_xx, f in self._local:
            u, ut, ux, uxx = self._fields(w, col, phi, phi_t, phi_x, phi_xx)
            parts.append(wt * (ut + u * ux - self.nu * uxx - f))
        parts.append(self.face_h @ w - self.face_t)
        return np.concatenate(parts)

    def jacobian(self, w):
        w = np.asarray(w, dtype=float)
        rows, cols, vals = [], [], []
        r = 0
        n = self.n
        for col, wt, phi, phi_t, phi_x, phi_xx, f in self._local:
            u, ut, ux, uxx = self._fields(w, col, phi, phi_t, phi_x, phi_xx)
            blk = wt[:, None] * (phi_t + u[:, None] * phi_x + ux[:, None] * phi - self.nu * phi_xx)
            k = blk.shape[0]
            rows.append(np.repeat(np.arange(r, r + k), n))
            cols.append(np.tile(np.arange(col * n, (col + 1) * n), k))
            vals.append(blk.ravel())
            r += k
        interior = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(self.n_interior, self.n_unknowns))
        return sp.vstack([interior, self.face_h], format="csr")


def assemble_burgers_residual(problem, part, fs, plan=None, pw=None):
    """Residual and Jacobian callables for the space-time Burgers problem."""
    if problem.operator != "burgers":
        raise ValueError("assemble_burgers_residual needs a Burgers problem")
    res = BurgersResidual(problem, part, fs, plan, pw)
    return res, res.jacobian
