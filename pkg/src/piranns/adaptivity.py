"""Residual/jump error indicators, Dörfler marking and the adaptive loop."""

import time
from dataclasses import dataclass, field

import numpy as np

from piranns.assembly import (CollocationPlan, PenaltyWeights, assemble_burgers_residual,
                              assemble_linear, local_derivatives)
from piranns.features import Coefficients
from piranns.linalg import LMConfig, solve_lm, solve_min_norm


@dataclass(frozen=True)
class AdaptiveConfig:
    theta: float = 0.7
    tol: float | None = None
    max_iters: int = 6
    # H1 jump scalings; None takes the problem's defaults
    beta: float | None = None
    beta_boundary: float | None = None
    quad_per_axis: int = 16
    max_leaves: int = 4096
    n_test: int = 10_000
    error_seed: int = 0

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.quad_per_axis < 1:
            raise ValueError("quad_per_axis must be at least 1")
        for b in (self.beta, self.beta_boundary):
            if b is not None and b < 0:
                raise ValueError("beta must be non-negative")


@dataclass
class IndicatorVector:
    eta: dict
    parts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eta = {int(j): float(v) for j, v in self.eta.items()}
        if any(v < 0 or not np.isfinite(v) for v in self.eta.values()):
            raise ValueError("indicators must be finite and non-negative")

    @property
    def total(self):
        return float(sum(self.eta.values()))

    def __len__(self):
        return len(self.eta)


def _gauss_box(lo, hi, q, skip_axis=None):
    """Tensor Gauss-Legendre nodes/weights on a box; ``skip_axis`` is held at ``lo``."""
    x1, w1 = np.polynomial.legendre.leggauss(q)
    axes, weights = [], []
    for k, (a, b) in enumerate(zip(lo, hi)):
        if k == skip_axis:
            axes.append(np.array([a]))
            weights.append(np.array([1.0]))
        else:
            axes.append(0.5 * (b - a) * x1 + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w1)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1).reshape(-1, len(lo)), axis=1)
    return pts, wts


def _fields(fs, part, coef, j, x, order):
    loc = local_derivatives(fs, part, j, x, order)
    c = coef.local(j)
    out = {"val": loc["val"] @ c}
    if order >= 1:
        out["grad"] = np.stack([g @ c for g in loc["grad"]], axis=1)
    if order >= 2:
        out["hdiag"] = np.stack([h @ c for h in loc["hdiag"]], axis=1)
    return out


def _norm(values, weights):
    return float(np.sqrt(np.sum(weights * np.abs(values) ** 2)))


def face_jump_norms(problem, fs, part, coef, face, q):
    """(L2 norm, tangential H1 seminorm) of the jump on one face, or None if the face carries no condition."""
    if face.area <= 0:
        return None
    x, w = _gauss_box(face.lo, face.hi, q, skip_axis=face.normal_axis)
    tang = list(face.tangential_axes)
    left = _fields(fs, part, coef, face.left, x, 1)
    if face.kind == "interior":
        right = _fields(fs, part, coef, face.right, x, 1)
        jump = left["val"] - right["val"]
        djump = left["grad"][:, tang] - right["grad"][:, tang]
        return _norm(jump, w), _norm(djump, w[:, None])
    kind = problem.boundary_kind(face)
    if kind == "none":
        return None
    g = problem.g(x, face)
    if kind == "impedance":
        dn = face.side * left["grad"][:, face.normal_axis]
        return _norm(dn - 1j * problem.k * left["val"] - g, w), 0.0
    jump = left["val"] - g
    if problem.g_grad is None or not tang:
        return _norm(jump, w), 0.0
    djump = left["grad"][:, tang] - problem.g_grad(x, face)[:, tang]
    return _norm(jump, w), _norm(djump, w[:, None])


def estimate(problem, part, fs, coef, cfg=None, faces=True):
    """Per-element indicators: PDE residual L2 norm plus face jump terms.

    Each face contributes ``||[u]||_L2 + beta |[u]|_H1`` (tangential seminorm);
    an interior face counts for both neighbours. Norms use tensor Gauss-Legendre
    quadrature with ``cfg.quad_per_axis`` nodes per axis.
    """
    cfg = cfg or AdaptiveConfig()
    q = cfg.quad_per_axis
    beta_i = problem.beta_interior if cfg.beta is None else cfg.beta
    beta_b = problem.beta_boundary if cfg.beta_boundary is None else cfg.beta_boundary
    eta, res_part, face_part = {}, {}, {}
    for j in part.active:
        e = part.element(j)
        x, w = _gauss_box(e.lo, e.hi, q)
        inside = part.domain.contains(x)
        x, w = x[inside], w[inside]
        fl = _fields(fs, part, coef, j, x, 2)
        r = problem.operator_residual(fl["val"], fl["grad"], fl["hdiag"]) - problem.f(x)
        res_part[j] = _norm(r, w)
        face_part[j] = 0.0
    if faces:
        for face in part.faces:
            norms = face_jump_norms(problem, fs, part, coef, face, q)
            if norms is None:
                continue
            beta = beta_i if face.kind == "interior" else beta_b
            c = norms[0] + beta * norms[1]
            face_part[face.left] += c
            if face.kind == "interior":
                face_part[face.right] += c
    for j in part.active:
        eta[j] = res_part[j] + face_part[j]
    return IndicatorVector(eta, {"residual": res_part, "faces": face_part})


def mark(ind, theta):
    """Shortest prefix of the indicators (descending, ties by id) reaching ``theta * total``."""
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    items = sorted(ind.eta.items(), key=lambda kv: (-kv[1], kv[0]))
    items = [(j, v) for j, v in items if v > 0]
    if not items:
        return set()
    target = theta * sum(v for _, v in items)
    chosen, acc = set(), 0.0
    for j, v in items:
        chosen.add(j)
        acc += v
        if acc >= target * (1 - 1e-12):
            break
    return chosen


@dataclass(frozen=True)
class SolverSettings:
    plan: CollocationPlan = field(default_factory=CollocationPlan)
    penalties: PenaltyWeights = field(default_factory=PenaltyWeights)
    method: str = "svd"
    rcond: float = 1e-12
    lm: LMConfig = field(default_factory=LMConfig)


@dataclass
class SolveResult:
    coef: Coefficients
    residual: float
    n_unknowns: int
    n_rows: int
    info: dict = field(default_factory=dict)


def solve(problem, part, fs, settings=None, x0=None):
    """Assemble and solve on one partition (min-norm least squares or LM for Burgers)."""
    settings = settings or SolverSettings()
    n = fs.n_features
    if problem.linear:
        system = assemble_linear(problem, part, fs, settings.plan, settings.penalties)
        res = solve_min_norm(system.h, system.t, rcond=settings.rcond, method=settings.method)
        coef = Coefficients.from_vector(part, n, res.w, problem.is_complex)
        rows = system.h.shape[0]
        return SolveResult(coef, res.residual / np.sqrt(rows), system.h.shape[1], rows,
                           {"rank": res.rank, "skipped": system.skipped})
    resid, jac = assemble_burgers_residual(problem, part, fs, settings.plan, settings.penalties)
    start = np.zeros(resid.n_unknowns) if x0 is None else x0
    out = solve_lm(resid, jac, start, settings.lm)
    coef = Coefficients.from_vector(part, n, out.x)
    r = resid(out.x)
    return SolveResult(coef, float(np.linalg.norm(r) / np.sqrt(r.size)), resid.n_unknowns, r.size,
                       {"lm_iters": out.n_iter, "lm_reason": out.reason, "cost": out.cost})


ITERATION_COLUMNS = ("iter", "n_leaves", "n_unknowns", "eta_total", "err_L2", "err_H1", "residual", "seconds")


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    partitions: list = field(default_factory=list)
    coefficients: list = field(default_factory=list)
    indicators: list = field(default_factory=list)
    features: object = None
    stop_reason: str = ""
    error: str | None = None

    @property
    def final_partition(self):
        return self.partitions[-1] if self.partitions else None

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)


def _errors(problem, part, fs, coef, cfg, error_fn):
    if error_fn is not None:
        return error_fn(problem, part, fs, coef)
    if problem.exact is None:
        return float("nan"), float("nan")
    from piranns.metrics import mc_error
    rep = mc_error(problem, part, fs, coef, n_test=cfg.n_test, seed=cfg.error_seed)
    return rep.l2, rep.h1


def adaptive_solve(problem, part, fs, cfg=None, settings=None, error_fn=None, callback=None):
    """Solve -> Estimate -> Mark -> Refine until ``eta_total <= tol``, ``max_iters`` or the leaf cap.

    Every iteration solves from scratch on the current partition with the same
    :class:`FeatureSet` (shared mode keeps one reference parameter set,
    independent mode draws fresh parameters for new element ids). Failures
    are stored in ``record.error`` and the record up to that point is returned.
    """
    cfg = cfg or AdaptiveConfig()
    settings = settings or SolverSettings()
    rec = RunRecord(features=fs)
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        try:
            sol = solve(problem, part, fs, settings)
            ind = estimate(problem, part, fs, sol.coef, cfg)
            l2, h1 = _errors(problem, part, fs, sol.coef, cfg, error_fn)
        except Exception as exc:  # the record up to the failure is still useful
            rec.error = f"iteration {it}: {type(exc).__name__}: {exc}"
            rec.stop_reason = "error"
            return rec
        rec.partitions.append(part)
        rec.coefficients.append(sol.coef)
        rec.indicators.append(ind)
        rec.rows.append({"iter": it, "n_leaves": len(part.active), "n_unknowns": sol.n_unknowns,
                         "eta_total": ind.total, "err_L2": l2, "err_H1": h1,
                         "residual": sol.residual, "seconds": time.perf_counter() - t0})
        if callback is not None:
            callback(rec.rows[-1])
        if cfg.tol is not None and ind.total <= cfg.tol:
            rec.stop_reason = "tol"
            return rec
        if it == cfg.max_iters:
            rec.stop_reason = "max_iters"
            return rec
        marked = mark(ind, cfg.theta)
        if not marked:
            rec.stop_reason = "nothing marked"
            return rec
        new_leaves = len(part.active) + len(marked) * (2 ** part.dim - 1)
        if new_leaves > cfg.max_leaves:
            rec.stop_reason = "leaf cap"
            return rec
        part = part.refine(marked)
    return rec
