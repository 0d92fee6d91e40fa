"""Minimum-norm least squares and a Levenberg-Marquardt solver for nonlinear residuals."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

ROW_KINDS = ("interior", "boundary", "interface-l2", "interface-h1")


@dataclass
class LinearSystem:
    """Weighted collocation rows ``h`` and right-hand side ``t``.

    ``row_kind`` indexes :data:`ROW_KINDS`; ``row_ref`` is the element id for
    interior rows and the index into ``Partition.faces`` for boundary and
    interface rows.
    """

    h: np.ndarray
    t: np.ndarray
    row_kind: np.ndarray | None = None
    row_ref: np.ndarray | None = None
    points: np.ndarray | None = None
    is_complex: bool = False
    skipped: int = 0

    @property
    def shape(self):
        return self.h.shape

    def rows_of(self, kind):
        return np.flatnonzero(self.row_kind == ROW_KINDS.index(kind))

    def dump(self, stem):
        """Write ``<stem>_h.csv`` and ``<stem>_t.csv``: a "rows cols" header, then row-major values."""
        for name, mat in (("h", self.h), ("t", self.t.reshape(-1, 1))):
            with open(f"{stem}_{name}.csv", "w") as fh:
                fh.write(f"{mat.shape[0]} {mat.shape[1]}\n")
                np.savetxt(fh, mat, delimiter=",", fmt="%.17g")


def load_dump(path):
    with open(path) as fh:
        rows, cols = (int(v) for v in fh.readline().split())
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return data.reshape(rows, cols)


@dataclass
class MinNormResult:
    w: np.ndarray
    residual: float
    rank: int
    singular_values: np.ndarray | None = None


def solve_min_norm(h, t=None, rcond=1e-12, method="svd"):
    """Minimum 2-norm minimizer of ``||h w - t||``.

    ``method="svd"`` truncates singular values below ``rcond * s_max``;
    ``method="qr"`` uses a complete orthogonal decomposition with the same
    tolerance. ``h`` may also be a :class:`LinearSystem`.
    """
    if isinstance(h, LinearSystem):
        h, t = h.h, h.t
    h = np.asarray(h, dtype=float)
    t = np.asarray(t, dtype=float)
    if h.ndim != 2 or min(h.shape) < 1 or t.shape != (h.shape[0],):
        raise ValueError(f"incompatible system shapes {h.shape} and {t.shape}")
    if not 0 < rcond < 1:
        raise ValueError(f"rcond must lie in (0, 1), got {rcond}")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(t))):
        raise ValueError("system contains non-finite entries")
    if method == "svd":
        w, _, rank, sv = sla.lstsq(h, t, cond=rcond, lapack_driver="gelsd", check_finite=False)
    elif method == "qr":
        w, _, rank, sv = sla.lstsq(h, t, cond=rcond, lapack_driver="gelsy", check_finite=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.linalg.norm(h @ w - t))
    return MinNormResult(w, residual, int(rank), sv)


@dataclass
class LMConfig:
    max_iter: int = 200
    tol_grad: float = 1e-10
    tol_step: float = 1e-12
    damping0: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    # relative decrease of the objective below which an accepted step ends the run; 0 disables
    tol_fun: float = 0.0

    def __post_init__(self):
        for name in ("tol_grad", "tol_step", "damping0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.tol_fun < 0 or self.max_iter < 1:
            raise ValueError("tol_fun must be >= 0 and max_iter >= 1")
        if not (self.damping_up > 1 and 0 < self.damping_down < 1):
            raise ValueError("damping factors must satisfy up > 1 > down > 0")


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    n_iter: int
    reason: str
    history: list = field(default_factory=list)

    @property
    def n_accepted(self):
        return len(self.history) - 1


class DivergedError(RuntimeError):
    def __init__(self, message, x):
        super().__init__(message)
        self.x = x


def _normal_matrix(jac):
    if sp.issparse(jac):
        return (jac.T @ jac).toarray()
    return jac.T @ jac


def solve_lm(residual, jacobian, x0, cfg=None):
    """Levenberg-Marquardt on ``||residual(x)||^2`` with an analytic ``jacobian(x)``.

    The Jacobian may be dense or scipy-sparse. The damping ``lam * I`` starts at
    ``damping0 * max(diag(J^T J))`` and is multiplied by ``damping_down`` after an
    accepted step and by ``damping_up`` after a rejected one. ``history`` holds
    the objective after every accepted step and is non-increasing.
    """
    cfg = cfg or LMConfig()
    x = np.array(x0, dtype=float)
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise DivergedError("non-finite residual at the starting point", x)
    cost = float(r @ r)
    history = [cost]
    jac = jacobian(x)
    grad = jac.T @ r
    if np.max(np.abs(grad), initial=0.0) <= cfg.tol_grad:
        return LMResult(x, cost, 0, "gradient", history)
    normal = _normal_matrix(jac)
    diag_max = float(np.max(np.diag(normal)))
    lam = cfg.damping0 * (diag_max if diag_max > 0 else 1.0)
    reason = "max_iter"
    it = 0
    for it in range(1, cfg.max_iter + 1):
        try:
            damped = normal.copy()
            damped.flat[:: x.size + 1] += lam
            factor = sla.cho_factor(damped, overwrite_a=True, check_finite=False)
            step = -sla.cho_solve(factor, grad, check_finite=False)
        except (sla.LinAlgError, ValueError):
            lam *= cfg.damping_up
            continue
        if not np.all(np.isfinite(step)):
            lam *= cfg.damping_up
            continue
        if np.linalg.norm(step) <= cfg.tol_step * (1.0 + np.linalg.norm(x)):
            reason = "step"
            break
        x_new = x + step
        r_new = np.asarray(residual(x_new), dtype=float)
        if not np.all(np.isfinite(r_new)):
            raise DivergedError(f"non-finite residual at iteration {it}", x)
        cost_new = float(r_new @ r_new)
        if cost_new < cost:
            decrease = (cost - cost_new) / max(cost, np.finfo(float).tiny)
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            lam = max(lam * cfg.damping_down, 1e-300)
            jac = jacobian(x)
            grad = jac.T @ r
            normal = _normal_matrix(jac)
            log.debug("lm iter %d cost %.3e lam %.1e", it, cost, lam)
            if np.max(np.abs(grad)) <= cfg.tol_grad:
                reason = "gradient"
                break
            if decrease < cfg.tol_fun:
                reason = "objective"
                break
        else:
            lam *= cfg.damping_up
            if lam > 1e300:
                reason = "damping"
                break
    return LMResult(x, cost, it, reason, history)
