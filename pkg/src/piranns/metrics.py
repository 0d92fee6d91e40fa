"""Monte Carlo L2/H1 errors and grid errors against reference solutions."""

from dataclasses import dataclass

import numpy as np

from piranns.assembly import local_derivatives


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    h1: float
    residual: float = float("nan")
    n_test_per_element: int = 10_000
    seed: int = 0


def _sample_element(part, j, n, rng):
    """``n`` uniform points in element ``j`` that lie in the domain (rejection against holes)."""
    e = part.element(j)
    lo, hi = np.array(e.lo), np.array(e.hi)
    out, have = [], 0
    for _ in range(100):
        x = rng.uniform(lo, hi, size=(n, lo.size))
        x = x[part.domain.contains(x)]
        out.append(x)
        have += x.shape[0]
        if have >= n:
            break
    return np.vstack(out)[:n]


def mc_error(problem, part, fs, coef, n_test=10_000, seed=0, residual=float("nan")):
    """Monte Carlo L2 and H1 errors: ``sum_j |Omega_j| / n * sum_i |u~ - u|^2`` (plus gradients for H1).

    Points are uniform in each active element; complex problems use the modulus.
    """
    if problem.exact is None:
        raise NotImplementedError(f"problem {problem.name!r} has no exact solution")
    if n_test < 1:
        raise ValueError("n_test must be positive")
    grad_ok = problem.exact_grad is not None
    rng = np.random.default_rng(seed)
    l2sq, h1sq = 0.0, 0.0
    for j in part.active:
        x = _sample_element(part, j, n_test, rng)
        if grad_ok:
            # drop points exactly at singularities (probability zero, but be safe)
            x = x[np.all(np.isfinite(x), axis=1)]
        vol = part.volume(j)
        c = coef.local(j)
        loc = local_derivatives(fs, part, j, x, order=1 if grad_ok else 0)
        dv = loc["val"] @ c - problem.exact(x)
        e0 = vol / x.shape[0] * np.sum(np.abs(dv) ** 2)
        l2sq += e0
        h1sq += e0
        if grad_ok:
            ex = problem.exact_grad(x)
            for k, g in enumerate(loc["grad"]):
                h1sq += vol / x.shape[0] * np.sum(np.abs(g @ c - ex[:, k]) ** 2)
    return ErrorReport(float(np.sqrt(l2sq)), float(np.sqrt(h1sq)) if grad_ok else float("nan"),
                       residual, n_test, seed)


def grid_error(fs, part, coef, grid, nt=101, nx=201):
    """Root-mean-square difference to a reference grid on an ``nt x nx`` node lattice."""
    from piranns.features import eval_ansatz
    sub = grid.subsample(nt, nx)
    tt, xx = np.meshgrid(sub.t, sub.x, indexing="ij")
    pts = np.stack([tt.ravel(), xx.ravel()], axis=1)
    diff = eval_ansatz(fs, part, coef, pts) - sub.u.ravel()
    return float(np.sqrt(np.mean(diff ** 2)))
