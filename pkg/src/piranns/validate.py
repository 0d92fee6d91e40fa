"""Fast built-in self-checks run by ``piranns validate``."""

import numpy as np

from piranns.activation import sigma
from piranns.adaptivity import AdaptiveConfig, estimate, solve
from piranns.features import FeatureSet
from piranns.linalg import solve_min_norm
from piranns.mesh import Domain, Partition
from piranns.metrics import mc_error
from piranns.problems import manufactured
from piranns.sampling import SampleDomain, sample_uniform


def check_activation():
    x = np.linspace(-4, 4, 41)
    h = 1e-5
    worst = 0.0
    for k in range(1, 4):
        fd = (sigma(x + h, k - 1) - sigma(x - h, k - 1)) / (2 * h)
        worst = max(worst, np.max(np.abs(fd - sigma(x, k))) / np.max(np.abs(sigma(x, k))))
    return worst < 1e-6, f"max relative FD mismatch {worst:.1e}"


def check_pou():
    rng = np.random.default_rng(0)
    part = Partition.uniform(Domain.unit_cube(2), (2, 2))
    for _ in range(3):
        part = part.refine(set(rng.choice(part.active, size=2, replace=False).tolist()))
    x = rng.uniform(0, 1, size=(1000, 2))
    err = np.max(np.abs(part.pou_weights(x).sum(axis=1) - 1))
    vol = abs(sum(part.volume(j) for j in part.active) - 1)
    return err < 1e-12 and vol < 1e-12, f"PoU sum error {err:.1e}, volume error {vol:.1e}"


def check_sampling():
    p = sample_uniform(SampleDomain(2.0, 2), 100_000, seed=0)
    moment = np.mean(np.linalg.norm(p.a, axis=1) ** 2)
    return abs(moment - 0.5) < 0.01, f"E|A|^2 = {moment:.4f} (expected 0.5)"


def check_min_norm():
    rng = np.random.default_rng(1)
    h = rng.standard_normal((30, 20)) @ np.diag(np.r_[np.ones(15), np.zeros(5)]) @ rng.standard_normal((20, 20))
    t = rng.standard_normal(30)
    res = solve_min_norm(h, t)
    err = np.linalg.norm(res.w - np.linalg.pinv(h, rcond=1e-12) @ t) / np.linalg.norm(res.w)
    return err < 1e-8 and res.rank == 15, f"pinv mismatch {err:.1e}, rank {res.rank}"


def check_manufactured():
    part = Partition.uniform(Domain.unit_cube(2), (1, 1))
    fs = FeatureSet("shared", domain=SampleDomain(2.0, 2), n=40, seed=3)
    pb = manufactured(fs, part, part.active[0], 0)
    sol = solve(pb, part, fs)
    l2 = mc_error(pb, part, fs, sol.coef, n_test=2000).l2
    eta = estimate(pb, part, fs, sol.coef, AdaptiveConfig(quad_per_axis=8)).total
    return l2 < 1e-6 and eta < 1e-5, f"L2 {l2:.1e}, eta {eta:.1e}"


CHECKS = {
    "activation derivatives": check_activation,
    "partition of unity": check_pou,
    "uniform ball sampling": check_sampling,
    "min-norm least squares": check_min_norm,
    "manufactured consistency": check_manufactured,
}


def run_checks():
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # report, don't crash the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
