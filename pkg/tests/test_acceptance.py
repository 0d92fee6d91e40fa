"""End-to-end acceptance checks; each test prints one PASS/FAIL line.

The adaptive and M-sweep criteria run the shipped configurations under
``configs/`` and take several minutes in total (Burgers alone about eight).
"""

from pathlib import Path

import numpy as np
import pytest

from piranns.activation import sigma
from piranns.adaptivity import AdaptiveConfig, SolverSettings, estimate, solve
from piranns.assembly import CollocationPlan, assemble_burgers_residual
from piranns.config import load_config
from piranns.experiments import argmin_m, make_problem, run_adaptive, sweep_m
from piranns.features import Coefficients, FeatureSet, eval_ansatz
from piranns.linalg import LMConfig, solve_lm, solve_min_norm
from piranns.mesh import Domain, Partition
from piranns.metrics import mc_error
from piranns.problems import burgers, burgers_fd_oracle, manufactured
from piranns.sampling import SampleDomain, balanced_counts, sample_stratified, sample_uniform, stratify

from conftest import record_acceptance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def report(capsys, number, title, ok, detail):
    line = record_acceptance(number, title, ok, detail)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def run_sweep(name):
    cfg = load_config(CONFIGS / name)
    problem = make_problem(cfg)
    part = Partition.uniform(problem.domain, cfg.grid())
    rows = sweep_m(problem, part, cfg["run.m_values"], cfg["run.n_features"], cfg.seeds, cfg.solver(),
                   cfg["run.sampler"], cfg["run.feature_mode"], cfg["adaptive.n_test"], cfg["run.r_scale"])
    m_values = [float(m) for m in cfg["run.m_values"]]
    return rows, argmin_m(rows), m_values


@pytest.fixture(scope="module")
def helmholtz_sweeps():
    return {name: run_sweep(f"{name}.cfg") for name in ("ex1_k16", "ex1_k32")}


def deepest_leaves(part):
    return [part.element(j) for j in part.deepest()]


def box_contains(e, point):
    return bool(np.all(np.array(e.lo) <= point) and np.all(point <= np.array(e.hi)))


# ---------------------------------------------------------------- criterion 1
def test_c01_helmholtz_interior_optimal_m(helmholtz_sweeps, capsys):
    _, m16, grid = helmholtz_sweeps["ex1_k16"]
    _, m32, _ = helmholtz_sweeps["ex1_k32"]
    interior = all(grid[0] < m < grid[-1] for m in (m16, m32))
    ok = interior and m32 > m16
    report(capsys, 1, "interior optimal M, k=32 optimum above k=16", ok,
           f"argmin M: k=16 -> {m16}, k=32 -> {m32} on [{grid[0]}, {grid[-1]}]")


# ---------------------------------------------------------------- criterion 2
def test_c02_pou_lowers_optimal_m(helmholtz_sweeps, capsys):
    _, m32, _ = helmholtz_sweeps["ex1_k32"]
    _, m_pou, _ = run_sweep("ex1_pou.cfg")
    report(capsys, 2, "2x2 PoU lowers the optimal M for k=32", m_pou < m32,
           f"argmin M with PoU {m_pou} vs without {m32}")


# ---------------------------------------------------------------- criterion 3
def test_c03_bump_localization(capsys):
    cfg = load_config(CONFIGS / "ex2.cfg")
    assert cfg.adaptive().theta == 0.7 and cfg.adaptive().max_iters >= 6 and len(cfg.seeds) == 3
    first, last, notes, ok = [], [], [], True
    for seed in cfg.seeds:
        rec = run_adaptive(cfg, seed)
        assert rec.error is None, rec.error
        l2, h1 = rec.column("err_L2"), rec.column("err_H1")
        first.append(l2[0])
        last.append(l2[-1])
        centred = any(box_contains(e, np.array([0.5, 0.5])) for e in deepest_leaves(rec.final_partition))
        decreasing = l2[-1] < l2[0] and h1[-1] < h1[0]
        ok &= centred and decreasing and len(rec.rows) >= 6
        notes.append(f"seed {seed}: L2 {l2[0]:.2e}->{l2[-1]:.2e} H1 {h1[0]:.2e}->{h1[-1]:.2e} "
                     f"deepest@centre={centred}")
    ratio = np.median(last) / np.median(first)
    ok &= ratio <= 0.1
    report(capsys, 3, "bump refinement localizes and reduces error", ok,
           f"median L2 ratio {ratio:.2e}; " + "; ".join(notes))


# ---------------------------------------------------------------- criterion 4
def test_c04_lshape_norm_gap(capsys):
    cfg = load_config(CONFIGS / "ex4.cfg")
    assert cfg.adaptive().theta == 0.7 and cfg.adaptive().max_iters >= 6
    rec = run_adaptive(cfg, cfg.seeds[0])
    assert rec.error is None, rec.error
    n = np.log(rec.column("n_unknowns"))
    order_l2 = -np.polyfit(n, np.log(rec.column("err_L2")), 1)[0]
    order_h1 = -np.polyfit(n, np.log(rec.column("err_H1")), 1)[0]
    corner = any(box_contains(e, np.zeros(2)) for e in deepest_leaves(rec.final_partition))
    ok = corner and order_h1 < order_l2 and len(rec.rows) >= 6
    report(capsys, 4, "L-shape: corner refined, H1 order below L2 order", ok,
           f"orders L2 {order_l2:.2f}, H1 {order_h1:.2f}; deepest leaves touch origin={corner}")


# ---------------------------------------------------------------- criterion 5
def test_c05_burgers_shock_capture(capsys):
    cfg = load_config(CONFIGS / "ex5.cfg")
    assert cfg.adaptive().theta == 0.6 and cfg.adaptive().max_iters >= 6
    assert burgers().beta_interior == 0.01
    ref = burgers_fd_oracle(cfg["run.nu"], nx=512)
    rec = run_adaptive(cfg, cfg.seeds[0], reference=ref)
    assert rec.error is None, rec.error
    err = rec.column("err_L2")
    ratio = err[0] / err[-1]
    final = rec.final_partition
    deep = deepest_leaves(final)
    centres = np.array([e.center for e in deep])
    near_shock = bool(np.all(np.abs(centres[:, 1] - 0.5) <= 0.125))
    # in the late-time slab t >= 3/4 the finest leaves must also sit at the shock
    late = [final.element(j) for j in final.active if final.element(j).lo[0] >= 0.75]
    top = max(e.level for e in late)
    late_x = np.array([e.center[1] for e in late if e.level == top])
    late_ok = bool(np.all(np.abs(late_x - 0.5) <= 0.125))
    ok = ratio >= 5 and near_shock and late_ok and len(rec.rows) >= 6
    report(capsys, 5, "Burgers: error drops 5x, refinement at the shock", ok,
           f"L2 {err[0]:.2e}->{err[-1]:.2e} (x{ratio:.1f}); {len(deep)} deepest leaves (level {deep[0].level}) "
           f"x-centres in [{centres[:, 1].min():.3f}, {centres[:, 1].max():.3f}], "
           f"t-centres in [{centres[:, 0].min():.3f}, {centres[:, 0].max():.3f}]; "
           f"finest leaves for t >= 0.75 (level {top}) x-centres in [{late_x.min():.3f}, {late_x.max():.3f}]; "
           f"{rec.column('seconds').sum():.0f}s")


# ---------------------------------------------------------------- criterion 6
def test_c06_solver_correctness(capsys):
    rng = np.random.default_rng(6)
    worst = {"normal": 0.0, "null": 0.0, "pinv": 0.0}
    for trial in range(20):
        rank = 1 + trial % 8
        h = rng.standard_normal((30, rank)) @ rng.standard_normal((rank, 12))
        t = rng.standard_normal(30)
        w = solve_min_norm(h, t).w
        _, s, vt = np.linalg.svd(h)
        null = vt[np.sum(s > 1e-10 * s[0]):]
        scale = np.linalg.norm(h) ** 2 * np.linalg.norm(t)
        worst["normal"] = max(worst["normal"], np.linalg.norm(h.T @ (h @ w - t)) / scale)
        worst["null"] = max(worst["null"], np.linalg.norm(null @ w) / np.linalg.norm(w))
        worst["pinv"] = max(worst["pinv"], np.linalg.norm(w - np.linalg.pinv(h, rcond=1e-12) @ t))
    monotone = True
    for trial in range(10):
        c = rng.standard_normal(5)
        res = solve_lm(lambda x: np.sin(x) * x - c, lambda x: np.diag(np.cos(x) * x + np.sin(x)),
                       rng.standard_normal(5), LMConfig(max_iter=60))
        monotone &= bool(np.all(np.diff(res.history) <= 0))
    a, b = rng.standard_normal((25, 6)), rng.standard_normal(25)
    lin = solve_lm(lambda x: a @ x - b, lambda x: a, np.zeros(6))
    resid_gap = abs(np.linalg.norm(a @ lin.x - b) - solve_min_norm(a, b).residual)
    ok = max(worst.values()) < 1e-8 and monotone and resid_gap < 1e-8
    report(capsys, 6, "min-norm optimality, null-space minimality, LM monotone", ok,
           f"normal eq {worst['normal']:.1e}, null-space {worst['null']:.1e}, vs pinv {worst['pinv']:.1e}, "
           f"LM monotone={monotone}, linear LM residual gap {resid_gap:.1e}")


# ---------------------------------------------------------------- criterion 7
def _central(fun, x, h):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def test_c07_analytic_derivatives(capsys):
    rng = np.random.default_rng(7)
    x = rng.uniform(-3, 3, 200)
    act = max(np.max(np.abs(_central(lambda y: sigma(y, k - 1), x, 1e-5) - sigma(x, k)))
              / np.max(np.abs(sigma(x, k))) for k in (1, 2, 3))
    part = Partition.uniform(Domain.unit_cube(2), (2, 2)).refine({1})
    fs = FeatureSet("independent", domain=SampleDomain(2.0, 2), n=25, seed=7)
    coef = Coefficients({j: rng.standard_normal(25) for j in part.active})
    ans = 0.0
    for j in part.active:
        e = part.element(j)
        pts = rng.uniform(np.array(e.lo) + 0.1 * e.width, np.array(e.hi) - 0.1 * e.width, size=(20, 2))
        for deriv, lower, axis, h in (((1, 0), (0, 0), 0, 1e-6), ((0, 1), (0, 0), 1, 1e-6),
                                      ((2, 0), (1, 0), 0, 1e-6), ((1, 1), (0, 1), 0, 1e-6),
                                      ((0, 2), (0, 1), 1, 1e-6)):
            step = np.zeros(2)
            step[axis] = h
            fd = (eval_ansatz(fs, part, coef, pts + step, lower) - eval_ansatz(fs, part, coef, pts - step, lower)) / (2 * h)
            exact = eval_ansatz(fs, part, coef, pts, deriv)
            ans = max(ans, np.max(np.abs(fd - exact)) / np.max(np.abs(exact)))
    pb = burgers()
    bpart = Partition.uniform(pb.domain, (2, 2))
    bfs = FeatureSet("shared", domain=SampleDomain(2.0, 2), n=10, seed=3)
    res, jac = assemble_burgers_residual(pb, bpart, bfs, CollocationPlan(49, 5))
    w = 0.3 * rng.standard_normal(res.n_unknowns)
    j_an = jac(w).toarray()
    j_fd = np.stack([_central(lambda s, i=i: res(w + s * np.eye(res.n_unknowns)[i]), 0.0, 1e-5)
                     for i in range(res.n_unknowns)], axis=1)
    jac_err = np.max(np.abs(j_fd - j_an)) / np.max(np.abs(j_an))
    ok = act < 1e-6 and ans < 1e-6 and jac_err < 1e-5
    report(capsys, 7, "analytic derivatives vs finite differences", ok,
           f"activation {act:.1e}, ansatz {ans:.1e}, Burgers Jacobian {jac_err:.1e}")


# ---------------------------------------------------------------- criterion 8
def test_c08_partition_of_unity_and_mesh(capsys):
    rng = np.random.default_rng(8)
    part = Partition.uniform(Domain.unit_cube(2), (2, 2))
    vol_err = 0.0
    for _ in range(5):
        chosen = set(rng.choice(part.active, size=max(1, len(part.active) // 3), replace=False).tolist())
        part = part.refine(chosen)
        vol_err = max(vol_err, abs(sum(part.volume(j) for j in part.active) - 1.0))
    x = rng.uniform(0, 1, size=(1000, 2))
    # include points on element edges and corners
    x[:50] = np.round(x[:50] * 8) / 8
    pou_err = np.max(np.abs(part.pou_weights(x).sum(axis=1) - 1.0))
    grid = Partition.uniform(Domain.unit_cube(2), (2, 2))
    faces_ok = len(grid.interior_faces()) == 4 and len(grid.boundary_faces()) == 8
    fine = grid.refine({grid.active[0]})
    # 4 faces between the children, 2 old faces split in two, 2 untouched; 2 boundary faces split in two
    faces_ok &= len(fine.interior_faces()) == 4 + 4 + 2 and len(fine.boundary_faces()) == 6 + 4
    lshape = Partition.uniform(Domain.lshape(), (2, 2))
    faces_ok &= len(lshape.active) == 3 and len(lshape.interior_faces()) == 2 and len(lshape.boundary_faces()) == 8
    single = Partition.uniform(Domain.unit_cube(2), (1, 1))
    a = rng.standard_normal((4, 2))
    exact_scale = True
    for level in range(1, 5):
        single = single.refine({single.active[0]})
        j = single.deepest()[0]
        a_eff, _ = single.affine(j).effective(a, np.zeros(4))
        exact_scale &= bool(np.array_equal(a_eff, a * 2.0 ** (single.element(j).level + 1)))
    ok = pou_err < 1e-14 and vol_err < 1e-12 and faces_ok and exact_scale
    report(capsys, 8, "partition of unity, volumes, faces, affine scaling", ok,
           f"max |sum psi - 1| {pou_err:.1e}, volume drift {vol_err:.1e}, faces ok={faces_ok}, "
           f"2^(L+1) scaling exact={exact_scale}")


# ---------------------------------------------------------------- criterion 9
def test_c09_sampling(capsys):
    moments = {}
    for d in (1, 2, 3):
        dom = SampleDomain(1.7, d, r_scale=0.8)
        p = sample_uniform(dom, 100_000, seed=d)
        moments[d] = float(np.mean((np.linalg.norm(p.a, axis=1) * 2 * dom.r_scale / dom.m) ** d))
    counts_ok = balanced_counts(100, 3) == [5, 5, 4] and balanced_counts(27, 3) == [3, 3, 3]
    for n in (10, 100, 250):
        strata = stratify(SampleDomain(2.0, 2), n)
        counts_ok &= bool(strata.counts.sum() >= n and np.all((strata.mass > 0) == (strata.counts > 0)))
        expected = np.where(strata.mass > 0, np.maximum(1, np.ceil(strata.mass * n - 1e-9)), 0)
        counts_ok &= bool(np.array_equal(strata.counts, expected))
        counts_ok &= sample_stratified(SampleDomain(2.0, 2), n, seed=1).n == strata.counts.sum()
    dom = SampleDomain(2.0, 2)
    det = sample_uniform(dom, 50, seed=4).same_as(sample_uniform(dom, 50, seed=4))
    det &= not sample_uniform(dom, 50, seed=4).same_as(sample_uniform(dom, 50, seed=5))
    det &= sample_stratified(dom, 50, seed=4).same_as(sample_stratified(dom, 50, seed=4))
    ok = all(abs(v - 0.5) <= 0.01 for v in moments.values()) and counts_ok and det
    report(capsys, 9, "uniform-ball moments, stratified counts, determinism", ok,
           "E[(|A| 2R/M)^d] = " + ", ".join(f"{v:.4f} (d={d})" for d, v in moments.items())
           + f"; counts ok={counts_ok}, deterministic={det}")


# ---------------------------------------------------------------- criterion 10
@pytest.mark.parametrize("operator", ["poisson", "helmholtz", "burgers"])
def test_c10_manufactured_consistency(operator, capsys):
    dom = Domain.unit_cube(2)
    part = Partition.uniform(dom, (1, 1))
    fs = FeatureSet("shared", domain=SampleDomain(1.0, 2), n=20, seed=10)
    pb = manufactured(fs, part, 0, 4, operator, k=3.0, nu=0.01 / np.pi, amplitude=0.5)
    settings = SolverSettings(plan=CollocationPlan(interior_per_element=400, per_face=40),
                              lm=LMConfig(max_iter=200, tol_grad=1e-14, tol_step=1e-15))
    sol = solve(pb, part, fs, settings)
    err = mc_error(pb, part, fs, sol.coef, n_test=5000).l2
    eta = estimate(pb, part, fs, sol.coef, AdaptiveConfig()).total
    ok = err < 1e-6 and eta < 1e-5
    report(capsys, 10, f"manufactured in-span target ({operator})", ok, f"L2 {err:.1e}, eta_total {eta:.1e}")
