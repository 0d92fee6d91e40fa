"""Experiment drivers: M-sweeps, adaptive runs and Burgers runs, plus CSV output."""

import csv
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from piranns import problems
from piranns.adaptivity import ITERATION_COLUMNS, SolverSettings, adaptive_solve, solve
from piranns.features import FeatureSet
from piranns.mesh import Partition
from piranns.metrics import grid_error, mc_error
from piranns.sampling import SampleDomain

SWEEP_COLUMNS = ("M", "seed", "l2", "h1", "residual", "error")


def make_problem(cfg, reference=None):
    name = cfg.problem
    if name == "helmholtz":
        return problems.helmholtz(cfg["run.k"])
    if name == "bump":
        return problems.gaussian_bump(cfg["run.dim"], cfg["run.sharpness"])
    if name == "lshape":
        return problems.lshape()
    return problems.burgers(cfg["run.nu"], reference)


def make_features(cfg, dim, seed, m=None):
    dom = SampleDomain(cfg["run.m"] if m is None else m, dim, cfg["run.r_scale"])
    return FeatureSet(cfg["run.feature_mode"], domain=dom, n=cfg["run.n_features"], seed=seed,
                      sampler=cfg["run.sampler"])


def burgers_reference(cfg):
    """The reference grid from ``run.reference`` if given, else the finite-difference oracle."""
    if cfg["run.reference"]:
        return problems.load_reference_grid(cfg["run.reference"])
    return problems.burgers_fd_oracle(cfg["run.nu"], nx=cfg["oracle.nx"], cfl=cfg["oracle.cfl"])


def sweep_cell(problem, part, m, seed, n, settings=None, sampler="uniform", mode="shared",
               n_test=10_000, r_scale=1.0):
    """One (M, seed) cell: sample, assemble, solve, measure. Failures become NaN rows."""
    try:
        fs = FeatureSet(mode, domain=SampleDomain(m, part.dim, r_scale), n=n, seed=seed, sampler=sampler)
        sol = solve(problem, part, fs, settings or SolverSettings())
        rep = mc_error(problem, part, fs, sol.coef, n_test=n_test, seed=seed)
        return {"M": m, "seed": seed, "l2": rep.l2, "h1": rep.h1, "residual": sol.residual, "error": ""}
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        nan = float("nan")
        return {"M": m, "seed": seed, "l2": nan, "h1": nan, "residual": nan,
                "error": f"{type(exc).__name__}: {exc}"}


def median_rows(cells, m_values):
    out = []
    for m in m_values:
        rows = [r for r in cells if r["M"] == m]
        row = {"M": m, "seed": "median", "error": ""}
        for key in ("l2", "h1", "residual"):
            vals = np.array([r[key] for r in rows], dtype=float)
            vals = vals[np.isfinite(vals)]
            row[key] = float(np.median(vals)) if vals.size else float("nan")
        out.append(row)
    return out


def sweep_m(problem, part, m_values, n, seeds, settings=None, sampler="uniform", mode="shared",
            n_test=10_000, r_scale=1.0, threads=1):
    """Error versus truncation parameter: one row per (M, seed), then one median row per M."""
    m_values = [float(m) for m in m_values]
    if list(m_values) != sorted(m_values):
        raise ValueError("m_values must be ascending")
    jobs = [(m, s) for m in m_values for s in seeds]

    def run(job):
        return sweep_cell(problem, part, job[0], job[1], n, settings, sampler, mode, n_test, r_scale)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cells = list(pool.map(run, jobs))
    else:
        cells = [run(j) for j in jobs]
    return cells + median_rows(cells, m_values)


def argmin_m(rows):
    """The M with the smallest median L2 error among the median rows."""
    med = [r for r in rows if r["seed"] == "median" and math.isfinite(r["l2"])]
    return min(med, key=lambda r: r["l2"])["M"]


def run_adaptive(cfg, seed, reference=None, callback=None):
    problem = make_problem(cfg, reference)
    part = Partition.uniform(problem.domain, cfg.grid())
    fs = make_features(cfg, problem.dim, seed)
    if problem.operator == "burgers" and reference is not None:
        def error_fn(pb, p, f, c):
            return grid_error(f, p, c, reference), float("nan")
    else:
        error_fn = None
    return adaptive_solve(problem, part, fs, cfg.adaptive(), cfg.solver(), error_fn=error_fn, callback=callback)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def iteration_rows(record, seed):
    return [dict(r, seed=seed) for r in record.rows]


ITERATION_CSV_COLUMNS = ("seed",) + ITERATION_COLUMNS


def write_mesh_csv(path, partitions):
    """Final partitions of several runs: ``seed`` column plus the partition's own columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, (seed, part) in enumerate(partitions):
            rows = part.csv_rows()
            if i == 0:
                w.writerow(["seed"] + rows[0])
            for r in rows[1:]:
                w.writerow([seed] + [_fmt(v) for v in r])
