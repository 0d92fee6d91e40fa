"""Command line entry point: ``piranns {sweep-m,adapt,burgers,validate}``."""

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="piranns", description="Adaptive physics-informed randomized neural networks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("sweep-m", "error versus truncation parameter M"),
                       ("adapt", "adaptive solve (bump, L-shape, Helmholtz)"),
                       ("burgers", "adaptive space-time Burgers solve with Levenberg-Marquardt"),
                       ("validate", "run the built-in self-checks")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, help="INI run configuration")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--seeds", help="comma-separated seeds (overrides the config)")
        s.add_argument("--threads", type=int, default=1, help="worker threads (BLAS and sweep cells)")
        s.add_argument("--plain-sums", action="store_true", help="unweighted residual sums in the loss")
    return p


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _overrides(args):
    out = {}
    if args.seeds:
        try:
            out["run.seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            from piranns.config import ConfigError
            raise ConfigError([f"--seeds must be comma-separated integers, got {args.seeds!r}"]) from None
    if args.plain_sums:
        out["collocation.plain_sums"] = True
    return out


def _manifest(args, cfg, outputs, extra=None):
    import numpy
    import scipy

    import piranns
    data = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config_file": str(args.config) if args.config else None,
        "config": cfg.flat() if cfg is not None else {},
        "seeds": cfg.seeds if cfg is not None else [],
        "threads": args.threads,
        "versions": {"piranns": piranns.__version__, "python": platform.python_version(),
                     "numpy": numpy.__version__, "scipy": scipy.__version__},
        "outputs": outputs,
    }
    data.update(extra or {})
    path = args.out / "manifest.json"
    path.write_text(json.dumps(data, indent=2, default=str) + "\n", encoding="utf-8")
    return path


def _cmd_sweep(args, cfg):
    from piranns.experiments import SWEEP_COLUMNS, argmin_m, make_problem, sweep_m, write_csv
    from piranns.mesh import Partition
    from piranns.plotting import plot_sweep
    problem = make_problem(cfg)
    part = Partition.uniform(problem.domain, cfg.grid())
    rows = sweep_m(problem, part, cfg["run.m_values"], cfg["run.n_features"], cfg.seeds, cfg.solver(),
                   cfg["run.sampler"], cfg["run.feature_mode"], cfg["adaptive.n_test"], cfg["run.r_scale"],
                   threads=args.threads)
    write_csv(args.out / "sweep.csv", SWEEP_COLUMNS, rows)
    plot_sweep(rows, args.out / "sweep.png", title=problem.name)
    failed = [r for r in rows if r["error"]]
    best = argmin_m(rows) if len(failed) < len(rows) else None
    print(f"sweep: {len(rows)} rows, best M = {best}, {len(failed)} failed cells")
    _manifest(args, cfg, ["sweep.csv", "sweep.png"], {"best_m": best})
    return EXIT_NUMERIC if failed and best is None else EXIT_OK


def _cmd_adapt(args, cfg, reference=None):
    from piranns.experiments import ITERATION_CSV_COLUMNS, iteration_rows, run_adaptive, write_csv, write_mesh_csv
    from piranns.plotting import plot_convergence, plot_partition
    rows, meshes, errors, stops = [], [], [], {}
    outputs = ["iterations.csv", "mesh.csv"]
    for seed in cfg.seeds:
        rec = run_adaptive(cfg, seed, reference,
                           callback=lambda r, s=seed: print(f"seed {s} iter {r['iter']}: leaves {r['n_leaves']} "
                                                            f"eta {r['eta_total']:.3e} L2 {r['err_L2']:.3e}",
                                                            flush=True))
        rows.extend(iteration_rows(rec, seed))
        stops[str(seed)] = rec.stop_reason
        if rec.partitions:
            meshes.append((seed, rec.final_partition))
            labels = ("t", "x") if cfg.problem == "burgers" else ("x1", "x2")
            if plot_partition(rec.final_partition, args.out / f"mesh_seed{seed}.png", f"seed {seed}", labels):
                outputs.append(f"mesh_seed{seed}.png")
            plot_convergence(rec.rows, args.out / f"convergence_seed{seed}.png", f"seed {seed}")
            outputs.append(f"convergence_seed{seed}.png")
        if rec.error:
            errors.append(f"seed {seed}: {rec.error}")
    write_csv(args.out / "iterations.csv", ITERATION_CSV_COLUMNS, rows)
    write_mesh_csv(args.out / "mesh.csv", meshes)
    path = _manifest(args, cfg, outputs, {"failures": errors, "stop_reason": stops})
    if errors:
        for e in errors:
            print(f"numerical failure: {e}", file=sys.stderr)
        print(f"run record: {args.out / 'iterations.csv'} (manifest {path})", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_burgers(args, cfg):
    from piranns.experiments import burgers_reference
    try:
        ref = burgers_reference(cfg)
    except (OSError, ValueError) as exc:
        from piranns.config import ConfigError
        raise ConfigError([f"reference grid: {exc}"]) from None
    ref.subsample().save(args.out / "reference.csv")
    return _cmd_adapt(args, cfg, reference=ref)


def _cmd_validate(args):
    from piranns.validate import run_checks
    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    lines = [f"{name},{int(ok)},{detail}" for name, ok, detail in results]
    (args.out / "validate.csv").write_text("check,passed,detail\n" + "\n".join(lines) + "\n", encoding="utf-8")
    _manifest(args, None, ["validate.csv"])
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAIL


def main(argv=None):
    args = _parser().parse_args(argv)
    _set_threads(max(1, args.threads))
    from piranns.config import ConfigError, load_config
    from piranns.linalg import DivergedError
    args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        if args.command == "validate":
            code = _cmd_validate(args)
        else:
            if args.config is None:
                raise ConfigError([f"{args.command} needs --config"])
            cfg = load_config(args.config, _overrides(args))
            if args.command == "sweep-m":
                code = _cmd_sweep(args, cfg)
            elif args.command == "burgers":
                if cfg.problem != "burgers":
                    raise ConfigError(["the burgers command needs run.problem = burgers"])
                code = _cmd_burgers(args, cfg)
            else:
                if cfg.problem == "burgers":
                    raise ConfigError(["use the burgers command for run.problem = burgers"])
                code = _cmd_adapt(args, cfg)
    except ConfigError as err:
        print("configuration error:", file=sys.stderr)
        for p in err.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergedError, ArithmeticError) as err:
        print(f"numerical failure: {err}; outputs so far in {args.out}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"done in {time.perf_counter() - t0:.1f}s; outputs in {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
