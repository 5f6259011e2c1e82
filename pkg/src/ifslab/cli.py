"""Command-line front end: system configs in, CSV reports out.

Exit codes: 0 success, 1 I/O or parse error, 2 not admissible,
3 nonconvergence.  Every command is deterministic given its flags, all
randomness is seeded, and output files are written atomically (temp +
rename) so failures never leave partial files.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import diagnostics, measures, perturbation, sampling, transfer
from .config import ConfigError, load_system, save_system
from .ioutil import atomic_write_text
from .system import NotAdmissibleError, admissibility_check

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_ADMISSIBLE = 2
EXIT_NONCONVERGED = 3


def _fmt(x) -> str:
    return repr(float(x))


def _load(path):
    try:
        return load_system(path)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_check(args) -> int:
    system = _load(args.config)
    if system is None:
        return EXIT_ERROR
    try:
        report = admissibility_check(system, grid_n=args.grid, margin_n=args.margin_n)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"k={system.k}")
    print(f"beta={_fmt(system.beta)}")
    print(f"condition1_margin={_fmt(report.condition1_margin)}")
    print(f"lyap0={_fmt(report.lyap0)}")
    print(f"lyap1={_fmt(report.lyap1)}")
    if report.delta0 is not None:
        print(f"delta0={_fmt(report.delta0)}")
    if report.delta2 is not None:
        print(f"delta2={_fmt(report.delta2)}")
    if report.ratio_cf is not None:
        terms = ",".join(str(t) for t in report.ratio_cf.terms[:8])
        print(f"ratio={_fmt(report.ratio_cf.ratio)}")
        print(f"ratio_cf_terms={terms}")
        print(f"ratio_resonant={report.ratio_cf.resonant}")
    print(f"admissible={report.admissible}")
    return EXIT_OK if report.admissible else EXIT_NOT_ADMISSIBLE


def cmd_solve(args) -> int:
    system = _load(args.config)
    if system is None:
        return EXIT_ERROR
    try:
        result = transfer.fixed_point(
            system, tol=args.tol, max_iter=args.max_iter, n_cells=args.n_cells
        )
    except NotAdmissibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE
    print(f"residual={_fmt(result.residual)}")
    print(f"iterations={result.iterations}")
    print(f"converged={result.converged}")
    print(f"endpoint_mass={_fmt(result.endpoint_mass)}")
    if result.endpoint_leak:
        print("endpoint_leak=True")
    if not result.converged:
        return EXIT_NONCONVERGED
    if args.out:
        measures.write_measure_csv(result.measure, args.out)
        print(f"out={args.out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    system = _load(args.config)
    if system is None:
        return EXIT_ERROR
    if args.mode == "forward":
        run = sampling.forward_orbit(
            system, x0=args.x0, n=args.n, burn=args.burn, seed=args.seed,
            n_cells=args.n_cells,
        )
        print(f"mode=forward n={args.n} burn={args.burn} seed={args.seed}")
        if args.out:
            measures.write_measure_csv(run.measure, args.out)
            print(f"out={args.out}")
        return EXIT_OK
    v, n_stop, diam, converged = sampling.backward_ensemble(
        system, trials=args.trials, a=args.a, b=args.b, tol=args.tol,
        max_n=args.max_n, seed=args.seed,
    )
    lines = ["trial,seed,v,n_stop,final_diameter"]
    for t in range(args.trials):
        lines.append(f"{t},{args.seed},{_fmt(v[t])},{n_stop[t]},{_fmt(diam[t])}")
    frac_bad = float(1.0 - converged.mean())
    print(f"mode=backward trials={args.trials} seed={args.seed}")
    print(f"frac_nonconverged={_fmt(frac_bad)}")
    if args.out:
        atomic_write_text(args.out, "\n".join(lines) + "\n")
        print(f"out={args.out}")
    if args.hist:
        measures.write_measure_csv(
            measures.from_samples(v[converged], args.n_cells)
            if converged.any()
            else measures.uniform(args.n_cells),
            args.hist,
        )
        print(f"hist={args.hist}")
    return EXIT_OK if converged.any() else EXIT_NONCONVERGED


def cmd_fm(args) -> int:
    try:
        mu = measures.read_measure_csv(args.measure_a)
        nu = measures.read_measure_csv(args.measure_b)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        print(_fmt(measures.fm_distance(mu, nu)))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_tailbound(args) -> int:
    system = _load(args.config)
    if system is None:
        return EXIT_ERROR
    try:
        cert = transfer.tail_bound_certificate(system)
    except NotAdmissibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE
    except transfer.CertificateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    print(transfer.certificate_text(cert))
    return EXIT_OK


def cmd_perturb(args) -> int:
    system = _load(args.config)
    if system is None:
        return EXIT_ERROR
    spec = perturbation.PlateauSpec(
        flat_lo=args.u, flat_hi=args.v, height=args.x0,
        budget=args.eps, map_index=args.map_index,
    )
    ladder = tuple(int(m) for m in args.m_ladder.split(","))
    try:
        report = perturbation.verify_density_construction(
            system, spec, m_ladder=ladder, eps=args.m1_eps,
            n_cells=args.n_cells, tol=args.tol, seed=args.seed,
        )
    except (ValueError, perturbation.PlateauConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    print(report.summary())
    print(transfer.certificate_text(report.cert))
    if args.out_dir:
        import os

        os.makedirs(args.out_dir, exist_ok=True)
        save_system(
            perturbation.plateau_limit_system(system, spec),
            os.path.join(args.out_dir, "plateau_limit.json"),
            label="plateau limit",
        )
        for m in ladder:
            save_system(
                perturbation.perturbed_family(system, spec, m),
                os.path.join(args.out_dir, f"member_{m:04d}.json"),
                label=f"member m={m}",
            )
        print(f"out_dir={args.out_dir}")
    return EXIT_OK


def cmd_singularity(args) -> int:
    system = _load(args.config)
    if system is None:
        return EXIT_ERROR
    ladder = tuple(int(n) for n in args.ladder.split(","))
    qs = tuple(float(q) for q in args.q.split(","))
    try:
        report = diagnostics.singularity_report(
            system, n_ladder=ladder, q_levels=qs, tol=args.tol
        )
    except NotAdmissibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ADMISSIBLE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    print(report.summary())
    if args.out:
        lines = ["N,q,L"]
        for row in report.rows:
            for q in report.q_levels:
                lines.append(f"{row.n_cells},{_fmt(q)},{_fmt(row.sizes[q])}")
        atomic_write_text(args.out, "\n".join(lines) + "\n")
        print(f"out={args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifslab",
        description="Iterated function systems on [0, 1]: checks, solves, sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="admissibility report")
    p.add_argument("config")
    p.add_argument("--grid", type=int, default=4096)
    p.add_argument("--margin-n", type=int, default=10, dest="margin_n")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="stationary measure")
    p.add_argument("config")
    p.add_argument("--n-cells", type=int, default=measures.DEFAULT_N, dest="n_cells")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=10_000, dest="max_iter")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sample", help="forward orbit or backward ensemble")
    p.add_argument("config")
    p.add_argument("--mode", choices=("forward", "backward"), required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--hist", default=None)
    p.add_argument("--x0", type=float, default=0.5)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--burn", type=int, default=1000)
    p.add_argument("--a", type=float, default=0.01)
    p.add_argument("--b", type=float, default=0.99)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-n", type=int, default=100_000, dest="max_n")
    p.add_argument("--n-cells", type=int, default=measures.DEFAULT_N, dest="n_cells")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fm", help="distance between two measure CSV files")
    p.add_argument("measure_a")
    p.add_argument("measure_b")
    p.set_defaults(func=cmd_fm)

    p = sub.add_parser("tailbound", help="constructive tail certificate")
    p.add_argument("config")
    p.set_defaults(func=cmd_tailbound)

    p = sub.add_parser("perturb", help="plateau family experiment")
    p.add_argument("config")
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--m-ladder", default="4,16,64,256", dest="m_ladder")
    p.add_argument("--map-index", type=int, default=1, dest="map_index")
    p.add_argument("--m1-eps", type=float, default=0.1, dest="m1_eps")
    p.add_argument("--n-cells", type=int, default=measures.DEFAULT_N, dest="n_cells")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("singularity", help="concentration across grid refinement")
    p.add_argument("config")
    p.add_argument("--ladder", default="256,512,1024,2048,4096,8192")
    p.add_argument("--q", default="0.5,0.9,0.99")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_singularity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
