"""Command-line front end: generate, certify, solve, compare, rates.

Exit codes: 0 success, 1 usage, 2 precondition or infeasibility,
3 divergence, 4 certificate computed but failing.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .analysis import compare, reference_lines
from .errors import (DivergenceError, EqsynthError, InfeasibleConstraintError, ParameterError,
                     RateConditionError, UnsupportedError)
from .preprocess import SCALING_MODES, preprocess
from .problems import SPECTRUM_LAWS, make_problem, paper_instances
from .solvers import ALGORITHMS, Stop, run
from .synthesis import Grids, SynthesisParams, certify, rho_gda, rho_syn

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_DIVERGENCE, EXIT_CERT_FAILED = 0, 1, 2, 3, 4
OUTDIR_ENV = "EQSYNTH_OUTDIR"

log = logging.getLogger("eqsynth")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _outdir(args) -> Path:
    path = Path(args.out or os.environ.get(OUTDIR_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _stop(args) -> Stop:
    if args.stop == "max-iter":
        return Stop()
    if args.stop == "residual":
        return Stop.residual_below(args.eps)
    return Stop.stalled(args.eps, args.window)


def _x0(spec: str, n: int):
    if spec == "zero":
        return None
    if spec.startswith("random:"):
        seed = int(spec.split(":", 1)[1])
        return np.random.Generator(np.random.Philox(seed)).standard_normal(n)
    path = Path(spec)
    if not path.exists():
        raise _UsageError(f"--x0 must be 'zero', 'random:<seed>' or an existing .npy file: {spec}")
    x0 = np.load(path)
    if x0.shape != (n,):
        raise _UsageError(f"x0 from {spec} has shape {x0.shape}, expected ({n},)")
    return x0


def _load(path: str):
    if not Path(path).exists():
        raise _UsageError(f"problem file not found: {path}")
    return io.load_problem(path)


# commands -------------------------------------------------------------------------


def cmd_generate(args) -> int:
    problem = make_problem(args.n, args.m, args.L, args.rank, args.sigma_min, args.sigma_max,
                           args.seed, d=args.d, spectrum_law=args.law)
    out = Path(args.output) if args.output else _outdir(args) / f"problem_seed{args.seed}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    io.save_problem(out, problem)
    kf = args.L / args.m
    kE = args.sigma_max / args.sigma_min
    print(f"wrote {out}")
    print(f"kappa_f = {kf:.17g}")
    print(f"kappa_E = {kE:.17g}")
    print(f"rank    = {args.rank}")
    print(f"thresholds: 2/kappa_f = {2.0 / kf:.6g}, 2/(kappa_f+1) = {2.0 / (kf + 1.0):.6g}")
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.problem:
        pre = preprocess(_load(args.problem), mode=args.scaling)
        params = SynthesisParams.from_spectral(pre.profile, pre.spectral)
    else:
        missing = [f for f in ("m", "L", "sigma_min") if getattr(args, f) is None]
        if missing:
            raise _UsageError("certify needs a problem file or --m, --L and --sigma-min")
        params = SynthesisParams(args.m, args.L, args.sigma_min, args.sigma_max)
    grids = Grids(n_gamma=args.gamma_grid, n_sigma=args.sigma_grid, n_theta=args.theta_grid,
                  n_lambda=args.lambda_grid)
    cert = certify(params, grids=grids, workers=args.workers)
    out = Path(args.output) if args.output else _outdir(args) / "certificate.json"
    io.write_json(out, cert.to_dict())
    print(f"certificate: {'PASS' if cert.passed else 'FAIL'} ({cert.diagnosis.status})")
    print(f"rho_syn            = {cert.rho_syn:.10f}")
    print(f"max closed-loop    = {cert.max_radius:.10f}")
    print(f"max pole modulus   = {cert.max_pole:.10f}")
    print(f"min Re (SPR grid)  = {cert.min_re:.3e}")
    for f in cert.failures:
        print(f"  failure: {f}")
    print(f"wrote {out}")
    return EXIT_OK if cert.passed else EXIT_CERT_FAILED


def _solve_one(pre, algo, args, x0, seed):
    return run(pre, algo, max_iter=args.max_iter, stop=_stop(args), x0=x0,
               alpha1=args.alpha1, alpha2=args.alpha2, strict_paper=args.strict_paper,
               force=args.force, w_mode=args.w_mode)


def _summary(label, rec) -> str:
    return (f"{label}: {rec.iterations} iterations, stop={rec.stop_reason}, "
            f"final relative residual {rec.residual_rel[-1]:.3e}, {rec.wall_time:.2f} s")


def cmd_solve(args) -> int:
    problem = _load(args.problem)
    pre = preprocess(problem, mode=args.scaling)
    x0 = _x0(args.x0, pre.n)
    rec = _solve_one(pre, args.algo, args, x0, problem.meta.get("seed"))
    label = args.label or args.algo
    csv_path, json_path = io.write_run(_outdir(args), label, rec, problem.meta.get("seed"))
    print(_summary(label, rec))
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.paper_instances:
        problems = paper_instances(seed=args.seed)
    elif args.problems:
        problems = {Path(p).stem: _load(p) for p in args.problems}
    else:
        raise _UsageError("compare needs --problems or --paper-instances")
    algos = args.algos
    out = _outdir(args)
    jobs = [(f"{algo}_{name}", name, algo) for name in problems for algo in algos]
    pres = {name: preprocess(p, mode=args.scaling) for name, p in problems.items()}

    def job(item):
        label, name, algo = item
        try:
            return label, _solve_one(pres[name], algo, args, None, problems[name].meta.get("seed")), ""
        except EqsynthError as exc:
            return label, None, f"{type(exc).__name__}: {exc}"

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as ex:
            results = list(ex.map(job, jobs))
    else:
        results = [job(j) for j in jobs]

    records, instances, failed = {}, {}, {}
    for (label, name, _), (_, rec, err) in zip(jobs, results):
        if rec is None:
            failed[label] = err
            continue
        records[label] = rec
        instances[label] = name
        io.write_run(out, label, rec, problems[name].meta.get("seed"))

    config = {"algorithms": list(algos), "instances": list(problems),
              "max_iter": args.max_iter, "stop": args.stop, "eps": args.eps,
              "seed": args.seed, "scaling": args.scaling, "strict_paper": args.strict_paper,
              "alpha1": args.alpha1, "alpha2": args.alpha2,
              "runs": {label: ("ok" if label in records else failed[label]) for label, _, _ in jobs}}
    io.write_json(out / "config.json", config)
    if not records:
        for label, err in failed.items():
            print(f"{label}: FAILED {err}", file=sys.stderr)
        return _status_of(failed)

    K = max(r.residuals.size for r in records.values())
    k = np.arange(K)
    labels = list(records)
    lines = ["k," + ",".join(f"res_{lb}" for lb in labels)]
    for i in range(K):
        cells = [io.fmt(records[lb].residual_rel[i]) if i < records[lb].residuals.size else ""
                 for lb in labels]
        lines.append(f"{i}," + ",".join(cells))
    (out / "merged.csv").write_text("\n".join(lines) + "\n")

    rates = {}
    for lb, rec in records.items():
        if rec.algorithm == "synth":
            rates.setdefault("rho_syn", rec.meta["rho_syn"])
        else:
            rates[f"rho_gda_{instances[lb]}"] = rec.meta["rho_gda"]
    ref = reference_lines(k, rates)
    names = list(ref)
    lines = ["k," + ",".join(names)]
    for i in range(K):
        lines.append(f"{i}," + ",".join(io.fmt(ref[nm][i]) for nm in names))
    (out / "reference_lines.csv").write_text("\n".join(lines) + "\n")

    table = compare(records, instances)
    (out / "comparison.csv").write_text(table.to_csv())
    report = table.to_text()
    if failed:
        report += "\nfailed runs:\n" + "".join(f"  {lb}: {e}\n" for lb, e in failed.items())
    (out / "report.txt").write_text(report)
    print(report, end="")
    print(f"wrote results to {out}")
    return _status_of(failed) if failed else EXIT_OK


def _status_of(failed: dict) -> int:
    if any(e.startswith("DivergenceError") for e in failed.values()):
        return EXIT_DIVERGENCE
    return EXIT_PRECONDITION


def cmd_rates(args) -> int:
    kf, kE = args.kappa_f, args.kappa_E
    if kf < 1 or kE < 1:
        raise _UsageError("need kappa_f >= 1 and kappa_E >= 1")
    rs = rho_syn(kf)
    rg = rho_gda(kf, kE)
    print(f"kappa_f = {kf:g}, kappa_E = {kE:g}")
    print(f"rho_syn = {rs:.10f}")
    print(f"rho_gda = {rg:.10f}")
    if kE == 1:
        print("warning: kappa_E = 1 makes the GDA primal stepsize zero; rho_gda = 1", file=sys.stderr)
    if rs <= 0:
        print("iteration ratio log(rho_syn)/log(rho_gda) = inf (rho_syn = 0)")
    elif rg >= 1:
        print("iteration ratio log(rho_syn)/log(rho_gda) = inf (rho_gda = 1)")
    else:
        print(f"iteration ratio log(rho_syn)/log(rho_gda) = {math.log(rs) / math.log(rg):.6g}")
    return EXIT_OK


# parser ------------------------------------------------------------------------------


def _positive_int(v):
    i = int(v)
    if i < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return i


def _add_run_flags(p):
    p.add_argument("--max-iter", type=_positive_int, default=50_000)
    p.add_argument("--stop", choices=("max-iter", "residual", "stalled"), default="max-iter")
    p.add_argument("--eps", type=float, default=1e-10, help="threshold for residual/stalled stops")
    p.add_argument("--window", type=_positive_int, default=100, help="stall window")
    p.add_argument("--alpha1", type=float, help="override the GDA primal stepsize")
    p.add_argument("--alpha2", type=float, help="override the GDA dual stepsize")
    p.add_argument("--strict-paper", action="store_true",
                   help="use eta = 1 - rho in the synthesized recursion")
    p.add_argument("--force", action="store_true", help="run synth even if the rate condition fails")
    p.add_argument("--w-mode", choices=("dense", "operator"), default="dense")
    p.add_argument("--scaling", choices=SCALING_MODES, default="sigma_max")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqsynth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a seeded random problem as JSON")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--d", type=_positive_int, default=None)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--L", type=float, default=2000.0)
    p.add_argument("--rank", type=_positive_int, default=None, help="constraint rank (default n-20, min 1)")
    p.add_argument("--sigma-min", type=float, default=0.1)
    p.add_argument("--sigma-max", type=float, default=1.0)
    p.add_argument("--law", choices=SPECTRUM_LAWS, default="log-uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or .)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("certify", help="check the synthesis design conditions on grids")
    p.add_argument("problem", nargs="?")
    p.add_argument("--m", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--sigma-min", type=float)
    p.add_argument("--sigma-max", type=float, default=1.0)
    p.add_argument("--gamma-grid", type=_positive_int, default=33)
    p.add_argument("--sigma-grid", type=_positive_int, default=65)
    p.add_argument("--theta-grid", type=_positive_int, default=1024)
    p.add_argument("--lambda-grid", type=_positive_int, default=33)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--scaling", choices=SCALING_MODES, default="sigma_max")
    p.add_argument("--output", "-o")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("solve", help="run one solver on a problem file")
    p.add_argument("problem")
    p.add_argument("--algo", choices=ALGORITHMS, default="synth")
    p.add_argument("--x0", default="zero", help="'zero', 'random:<seed>' or a .npy file")
    p.add_argument("--label")
    p.add_argument("--out")
    _add_run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several solvers/instances and tabulate rates")
    p.add_argument("--problems", nargs="+")
    p.add_argument("--paper-instances", action="store_true",
                   help="use the three generated rate-study instances")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=["synth", "gda-inc"])
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out")
    _add_run_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rates", help="print theoretical rates")
    p.add_argument("--kappa-f", type=float, required=True)
    p.add_argument("--kappa-E", type=float, required=True)
    p.set_defaults(func=cmd_rates)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) == "generate" and args.rank is None:
        args.rank = max(min(args.n, args.d or args.n) - 20, 1)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"eqsynth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"eqsynth: invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RateConditionError as exc:
        print(f"eqsynth: rate condition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except InfeasibleConstraintError as exc:
        print(f"eqsynth: infeasible: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except UnsupportedError as exc:
        print(f"eqsynth: unsupported: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except DivergenceError as exc:
        print(f"eqsynth: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
