"""Command line entry point: ``problin <subcommand> [options]``.

Exit codes: 0 converged, 1 input error, 2 iteration limit, 3 breakdown,
4 a comparison exceeded its tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import uuid

import numpy as np

from . import __version__
from .calibration import NoiseFloor, RayleighGP, SpectrumMean, w_statistic
from .errors import InputFormatError, ProblinError
from .experiments import (
    METHODS,
    calibration_experiment,
    cg_compare,
    gp_demo,
    pde_demo,
    sample_inputs,
    time_call,
    uniform_spectrum,
)
from .io import iter_lines, read_matrix_market, read_points_csv
from .linalg import DenseOperator
from .priors import PriorSpec
from .problems import KERNEL_FAMILIES, KernelSpec, kernel_gram, poisson_dirichlet, random_spd
from .solver import SolverConfig, solve

log = logging.getLogger("problin")

EXIT_OK, EXIT_INPUT, EXIT_MAX_ITER, EXIT_BREAKDOWN, EXIT_CHECK = 0, 1, 2, 3, 4
STOP_EXIT = {"residual": EXIT_OK, "trace": EXIT_OK, "max_iter": EXIT_MAX_ITER, "breakdown": EXIT_BREAKDOWN}
GENERATORS = ("identity", "spd", "poisson") + KERNEL_FAMILIES
# Keys that change where results go but not what is computed.
NON_CONFIG = ("command", "config", "out", "figures", "jobs", "func")
DENSE_CEILING = 4096


def _alpha(text):
    if text == "trace":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'trace', got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("alpha must be positive")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _csv_list(kind):
    def parse(text):
        return [kind(t) for t in text.split(",") if t]

    return parse


def _add_common(p):
    p.add_argument("--config", help="JSON file of option values; a result record's 'config' entry is also accepted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (JSON or CSV depending on the command)")
    p.add_argument("--figures", metavar="DIR", help="also render figures into DIR (needs matplotlib)")


def _add_solver_flags(p):
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--atol", type=float, default=0.0)
    p.add_argument("--max-iter", type=_positive_int, default=None)
    p.add_argument("--alpha", type=_alpha, default=1.0, help="scalar prior mean, or 'trace' for tr(A)/n")
    p.add_argument("--calib", choices=("none", "spectrum", "eps2", "rayleigh"), default="none")
    p.add_argument("--theta1", type=float, default=1.5, help="decay rate of the Rayleigh-quotient prior mean")
    p.add_argument("--no-a-belief", action="store_true", help="skip the belief over A")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are input errors; exit code 2 is reserved for the iteration limit
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="problin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = sub.choices

    p = sub.add_parser("solve", help="solve one system and write a JSON record")
    _add_common(p)
    _add_solver_flags(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mtx", help="Matrix Market file")
    src.add_argument("--gen", choices=GENERATORS, help="generated problem")
    p.add_argument("--n", type=_positive_int, default=100, help="dimension of generated problems")
    p.add_argument("--m", type=_positive_int, default=15, help="grid size per side for --gen poisson")
    p.add_argument("--condition", type=float, default=1e4, help="condition number for --gen spd")
    p.add_argument("--rhs", help="right-hand side, one value per line")
    p.add_argument("--points", help="CSV point cloud for kernel generators")
    p.add_argument("--dim", type=_positive_int, default=1)
    p.add_argument("--lengthscale", type=float, default=0.1)
    p.add_argument("--eps2", type=float, default=1e-4, help="kernel damping and noise-floor scale")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("calibration", help="w-statistic table over kernels, sizes and methods (CSV)")
    _add_common(p)
    p.add_argument("--kernels", type=_csv_list(str), default=list(KERNEL_FAMILIES))
    p.add_argument("--sizes", type=_csv_list(int), default=[100])
    p.add_argument("--methods", type=_csv_list(str), default=list(METHODS))
    p.add_argument("--num-problems", type=_positive_int, default=50)
    p.add_argument("--eps2", type=float, default=1e-4)
    p.add_argument("--lengthscale", type=float, default=0.1)
    p.add_argument("--dim", type=_positive_int, default=1)
    p.add_argument("--inputs", choices=("uniform", "cluster"), default="uniform")
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--max-size", type=_positive_int, default=1000, help="refuse sizes above this")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_calibration)

    p = sub.add_parser("cg-compare", help="compare solver iterates with textbook CG (JSON)")
    _add_common(p)
    p.add_argument("--n", type=_positive_int, default=50)
    p.add_argument("--condition", type=float, default=1e4)
    p.add_argument("--seeds", type=_positive_int, default=20)
    p.add_argument("--iterations", type=_positive_int, default=25)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_cg_compare)

    p = sub.add_parser("pde-demo", help="coarse-to-fine Poisson workflow (JSON)")
    _add_common(p)
    p.add_argument("--m-coarse", type=_positive_int, default=3)
    p.add_argument("--m-fine", type=_positive_int, default=7)
    p.add_argument("--lambda-inflate", type=float, default=0.0)
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--constant-source", action="store_true", help="use f = 15 instead of a seeded perturbation")
    p.set_defaults(func=cmd_pde_demo)

    p = sub.add_parser("gp-demo", help="GP regression through the solver at iteration checkpoints (CSV)")
    _add_common(p)
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--m", type=_positive_int, default=50)
    p.add_argument("--checkpoints", type=_csv_list(int), default=None)
    p.add_argument("--kernel", choices=KERNEL_FAMILIES, default="matern32")
    p.add_argument("--lengthscale", type=float, default=0.1)
    p.add_argument("--eps2", type=float, default=1e-4)
    p.set_defaults(func=cmd_gp_demo)
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputFormatError(f"cannot read config ({exc.strerror})", path, 0) from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", path, exc.pos) from exc
    if isinstance(data, dict) and "config" in data and "experiment" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise InputFormatError("config must be a JSON object", path, 0)
    return data


def parse_args(argv=None):
    """Parse flags; values from ``--config`` act as defaults that flags override."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise InputFormatError(f"unknown config keys {unknown}", args.config)
        sub.set_defaults(**{k: v for k, v in cfg.items() if k not in NON_CONFIG})
        args = parser.parse_args(argv)
    return args


def config_echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in NON_CONFIG}


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def make_record(experiment, args, **fields):
    record = {
        "experiment": experiment,
        "id": str(uuid.uuid5(uuid.NAMESPACE_OID, json.dumps([experiment, config_echo(args)], sort_keys=True))),
        "version": __version__,
        "seed": args.seed,
        "config": config_echo(args),
    }
    record.update(fields)
    return _json_safe(record)


def _write_json(record, path):
    text = json.dumps(record, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(rows, path, columns):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if path:
            fh.close()


def _read_vector(path, n):
    values = []
    for offset, text in iter_lines(path):
        if not text or text.startswith("#"):
            continue
        try:
            values.append(float(text.split(",")[0]))
        except ValueError as exc:
            raise InputFormatError(f"malformed number {text!r}", path, offset) from exc
    if len(values) != n:
        raise InputFormatError(f"expected {n} values, found {len(values)}", path)
    return np.array(values)


def _system(args):
    """Matrix (dense or sparse), right-hand side and a short description."""
    rng = np.random.default_rng(args.seed)
    b = None
    if args.mtx:
        A = read_matrix_market(args.mtx)
        if A.shape[0] != A.shape[1]:
            raise InputFormatError(f"matrix is {A.shape[0]} x {A.shape[1]}, not square", args.mtx)
        name = os.path.basename(args.mtx)
    else:
        gen = args.gen or "spd"
        n = args.n
        if gen == "identity":
            A = np.eye(n)
        elif gen == "spd":
            A = random_spd(n, uniform_spectrum(n, args.condition, rng), seed=rng)
        elif gen == "poisson":
            prob = poisson_dirichlet(args.m)
            A, b = prob.A, prob.rhs
        else:
            X = read_points_csv(args.points) if args.points else sample_inputs(n, args.dim, "uniform", rng)
            A = kernel_gram(KernelSpec(gen, args.lengthscale, args.eps2), X).matrix
        name = gen
    n = A.shape[0]
    if args.rhs:
        b = _read_vector(args.rhs, n)
    elif b is None:
        b = rng.standard_normal(n)
    return A, b, name


def _dense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A)


def _calibration(args, A):
    if args.calib == "none":
        return None
    if args.calib == "eps2":
        return NoiseFloor(args.eps2)
    if args.calib == "rayleigh":
        return RayleighGP(theta1=args.theta1)
    if A.shape[0] > DENSE_CEILING:
        raise ProblinError("spectrum calibration needs a dense eigendecomposition; matrix too large")
    return SpectrumMean(tuple(np.linalg.eigvalsh(_dense(A))))


def cmd_solve(args):
    A, b, name = _system(args)
    cfg = SolverConfig(
        rtol=args.rtol,
        atol=args.atol,
        max_iter=args.max_iter,
        calibration=_calibration(args, A),
        seed=args.seed,
        compute_A_belief=not args.no_a_belief,
    )
    res, wall = time_call(solve, DenseOperator(A), b, PriorSpec(alpha=args.alpha), cfg)
    w = None
    if A.shape[0] <= DENSE_CEILING:
        x_star = np.linalg.solve(_dense(A), b)
        if np.any(x_star != res.x):
            w = w_statistic(x_star, res.x_belief)
    record = make_record(
        "solve",
        args,
        problem=name,
        n=int(b.size),
        iterations=res.iterations,
        stop_reason=res.stop_reason,
        residual_history=res.residual_history,
        trace_history=res.trace_history,
        relative_residual=float(np.linalg.norm(A @ res.x - b) / np.linalg.norm(b)),
        phi=res.phi,
        psi=res.psi,
        w_statistic=w,
        wall_time=wall,
        x=res.x.tolist(),
    )
    _write_json(record, args.out)
    if args.figures:
        from .plotting import plot_solve

        plot_solve(record, args.figures)
    log.info("solve: %d iterations, stop on %s", res.iterations, res.stop_reason)
    return STOP_EXIT[res.stop_reason]


def cmd_calibration(args):
    bad = [k for k in args.kernels if k not in KERNEL_FAMILIES] + [m for m in args.methods if m not in METHODS]
    if bad:
        raise ProblinError(f"unknown kernels or methods: {bad}")
    if max(args.sizes) > args.max_size:
        raise ProblinError(f"sizes above {args.max_size} are refused; raise --max-size to override")
    rows = calibration_experiment(
        args.kernels,
        args.sizes,
        args.methods,
        args.num_problems,
        jobs=args.jobs,
        eps2=args.eps2,
        lengthscale=args.lengthscale,
        dim=args.dim,
        inputs=args.inputs,
        rtol=args.rtol,
        seed=args.seed,
    )
    _write_csv(rows, args.out, ["kernel", "n", "method", "w_bar", "stderr", "mean_iterations"])
    if args.figures:
        from .plotting import plot_calibration

        plot_calibration(rows, args.figures)
    return EXIT_OK


def cmd_cg_compare(args):
    report, wall = time_call(cg_compare, args.n, args.condition, args.seeds, args.iterations, jobs=args.jobs)
    passed = report["max_deviation"] <= args.tol
    record = make_record(
        "cg-compare", args, max_deviation=report["max_deviation"], passed=passed, per_seed=report["per_seed"], wall_time=wall
    )
    _write_json(record, args.out)
    return EXIT_OK if passed else EXIT_CHECK


def cmd_pde_demo(args):
    seed = None if args.constant_source else args.seed
    data, wall = time_call(
        pde_demo, args.m_coarse, args.m_fine, seed=seed, lambda_inflate=args.lambda_inflate, rtol=args.rtol, samples=args.samples
    )
    runs = data.pop("runs")
    record = make_record(
        "pde-demo",
        args,
        runs=[dict(name=k, **v) for k, v in runs.items()],
        wall_time=wall,
        data=data,
    )
    _write_json(record, args.out)
    if args.figures:
        from .plotting import plot_pde

        plot_pde(record, args.figures)
    return STOP_EXIT[runs["fine_transported"]["stop_reason"]]


def cmd_gp_demo(args):
    rows = gp_demo(args.n, args.m, args.checkpoints, seed=args.seed, kernel=args.kernel, lengthscale=args.lengthscale, eps2=args.eps2)
    _write_csv(rows, args.out, ["k", "iterations", "mean_error", "variance", "trace"])
    if args.figures:
        from .plotting import plot_gp

        plot_gp(rows, args.figures)
    return EXIT_OK


def _configure_logging():
    level = os.environ.get("PROBLIN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    try:
        args = parse_args(argv)
        return args.func(args)
    except InputFormatError as exc:
        print(f"problin: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProblinError as exc:
        print(f"problin: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
