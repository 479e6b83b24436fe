"""Command-line entry point.

    weakvals weak-value --observable sigma_z --pre '[1, 1]' --post '[1, 0]'
    weakvals aav-sim --observable sigma_z --pre '[1, 1]' --post '[1, 0]' --sigma-q 0.05 --attempts 200000
    weakvals cheshire --postselected 100000
    weakvals bohmian --tau 0.05 --sigma-q 0.1 --attempts 1000000 --format csv
    weakvals bias --mode berkson

Vectors and matrices are JSON; each entry is a real number or an ``[re, im]``
pair. Input state vectors are normalized before use. Exit status: 0 on success,
1 on usage errors, 2 on domain errors (with an error JSON on stderr).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__, aav_protocol, config, qkernel, scenarios, selection_bias, weakvalue
from .errors import WeakValsError
from .pointer import Grid, gaussian_pointer, write_density_csv
from .qkernel import Operator, StateVector

PRESETS = {
    "sigma_x": lambda dim: qkernel.SIGMA_X,
    "sigma_y": lambda dim: qkernel.SIGMA_Y,
    "sigma_z": lambda dim: qkernel.SIGMA_Z,
    "projector0": lambda dim: qkernel.PROJECTOR_0,
    "projector1": lambda dim: qkernel.PROJECTOR_1,
    "identity": lambda dim: Operator.identity(dim),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _complex_entry(x):
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise UsageError(f"cannot read {x!r} as a complex number; use a number or [re, im]")


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} is not valid JSON: {exc}") from None


def parse_vector(text: str) -> StateVector:
    data = _load_json(text, "state vector")
    if not isinstance(data, list) or not data:
        raise UsageError("a state vector must be a non-empty JSON list")
    return StateVector.normalized([_complex_entry(x) for x in data])


def parse_observable(text: str, dim: int | None) -> Operator:
    if text in PRESETS:
        op = PRESETS[text](dim or 2)
    else:
        data = _load_json(text, "observable")
        if not isinstance(data, list) or not all(isinstance(r, list) for r in data):
            raise UsageError(f"observable must be one of {sorted(PRESETS)} or a JSON matrix")
        op = Operator([[_complex_entry(x) for x in row] for row in data])
    if dim is not None and op.dim != dim:
        raise UsageError(f"observable has dimension {op.dim}, --dim says {dim}")
    return op


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=_seed, default=0, help="64-bit unsigned root seed (default 0)")
    g.add_argument("--hbar", type=float, default=1.0, help="reduced Planck constant (default 1)")
    g.add_argument("--out", default="-", help="output path, '-' for stdout")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    g.add_argument("--no-timing", action="store_true", help="omit wall-clock duration from the report")

    parser = _Parser(prog="weakvals", description="Weak values, weak measurements and post-selection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("weak-value", parents=[common], help="weak value of an observable")
    p.add_argument("--observable", required=True)
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--pre", required=True)
    p.add_argument("--post", required=True)
    p.add_argument("--method", choices=("direct", "weak-operator", "both"), default="direct")

    p = sub.add_parser("aav-sim", parents=[common], help="Monte Carlo weak measurement with post-selection")
    p.add_argument("--observable", required=True)
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--pre", required=True)
    p.add_argument("--post", required=True)
    p.add_argument("--sigma-q", type=float, required=True)
    count = p.add_mutually_exclusive_group(required=True)
    count.add_argument("--attempts", type=_positive_int)
    count.add_argument("--postselected", type=_positive_int, help="run until this many trials survive")
    p.add_argument("--readout", choices=("p", "q"), default="p")

    p = sub.add_parser("cheshire", parents=[common], help="quantum Cheshire Cat weak values")
    p.add_argument("--sigma-q", type=float, default=0.05)
    count = p.add_mutually_exclusive_group()
    count.add_argument("--attempts", type=_positive_int)
    count.add_argument("--postselected", type=_positive_int)

    p = sub.add_parser("bohmian", parents=[common], help="operational velocity vs guidance velocity")
    p.add_argument("--sigma-x", type=float, default=1.0, help="packet width")
    p.add_argument("--k", type=float, default=1.0, help="carrier wavenumber")
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--sigma-q", type=float, default=0.1)
    p.add_argument("--attempts", type=int, default=10**6)
    p.add_argument("--bins", type=_positive_int, default=scenarios.DEFAULT_BINS)
    p.add_argument("--estimator", choices=("sampled", "conditional"), default="sampled")
    p.add_argument("--grid-n", type=_positive_int, default=1024)
    p.add_argument("--grid-length", type=float, default=40.0)

    p = sub.add_parser("bias", parents=[common], help="classical selection-bias demonstrations")
    p.add_argument("--mode", choices=("pendulum", "berkson"), required=True)
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--rate-a", type=float, default=0.2)
    p.add_argument("--rate-b", type=float, default=0.2)
    return parser


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cmd_weak_value(args):
    pre, post = parse_vector(args.pre), parse_vector(args.post)
    A = parse_observable(args.observable, args.dim)

    def entry(res):
        return {"re": res.value.real, "im": res.value.imag, "overlap_abs": abs(res.overlap), "method": res.method}

    if args.method == "weak-operator":
        result = entry(weakvalue.extract_via_weak_operators(A, pre, post))
    else:
        result = entry(weakvalue.weak_value(A, pre, post))
        if args.method == "both":
            result["weak_operator"] = entry(weakvalue.extract_via_weak_operators(A, pre, post))
    rows = [(result["method"], result["re"], result["im"], result["overlap_abs"])]
    if "weak_operator" in result:
        w = result["weak_operator"]
        rows.append((w["method"], w["re"], w["im"], w["overlap_abs"]))
    return result, _csv(["method", "re", "im", "overlap_abs"], rows)


def _cmd_aav(args):
    pre, post = parse_vector(args.pre), parse_vector(args.post)
    A = parse_observable(args.observable, args.dim)
    if args.dim is not None and (pre.dim != args.dim or post.dim != args.dim):
        raise UsageError("--pre/--post dimension disagrees with --dim")
    grid = Grid.for_pointer(args.sigma_q, hbar=args.hbar)
    report = aav_protocol.run_protocol(
        A, pre, post, args.sigma_q, args.attempts, args.seed, args.readout,
        n_postselected=args.postselected, grid=grid, threads=args.threads,
    )
    pointer, _ = aav_protocol.postselected_pointer(A, pre, post, args.sigma_q, grid)
    shown = pointer.in_momentum() if args.readout == "p" else pointer
    return report.to_dict(), write_density_csv(shown)


def _cmd_cheshire(args):
    setup = scenarios.cheshire_setup()
    attempts, post = args.attempts, args.postselected
    if attempts is None and post is None:
        post = 100_000
    report = scenarios.cheshire_report(setup, args.sigma_q, attempts, args.seed, n_postselected=post, threads=args.threads)
    result, rows = {}, []
    for label, (exact, est) in report.items():
        result[label] = {"exact": weakvalue.complex_pair(exact), "estimate": est.to_dict()}
        rows.append((label, exact.real, exact.imag, est.value.real, est.stderr_re))
    return result, _csv(["label", "exact_re", "exact_im", "estimate_re", "stderr_re"], rows)


def _cmd_bohmian(args):
    grid = Grid(args.grid_n, args.grid_length, args.hbar)
    psi = gaussian_pointer(grid, args.sigma_x, momentum=args.hbar * args.k)
    field = scenarios.wiseman_velocity(
        psi, args.mass, args.tau, args.sigma_q, args.attempts, args.bins, args.seed,
        estimator=args.estimator, threads=args.threads,
    )
    oracle = scenarios.guidance_velocity_oracle(psi, args.mass, args.bins)
    central = scenarios.central_bins(field, psi)
    dev = scenarios.mean_abs_deviation(field, oracle, central)
    result = {
        "field": field.to_dict(),
        "guidance": oracle.to_dict()["velocities"],
        "central_mean_abs_deviation": None if not np.isfinite(dev) else dev,
    }
    rows = [(c, "" if v is None else v, n) for c, v, n in field.rows()]
    return result, _csv(["bin_center", "velocity", "count"], rows)


def _cmd_bias(args):
    if args.mode == "berkson":
        n = args.n or 100_000
        r_u, r_c = selection_bias.berkson_demo(n, selection_bias.AdmitRule(args.rate_a, args.rate_b), args.seed)
        result = {"n": n, "r_unconditional": r_u, "r_conditional": r_c}
        return result, _csv(["r_unconditional", "r_conditional"], [(r_u, r_c)])
    n = args.n or 1_000_000
    target = selection_bias.DEFAULT_TARGET
    sub, err = selection_bias.pendulum_postselect(n, target, args.seed)
    marginals = selection_bias.marginal_uniformity(selection_bias.draw_pendulums(n, args.seed))
    result = {"n": n, "n_selected": len(sub), "reconstruction_error": err, "marginal_pvalues": marginals}
    t = np.linspace(0.0, target.fundamental_period, selection_bias.WAVEFORM_SAMPLES, endpoint=False)
    reps = selection_bias.representatives([[p.amplitude, p.frequency, p.phase] for p in sub], target)
    recon, ref = selection_bias.waveform(reps, t), selection_bias.waveform(target.components, t)
    return result, _csv(["t", "reconstructed", "target"], zip(t, recon, ref))


COMMANDS = {
    "weak-value": _cmd_weak_value,
    "aav-sim": _cmd_aav,
    "cheshire": _cmd_cheshire,
    "bohmian": _cmd_bohmian,
    "bias": _cmd_bias,
}


def _config_echo(args) -> dict:
    skip = {"out", "no_timing", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    start = time.perf_counter()
    old_hbar = config.get_hbar()
    try:
        config.set_hbar(args.hbar)
        result, csv_text = COMMANDS[args.command](args)
    except WeakValsError as exc:
        json.dump({"error": exc.code, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"weakvals: error: {exc}\n")
        return 1
    finally:
        config.set_hbar(old_hbar)

    if args.format == "csv":
        text = csv_text
    else:
        report = {
            "tool": "weakvals",
            "version": __version__,
            "command": args.command,
            "seed": args.seed,
            "config": _config_echo(args),
            "result": result,
        }
        if not args.no_timing:
            report["duration_s"] = time.perf_counter() - start
        text = json.dumps(report, indent=2, allow_nan=False) + "\n"

    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    return 0


def main():
    sys.exit(run())
