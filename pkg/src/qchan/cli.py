"""``qchan`` command line.

Exit codes: 0 success, 1 failed acceptance criterion or other error,
2 invariant violation, 3 malformed spec or input file.
"""
import argparse
import io
import json
import os
import sys

import numpy as np

from . import __version__, acceptance, bounds, divergences, families, fisher, metrology, protocol
from .errors import InvariantViolation, QchanError, SpecError
from .serialize import dump_json, format_cell, load_channel, round_sig

DEFAULT_SEED = 0x5EED
EXIT_OK, EXIT_FAIL, EXIT_INVARIANT, EXIT_SPEC = 0, 1, 2, 3


def _seed(text):
    try:
        val = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return val


def _int_list(text):
    try:
        vals = [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("need at least one positive integer")
    return vals


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _confidence(text):
    p = float(text)
    if not 0 < p < 1:
        raise argparse.ArgumentTypeError("confidence must lie in (0, 1)")
    return p


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", help="family spec file, or a built-in family name")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    common.add_argument("--format", choices=("csv", "json"), default=None)

    parser = argparse.ArgumentParser(prog="qchan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qchan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fisher", parents=[common], help="RLD Fisher norm of a channel family")
    p.add_argument("--t", type=_float_list, help="parameter point (default: box centre)")
    p.add_argument("--sweep", action="store_true", help="CSV of J_R over sample points")
    p.add_argument("--points", type=int, default=21, help="sweep points per axis")

    p = sub.add_parser("d2", parents=[common], help="2-Renyi divergence of two channels")
    p.add_argument("--a", help="channel JSON file")
    p.add_argument("--b", help="channel JSON file")
    p.add_argument("--t", type=_float_list, help="first parameter (with --family)")
    p.add_argument("--t2", type=_float_list, help="second parameter (with --family)")
    p.add_argument("--restarts", type=int, default=64, help="variational restarts (0 to skip)")

    p = sub.add_parser("protocol-sweep", parents=[common], help="discretization protocol sweep")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--n", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--t", type=_float_list, help="true parameter (default: box centre)")
    p.add_argument("--restarts", type=int, default=16, help="restarts for the n=1 lower bound")

    p = sub.add_parser("metrology-sim", parents=[common], help="Monte-Carlo estimation experiment")
    p.add_argument("--n", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--t", type=_float_list, help="true parameter (default: box centre)")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--confidence", type=_confidence, default=0.9)

    p = sub.add_parser("bounds", parents=[common], help="rate lower bounds")
    p.add_argument("--v", type=int, help="number of parameters (default: from --family)")
    p.add_argument("--beta", type=float, help="MSE exponent (default: from --family)")
    p.add_argument("--eps", type=float, default=0.0, help="error threshold")

    sub.add_parser("validate", parents=[common], help="check Conditions 1-3 for a family")

    p = sub.add_parser("acceptance", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", type=_int_list, help="criterion numbers to run")
    return parser


# ---------------------------------------------------------------------------
# helpers


def resolve_family(arg, required=True):
    if arg is None:
        if required:
            raise SpecError("--family is required for this command")
        return None
    if os.path.exists(arg):
        return families.load_family(arg)
    if arg in families.BUILTIN:
        return families.BUILTIN[arg]()
    raise SpecError(f"no such family file or built-in family: {arg!r}", path=arg)


def _point(family, t):
    if t is None:
        return (family.lower + family.upper) / 2
    return family.check_point(t)


def config_of(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "out"}
    return round_sig(cfg)


def render_json(args, result):
    payload = {"qchan_version": __version__, "config": config_of(args), "result": round_sig(result)}
    return dump_json(payload) + "\n"


def render_csv(args, columns, rows):
    buf = io.StringIO()
    buf.write(f"# qchan {__version__}\n")
    buf.write(f"# config: {json.dumps(config_of(args), sort_keys=True)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_cell(x) for x in row) + "\n")
    return buf.getvalue()


def emit(args, text):
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_fisher(args):
    fam = resolve_family(args.family)
    if args.sweep:
        pts = families.sample_points(fam, per_axis=args.points, cap=max(args.points, 1000))
        rows = []
        for t in pts:
            rep = fisher.rld_norm_channel(fam, t)
            rows.append([*t.tolist(), rep.value, *np.asarray(rep.direction, dtype=float).tolist()])
        cols = [f"t{i}" for i in range(fam.v)] + ["J_R"] + [f"s{i}" for i in range(fam.v)]
        if fam.v == 1:
            cols = ["t", "J_R", "direction"]
        if args.format == "json":
            return render_json(args, {"columns": cols, "rows": rows})
        return render_csv(args, cols, rows)
    t = _point(fam, args.t)
    rep = fisher.rld_norm_channel(fam, t)
    jmax, argmax = fisher.jr_max(fam)
    out = {"family": fam.name, "t": t.tolist(), **rep.to_json(),
           "jr_max": jmax, "jr_argmax": list(argmax)}
    return render_json(args, out)


def cmd_d2(args):
    if args.a or args.b:
        if not (args.a and args.b):
            raise SpecError("--a and --b must be given together")
        try:
            a, b = load_channel(args.a), load_channel(args.b)
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read channel file: {exc}") from None
        label = {"a": args.a, "b": args.b}
    else:
        fam = resolve_family(args.family)
        if args.t is None or args.t2 is None:
            raise SpecError("d2 with --family needs --t and --t2")
        a, b = fam(args.t), fam(args.t2)
        label = {"family": fam.name, "t": args.t, "t2": args.t2}
    out = {**label, "closed_form": divergences.d2_channels_closed(a, b).to_json()}
    if args.restarts > 0:
        out["variational"] = divergences.d2_channels_variational(
            a, b, restarts=args.restarts, seed=args.seed).to_json()
    return render_json(args, out)


def cmd_protocol_sweep(args):
    fam = resolve_family(args.family)
    t = _point(fam, args.t)
    runs = protocol.protocol_sweep(fam, args.alpha, t, args.n, seed=args.seed)
    if args.format == "json":
        return render_json(args, {"runs": [r.to_json() for r in runs]})
    return render_csv(args, protocol.ProtocolRun.CSV_COLUMNS, [r.row() for r in runs])


def default_strategy(fam):
    if fam.name == "bitflip":
        return metrology.bitflip_mle_strategy()
    return metrology.affine_inversion_strategy(
        fam, np.array([1.0, 0.0]), [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])


def cmd_metrology_sim(args):
    fam = resolve_family(args.family)
    t = _point(fam, args.t)
    strat = default_strategy(fam)
    res = [metrology.estimation_experiment(fam, strat, t, n, args.trials, seed=args.seed,
                                           confidence=args.confidence) for n in args.n]
    if args.format == "json":
        return render_json(args, {"runs": [r.to_json() for r in res]})
    return render_csv(args, metrology.ExperimentResult.CSV_COLUMNS, [r.row() for r in res])


def cmd_bounds(args):
    fam = resolve_family(args.family, required=False)
    v = args.v if args.v is not None else (fam.v if fam else None)
    beta = args.beta
    if beta is None and fam is not None:
        beta = bounds.classify_beta(fam)
    if v is None or beta is None:
        raise SpecError("bounds needs --v and --beta, or a --family")
    if beta == "unknown":
        return render_json(args, {"v": v, "beta": "unknown", "theorem1": None, "corollary1": None})
    return render_json(args, {
        "theorem1": bounds.theorem1_rate(v, beta, args.eps).to_json(),
        "corollary1": bounds.corollary1_rate(v, beta, args.eps).to_json(),
    })


def cmd_validate(args):
    fam = resolve_family(args.family)
    rep = acceptance.condition_report(fam)
    try:
        jmax = fisher.jr_max(fam)[0] if rep["condition1"] else None
    except QchanError:
        jmax = None
    return render_json(args, {"family": fam.name, "box": [list(x) for x in fam.box], "v": fam.v,
                              **rep, "jr_max": jmax})


def cmd_acceptance(args):
    def show(res):
        print(acceptance.table_line(res), file=sys.stderr if args.out is None else sys.stdout,
              flush=True)

    results = acceptance.run_suite(args.seed, args.only, progress=show)
    record = acceptance.suite_record(results, args.seed)
    passed = sum(r.passed for r in results)
    summary = f"{passed}/{len(results)} criteria passed"
    print(summary, file=sys.stderr if args.out is None else sys.stdout)
    return render_json(args, record), record["passed"]


COMMANDS = {
    "fisher": cmd_fisher,
    "d2": cmd_d2,
    "protocol-sweep": cmd_protocol_sweep,
    "metrology-sim": cmd_metrology_sim,
    "bounds": cmd_bounds,
    "validate": cmd_validate,
    "acceptance": cmd_acceptance,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        out = COMMANDS[args.command](args)
        ok = True
        if isinstance(out, tuple):
            out, ok = out
        emit(args, out)
        return EXIT_OK if ok else EXIT_FAIL
    except SpecError as exc:
        print(f"qchan: spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except InvariantViolation as exc:
        print(f"qchan: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (QchanError, ValueError, ArithmeticError) as exc:
        print(f"qchan: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
