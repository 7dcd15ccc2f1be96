"""Command line: ``thin run``, ``thin oracle``, ``thin replicate``.

Every command prints one JSON record on stdout.  Floats are written with
``repr`` (shortest round-trip form), independent of the locale.
"""
from __future__ import annotations

import argparse
import json
import sys

from .. import oracles
from .experiment import MethodConfig, describe, run_experiment, summary_json_safe
from .histogram import emit_histogram
from .replicate import REDUCERS, run_replications
from .streams import MODELS, generate_raw, parse_stream


def _add_run_args(p):
    p.add_argument("--stream", required=True,
                   help="source[:opts], e.g. quad-normal, normal:d=3, spheres:d=5,radii=3/2/1, "
                        "sine:nu=5, file:points.csv")
    p.add_argument("--horizon", "-N", type=int, default=None,
                   help="number of candidates N (required unless reading a file)")
    p.add_argument("--model", choices=MODELS, default=None)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--method", choices=("thinner", "exchange", "iboss"), default="thinner")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="exact number of points to keep")
    p.add_argument("--mode", choices=("fixed", "force", "adaptive"), default=None)
    p.add_argument("--k0", type=int, default=None)
    p.add_argument("--eps1", type=float, default=0.0)
    p.add_argument("--rule", choices=("simplified", "exact"), default="simplified",
                   help="exchange acceptance rule")
    p.add_argument("--scramble-buffer", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", default=None,
                   help=f"'auto' or one of {sorted(oracles.ORACLES)}")


def _specs(args):
    if not args.stream.startswith("file") and not args.horizon:
        raise ValueError("--horizon is required for generated streams")
    stream = parse_stream(args.stream, args.horizon or 0, args.seed, args.model, args.degree)
    mode = args.mode or ("fixed" if args.n is None else "force")
    method = MethodConfig(
        method=args.method, alpha=args.alpha, n=args.n, mode=mode, k0=args.k0, eps1=args.eps1,
        scramble_buffer=args.scramble_buffer, scramble_seed=args.seed, exchange_rule=args.rule,
    )
    oracle = None
    if args.oracle:
        oracle = True if args.oracle == "auto" else args.oracle
    return stream, method, oracle


def cmd_run(args):
    stream, method, oracle = _specs(args)
    res = run_experiment(stream, method, oracle=oracle, trace_path=args.trace)
    out = {**describe(stream, method), "summary": summary_json_safe(res.summary)}
    if args.histogram:
        raw = generate_raw(stream)
        if raw.shape[1] != 1:
            raise ValueError("--histogram needs a scalar stream")
        emit_histogram(raw[res.selected, 0], path=args.histogram)
        out["histogram"] = args.histogram
    return out


def cmd_oracle(args):
    kw = {}
    if args.d is not None:
        kw["d"] = args.d
    if args.radii:
        kw["radii"] = tuple(float(r) for r in args.radii.split("/"))
    if args.intercept:
        kw["intercept"] = True
    res = oracles.get_oracle(args.example, args.alpha, **kw)
    return {"example": args.example, "alpha": args.alpha, **res.as_dict()}


def cmd_replicate(args):
    stream, method, oracle = _specs(args)
    agg = run_replications(stream, method, args.reps, reducer=args.reducer, seed=args.seed,
                           oracle=oracle if oracle is not None else True, n_jobs=args.jobs)
    return {**describe(stream, method), "aggregate": agg}


def build_parser():
    parser = argparse.ArgumentParser(prog="thin", description="Streaming design-point thinning")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one selector over one stream")
    _add_run_args(run)
    run.add_argument("--trace", default=None, help="write a per-candidate CSV trace here")
    run.add_argument("--histogram", default=None,
                     help="write a smoothed density of the selected scalar points here")
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="optimal bounded design for an analyzed example")
    orc.add_argument("example", choices=sorted(oracles.ORACLES))
    orc.add_argument("--alpha", type=float, required=True)
    orc.add_argument("--d", type=int, default=None)
    orc.add_argument("--radii", default=None, help="r1/r2/r3 for the spheres example")
    orc.add_argument("--intercept", action="store_true")
    orc.set_defaults(func=cmd_oracle)

    rep = sub.add_parser("replicate", help="independent seeded replications")
    _add_run_args(rep)
    rep.add_argument("--reps", type=int, required=True)
    rep.add_argument("--reducer", choices=REDUCERS, default="efficiency")
    rep.add_argument("--jobs", type=int, default=1)
    rep.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"thin: error: {exc}", file=sys.stderr)
        return 2
    json.dump(out, sys.stdout, default=_json_default)
    sys.stdout.write("\n")
    return 0


def _json_default(obj):
    import numpy as np

    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())
