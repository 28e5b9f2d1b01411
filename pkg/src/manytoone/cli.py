"""Command line entry point: ``manytoone <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import sys

from . import rde
from .bp import bp_solve
from .exact import brute_force, reduction_solve
from .experiment import (
    SOLVERS,
    ExperimentConfig,
    compare_to_csv,
    mc_to_csv,
    run_compare,
    run_mc,
)
from .graph import (
    STREAM_TRIALS,
    RngStream,
    format_instance,
    gen_instance,
    is_feasible,
    load_instance,
)
from .pwit import pooled_root_messages


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _alpha(s):
    v = float(s)
    if not v > 1:
        raise argparse.ArgumentTypeError(f"alpha must be > 1, got {s}")
    return v


def _seed(s):
    v = int(s, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _k_list(s):
    ks = [int(x) for x in s.split(",") if x]
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("expected comma-separated positive integers")
    return ks


def _instance(args):
    if getattr(args, "instance", None):
        return load_instance(args.instance)
    return gen_instance(args.n, args.alpha, args.seed)


def cmd_gen(args):
    _emit(format_instance(gen_instance(args.n, args.alpha, args.seed)), args.out)


def cmd_solve(args):
    inst = _instance(args)
    if args.solver == "brute":
        M, cost = brute_force(inst)
    elif args.solver == "exact":
        M, cost = reduction_solve(inst)
    else:
        M, cost, _ = bp_solve(inst, args.k)
    rows = [[inst.n, inst.m, inst.alpha, inst.seed, args.solver, cost, cost / inst.n,
             int(is_feasible(inst, M)), " ".join(map(str, M.assign))]]
    _emit(_csv(["n", "m", "alpha", "seed", "solver", "cost", "cost_over_n", "feasible",
                "assign"], rows), args.out)


def cmd_bp(args):
    inst = _instance(args)
    M, cost, diag = bp_solve(inst, args.k)
    _emit(diag.to_csv(), args.out)
    print(f"cost={cost!r} cost_over_n={cost / inst.n!r} repaired={diag.repaired}",
          file=sys.stderr)


def _config(args, solver=None):
    return ExperimentConfig(alpha=args.alpha, n=args.n, trials=args.trials,
                            k_max=args.k, seed=args.seed,
                            solver=solver or args.solver, workers=args.workers,
                            ks=getattr(args, "ks", None) or (args.k,)).validate()


def cmd_mc(args):
    summary = run_mc(_config(args))
    _emit(mc_to_csv(summary, include_runtime=not args.no_runtime), args.out)


def cmd_compare(args):
    rows = run_compare(_config(args, solver="exact"))
    _emit(compare_to_csv(rows), args.out)


def cmd_rde(args):
    c = rde.constants(args.alpha)
    row = [args.alpha, c.w_o, c.gamma, c.c_star, rde.c_star_integral(args.alpha)]
    _emit(_csv(["alpha", "w_o", "gamma", "c_star", "c_star_integral"], [row]), args.out)


def _rng(args):
    return RngStream(args.seed, STREAM_TRIALS).generator()


def cmd_popdyn(args):
    rows = rde.popdyn(args.alpha, args.k, N=args.pool, P=args.trunc, init=args.init,
                      rng=_rng(args))
    _emit(_csv(["generation", "ks_to_G"], rows), args.out)


def cmd_endogeny(args):
    hist, se = rde.endogeny(args.alpha, args.k, N=args.pool, P=args.trunc, rng=_rng(args),
                            with_stderr=True)
    rows = [(g, d, s) for g, (d, s) in enumerate(zip(hist, se))]
    _emit(_csv(["generation", "delta", "delta_stderr"], rows), args.out)


def cmd_pwit(args):
    c = rde.constants(args.alpha)
    if args.samples:
        pooled = pooled_root_messages(args.alpha, args.depth, args.trunc, args.trials,
                                      args.seed, args.root_label)
        rows = [(lab, x) for lab in ("o", "m") for x in pooled[lab]]
        _emit(_csv(["child_label", "message"], rows), args.out)
        return
    rows = []
    for k in range(1, args.depth + 1):
        pooled = pooled_root_messages(args.alpha, k, args.trunc, args.trials, args.seed,
                                      args.root_label)
        for lab, ks in (("o", rde.ks_to_F), ("m", rde.ks_to_G)):
            if pooled[lab].size:
                rows.append((k, lab, pooled[lab].size, ks(c, pooled[lab])))
    _emit(_csv(["k", "child_label", "count", "ks"], rows), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="manytoone",
                                description="Random many-to-one matching experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n=True, k=50):
        sp.add_argument("--alpha", type=_alpha, default=2.0)
        if n:
            sp.add_argument("--n", type=_positive_int, default=100)
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--k", type=_positive_int, default=k)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("gen", help="write a random instance")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("solve", help="solve one instance")
    common(sp)
    sp.add_argument("--instance", default=None)
    sp.add_argument("--solver", choices=SOLVERS, default="exact")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("bp", help="run BP and print per-iteration diagnostics")
    common(sp)
    sp.add_argument("--instance", default=None)
    sp.set_defaults(func=cmd_bp)

    for name, func, helptext in (("mc", cmd_mc, "Monte Carlo sweep of cost/n"),
                                 ("compare", cmd_compare, "BP vs exact on paired instances")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--trials", type=_positive_int, default=10)
        sp.add_argument("--workers", type=_positive_int, default=1)
        if name == "mc":
            sp.add_argument("--solver", choices=SOLVERS, default="exact")
            sp.add_argument("--no-runtime", action="store_true",
                            help="blank the runtime column for byte-stable output")
        else:
            sp.add_argument("--ks", type=_k_list, default=[5, 10, 25, 50])
        sp.set_defaults(func=func)

    sp = sub.add_parser("rde", help="fixed-point constants and the limit constant")
    sp.add_argument("--alpha", type=_alpha, default=2.0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_rde)

    for name, func in (("popdyn", cmd_popdyn), ("endogeny", cmd_endogeny)):
        sp = sub.add_parser(name, help=f"{name} pool iteration")
        common(sp, n=False, k=30 if name == "popdyn" else 40)
        sp.add_argument("--pool", type=_positive_int, default=100_000)
        sp.add_argument("--trunc", type=_positive_int, default=64)
        if name == "popdyn":
            sp.add_argument("--init", choices=("G", "exp", "zero"), default="exp")
        sp.set_defaults(func=func)

    sp = sub.add_parser("pwit", help="BP on truncated Poisson weighted infinite trees")
    sp.add_argument("--alpha", type=_alpha, default=2.0)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--depth", type=_positive_int, default=4)
    sp.add_argument("--trunc", type=_positive_int, default=8)
    sp.add_argument("--trials", type=_positive_int, default=1000)
    sp.add_argument("--root-label", choices=("o", "m"), default=None)
    sp.add_argument("--samples", action="store_true",
                    help="dump pooled messages at k = depth instead of KS rows")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_pwit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, MemoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
