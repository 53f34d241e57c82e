"""Command-line front end.

``ctstl plan FILE``    plan, verify on a dense grid, write ``plan.json`` and ``trajectory.csv``
``ctstl verify FILE CSV``  monitor an external trajectory against the problem's formula
``ctstl export FILE``  write the first-iteration model in LP format

Exit codes: 0 success, 1 I/O / parse / encoding error, 2 no plan found,
3 a plan was found but failed dense verification, 4 trajectory violates the
formula.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, monitor
from .encode import EncodingGapError, Encoder
from .milp.lpformat import write_lp
from .plan import plan
from .problem import ProblemFileError, load_problem
from .stl import predicate_text, predicates

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE, EXIT_VERIFY, EXIT_VIOLATED = 0, 1, 2, 3, 4

log = logging.getLogger("ctstl")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctstl", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("problem", help="TOML problem file")
        sp.add_argument("--delta", type=float, help="monitor grid spacing in seconds")
        sp.add_argument("--eps", type=float, help="verification tolerance")
        sp.add_argument("--method", choices=("taylor", "lipschitz"), help="witness bound")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--instant-only", action="store_true",
                        help="disable the CBF and witness constraints between instants")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("plan", help="solve the planning problem")
    common(sp)
    sp.add_argument("--max-iters", type=int, help="maximum refinement rounds")
    sv = sub.add_parser("verify", help="monitor an external trajectory")
    common(sv)
    sv.add_argument("trajectory", help="CSV with columns t, x1..xn")
    se = sub.add_parser("export", help="write the first-iteration model in LP format")
    common(se)
    return p


def _load(args):
    spec = load_problem(args.problem)
    opts = spec.problem.options
    if args.method:
        opts = replace(opts, method=args.method)
    if args.instant_only:
        opts = replace(opts, continuous=False)
    opts.validate(spec.system.n, spec.system.m)
    spec.problem.options = opts
    if getattr(args, "max_iters", None) is not None:
        if args.max_iters < 1:
            raise ValueError("--max-iters must be at least 1")
        spec.problem.max_iters = args.max_iters
    if args.delta is not None:
        if not args.delta > 0:
            raise ValueError("--delta must be positive")
        spec.delta = args.delta
    if args.eps is not None:
        spec.eps = args.eps
    return spec


def _fmt(v: float):
    return None if not math.isfinite(v) else float(v)


def _write_trajectory(path, sig, controls_at, preds) -> None:
    n = sig.states.shape[1]
    m = controls_at.shape[1]
    with open(path, "w", newline="") as fh:
        for k, p in enumerate(preds, 1):
            fh.write(f"# h{k}: {predicate_text(p)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
                   + [f"h{k + 1}" for k in range(len(preds))])
        hs = [p.value(sig.states) for p in preds]
        for i, t in enumerate(sig.times):
            row = [t, *sig.states[i], *controls_at[i], *(h[i] for h in hs)]
            w.writerow([repr(float(v)) for v in row])


def cmd_plan(args) -> int:
    spec = _load(args)
    prob = spec.problem
    result = plan(prob, spec.instants, log=log.info)
    os.makedirs(args.out, exist_ok=True)
    doc = {
        "status": result.status,
        "iterations": [{"N": a.N, "status": a.status, "variables": a.variables,
                        "constraints": a.constraints, "binaries": a.binaries, "nodes": a.nodes,
                        "objective": _fmt(a.objective), "message": a.message}
                       for a in result.attempts],
    }
    code = EXIT_OK
    if result.feasible:
        ver = monitor.verify_plan(result, prob.system, prob.jordan, prob.formula,
                                  spec.delta, spec.eps)
        doc.update({
            "instants": result.instants.tolist(),
            "states": result.states.tolist(),
            "controls": result.controls.tolist(),
            "objective": float(result.objective),
            "verification": {"delta": spec.delta, "eps": spec.eps,
                             "margin": _fmt(ver.margin), "satisfied": bool(ver.satisfied)},
            "warnings": result.warnings,
        })
        idx = np.searchsorted(result.instants, ver.signal.times, side="right") - 1
        idx = np.clip(idx, 0, len(result.controls) - 1)
        _write_trajectory(os.path.join(args.out, "trajectory.csv"), ver.signal,
                          result.controls[idx], predicates(prob.formula))
        print(f"feasible: N={len(result.instants)} objective={result.objective:.6g} "
              f"margin={ver.margin:.3e}")
        if not ver.satisfied:
            log.error("PLAN FAILED DENSE VERIFICATION: margin %.3e < -%g", ver.margin, spec.eps)
            print(f"error: plan violates the formula on the dense grid (margin {ver.margin:.3e})",
                  file=sys.stderr)
            code = EXIT_VERIFY
    else:
        print(f"no plan: {result.status} after {len(result.attempts)} round(s)")
        code = EXIT_INFEASIBLE
    with open(os.path.join(args.out, "plan.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code


def cmd_verify(args) -> int:
    spec = _load(args)
    n = spec.system.n
    sig = monitor.load_signal_csv(args.trajectory)
    if sig.states.shape[1] != n:
        raise ValueError(f"trajectory has {sig.states.shape[1]} state columns, expected {n}")
    margin = monitor.robustness(sig, spec.formula, 0.0)
    ok = margin >= -spec.eps
    print(f"{'satisfied' if ok else 'violated'}: margin={margin:.6e}")
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_export(args) -> int:
    spec = _load(args)
    prob = spec.problem
    inst = spec.instants if spec.instants is not None else prob.initial_instants()
    enc = Encoder(prob.system, prob.jordan, prob.x0, prob.formula, inst, prob.options)
    model = enc.build()
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "model.lp")
    write_lp(model, path)
    print(f"wrote {path}: {model.num_vars} variables, {model.num_constraints} constraints")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"plan": cmd_plan, "verify": cmd_verify, "export": cmd_export}[args.command]
    try:
        return handler(args)
    except (OSError, ProblemFileError, EncodingGapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
