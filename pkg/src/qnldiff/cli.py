"""Command-line interface.

Subcommands:
  check            run the property suite; exit 0 iff all checks pass
  converge         convergence study, ErrorReport CSV
  compare-singular three-operator comparison from a singular datum
  run              single simulation of the benchmark problem

A key=value config file (``--config PATH``) may supply any long option;
explicit flags win on conflict.  Exit codes: 0 success, 1 property
failure, 2 configuration error, 3 numerical instability.
"""
from __future__ import annotations

import argparse
import json
import sys

from .dynamics import TimeStepper, manufactured_problem, run as run_dynamics
from .exceptions import ConfigurationError, InstabilityError
from .experiments import (CASES, ERROR_KINDS, StudyConfig, convergence_study,
                          report_to_csv, run_property_checks,
                          singular_comparison, singular_to_csv)
from .grid import build_grid
from .kernels import get_kernel
from .operators import (assemble_local, assemble_nonlocal, assemble_qnl,
                        dump_operator)


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _apply_config(parser: argparse.ArgumentParser, subparsers: dict,
                  args: list[str]) -> argparse.Namespace:
    # peek at --config, then re-parse with config values as subcommand
    # defaults so explicitly passed flags keep precedence
    probe, _ = parser.parse_known_args(args)
    cfg = getattr(probe, "config", None)
    if cfg and probe.command in subparsers:
        sub = subparsers[probe.command]
        values = _read_config(cfg)
        known = {a.dest for a in sub._actions}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**values)
    return parser.parse_args(args)


def _parse_resolutions(text) -> tuple[int, ...]:
    if isinstance(text, tuple):
        return text
    try:
        return tuple(int(tok) for tok in str(text).split(",") if tok)
    except ValueError:
        raise ConfigurationError(f"bad resolution list {text!r}") from None


def _cmd_check(args) -> int:
    results = run_property_checks(args.what)
    width = max(len(f"{r.group}: {r.name}") for r in results)
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"[{status}] {r.group + ': ' + r.name:<{width}}  "
              f"measured={r.measured:.3e} tol={r.tolerance:.3e}"
              + (f"  ({r.detail})" if r.detail else ""))
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    if args.json:
        payload = [{"group": r.group, "name": r.name, "passed": r.passed,
                    "measured": r.measured, "tolerance": r.tolerance,
                    "detail": r.detail} for r in results]
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
    return 0 if n_fail == 0 else 1


def _cmd_converge(args) -> int:
    cfg = StudyConfig(case=args.case,
                      resolutions=_parse_resolutions(args.resolutions),
                      t_final=float(args.t_final),
                      kappa_cfl=float(args.kappa),
                      error_kinds=tuple(str(args.errors).split(",")),
                      kernel=args.kernel)
    report = convergence_study(cfg)
    text = report_to_csv(report)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_compare_singular(args) -> int:
    cmp = singular_comparison(n_half=int(args.n_half), kernel=args.kernel)
    text = singular_to_csv(cmp)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"sup|u_qnl - u_nonlocal| = {cmp.gap_qnl_nonlocal:.5e}  "
          f"sup|u_local - u_nonlocal| = {cmp.gap_local_nonlocal:.5e}  "
          f"qnl_closer={cmp.gap_qnl_nonlocal < cmp.gap_local_nonlocal}")
    return 0


def _cmd_run(args) -> int:
    if args.case == "custom":
        if args.r1 is None or args.r2 is None:
            raise ConfigurationError("--case custom requires --r1 and --r2")
        r1, r2 = int(args.r1), int(args.r2)
    else:
        r1, r2 = CASES[args.case]
    grid = build_grid(int(args.n_half), r1, r2)
    base = get_kernel(args.kernel)
    if args.operator == "qnl":
        op = assemble_qnl(grid, base.scaled(grid.delta1), base.scaled(grid.delta2))
    elif args.operator == "nonlocal1":
        op = assemble_nonlocal(grid, grid.r1, base.scaled(grid.delta1))
    elif args.operator == "nonlocal2":
        op = assemble_nonlocal(grid, grid.r2, base.scaled(grid.delta2))
    elif args.operator == "local":
        op = assemble_local(grid)
    else:
        raise ConfigurationError(f"unknown operator {args.operator!r}")
    if args.dump_operator:
        dump_operator(op, args.dump_operator)
        print(f"wrote operator to {args.dump_operator}")
    u0, source, _ = manufactured_problem(grid)
    stepper = TimeStepper(op=op, t_final=float(args.t_final),
                          kappa_cfl=float(args.kappa), source=source)
    rec = run_dynamics(u0, stepper)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write("index,x,u_final\n")
            coords = grid.coords()
            vals = rec.final_field.values
            for pos in range(grid.n_nodes):
                idx = pos - grid.pad
                fh.write(f"{idx},{coords[pos]:.5e},{vals[pos]:.5e}\n")
        print(f"wrote {args.out}")
    print(f"steps={rec.steps_taken} running_max={rec.running_max:.5e} "
          f"running_min={rec.running_min:.5e}")
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="qnldiff",
        description="Quasinonlocal coupling of 1D nonlocal diffusion: "
                    "solver and verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="run the property suite")
    p_check.add_argument("what", nargs="?", default="all",
                         choices=["all", "kernels", "assembly", "energies",
                                  "dynamics"])
    p_check.add_argument("--json", help="write machine-readable results")
    p_check.add_argument("--config", help="key=value config file")

    p_conv = sub.add_parser("converge", help="convergence study (CSV report)")
    p_conv.add_argument("--case", default="A", choices=sorted(CASES))
    p_conv.add_argument("--resolutions", default="50,100,200,400")
    p_conv.add_argument("--errors", default=",".join(ERROR_KINDS),
                        help="comma list from linf,energy,interior")
    p_conv.add_argument("--t-final", default=1.0)
    p_conv.add_argument("--kappa", default=0.25)
    p_conv.add_argument("--kernel", default="2-over-s")
    p_conv.add_argument("--out", help="output CSV path (default stdout)")
    p_conv.add_argument("--config", help="key=value config file")

    p_sing = sub.add_parser("compare-singular",
                            help="three-operator singular-datum comparison")
    p_sing.add_argument("--n-half", default=200)
    p_sing.add_argument("--kernel", default="2-over-s")
    p_sing.add_argument("--out", help="output CSV path (default stdout)")
    p_sing.add_argument("--config", help="key=value config file")

    p_run = sub.add_parser("run", help="single simulation of the benchmark")
    p_run.add_argument("--case", default="A", choices=sorted(CASES) + ["custom"])
    p_run.add_argument("--n-half", default=50)
    p_run.add_argument("--r1", default=None)
    p_run.add_argument("--r2", default=None)
    p_run.add_argument("--t-final", default=1.0)
    p_run.add_argument("--kappa", default=0.25)
    p_run.add_argument("--operator", default="qnl",
                       choices=["qnl", "nonlocal1", "nonlocal2", "local"])
    p_run.add_argument("--kernel", default="2-over-s")
    p_run.add_argument("--out", help="final-field CSV path")
    p_run.add_argument("--dump-operator", help="dense operator CSV path")
    p_run.add_argument("--config", help="key=value config file")
    return parser, {"check": p_check, "converge": p_conv,
                    "compare-singular": p_sing, "run": p_run}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    try:
        args = _apply_config(parser, subparsers,
                             sys.argv[1:] if argv is None else list(argv))
        handler = {
            "check": _cmd_check,
            "converge": _cmd_converge,
            "compare-singular": _cmd_compare_singular,
            "run": _cmd_run,
        }[args.command]
        return handler(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
