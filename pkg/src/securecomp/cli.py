"""Command-line entry point.

    securecomp characterize FILE
    securecomp rate FILE --mode rs|rns [--u-card N] [--restarts K] [--seed S] [--max-iters I]
    securecomp simulate FILE --rounds N [--seed S] [--transcript-out PATH]
    securecomp osrb FILE --n-list 4,8,12 (--rate-f R --rate-m R | --grid RF:RM,...) --trials T [--seed S] [--out PATH]

Reports are JSON on stdout.  Exit codes: 0 success, 2 validation or
precondition failure, 3 budget exceeded, 4 infeasible at budget, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__, charact, osrb, protosim, rateopt
from .instance import Instance, ParseError, digest, parse_instance, serialize_instance  # noqa: F401
from .probcore import ShapeError, ValidationError

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_BUDGET, EXIT_INFEASIBLE = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return None
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def _report(argv, inst: Instance, path, results: dict, seeds, started: float) -> dict:
    return {
        "command": list(argv),
        "tool_version": __version__,
        "instance": {"path": str(path), "name": inst.name, "digest": digest(inst)},
        "seeds": seeds,
        "wall_clock_s": round(time.perf_counter() - started, 6),
        "results": results,
    }


def cmd_characterize(args) -> tuple[dict, int]:
    inst = parse_instance(args.file)
    cert = charact.check_computable(inst)
    results = {"certificate": cert.to_dict(inst)}
    if cert.computable:
        w = charact.build_w(inst, cert)
        results["w"] = {
            "k": w.k,
            "p_w_given_x": w.p_w_given_x.table.tolist(),
            "p_z_given_wy": w.p_z_given_wy.table.tolist(),
        }
        results["rate_bits"] = charact.optimal_rate_full_support(inst)
    else:
        results["rate_bits"] = math.inf
    return {"instance": inst, "results": results, "seeds": []}, EXIT_OK


def cmd_rate(args) -> tuple[dict, int]:
    inst = parse_instance(args.file)
    mode = rateopt.WITH_PRIVACY if args.mode == "rs" else rateopt.NO_PRIVACY
    spec = rateopt.AuxSpec(
        mode=mode,
        u_card=args.u_card,
        restarts=args.restarts,
        seed=args.seed,
        max_iters=args.max_iters,
    )
    res = rateopt.minimize_rs(inst, spec) if mode == rateopt.WITH_PRIVACY else rateopt.minimize_rns(inst, spec)
    code = EXIT_INFEASIBLE if res.status == "infeasible" else EXIT_OK
    return {"instance": inst, "results": res.to_dict(), "seeds": [args.seed]}, code


def cmd_simulate(args) -> tuple[dict, int]:
    inst = parse_instance(args.file)
    y1 = inst.y.index(args.agreed_y1) if args.agreed_y1 is not None else 0
    spec = protosim.ProtocolSpec(inst, rounds=args.rounds, seed=args.seed, agreed_y1=y1)
    transcript, report = protosim.run_protocol(spec)
    if args.transcript_out:
        transcript.write(args.transcript_out, inst)
    induced = protosim.induced_distribution(spec)
    results = {
        "simulation": report.to_dict(),
        "analytic_leakage_bits": protosim.analytic_leakage(spec),
        "induced_tv_to_target": _tv_xyz(induced, inst),
    }
    return {"instance": inst, "results": results, "seeds": [args.seed]}, EXIT_OK


def _tv_xyz(induced, inst):
    from .probcore import tv_distance
    return tv_distance(induced.marginal(("X", "Y", "Z")), inst.joint_xyz())


def _parse_grid(args) -> list[tuple[float, float]]:
    if args.grid is not None:
        cells = []
        for part in args.grid.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                rf, rm = (float(v) for v in part.split(":"))
            except ValueError as e:
                raise UsageError(f"bad grid cell {part!r}; expected RF:RM") from e
            cells.append((rf, rm))
        if not cells:
            raise UsageError("empty rate grid")
        return cells
    if args.rate_f is None or args.rate_m is None:
        raise UsageError("give --rate-f and --rate-m, or --grid")
    return [(args.rate_f, args.rate_m)]


def _check_writable(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK) or (Path(path).is_dir()):
        raise OSError(f"cannot write to {path}")


def cmd_osrb(args) -> tuple[dict, int]:
    inst = parse_instance(args.file)
    grid = _parse_grid(args)
    try:
        n_list = [int(v) for v in args.n_list.split(",") if v.strip()]
    except ValueError as e:
        raise UsageError(f"bad --n-list {args.n_list!r}") from e
    if not n_list:
        raise UsageError("empty --n-list")
    if args.out:
        _check_writable(args.out)
    if args.aux == "w":
        cert = charact.check_computable(inst)
        if not cert.computable:
            raise charact.ContractViolation(f"instance is not securely computable: {cert.refutation.detail}")
        aux = charact.build_w(inst, cert).as_pair()
    else:
        res = rateopt.minimize_rns(inst, rateopt.AuxSpec(seed=args.seed))
        if not res.feasible:
            return {"instance": inst, "results": {"aux": res.to_dict()}, "seeds": [args.seed]}, EXIT_INFEASIBLE
        aux = res.best_aux
    reports = osrb.rate_region_sweep(inst, aux, grid, n_list, args.trials, args.seed)
    if args.out:
        osrb.write_table(reports, args.out)
    results = {"aux": args.aux, "cells": [r.to_dict() for r in reports], "table": args.out}
    return {"instance": inst, "results": results, "seeds": [args.seed]}, EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="securecomp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--report", help="also write the JSON report to this path")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("characterize", help="decide secure computability and the exact rate")
    c.add_argument("file")
    c.set_defaults(func=cmd_characterize)

    r = sub.add_parser("rate", help="numerically minimize R_S or R_NS")
    r.add_argument("file")
    r.add_argument("--mode", choices=("rs", "rns"), required=True)
    r.add_argument("--u-card", type=int, default=None)
    r.add_argument("--restarts", type=int, default=rateopt.AuxSpec.restarts)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-iters", type=int, default=rateopt.AuxSpec.max_iters)
    r.set_defaults(func=cmd_rate)

    s = sub.add_parser("simulate", help="run the one-round secure protocol")
    s.add_argument("file")
    s.add_argument("--rounds", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--agreed-y1", default=None, help="symbol of Y both parties fix (default: first)")
    s.add_argument("--transcript-out", default=None)
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("osrb", help="random-binning simulation sweep")
    o.add_argument("file")
    o.add_argument("--n-list", required=True)
    o.add_argument("--rate-f", type=float, default=None)
    o.add_argument("--rate-m", type=float, default=None)
    o.add_argument("--grid", default=None, help="comma-separated RF:RM cells")
    o.add_argument("--trials", type=int, required=True)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--aux", choices=("w", "rns"), default="w",
                   help="auxiliary: class variable W (default) or the R_NS optimizer's output")
    o.add_argument("--out", default=None, help="CSV table path")
    o.set_defaults(func=cmd_osrb)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        payload, code = args.func(args)
    except UsageError as e:
        parser.error(str(e))
    except (ParseError, ValidationError, ShapeError, charact.PreconditionError,
            charact.DegenerateInstanceError, charact.ContractViolation, ValueError) as e:
        if isinstance(e, (rateopt.BudgetError, osrb.BudgetError)):
            print(f"error: budget exceeded: {e}", file=sys.stderr)
            return EXIT_BUDGET
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    report = _jsonable(_report(argv, payload["instance"], args.file, payload["results"], payload["seeds"], started))
    text = json.dumps(report, indent=2)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
