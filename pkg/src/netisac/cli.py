"""Command-line runner: one scenario in, a directory of CSV/JSON/SVG artifacts out.

Exit codes: 0 success, 2 infeasible sensing threshold, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from netisac.driver import CaseSpec, SolveReport, gamma_sweep, run_benchmark, solve
from netisac.scenario import InfeasibleScenario, Scenario, ScenarioError, load_scenario, to_db

log = logging.getLogger("netisac")

BENCHMARKS = {"none": None, "straight": "straight_flight", "isotropic": "isotropic"}
FLOAT_FMT = ".17g"

RATES_HEADER = "slot,{uavs}"
SWEEP_FIELDS = ["gamma", "gamma_dbw", "case", "scheme", "status", "average_sum_rate", "objective", "rounds"]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_SWEEP_RE = re.compile(r"^\s*([^:]+):([^:]+):([^:]+?)\s*(dBW|dB|W)?\s*$")


def parse_sweep(text: str) -> list[float]:
    """``LO:HI:STEP`` with an optional ``dBW`` suffix; returns linear thresholds, inclusive of HI."""
    m = _SWEEP_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"sweep must look like LO:HI:STEP[dBW], got {text!r}")
    try:
        lo, hi, step = (float(m.group(i)) for i in (1, 2, 3))
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric sweep bounds in {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("sweep needs STEP > 0 and HI >= LO")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    vals = lo + step * np.arange(count)
    if m.group(4) in ("dBW", "dB"):
        return [float(10 ** (v / 10)) for v in vals]
    return [float(v) for v in vals]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netisac", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    p.add_argument("--case", type=int, choices=[1, 2, 3, 4], default=1,
                   help="1/2: horizontal array, 3/4: vertical; odd: TypeI receiver, even: TypeII")
    p.add_argument("--benchmark", choices=list(BENCHMARKS), default="none")
    p.add_argument("--sweep-gamma", type=parse_sweep, default=None, metavar="LO:HI:STEP[dBW]")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--max-ao-rounds", type=int, default=None)
    p.add_argument("--ao-tol", type=float, default=None)
    p.add_argument("--solver-tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--emit-plots", type=_bool, default=True, metavar="BOOL")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def write_artifacts(report: SolveReport, scenario: Scenario, outdir: Path, emit_plots: bool = True) -> None:
    """report.json, timings.json and the four CSV tables (plus SVGs when asked)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    timings = doc.pop("timings")
    doc["scenario"] = scenario.to_dict()
    (outdir / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    # wall-clock numbers change run to run, so they live apart from the report
    (outdir / "timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True))

    N, K = report.per_slot_rates.shape
    with open(outdir / "rates.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slot"] + [f"uav{k}" for k in range(K)])
        for n in range(N):
            w.writerow([n] + [_fmt(v) for v in report.per_slot_rates[n]])

    with open(outdir / "trajectory.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slot", "uav", "x", "y", "altitude"])
        for n in range(N):
            for k in range(K):
                x, y = report.traj.q[k, n]
                w.writerow([n, k, _fmt(x), _fmt(y), _fmt(report.traj.altitudes[k])])

    with open(outdir / "illumination.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample", "x", "y", "altitude"] + [f"slot{n}" for n in range(N)])
        for q in range(report.illumination.shape[0]):
            x, y = scenario.sensing_xy[q]
            w.writerow([q, _fmt(x), _fmt(y), _fmt(scenario.sensing_alt[q])]
                       + [_fmt(v) for v in report.illumination[q]])

    with open(outdir / "association.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slot", "uav", "gbs"])
        for n in range(N):
            for k in range(K):
                w.writerow([n, k, int(report.assoc.gbs_of[k, n])])

    if emit_plots:
        from netisac.plots import render_plots

        render_plots(report, scenario, outdir / "plots")


def write_sweep(rows: list[dict], outdir: Path, emit_plots: bool) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "sweep.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
    if emit_plots:
        from netisac.plots import render_plots

        render_plots(None, None, outdir / "plots", sweep_rows=rows)


def run_one(case: CaseSpec, scenario: Scenario, benchmark: str | None, max_rounds, ao_tol) -> SolveReport:
    if benchmark is None:
        return solve(case, scenario, ao_tol=ao_tol, max_rounds=max_rounds)
    return run_benchmark(benchmark, case, scenario, ao_tol=ao_tol, max_rounds=max_rounds)


def _configure(args) -> Scenario:
    sc = load_scenario(args.scenario)
    opts = {}
    if args.solver_tol is not None:
        opts["solver_tol"] = args.solver_tol
    if args.threads is not None:
        opts["threads"] = args.threads
    if opts:
        sc = sc.with_options(**opts)
    if args.seed is not None:
        from dataclasses import replace

        sc = replace(sc, seed=args.seed)
    return sc


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; keep 2 for infeasibility only
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _configure(args)
        case = CaseSpec.from_number(args.case)
        bench = BENCHMARKS[args.benchmark]
        scheme = bench or "full"

        if args.sweep_gamma is None:
            report = run_one(case, sc, bench, args.max_ao_rounds, args.ao_tol)
            write_artifacts(report, sc.with_case(case.orientation, case.receiver), args.out, args.emit_plots)
            print(f"case {case.number} {scheme}: average sum rate {report.average_sum_rate:.6f} "
                  f"after {len(report.history) - 1} rounds -> {args.out}")
            return 0

        # stricter thresholds first, each warm-starting the next
        rows = []
        points = gamma_sweep([(case, scheme)], sc, args.sweep_gamma,
                             ao_tol=args.ao_tol, max_rounds=args.max_ao_rounds)
        for pt in points:
            g = pt.gamma
            row = {"gamma": g, "gamma_dbw": to_db(g), "case": case.number, "scheme": scheme,
                   "status": pt.status, "average_sum_rate": float("nan"), "objective": float("nan"), "rounds": 0}
            if pt.report is not None:
                write_artifacts(pt.report, sc.with_gamma(g).with_case(case.orientation, case.receiver),
                                args.out / f"gamma_{to_db(g):+.3f}dBW", args.emit_plots)
                row.update(average_sum_rate=pt.report.average_sum_rate, objective=pt.report.objective,
                           rounds=len(pt.report.history) - 1)
            rows.append(row)
            print(f"gamma {to_db(g):+.2f} dBW: {row['status']} {row['average_sum_rate']:.6f}")
        write_sweep(rows, args.out, args.emit_plots)
        return 0 if any(r["status"] == "ok" for r in rows) else 2
    except InfeasibleScenario as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
