"""Alternating optimisation over association, beamforming and trajectory."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from netisac.beamforming import ReconstructionCheck, initial_beams, optimize_beamforming
from netisac.scenario import InfeasibleScenario, Scenario
from netisac.signal import (
    Association,
    BeamformingSolution,
    TrajectoryPlan,
    illumination_all,
    rate_tensor,
    sum_rate,
)
from netisac.trajectory import flight_violation, optimize_trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaseSpec:
    orientation: str
    receiver: str

    @classmethod
    def from_number(cls, case: int) -> "CaseSpec":
        try:
            return CASES[int(case)]
        except KeyError:
            raise ValueError(f"case must be 1, 2, 3 or 4, got {case!r}") from None

    @property
    def number(self) -> int:
        return next(n for n, c in CASES.items() if c == self)


CASES = {
    1: CaseSpec("horizontal", "TypeI"),
    2: CaseSpec("horizontal", "TypeII"),
    3: CaseSpec("vertical", "TypeI"),
    4: CaseSpec("vertical", "TypeII"),
}


@dataclass
class SolveReport:
    case: CaseSpec
    scheme: str
    gamma: float
    beams: BeamformingSolution
    traj: TrajectoryPlan
    assoc: Association
    history: list[float]
    stage_history: list[tuple[int, str, float]]
    residuals: list[dict]
    per_slot_rates: np.ndarray  # (N, K)
    illumination: np.ndarray  # (Q, N)
    timings: dict[str, float]
    bf_histories: list[list[float]] = field(default_factory=list)
    traj_histories: list[list[float]] = field(default_factory=list)
    checks: list[ReconstructionCheck] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    max_min_illumination: float = float("nan")

    @property
    def objective(self) -> float:
        return self.history[-1]

    @property
    def average_sum_rate(self) -> float:
        return self.history[-1] / self.per_slot_rates.shape[0]

    def to_dict(self) -> dict:
        """JSON-serialisable summary; complex matrices as [re, im] nested lists."""
        return {
            "case": self.case.number,
            "orientation": self.case.orientation,
            "receiver": self.case.receiver,
            "scheme": self.scheme,
            "gamma": self.gamma,
            "objective": self.objective,
            "average_sum_rate": self.average_sum_rate,
            "history": self.history,
            "stage_history": [list(s) for s in self.stage_history],
            "residuals": self.residuals,
            "per_slot_sum_rate": self.per_slot_rates.sum(axis=1).tolist(),
            "per_slot_rates": self.per_slot_rates.tolist(),
            "illumination": self.illumination.tolist(),
            "association": self.assoc.gbs_of.tolist(),
            "trajectory": self.traj.q.tolist(),
            "altitudes": self.traj.altitudes.tolist(),
            "W": [self.beams.W.real.tolist(), self.beams.W.imag.tolist()],
            "R": [self.beams.R.real.tolist(), self.beams.R.imag.tolist()],
            "rank1": self.beams.rank1.tolist(),
            "timings": self.timings,
            "bf_histories": self.bf_histories,
            "traj_histories": self.traj_histories,
            "reconstruction_checks": [c.__dict__ for c in self.checks],
            "warnings": self.warnings,
            "max_min_illumination": self.max_min_illumination,
        }


def straight_flight(start, end, n_slots: int) -> np.ndarray:
    """Constant-velocity path from ``start`` to ``end`` over ``n_slots`` waypoints."""
    t = np.linspace(0.0, 1.0, n_slots)[:, None]
    return np.asarray(start, dtype=float) + t * (np.asarray(end, dtype=float) - np.asarray(start, dtype=float))


def straight_plan(scenario: Scenario) -> TrajectoryPlan:
    sc = scenario
    q = np.stack([straight_flight(sc.uav_start[k], sc.uav_end[k], sc.n_slots) for k in range(sc.n_uav)])
    return TrajectoryPlan(q.reshape(sc.n_uav, sc.n_slots, 2), sc.uav_altitude.copy())


def optimize_association(rates: np.ndarray) -> Association:
    """Per (UAV, slot) best GBS; ties go to the lowest index."""
    return Association(np.argmax(rates, axis=0).astype(int))


def exhaustive_association(rates: np.ndarray) -> tuple[Association, float]:
    """Brute force over every assignment; only for tiny tensors."""
    M, K, N = rates.shape
    best, best_val = None, -np.inf
    pairs = [(k, n) for k in range(K) for n in range(N)]
    for choice in itertools.product(range(M), repeat=len(pairs)):
        val = sum(rates[m, k, n] for m, (k, n) in zip(choice, pairs))
        if val > best_val:
            best_val = val
            best = np.array(choice).reshape(K, N)
    return Association(best), float(best_val)


def initialize(case: CaseSpec, scenario: Scenario, parametrization: str = "full"):
    """Straight-flight trajectory, feasibility-driven beams, rate-optimal association."""
    sc = scenario.with_case(case.orientation, case.receiver)
    traj = straight_plan(sc)
    beams, best = initial_beams(sc, traj, parametrization)
    assoc = optimize_association(rate_tensor(case.receiver, beams, traj, sc))
    return traj, beams, assoc, best


def constraint_residuals(beams: BeamformingSolution, traj: TrajectoryPlan, scenario: Scenario) -> dict:
    sc = scenario
    power = beams.gbs_power()
    zeta = illumination_all(beams, sc)
    return {
        "max_power_ratio": float(power.max() / sc.p_max),
        "min_illumination": float(zeta.min()),
        "min_illumination_ratio": float(zeta.min() / sc.gamma) if sc.gamma > 0 else float("inf"),
        "flight_violation_m": flight_violation(traj, sc),
        "rank1": bool(beams.rank1.all()),
    }


Start = tuple  # (TrajectoryPlan, BeamformingSolution, Association)


def _check_start(start, scheme: str, sc: Scenario):
    traj, beams, assoc = start
    if scheme == "straight_flight" and not np.allclose(traj.q, straight_plan(sc).q, atol=1e-9):
        raise ValueError("straight-flight benchmark needs a straight-flight starting trajectory")
    if scheme == "isotropic":
        eye = np.eye(sc.n_antennas)
        scale = np.trace(beams.W, axis1=-2, axis2=-1)[..., None, None] / sc.n_antennas
        if not np.allclose(beams.W, scale * eye, atol=1e-12):
            raise ValueError("isotropic benchmark needs scaled-identity starting covariances")
    if illumination_all(beams, sc).min() < sc.gamma * (1 - 1e-6):
        raise ValueError("starting beams violate the illumination threshold")
    return traj.copy(), beams.copy(), Association(assoc.gbs_of.copy())


def _run(case: CaseSpec, scenario: Scenario, scheme: str, ao_tol: float | None,
         max_rounds: int | None, start: Start | None = None) -> SolveReport:
    sc = scenario.with_case(case.orientation, case.receiver)
    ao_tol = sc.options.ao_tol if ao_tol is None else ao_tol
    max_rounds = sc.options.max_rounds if max_rounds is None else max_rounds
    parametrization = "isotropic" if scheme == "isotropic" else "full"
    move = scheme != "straight_flight"
    rx = case.receiver
    timings = {"init": 0.0, "association": 0.0, "beamforming": 0.0, "trajectory": 0.0}

    t0 = time.perf_counter()
    if start is None:
        traj, beams, assoc, best = initialize(case, sc, parametrization)
    else:
        traj, beams, assoc = _check_start(start, scheme, sc)
        best = float("nan")
    timings["init"] = time.perf_counter() - t0

    f = sum_rate(rx, assoc, beams, traj, sc)[0]
    history = [f]
    stages = [(0, "init", f)]
    residuals = [constraint_residuals(beams, traj, sc)]
    bf_hist, tr_hist, checks, warns = [], [], [], []

    for rnd in range(1, max_rounds + 1):
        prev = f
        t0 = time.perf_counter()
        cand = optimize_association(rate_tensor(rx, beams, traj, sc))
        f_assoc = sum_rate(rx, cand, beams, traj, sc)[0]
        if f_assoc >= f:
            assoc, f = cand, f_assoc
        timings["association"] += time.perf_counter() - t0
        stages.append((rnd, "association", f))

        t0 = time.perf_counter()
        bf = optimize_beamforming(rx, sc, traj, assoc, beams, parametrization=parametrization)
        timings["beamforming"] += time.perf_counter() - t0
        f_bf = sum_rate(rx, assoc, bf.beams, traj, sc)[0]
        if f_bf >= f:
            beams, f = bf.beams, f_bf
        bf_hist.append(bf.history)
        checks += bf.checks
        warns += bf.warnings
        stages.append((rnd, "beamforming", f))

        if move:
            t0 = time.perf_counter()
            tr = optimize_trajectory(rx, sc, beams, assoc, traj)
            timings["trajectory"] += time.perf_counter() - t0
            if tr.history[-1] >= f:
                traj, f = tr.plan, tr.history[-1]
            tr_hist.append(tr.history)
            warns += tr.warnings
            stages.append((rnd, "trajectory", f))

        history.append(f)
        residuals.append(constraint_residuals(beams, traj, sc))
        log.info("case %d %s round %d: sum rate %.6f", case.number, scheme, rnd, f)
        if f - prev < ao_tol * (1 + abs(f)):
            break

    _, _, per_uav = sum_rate(rx, assoc, beams, traj, sc)
    return SolveReport(
        case=case, scheme=scheme, gamma=sc.gamma, beams=beams, traj=traj, assoc=assoc,
        history=history, stage_history=stages, residuals=residuals, per_slot_rates=per_uav,
        illumination=illumination_all(beams, sc), timings=timings, bf_histories=bf_hist,
        traj_histories=tr_hist, checks=checks, warnings=warns, max_min_illumination=best,
    )


def solve(case: CaseSpec, scenario: Scenario, ao_tol: float | None = None,
          max_rounds: int | None = None, start: Start | None = None) -> SolveReport:
    """Joint association, beamforming and trajectory design for one case.

    ``start`` optionally replaces the default initialisation with a feasible
    ``(trajectory, beams, association)`` triple.
    """
    return _run(case, scenario, "full", ao_tol, max_rounds, start)


def run_benchmark(kind: str, case: CaseSpec, scenario: Scenario, ao_tol: float | None = None,
                  max_rounds: int | None = None, start: Start | None = None) -> SolveReport:
    """``straight_flight``: trajectory frozen; ``isotropic``: scaled-identity covariances."""
    if kind not in ("straight_flight", "isotropic"):
        raise ValueError(f"unknown benchmark {kind!r}")
    return _run(case, scenario, kind, ao_tol, max_rounds, start)


def run_scheme(scheme: str, case: CaseSpec, scenario: Scenario, **kw) -> SolveReport:
    if scheme == "full":
        return solve(case, scenario, **kw)
    return run_benchmark(scheme, case, scenario, **kw)


# ----------------------------------------------------------------------------
# threshold sweeps


@dataclass
class SweepPoint:
    gamma: float
    case: CaseSpec
    scheme: str
    status: str  # "ok" or "infeasible"
    report: SolveReport | None
    start: str  # where the run was initialised from


def _dominated(case: CaseSpec, scheme: str) -> list[tuple[CaseSpec, str]]:
    """Runs whose solutions are feasible starting points for ``(case, scheme)`` at the same threshold."""
    out = []
    if scheme == "full":
        out.append((case, "straight_flight"))
    if case.receiver == "TypeII" and scheme != "isotropic":
        out.append((CaseSpec(case.orientation, "TypeI"), scheme))
    return out


def _start_of(report: SolveReport) -> Start:
    return report.traj, report.beams, report.assoc


def gamma_sweep(runs: list[tuple[CaseSpec, str]], scenario: Scenario, gammas,
                continuation: bool = True, ao_tol: float | None = None,
                max_rounds: int | None = None) -> list[SweepPoint]:
    """Solve every ``(case, scheme)`` at every threshold.

    With ``continuation`` thresholds are visited from high to low and each run
    starts from the best feasible point already known: its own solution at
    the previous (stricter) threshold, or at the same threshold the solution
    of a run with a smaller feasible set (straight flight for the full
    scheme, TypeI beams for a TypeII receiver). Runs whose smaller-set
    partners appear in ``runs`` should be listed after them.
    Without it every point is an independent default-initialised solve.
    """
    order = sorted(set(float(g) for g in gammas), reverse=continuation)
    done: dict[tuple, SweepPoint] = {}
    points = []
    prev_gamma = None
    for g in order:
        sc = scenario.with_gamma(g)
        for case, scheme in runs:
            rx = case.receiver
            cands = []
            if continuation:
                keys = [(prev_gamma, case, scheme)] + [(g, c, s) for c, s in _dominated(case, scheme)]
                for key in keys:
                    pt = done.get(key)
                    if pt is not None and pt.status == "ok":
                        scc = sc.with_case(case.orientation, rx)
                        val = sum_rate(rx, pt.report.assoc, pt.report.beams, pt.report.traj, scc)[0]
                        cands.append((val, key, pt))
            kw = dict(ao_tol=ao_tol, max_rounds=max_rounds)
            try:
                if cands:
                    val, key, pt = max(cands, key=lambda c: c[0])
                    rep = run_scheme(scheme, case, sc, start=_start_of(pt.report), **kw)
                    src = f"{key[2]} case {key[1].number} at gamma {key[0]:.6g}"
                else:
                    rep = run_scheme(scheme, case, sc, **kw)
                    src = "default"
                pt = SweepPoint(g, case, scheme, "ok", rep, src)
            except InfeasibleScenario:
                pt = SweepPoint(g, case, scheme, "infeasible", None, "default")
            done[(g, case, scheme)] = pt
            points.append(pt)
            log.info("sweep gamma %.4g case %d %s: %s", g, case.number, scheme, pt.status)
        prev_gamma = g
    return sorted(points, key=lambda p: (p.gamma, p.case.number, p.scheme))
