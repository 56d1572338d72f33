"""Coordinated transmit beamforming by successive convex approximation.

Each slot is handled independently given the trajectory and the association:

1. the rate of every served UAV is lower-bounded around the current point by
   linearising its interference term (:func:`rate_lower_bound_coeffs`);
2. the bound is maximised over the relaxed (rank-free) covariances as a
   linear-objective SDP (:func:`assemble_beamforming_sdr`);
3. the relaxed optimum is mapped back to rank-one information beams without
   changing any per-GBS total covariance (:func:`rank_one_reconstruct`).

The log of the total received power is concave; inside the SDP it is replaced
by its chordal interpolation over a grid that contains the current value, so the
subproblem objective stays a global lower bound that is tight at the current
point. Every candidate is still checked against the true sum rate.

Internally all channels are divided by the noise standard deviation so that the
noise power is one.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from netisac import conic
from netisac.conic import ProblemBuilder, hermitian_from_params, trace_form
from netisac.scenario import InfeasibleScenario, Scenario
from netisac.signal import (
    Association,
    BeamformingSolution,
    TrajectoryPlan,
    received_powers,
    sensing_geometry,
    slot_channels,
)

log = logging.getLogger(__name__)

LOG2E = np.log2(np.e)
# reconstruction is flagged when it moves the subproblem objective by more than this
TIGHTNESS_TOL = 1e-7
POWER_MARGIN = 1e-9
GAMMA_MARGIN = 1e-7


@dataclass
class RateLinearization:
    """Lower-bound coefficients for one slot.

    For the UAV ``k`` served by ``serving[k]`` the bound reads
    ``log2(total_k + 1) - offset[k] - slope[k] * (interference_k - interference_k^o)``
    where the slope matrix on GBS ``l`` is ``slope[k] * H_l(q_k)``.
    """

    offset: np.ndarray  # (K,)
    slope: np.ndarray  # (K,)
    interference: np.ndarray  # (K,) at the expansion point, noise excluded
    serving: np.ndarray  # (K,)
    receiver: str

    def slope_matrix(self, h: np.ndarray, k: int, l: int) -> np.ndarray:
        g = h[l, k]
        return self.slope[k] * np.outer(g, g.conj())


def _interference(pw: np.ndarray, pr: np.ndarray, serving: np.ndarray, receiver: str):
    K = pw.shape[0]
    idx = np.arange(K)
    signal = pw[idx, serving, idx]
    total = pw.sum(axis=(1, 2))
    if receiver == "TypeI":
        total = total + pr.sum(axis=1)
    return signal, total - signal, total


def rate_lower_bound_coeffs(receiver: str, h: np.ndarray, W0: np.ndarray, R0: np.ndarray,
                            serving: np.ndarray, sigma2: float = 1.0) -> RateLinearization:
    """Expansion of every served rate at the local covariances ``(W0, R0)``."""
    pw, pr = received_powers(h, W0, R0)
    _, interf, _ = _interference(pw, pr, np.asarray(serving), receiver)
    base = interf + sigma2
    return RateLinearization(
        offset=np.log2(base),
        slope=LOG2E / base,
        interference=interf,
        serving=np.asarray(serving),
        receiver=receiver,
    )


def lower_bound_rates(lin: RateLinearization, h: np.ndarray, W: np.ndarray, R: np.ndarray,
                      sigma2: float = 1.0) -> np.ndarray:
    """Value of the rate lower bound for every served UAV at ``(W, R)``."""
    pw, pr = received_powers(h, W, R)
    _, interf, total = _interference(pw, pr, lin.serving, lin.receiver)
    return np.log2(total + sigma2) - lin.offset - lin.slope * (interf - lin.interference)


def true_rates(receiver: str, h: np.ndarray, W: np.ndarray, R: np.ndarray,
               serving: np.ndarray, sigma2: float = 1.0) -> np.ndarray:
    pw, pr = received_powers(h, W, R)
    signal, interf, _ = _interference(pw, pr, np.asarray(serving), receiver)
    return np.log2(1.0 + np.maximum(signal, 0.0) / (interf + sigma2))


# ----------------------------------------------------------------------------
# subproblem assembly


@dataclass
class SdrLayout:
    """Where each covariance lives in the variable vector."""

    n_antennas: int
    parametrization: str
    W: list  # W[l][i] -> slice
    R: list  # R[l] -> slice
    t: slice
    constant: float  # objective offset so that c @ x + constant is in bits
    anchors: list  # per UAV, sorted anchor points of the chordal log model
    illum_rows: list = field(default_factory=list)

    def extract(self, x: np.ndarray, M: int, K: int):
        Na = self.n_antennas
        W = np.zeros((M, K, Na, Na), dtype=complex)
        R = np.zeros((M, Na, Na), dtype=complex)
        for l in range(M):
            for i in range(K):
                W[l, i] = self._matrix(x[self.W[l][i]])
            R[l] = self._matrix(x[self.R[l]])
        return W, R

    def _matrix(self, params):
        Na = self.n_antennas
        if self.parametrization == "isotropic":
            return params[0] / Na * np.eye(Na, dtype=complex)
        return hermitian_from_params(params, Na)


def _coeffs(layout_param: str, C: np.ndarray) -> np.ndarray:
    """Coefficients of ``tr(C X)`` in the parameters of one covariance block."""
    if layout_param == "isotropic":
        return np.array([np.trace(C).real / C.shape[0]])
    return trace_form(C)


def log_anchors(x_now: float, x_max: float, n_grid: int = 24) -> np.ndarray:
    """Anchor points for the chordal model of ``log2`` on ``[1, x_max]``."""
    x_max = max(x_max, x_now, 1.0 + 1e-9)
    pts = set(np.geomspace(1.0, x_max, n_grid).tolist())
    pts.add(float(x_now))
    for rel in (1e-4, 1e-3, 1e-2, 0.05, 0.2):
        for x in (x_now * (1 - rel), x_now * (1 + rel)):
            if 1.0 <= x <= x_max:
                pts.add(float(x))
    arr = np.array(sorted(pts))
    keep = np.concatenate([[True], np.diff(arr) > 1e-12 * arr[1:]])
    return arr[keep]


def chordal_log2(x, anchors: np.ndarray):
    """Piecewise-linear interpolation of ``log2`` through ``anchors``."""
    return np.interp(x, anchors, np.log2(anchors), left=None, right=None)


def assemble_beamforming_sdr(receiver: str, h: np.ndarray, lin: RateLinearization,
                             sense_a: np.ndarray, sense_d2: np.ndarray, p_max: float,
                             gamma: float, parametrization: str = "full",
                             x_now: np.ndarray | None = None):
    """Relaxed beamforming subproblem for one slot.

    ``h`` are noise-normalised channels ``(M, K, Na)``; ``sense_a``/``sense_d2``
    the sensing steering vectors and squared distances. Returns the
    :class:`~netisac.conic.ConicProblem` and its :class:`SdrLayout`.
    """
    M, K, Na = h.shape
    if lin.serving.shape != (K,):
        raise ValueError("linearization does not match the number of UAVs")
    if sense_a.shape[:1] != (M,) or sense_a.shape[2] != Na:
        raise ValueError("sensing geometry does not match the channel dimensions")

    b = ProblemBuilder()
    if parametrization == "full":
        new_block = lambda: b.add_hermitian_block(Na)  # noqa: E731
    elif parametrization == "isotropic":
        def new_block():
            s = b.add_vars(1)
            b.add_ge([(s, [1.0])], 0.0)
            return s
    else:
        raise ValueError(f"unknown parametrization {parametrization!r}")

    Wv = [[new_block() for _ in range(K)] for _ in range(M)]
    Rv = [new_block() for _ in range(M)]
    t = b.add_vars(K)

    # per-GBS power
    eye = np.eye(Na)
    for l in range(M):
        terms = [(Wv[l][i], _coeffs(parametrization, eye) / p_max) for i in range(K)]
        terms.append((Rv[l], _coeffs(parametrization, eye) / p_max))
        b.add_le(terms, 1.0 - POWER_MARGIN)

    # illumination; rows scaled to order one
    Q = sense_a.shape[1]
    zeta_ref = p_max * Na * float(np.mean((1.0 / sense_d2).sum(axis=0)))
    illum_rows = []
    if gamma > 0:
        for q in range(Q):
            terms = []
            for l in range(M):
                A = np.outer(sense_a[l, q], sense_a[l, q].conj()) / sense_d2[l, q] / zeta_ref
                cf = _coeffs(parametrization, A)
                terms += [(Wv[l][i], cf) for i in range(K)]
                terms.append((Rv[l], cf))
            b.add_ge(terms, gamma * (1 + GAMMA_MARGIN) / zeta_ref)
            illum_rows.append(q)

    constant = 0.0
    anchors_all = []
    for k in range(K):
        m = int(lin.serving[k])
        total_terms, interf_terms = [], []
        for l in range(M):
            H = np.outer(h[l, k], h[l, k].conj())
            cf = _coeffs(parametrization, H)
            for i in range(K):
                total_terms.append((Wv[l][i], cf))
                if (l, i) != (m, k):
                    interf_terms.append((Wv[l][i], cf))
            if receiver == "TypeI":
                total_terms.append((Rv[l], cf))
                interf_terms.append((Rv[l], cf))

        # objective: t_k - slope_k * interference_k
        b.maximize([(t.start + k, 1.0)])
        b.maximize([(idx, -lin.slope[k] * np.asarray(cf)) for idx, cf in interf_terms])
        constant += -lin.offset[k] + lin.slope[k] * lin.interference[k]

        x_cur = 1.0 + (x_now[k] if x_now is not None else lin.interference[k])
        x_max = 1.0 + p_max * float(np.sum(np.abs(h[:, k]) ** 2))
        anchors = log_anchors(x_cur, x_max)
        anchors_all.append(anchors)
        vals = np.log2(anchors)
        for j in range(len(anchors) - 1):
            slope = (vals[j + 1] - vals[j]) / (anchors[j + 1] - anchors[j])
            # t_k <= vals[j] + slope * (1 + total - anchors[j])
            terms = [(t.start + k, 1.0)]
            terms += [(idx, -slope * np.asarray(cf)) for idx, cf in total_terms]
            b.add_le(terms, vals[j] + slope * (1.0 - anchors[j]))

    layout = SdrLayout(Na, parametrization, Wv, Rv, t, constant, anchors_all, illum_rows)
    return b.build(), layout


def surrogate_value(lin: RateLinearization, layout: SdrLayout, h: np.ndarray,
                    W: np.ndarray, R: np.ndarray) -> float:
    """Subproblem objective (in bits) evaluated at arbitrary covariances."""
    pw, pr = received_powers(h, W, R)
    _, interf, total = _interference(pw, pr, lin.serving, lin.receiver)
    val = 0.0
    for k in range(len(lin.serving)):
        val += float(chordal_log2(1.0 + total[k], layout.anchors[k]))
        val -= lin.offset[k] + lin.slope[k] * (interf[k] - lin.interference[k])
    return val


# ----------------------------------------------------------------------------
# rank-one reconstruction


def _psd_part(X: np.ndarray) -> np.ndarray:
    X = 0.5 * (X + X.conj().T)
    ev, U = np.linalg.eigh(X)
    if ev[0] >= 0:
        return X
    return (U * np.clip(ev, 0, None)) @ U.conj().T


def rank_one_reconstruct(W_star: np.ndarray, R_star: np.ndarray, h: np.ndarray):
    """Rank-one information beams with unchanged per-GBS total covariance.

    ``h[l, i]`` is the channel from GBS ``l`` to UAV ``i``; beam ``(l, i)`` is
    aligned through that channel. A beam that delivers no power to its UAV is
    folded completely into the sensing covariance.
    """
    M, K, Na, _ = W_star.shape
    W_bar = np.zeros_like(W_star)
    rank1 = np.ones((M, K), dtype=bool)
    R_bar = np.empty_like(R_star)
    for l in range(M):
        total = R_star[l].copy()
        for i in range(K):
            Ws = _psd_part(W_star[l, i])
            total += Ws
            g = h[l, i]
            power = float((g.conj() @ Ws @ g).real)
            eps = 1e-12 * max(1.0, float(np.trace(Ws).real)) * float(np.vdot(g, g).real)
            if power <= eps:
                continue
            w = Ws @ g / np.sqrt(power)
            W_bar[l, i] = np.outer(w, w.conj())
        R_bar[l] = _psd_part(total - W_bar[l].sum(axis=0))
    return W_bar, R_bar, rank1


def _fit_power(W: np.ndarray, R: np.ndarray, p_max: float):
    """Shrink a GBS's covariances when rounding pushed it over budget."""
    for l in range(W.shape[0]):
        p = np.trace(W[l], axis1=-2, axis2=-1).real.sum() + np.trace(R[l]).real
        if p > p_max:
            s = p_max / p
            W[l] *= s
            R[l] *= s
    return W, R


# ----------------------------------------------------------------------------
# SCA loop


@dataclass
class ReconstructionCheck:
    """Relative changes caused by rank-one reconstruction of one SDR optimum."""

    slot: int
    iteration: int
    objective: float
    power: float
    illumination: float
    eig_ratio: float


@dataclass
class BeamformingResult:
    beams: BeamformingSolution
    history: list[float]
    slot_histories: list[list[float]]
    checks: list[ReconstructionCheck]
    warnings: list[str]


def _slot_context(scenario: Scenario, traj: TrajectoryPlan, n: int):
    h = slot_channels(scenario, traj.q[:, n]) / np.sqrt(scenario.sigma2)
    return h


def max_min_illumination(scenario: Scenario, parametrization: str = "full"):
    """Largest achievable worst-sample illumination and the per-GBS covariance attaining it."""
    sc = scenario
    M, Na = sc.n_gbs, sc.n_antennas
    a, d2 = sensing_geometry(sc)
    zeta_ref = sc.p_max * Na * float(np.mean((1.0 / d2).sum(axis=0)))
    b = ProblemBuilder()
    blocks = []
    for _ in range(M):
        if parametrization == "full":
            blocks.append(b.add_hermitian_block(Na))
        else:
            s = b.add_vars(1)
            b.add_ge([(s, [1.0])], 0.0)
            blocks.append(s)
    t = b.add_vars(1)
    for l in range(M):
        b.add_le([(blocks[l], _coeffs(parametrization, np.eye(Na)) / sc.p_max)], 1.0 - POWER_MARGIN)
    for q in range(a.shape[1]):
        terms = [(t, [-1.0])]
        for l in range(M):
            A = np.outer(a[l, q], a[l, q].conj()) / d2[l, q] / zeta_ref
            terms.append((blocks[l], _coeffs(parametrization, A)))
        b.add_ge(terms, 0.0)
    b.maximize([(t, [1.0])])
    sol = conic.solve(b.build(), tol=sc.options.solver_tol)
    if sol.status != "optimal":
        sol = conic.solve(b.build(), tol=min(1e-4, 10 * sc.options.solver_tol))
    X = np.zeros((M, Na, Na), dtype=complex)
    for l in range(M):
        p = sol.x[blocks[l]]
        X[l] = p[0] / Na * np.eye(Na) if parametrization == "isotropic" else hermitian_from_params(p, Na)
        X[l] = _psd_part(X[l])
    zeta = np.einsum("lqa,lab,lqb->lq", a.conj(), X, a).real / d2
    return float(zeta.sum(axis=0).min()), X


def initial_beams(scenario: Scenario, traj: TrajectoryPlan, parametrization: str = "full"):
    """Feasible starting covariances for every slot.

    The max-min illumination design is blended with isotropic transmission as
    far as the threshold allows, then split equally between the UAV beams and
    the sensing covariance. Raises :class:`InfeasibleScenario` when even the
    max-min design misses the threshold.
    """
    sc = scenario
    M, K, Na, N = sc.n_gbs, sc.n_uav, sc.n_antennas, sc.n_slots
    best, X = max_min_illumination(sc, parametrization)
    if best < sc.gamma * (1 + 2 * GAMMA_MARGIN):
        raise InfeasibleScenario(
            f"max-min illumination {best:.6g} is below the threshold {sc.gamma:.6g}",
            best_min_illumination=best,
        )
    a, d2 = sensing_geometry(sc)
    iso = np.stack([sc.p_max * (1 - POWER_MARGIN) / Na * np.eye(Na, dtype=complex)] * M)
    zeta_iso = float((np.einsum("lqa,lab,lqb->lq", a.conj(), iso, a).real / d2).sum(axis=0).min())
    target = sc.gamma * (1 + 2 * GAMMA_MARGIN)
    if zeta_iso >= target:
        beta = 1.0
    else:
        beta = (best - target) / (best - zeta_iso)
    Xmix = (1 - beta) * X + beta * iso
    beams = BeamformingSolution.zeros(N, M, K, Na)
    for n in range(N):
        for l in range(M):
            for i in range(K):
                beams.W[n, l, i] = Xmix[l] / (K + 1)
            beams.R[n, l] = Xmix[l] / (K + 1)
    return beams, best


def _combine(Wa, Ra, Wb, Rb, step):
    return (1 - step) * Wa + step * Wb, (1 - step) * Ra + step * Rb


def optimize_slot(receiver: str, scenario: Scenario, h: np.ndarray, serving: np.ndarray,
                  W0: np.ndarray, R0: np.ndarray, eps_bf: float, max_sca_iters: int,
                  parametrization: str = "full", slot: int = 0):
    """SCA iterations for a single slot. Returns (W, R, history, checks, warnings)."""
    sc = scenario
    M, K = h.shape[:2]
    a, d2 = sensing_geometry(sc)
    tol = sc.options.solver_tol

    def objective(W, R):
        return float(true_rates(receiver, h, W, R, serving).sum())

    def finish(W, R):
        if parametrization == "full":
            Wr, Rr, _ = rank_one_reconstruct(W, R, h)
            Wr, Rr = _fit_power(Wr, Rr, sc.p_max)
            return Wr, Rr
        return _fit_power(W.copy(), R.copy(), sc.p_max)

    W, R = finish(W0, R0)
    if objective(W, R) < objective(W0, R0):
        W, R = W0.copy(), R0.copy()
    f = objective(W, R)
    history = [f]
    checks: list[ReconstructionCheck] = []
    warns: list[str] = []

    for it in range(max_sca_iters):
        lin = rate_lower_bound_coeffs(receiver, h, W, R, serving)
        pw, pr = received_powers(h, W, R)
        _, _, total = _interference(pw, pr, serving, receiver)
        problem, layout = assemble_beamforming_sdr(
            receiver, h, lin, a, d2, sc.p_max, sc.gamma, parametrization, x_now=total
        )
        sol = conic.solve(problem, tol=tol)
        if sol.status != "optimal":
            sol = conic.solve(problem, tol=min(1e-4, 10 * tol))
        if sol.status != "optimal":
            if sol.status == "infeasible" and it == 0 and not history[1:]:
                raise InfeasibleScenario(f"beamforming subproblem infeasible in slot {slot}")
            warns.append(f"slot {slot} iter {it}: conic status {sol.status}; keeping previous beams")
            break
        Ws, Rs = layout.extract(sol.x, M, K)
        if parametrization == "full":
            Ws = np.array([[_psd_part(Ws[l, i]) for i in range(K)] for l in range(M)])
            Rs = np.array([_psd_part(Rs[l]) for l in range(M)])
            Wb, Rb, _ = rank_one_reconstruct(Ws, Rs, h)
            checks.append(_check(lin, layout, h, Ws, Rs, Wb, Rb, a, d2, slot, it))
        else:
            Wb, Rb = Ws, Rs
        Wb, Rb = _fit_power(Wb, Rb, sc.p_max)

        step, accepted = 1.0, None
        for _ in range(12):
            Wc, Rc = (Wb, Rb) if step == 1.0 else finish(*_combine(W, R, Wb, Rb, step))
            fc = objective(Wc, Rc)
            if fc >= f:
                accepted = (Wc, Rc, fc)
                break
            step *= 0.5
        if accepted is None:
            break
        W, R, f_new = accepted
        gain = f_new - f
        f = f_new
        history.append(f)
        if gain < eps_bf:
            break
    return W, R, history, checks, warns


def _check(lin, layout, h, Ws, Rs, Wb, Rb, a, d2, slot, it) -> ReconstructionCheck:
    obj_s = surrogate_value(lin, layout, h, Ws, Rs)
    obj_b = surrogate_value(lin, layout, h, Wb, Rb)
    Xs = Ws.sum(axis=1) + Rs
    Xb = Wb.sum(axis=1) + Rb
    ps = np.trace(Xs, axis1=-2, axis2=-1).real
    pb = np.trace(Xb, axis1=-2, axis2=-1).real
    zs = (np.einsum("lqa,lab,lqb->lq", a.conj(), Xs, a).real / d2).sum(axis=0)
    zb = (np.einsum("lqa,lab,lqb->lq", a.conj(), Xb, a).real / d2).sum(axis=0)
    ratio = 0.0
    for l in range(Wb.shape[0]):
        for i in range(Wb.shape[1]):
            ev = np.linalg.eigvalsh(Wb[l, i])
            if ev[-1] > 0:
                ratio = max(ratio, max(ev[-2], 0.0) / ev[-1])
    rel = lambda x, y: float(np.max(np.abs(x - y) / np.maximum(1e-300, np.abs(y))))  # noqa: E731
    return ReconstructionCheck(
        slot=slot,
        iteration=it,
        objective=(obj_b - obj_s) / max(1.0, abs(obj_s)),
        power=rel(pb, np.maximum(ps, 1e-300)),
        illumination=rel(zb, zs),
        eig_ratio=ratio,
    )


def optimize_beamforming(receiver: str, scenario: Scenario, traj: TrajectoryPlan,
                         assoc: Association, init: BeamformingSolution,
                         eps_bf: float | None = None, max_sca_iters: int | None = None,
                         parametrization: str = "full") -> BeamformingResult:
    """Beamforming stage over all slots; slots are independent and may run concurrently."""
    sc = scenario
    eps_bf = sc.options.eps_bf if eps_bf is None else eps_bf
    max_sca_iters = sc.options.max_sca_iters if max_sca_iters is None else max_sca_iters
    N = traj.q.shape[1]

    def run(n):
        h = _slot_context(sc, traj, n)
        return optimize_slot(receiver, sc, h, assoc.gbs_of[:, n], init.W[n], init.R[n],
                             eps_bf, max_sca_iters, parametrization, slot=n)

    if sc.options.threads > 1:
        with ThreadPoolExecutor(sc.options.threads) as pool:
            results = list(pool.map(run, range(N)))
    else:
        results = [run(n) for n in range(N)]

    beams = init.copy()
    slot_hist, checks, warns = [], [], []
    for n, (W, R, hist, chk, wrn) in enumerate(results):
        beams.W[n], beams.R[n] = W, R
        slot_hist.append(hist)
        checks += chk
        warns += wrn
    beams.rank1[:] = parametrization == "full"
    if parametrization == "full":
        for n in range(N):
            for l in range(sc.n_gbs):
                for i in range(sc.n_uav):
                    ev = np.linalg.eigvalsh(beams.W[n, l, i])
                    beams.rank1[n, l, i] = ev[-1] <= 0 or ev[-2] <= 1e-7 * ev[-1]
    length = max(len(hh) for hh in slot_hist)
    history = [float(sum(hh[min(t, len(hh) - 1)] for hh in slot_hist)) for t in range(length)]
    for w in warns:
        log.warning(w)
    return BeamformingResult(beams, history, slot_hist, checks, warns)
