"""UAV trajectory design by trust-region successive convex approximation.

The received power from GBS ``l`` at horizontal position ``q`` is written as
``kappa / D_l(q)^2 * eta_l(X, q)`` where ``eta_l(X, q) = a_l(q)^H X a_l(q)``
is expanded entrywise so its dependence on ``q`` is explicit. The served rate
is then a difference of two logs whose arguments are scaled by the squared
distance to the serving GBS, and it is linearised in ``q`` around the local
trajectory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from netisac import conic
from netisac.conic import ProblemBuilder
from netisac.geometry import PSI, ArrayConfig
from netisac.scenario import Scenario
from netisac.signal import Association, BeamformingSolution, TrajectoryPlan, sum_rate

log = logging.getLogger(__name__)

LOG2E = np.log2(np.e)


def _upper_pairs(n: int):
    p, q = np.triu_indices(n, k=1)
    return p, q


def _cos_and_grad(orientation: str, u, q, altitude: float):
    delta = np.asarray(q, dtype=float) - np.asarray(u, dtype=float)
    D = np.sqrt(delta @ delta + altitude**2)
    if orientation == "horizontal":
        c = PSI @ delta / D
        grad = PSI / D - (PSI @ delta) * delta / D**3
    else:
        c = altitude / D
        grad = -altitude * delta / D**3
    return c, grad


def eta_mu(orientation: str, M: np.ndarray, u, q, altitude: float, cfg: ArrayConfig) -> float:
    """``a(q)^H M a(q)`` through its diagonal and off-diagonal cosine expansion."""
    c, _ = _cos_and_grad(orientation, u, q, altitude)
    p_idx, q_idx = _upper_pairs(M.shape[0])
    off = M[p_idx, q_idx]
    phase = np.angle(off) + 2 * np.pi * cfg.spacing_over_wavelength * (q_idx - p_idx) * c
    return float(np.trace(M).real + 2 * np.sum(np.abs(off) * np.cos(phase)))


def eta_mu_gradient(orientation: str, M: np.ndarray, u, q_local, altitude: float,
                    cfg: ArrayConfig) -> np.ndarray:
    """Gradient of :func:`eta_mu` with respect to the horizontal position."""
    c, grad_c = _cos_and_grad(orientation, u, q_local, altitude)
    p_idx, q_idx = _upper_pairs(M.shape[0])
    off = M[p_idx, q_idx]
    k = 2 * np.pi * cfg.spacing_over_wavelength * (q_idx - p_idx)
    phase = np.angle(off) + k * c
    return float(np.sum(-2 * k * np.abs(off) * np.sin(phase))) * grad_c


def _dist2(u, q, altitude):
    delta = np.asarray(q, dtype=float) - np.asarray(u, dtype=float)
    return float(delta @ delta + altitude**2), delta


def _log_args(receiver: str, W: np.ndarray, R: np.ndarray, m: int, k: int, u_all: np.ndarray,
              q, altitude: float, cfg: ArrayConfig, noise_over_kappa: float, with_grad: bool):
    """Arguments (and gradients) of the two logs of the served rate.

    ``g = sum_l s_l (sum_i eta_l(W_li) + mu_l(R_l)) + sigma^2/kappa * D_m^2``,
    ``h = g - eta_m(W_mk)`` with ``s_l = D_m^2 / D_l^2``. Type-II receivers drop
    the sensing terms.
    """
    orientation = cfg.orientation
    M, K = W.shape[:2]
    Dm2, dm = _dist2(u_all[m], q, altitude)
    g = noise_over_kappa * Dm2
    grad_g = 2 * noise_over_kappa * dm
    own = own_grad = None
    for l in range(M):
        Dl2, dl = _dist2(u_all[l], q, altitude)
        s = Dm2 / Dl2
        grad_s = 2 * dm / Dl2 - 2 * Dm2 * dl / Dl2**2
        mats = [W[l, i] for i in range(K)]
        if receiver == "TypeI":
            mats.append(R[l])
        e = sum(eta_mu(orientation, X, u_all[l], q, altitude, cfg) for X in mats)
        g += s * e
        if with_grad:
            ge = sum(eta_mu_gradient(orientation, X, u_all[l], q, altitude, cfg) for X in mats)
            grad_g = grad_g + s * ge + e * grad_s
        if l == m:
            own = eta_mu(orientation, W[m, k], u_all[m], q, altitude, cfg)
            if with_grad:
                own_grad = eta_mu_gradient(orientation, W[m, k], u_all[m], q, altitude, cfg)
    h = g - own
    if not with_grad:
        return g, h
    return g, h, grad_g, grad_g - own_grad


def rate_via_eta_mu(receiver: str, W: np.ndarray, R: np.ndarray, m: int, k: int,
                    q, scenario: Scenario) -> float:
    """Rate of UAV ``k`` served by GBS ``m`` at position ``q`` via the expanded form."""
    sc = scenario
    g, h = _log_args(receiver, W, R, m, k, sc.gbs, q, sc.uav_altitude[k], sc.array,
                     sc.sigma2 / sc.kappa, with_grad=False)
    return float(np.log2(g) - np.log2(h))


@dataclass
class TrajLinearization:
    """First-order model ``c + d . (q - q_local)`` of every served rate, indexed [k, n]."""

    c: np.ndarray  # (K, N)
    d: np.ndarray  # (K, N, 2)
    g: np.ndarray  # (K, N)
    h: np.ndarray  # (K, N)
    orientation: str
    receiver: str


def traj_taylor_coeffs(receiver: str, traj: TrajectoryPlan, beams: BeamformingSolution,
                       assoc: Association, scenario: Scenario) -> TrajLinearization:
    sc = scenario
    K, N = assoc.gbs_of.shape
    c = np.zeros((K, N))
    d = np.zeros((K, N, 2))
    g = np.zeros((K, N))
    h = np.zeros((K, N))
    nk = sc.sigma2 / sc.kappa
    for n in range(N):
        for k in range(K):
            m = int(assoc.gbs_of[k, n])
            gv, hv, dg, dh = _log_args(receiver, beams.W[n], beams.R[n], m, k, sc.gbs,
                                       traj.q[k, n], sc.uav_altitude[k], sc.array, nk, True)
            g[k, n], h[k, n] = gv, hv
            c[k, n] = np.log2(gv) - np.log2(hv)
            d[k, n] = LOG2E * (dg / gv - dh / hv)
    return TrajLinearization(c, d, g, h, sc.array.orientation, receiver)


def linearize_collision(qk_local, qi_local, Hk: float, Hi: float, d_min: float):
    """Inner approximation of the separation constraint between two UAVs.

    Returns ``(coef, rhs)`` meaning ``coef . (q_k - q_i) >= rhs``.
    """
    diff = np.asarray(qk_local, dtype=float) - np.asarray(qi_local, dtype=float)
    coef = 2 * diff
    rhs = d_min**2 - (Hk - Hi) ** 2 + diff @ diff
    return coef, float(rhs)


def _separate(q_local: np.ndarray, k: int, i: int, n: int) -> np.ndarray:
    """Deterministic 1e-3 m nudge when two local points coincide."""
    ang = 2 * np.pi * ((k * 7 + i * 3 + n) % 16) / 16
    return q_local + 1e-3 * np.array([np.cos(ang), np.sin(ang)])


def assemble_traj_subproblem(lin: TrajLinearization, traj: TrajectoryPlan, omega: float,
                             scenario: Scenario):
    """Linear program with cone constraints over the step ``q - q_local``.

    Returns the problem and a function mapping its solution back to positions.
    """
    if not omega > 0:
        raise ValueError("trust radius must be positive")
    sc = scenario
    K, N, _ = traj.q.shape
    if lin.d.shape != (K, N, 2):
        raise ValueError("linearization does not match the trajectory dimensions")
    q0 = traj.q
    b = ProblemBuilder()
    v = [[b.add_vars(2) for _ in range(N)] for _ in range(K)]
    for k in range(K):
        for n in range(N):
            b.maximize([(v[k][n], lin.d[k, n])])
        # endpoints
        for n, target in ((0, sc.uav_start[k]), (N - 1, sc.uav_end[k])):
            off = target - q0[k, n]
            b.add_eq([(v[k][n].start, 1.0)], off[0])
            b.add_eq([(v[k][n].start + 1, 1.0)], off[1])
        # speed: ||q[n+1] - q[n]|| <= max_step
        for n in range(N - 1):
            base = q0[k, n + 1] - q0[k, n]
            b.add_soc(
                [[], [(v[k][n + 1].start, 1.0), (v[k][n].start, -1.0)],
                 [(v[k][n + 1].start + 1, 1.0), (v[k][n].start + 1, -1.0)]],
                [sc.max_step, base[0], base[1]],
            )
        # trust region
        for n in range(1, N - 1):
            b.add_soc([[], [(v[k][n].start, 1.0)], [(v[k][n].start + 1, 1.0)]], [omega, 0.0, 0.0])
    # collision avoidance, linearised around the local point
    for n in range(N):
        for k in range(K):
            for i in range(k + 1, K):
                qk, qi = q0[k, n], q0[i, n]
                if np.allclose(qk, qi, atol=1e-9):
                    qk = _separate(qk, k, i, n)
                coef, rhs = linearize_collision(qk, qi, sc.uav_altitude[k], sc.uav_altitude[i], sc.d_min)
                # coef . (q0k + vk - q0i - vi) >= rhs
                const = coef @ (q0[k, n] - q0[i, n])
                scale = max(1.0, float(np.abs(coef).max()))
                b.add_ge([(v[k][n], coef / scale), (v[i][n], -coef / scale)], (rhs - const) / scale)

    problem = b.build()

    def positions(x: np.ndarray) -> np.ndarray:
        out = q0.copy()
        for k in range(K):
            for n in range(N):
                out[k, n] = q0[k, n] + x[v[k][n]]
        return out

    return problem, positions


@dataclass
class TrajectoryResult:
    plan: TrajectoryPlan
    history: list[float]
    radii: list[float]
    warnings: list[str]


def _fix_endpoints(q: np.ndarray, sc: Scenario) -> np.ndarray:
    q = q.copy()
    q[:, 0] = sc.uav_start
    q[:, -1] = sc.uav_end
    return q


def flight_violation(plan: TrajectoryPlan, scenario: Scenario) -> float:
    """Largest violation (metres) of endpoint, speed and separation constraints."""
    sc = scenario
    q = plan.q
    viol = [
        np.abs(q[:, 0] - sc.uav_start).max(initial=0.0),
        np.abs(q[:, -1] - sc.uav_end).max(initial=0.0),
    ]
    if q.shape[1] > 1:
        steps = np.linalg.norm(np.diff(q, axis=1), axis=2)
        viol.append((steps - sc.max_step).max(initial=0.0))
    K = q.shape[0]
    for k in range(K):
        for i in range(k + 1, K):
            sep = np.sqrt(np.sum((q[k] - q[i]) ** 2, axis=1) + (plan.altitudes[k] - plan.altitudes[i]) ** 2)
            viol.append((sc.d_min - sep).max(initial=0.0))
    return float(max(0.0, max(viol)))


def optimize_trajectory(receiver: str, scenario: Scenario, beams: BeamformingSolution,
                        assoc: Association, local: TrajectoryPlan, omega0: float | None = None,
                        xi: float | None = None, max_iters: int | None = None) -> TrajectoryResult:
    """Trust-region SCA on the trajectory with covariances and association fixed.

    A candidate is accepted only if the true sum rate strictly improves; otherwise
    the trust radius is halved. Stops once the radius falls below ``xi``.
    """
    sc = scenario
    omega = sc.options.omega0 if omega0 is None else omega0
    xi = sc.options.xi if xi is None else xi
    max_iters = sc.options.max_tr_iters if max_iters is None else max_iters

    plan = local.copy()
    f = sum_rate(receiver, assoc, beams, plan, sc)[0]
    history, radii, warns = [f], [], []
    it = 0
    while omega >= xi and it < max_iters:
        it += 1
        lin = traj_taylor_coeffs(receiver, plan, beams, assoc, sc)
        problem, positions = assemble_traj_subproblem(lin, plan, omega, sc)
        sol = conic.solve(problem, tol=sc.options.solver_tol)
        if sol.status != "optimal":
            sol = conic.solve(problem, tol=min(1e-4, 10 * sc.options.solver_tol))
        radii.append(omega)
        if sol.status != "optimal":
            warns.append(f"trajectory subproblem status {sol.status} at radius {omega:.4g}")
            omega *= 0.5
            continue
        cand = TrajectoryPlan(_fix_endpoints(positions(sol.x), sc), plan.altitudes.copy())
        if flight_violation(cand, sc) > 1e-6:
            cand = _repair(cand, plan, sc)
        f_new = sum_rate(receiver, assoc, beams, cand, sc)[0]
        if f_new > f + 1e-12 * max(1.0, abs(f)) and flight_violation(cand, sc) <= 1e-6:
            plan, f = cand, f_new
            history.append(f)
        else:
            omega *= 0.5
    for w in warns:
        log.warning(w)
    return TrajectoryResult(plan, history, radii, warns)


def _repair(cand: TrajectoryPlan, prev: TrajectoryPlan, sc: Scenario) -> TrajectoryPlan:
    """Pull a slightly infeasible candidate toward the (feasible) previous plan."""
    for t in (1 - 1e-7, 1 - 1e-5, 1 - 1e-3, 0.9, 0.5):
        q = prev.q + t * (cand.q - prev.q)
        trial = TrajectoryPlan(q, cand.altitudes)
        if flight_violation(trial, sc) <= 1e-6:
            return trial
    return prev.copy()
