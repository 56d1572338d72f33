"""Transmit covariances, SINR and rate for both receiver types, illumination power."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

import numpy as np

from netisac.geometry import ArrayConfig, channel_xy, distance_sq, steering_vector, aod_cosine_xy

if TYPE_CHECKING:
    from netisac.scenario import Scenario

Receiver = Literal["TypeI", "TypeII"]

PSD_TOL = 1e-9


@dataclass
class BeamformingSolution:
    """Per-slot covariances: ``W[n, m, k]`` information, ``R[n, m]`` sensing."""

    W: np.ndarray  # (N, M, K, Na, Na) complex
    R: np.ndarray  # (N, M, Na, Na) complex
    rank1: np.ndarray = field(default=None)  # (N, M, K) bool

    def __post_init__(self):
        if self.rank1 is None:
            self.rank1 = np.zeros(self.W.shape[:3], dtype=bool)

    @classmethod
    def zeros(cls, n_slots: int, n_gbs: int, n_uav: int, n_ant: int) -> "BeamformingSolution":
        return cls(
            W=np.zeros((n_slots, n_gbs, n_uav, n_ant, n_ant), dtype=complex),
            R=np.zeros((n_slots, n_gbs, n_ant, n_ant), dtype=complex),
        )

    def copy(self) -> "BeamformingSolution":
        return BeamformingSolution(self.W.copy(), self.R.copy(), self.rank1.copy())

    def slot(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return self.W[n], self.R[n]

    def gbs_power(self) -> np.ndarray:
        """Per (slot, GBS) transmit power, shape (N, M)."""
        tw = np.trace(self.W, axis1=-2, axis2=-1).real.sum(axis=2)
        tr = np.trace(self.R, axis1=-2, axis2=-1).real
        return tw + tr


@dataclass
class Association:
    """``gbs_of[k, n]`` is the GBS serving UAV k in slot n."""

    gbs_of: np.ndarray  # (K, N) int

    def alpha(self, n_gbs: int) -> np.ndarray:
        """Binary indicator tensor of shape (M, K, N)."""
        K, N = self.gbs_of.shape
        out = np.zeros((n_gbs, K, N), dtype=int)
        for k in range(K):
            out[self.gbs_of[k], k, np.arange(N)] = 1
        return out


@dataclass
class TrajectoryPlan:
    q: np.ndarray  # (K, N, 2)
    altitudes: np.ndarray  # (K,)

    def copy(self) -> "TrajectoryPlan":
        return TrajectoryPlan(self.q.copy(), self.altitudes.copy())


def check_psd(M: np.ndarray, what: str = "covariance") -> None:
    if np.abs(M - M.conj().T).max(initial=0.0) > 1e-8 * max(1.0, np.abs(M).max()):
        raise ValueError(f"{what} is not Hermitian")
    ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    if ev[0] < -PSD_TOL * max(1.0, abs(np.trace(M).real)):
        raise ValueError(f"{what} is not PSD (min eigenvalue {ev[0]:.3e})")


def sinr(receiver: Receiver, H_all: np.ndarray, serving: tuple[int, int],
         W: np.ndarray, R: np.ndarray, sigma2: float) -> float:
    """SINR of UAV k served by GBS m.

    ``H_all[l]`` is the channel outer product from GBS l to this UAV;
    ``W[l, i]`` and ``R[l]`` the slot's covariances.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    for l in range(W.shape[0]):
        check_psd(R[l], f"R[{l}]")
        for i in range(W.shape[1]):
            check_psd(W[l, i], f"W[{l},{i}]")
    m, k = serving
    pw = np.einsum("lab,liba->li", H_all, W).real
    signal = pw[m, k]
    interference = pw.sum() - signal
    if receiver == "TypeI":
        interference += np.einsum("lab,lba->", H_all, R).real
    return float(max(signal, 0.0) / (interference + sigma2))


def rate(receiver: Receiver, H_all, serving, W, R, sigma2) -> float:
    return float(np.log2(1.0 + sinr(receiver, H_all, serving, W, R, sigma2)))


def slot_channels(scenario: "Scenario", q_slot: np.ndarray) -> np.ndarray:
    """Channels ``h[m, k]`` for one slot, shape (M, K, Na); ``q_slot`` is (K, 2)."""
    sc = scenario
    M, K = sc.n_gbs, q_slot.shape[0]
    h = np.empty((M, K, sc.array.n_antennas), dtype=complex)
    for m in range(M):
        for k in range(K):
            h[m, k] = channel_xy(sc.gbs[m], q_slot[k], sc.uav_altitude[k], sc.array, sc.kappa)
    return h


def received_powers(h: np.ndarray, W: np.ndarray, R: np.ndarray):
    """Per-UAV received powers for one slot.

    Returns ``pw[k, l, i] = h_l(k)^H W[l, i] h_l(k)`` and ``pr[k, l] = h_l(k)^H R[l] h_l(k)``.
    """
    hc = h.conj()
    pw = np.einsum("lka,liab,lkb->kli", hc, W, h).real
    pr = np.einsum("lka,lab,lkb->kl", hc, R, h).real
    return pw, pr


def slot_rates(receiver: Receiver, h: np.ndarray, W: np.ndarray, R: np.ndarray,
               sigma2: float) -> np.ndarray:
    """Rate matrix ``r[m, k]`` for every candidate serving GBS in one slot."""
    pw, pr = received_powers(h, W, R)
    total = pw.sum(axis=(1, 2))
    if receiver == "TypeI":
        total = total + pr.sum(axis=1)
    K, M = pw.shape[0], pw.shape[1]
    out = np.empty((M, K))
    for k in range(K):
        s = np.maximum(pw[k, :, k], 0.0)
        out[:, k] = np.log2(1.0 + s / (total[k] - s + sigma2))
    return out


def rate_tensor(receiver: Receiver, beams: BeamformingSolution, traj: TrajectoryPlan,
                scenario: "Scenario") -> np.ndarray:
    """Rates for every (m, k, n) pairing, shape (M, K, N)."""
    N = traj.q.shape[1]
    out = np.empty((scenario.n_gbs, traj.q.shape[0], N))
    for n in range(N):
        h = slot_channels(scenario, traj.q[:, n])
        out[:, :, n] = slot_rates(receiver, h, beams.W[n], beams.R[n], scenario.sigma2)
    return out


def sum_rate(receiver: Receiver, assoc: Association, beams: BeamformingSolution,
             traj: TrajectoryPlan, scenario: "Scenario"):
    """Total rate over slots and UAVs; also returns the per-slot totals and (N, K) rates."""
    K, N = assoc.gbs_of.shape
    per_uav = np.zeros((N, K))
    if K == 0:
        return 0.0, np.zeros(N), per_uav
    for n in range(N):
        h = slot_channels(scenario, traj.q[:, n])
        r = slot_rates(receiver, h, beams.W[n], beams.R[n], scenario.sigma2)
        per_uav[n] = r[assoc.gbs_of[:, n], np.arange(K)]
    per_slot = per_uav.sum(axis=1)
    return float(per_slot.sum()), per_slot, per_uav


def sensing_geometry(scenario: "Scenario", array: ArrayConfig | None = None):
    """Steering vectors ``a[l, q]`` (M, Q, Na) and squared distances ``d2[l, q]``."""
    sc = scenario
    cfg = array or sc.array
    M, Q = sc.n_gbs, sc.sensing_xy.shape[0]
    a = np.empty((M, Q, cfg.n_antennas), dtype=complex)
    d2 = np.empty((M, Q))
    for l in range(M):
        for q in range(Q):
            c = aod_cosine_xy(cfg.orientation, sc.gbs[l], sc.sensing_xy[q], sc.sensing_alt[q])
            a[l, q] = steering_vector(c, cfg)
            d2[l, q] = distance_sq(sc.gbs[l], sc.sensing_xy[q], sc.sensing_alt[q])
    return a, d2


def illumination_from_cov(X: np.ndarray, a: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Illumination at every sample given per-GBS total covariance ``X[l]``."""
    return (np.einsum("lqa,lab,lqb->lq", a.conj(), X, a).real / d2).sum(axis=0)


def illumination_power(q_idx: int, W: np.ndarray, R: np.ndarray, scenario: "Scenario") -> float:
    """Illumination at sensing sample ``q_idx`` for one slot's covariances."""
    a, d2 = sensing_geometry(scenario)
    X = W.sum(axis=1) + R
    return float(illumination_from_cov(X, a[:, [q_idx]], d2[:, [q_idx]])[0])


def illumination_all(beams: BeamformingSolution, scenario: "Scenario") -> np.ndarray:
    """Illumination per (sample, slot), shape (Q, N)."""
    a, d2 = sensing_geometry(scenario)
    X = beams.W.sum(axis=2) + beams.R
    return np.stack([illumination_from_cov(X[n], a, d2) for n in range(X.shape[0])], axis=1)
