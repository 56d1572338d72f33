"""Scenario configuration: JSON ingestion, validation and sensing-grid sampling.

A scenario is one human-editable JSON document. Powers and gains are linear
numbers, or strings carrying a ``dB``/``dBW``/``dBm`` suffix.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from netisac.geometry import AirPoint, ArrayConfig

RECEIVERS = ("TypeI", "TypeII")


class ScenarioError(ValueError):
    """Raised when a scenario document is malformed or violates an invariant."""


class InfeasibleScenario(RuntimeError):
    """The sensing threshold cannot be met under the power budget."""

    def __init__(self, message: str, best_min_illumination: float | None = None):
        super().__init__(message)
        self.best_min_illumination = best_min_illumination


@dataclass(frozen=True)
class SolverOptions:
    solver_tol: float = 1e-8
    ao_tol: float = 1e-3
    max_rounds: int = 10
    eps_bf: float = 1e-4
    max_sca_iters: int = 20
    omega0: float = 20.0
    xi: float = 0.1
    max_tr_iters: int = 30
    threads: int = 1


@dataclass(frozen=True, eq=False)
class Scenario:
    gbs: np.ndarray  # (M, 2)
    uav_start: np.ndarray  # (K, 2)
    uav_end: np.ndarray  # (K, 2)
    uav_altitude: np.ndarray  # (K,)
    array: ArrayConfig
    receiver: str
    p_max: float
    sigma2: float
    kappa: float
    gamma: float
    n_slots: int
    max_step: float
    d_min: float
    sensing_xy: np.ndarray  # (Q, 2)
    sensing_alt: np.ndarray  # (Q,)
    sensing_spec: dict = field(default_factory=dict)
    options: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0
    name: str = "scenario"

    @property
    def n_gbs(self) -> int:
        return self.gbs.shape[0]

    @property
    def n_uav(self) -> int:
        return self.uav_start.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.array.n_antennas

    def with_case(self, orientation: str, receiver: str) -> "Scenario":
        return replace(self, array=replace(self.array, orientation=orientation), receiver=receiver)

    def with_gamma(self, gamma: float) -> "Scenario":
        return replace(self, gamma=float(gamma))

    def with_options(self, **kw) -> "Scenario":
        return replace(self, options=replace(self.options, **kw))

    def to_dict(self) -> dict:
        """Canonical JSON-able form with every quantity in linear units."""
        return {
            "name": self.name,
            "gbs": self.gbs.tolist(),
            "uavs": [
                {"start": self.uav_start[k].tolist(), "end": self.uav_end[k].tolist(),
                 "altitude": float(self.uav_altitude[k])}
                for k in range(self.n_uav)
            ],
            "array": {
                "n_antennas": self.array.n_antennas,
                "spacing_over_wavelength": self.array.spacing_over_wavelength,
                "orientation": self.array.orientation,
            },
            "receiver": self.receiver,
            "p_max": self.p_max,
            "noise_power": self.sigma2,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "n_slots": self.n_slots,
            "max_step": self.max_step,
            "d_min": self.d_min,
            "sensing": self.sensing_spec,
            "solver": {f.name: getattr(self.options, f.name) for f in fields(SolverOptions)},
            "seed": self.seed,
        }


ScenarioConfig = Scenario

_DB_RE = re.compile(r"^\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*(dBW|dBm|dB)\s*$")


def parse_power(value, key: str) -> float:
    """Linear value from a number or a dB-tagged string (``"-100 dBW"``)."""
    if isinstance(value, bool):
        raise ScenarioError(f"{key}: expected a number or dB string, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _DB_RE.match(value)
        if not m:
            raise ScenarioError(f"{key}: cannot parse {value!r}; use a number or e.g. '-45 dB'")
        db, unit = float(m.group(1)), m.group(2)
        lin = 10.0 ** (db / 10.0)
        return lin * 1e-3 if unit == "dBm" else lin
    raise ScenarioError(f"{key}: expected a number or dB string, got {value!r}")


def to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def grid_shape(count: int) -> tuple[int, int]:
    """Most even factorisation ``count = nx * ny`` with ``nx >= ny``."""
    if count < 1:
        raise ScenarioError("sensing count Q must be >= 1")
    ny = int(math.isqrt(count))
    while count % ny:
        ny -= 1
    return count // ny, ny


def sample_sensing_grid(region_spec: dict) -> list[AirPoint]:
    """Sensing samples from an explicit point list or a box lattice.

    Box lattices are row-major over cell centres, x varying fastest.
    """
    if "points" in region_spec:
        pts = region_spec["points"]
        if not pts:
            raise ScenarioError("sensing.points must not be empty")
        return [AirPoint((float(p[0]), float(p[1])), float(p[2])) for p in pts]
    try:
        (x0, x1), (y0, y1) = region_spec["x"], region_spec["y"]
        count = int(region_spec["count"])
        alt = float(region_spec["altitude"])
    except KeyError as exc:
        raise ScenarioError(f"sensing box spec is missing key {exc.args[0]!r}") from None
    if not (x1 > x0 and y1 > y0):
        raise ScenarioError("sensing box must have positive extents")
    nx, ny = grid_shape(count)
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    return [AirPoint((float(x), float(y)), alt) for y in ys for x in xs]


def _require(doc: dict, key: str):
    if key not in doc:
        raise ScenarioError(f"missing required key {key!r}")
    return doc[key]


def scenario_from_dict(doc: dict) -> Scenario:
    gbs = np.asarray(_require(doc, "gbs"), dtype=float).reshape(-1, 2)
    uavs = _require(doc, "uavs")
    try:
        start = np.array([u["start"] for u in uavs], dtype=float).reshape(-1, 2)
        end = np.array([u["end"] for u in uavs], dtype=float).reshape(-1, 2)
        alt = np.array([u["altitude"] for u in uavs], dtype=float).reshape(-1)
    except KeyError as exc:
        raise ScenarioError(f"uav entry is missing key {exc.args[0]!r}") from None
    arr = doc.get("array", {})
    array = ArrayConfig(
        n_antennas=int(arr.get("n_antennas", 4)),
        spacing_over_wavelength=float(arr.get("spacing_over_wavelength", 0.5)),
        orientation=arr.get("orientation", "horizontal"),
    )
    receiver = doc.get("receiver", "TypeI")
    if receiver not in RECEIVERS:
        raise ScenarioError(f"receiver must be one of {RECEIVERS}, got {receiver!r}")

    p_max = parse_power(_require(doc, "p_max"), "p_max")
    sigma2 = parse_power(_require(doc, "noise_power"), "noise_power")
    kappa = parse_power(_require(doc, "kappa"), "kappa")
    gamma = parse_power(_require(doc, "gamma"), "gamma")
    n_slots = int(_require(doc, "n_slots"))
    if "max_step" in doc:
        max_step = float(doc["max_step"])
    elif "max_speed" in doc:
        max_step = float(doc["max_speed"]) * float(doc.get("slot_duration", 1.0))
    else:
        raise ScenarioError("missing required key 'max_step' (or 'max_speed')")
    d_min = float(doc.get("d_min", 0.0))

    sensing_spec = dict(_require(doc, "sensing"))
    points = sample_sensing_grid(sensing_spec)
    sensing_xy = np.array([p.horizontal for p in points])
    sensing_alt = np.array([p.altitude for p in points])

    solver = doc.get("solver", {})
    known = {f.name: f.type for f in fields(SolverOptions)}
    unknown = set(solver) - set(known)
    if unknown:
        raise ScenarioError(f"unknown solver option(s): {sorted(unknown)}")
    defaults = SolverOptions()
    options = SolverOptions(**{
        name: type(getattr(defaults, name))(solver[name]) for name in solver
    })

    sc = Scenario(
        gbs=gbs, uav_start=start, uav_end=end, uav_altitude=alt, array=array,
        receiver=receiver, p_max=p_max, sigma2=sigma2, kappa=kappa, gamma=gamma,
        n_slots=n_slots, max_step=max_step, d_min=d_min, sensing_xy=sensing_xy,
        sensing_alt=sensing_alt, sensing_spec=sensing_spec, options=options,
        seed=int(doc.get("seed", 0)), name=str(doc.get("name", "scenario")),
    )
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    if sc.n_gbs < 1:
        raise ScenarioError("at least one GBS is required")
    if not np.all(np.isfinite(sc.gbs)):
        raise ScenarioError("GBS positions must be finite")
    if np.any(sc.uav_altitude <= 0):
        raise ScenarioError("UAV altitudes must be > 0")
    if np.any(sc.sensing_alt <= 0):
        raise ScenarioError("sensing altitudes must be > 0")
    for key in ("p_max", "sigma2", "kappa"):
        if not getattr(sc, key) > 0:
            raise ScenarioError(f"{key} must be > 0")
    if sc.gamma < 0:
        raise ScenarioError("gamma must be >= 0")
    if sc.n_slots < 2:
        raise ScenarioError("n_slots must be >= 2")
    if not sc.max_step > 0:
        raise ScenarioError("max_step must be > 0")
    if sc.sensing_xy.shape[0] < 1:
        raise ScenarioError("sensing count Q must be >= 1")
    reach = np.linalg.norm(sc.uav_end - sc.uav_start, axis=1)
    limit = (sc.n_slots - 1) * sc.max_step
    for k in np.flatnonzero(reach > limit + 1e-9):
        raise ScenarioError(
            f"UAV {k} endpoints unreachable: distance {reach[k]:.3f} m > (N-1)*max_step = {limit:.3f} m"
        )


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def bundled_scenario(name: str = "default") -> Scenario:
    """Load one of the scenarios shipped with the package (``default`` or ``desk``)."""
    ref = resources.files("netisac") / "data" / f"{name}_scenario.json"
    return scenario_from_dict(json.loads(ref.read_text()))


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(sc.to_dict(), indent=2))
