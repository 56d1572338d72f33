import numpy as np
import pytest
from hypothesis import settings

from netisac.scenario import scenario_from_dict

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

# filled by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


def random_psd(rng, n, scale=1.0, rank=None):
    r = n if rank is None else rank
    A = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    return scale * (A @ A.conj().T) / n


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (A + A.conj().T)


def small_doc(**over):
    doc = {
        "name": "small",
        "gbs": [[0.0, 0.0], [200.0, 0.0]],
        "uavs": [
            {"start": [20.0, 60.0], "end": [180.0, 60.0], "altitude": 80.0},
            {"start": [20.0, -60.0], "end": [180.0, -60.0], "altitude": 80.0},
        ],
        "p_max": 3.0,
        "noise_power": "-100 dBW",
        "kappa": "-45 dB",
        "gamma": 1e-5,
        "n_slots": 4,
        "max_step": 80.0,
        "d_min": 10.0,
        "sensing": {"x": [80.0, 120.0], "y": [-20.0, 20.0], "count": 2, "altitude": 60.0},
    }
    doc.update(over)
    return doc


@pytest.fixture
def small_scenario():
    return scenario_from_dict(small_doc())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
