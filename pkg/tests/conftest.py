import numpy as np
import pytest

from specmix.io import SpectralLibrary, write_cube, write_spectral_library
from specmix.synth import SynthConfig, generate

# Criterion lines collected by test_acceptance.py, printed after the run.
ACCEPTANCE_LINES = {}

RECOVERY_CONFIG = SynthConfig(rows=64, cols=64, bands=100, k=4, noise_sigma=0.005, junk_band_fraction=0.3, seed=7)


def record(criterion, passed, detail):
    status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
    ACCEPTANCE_LINES[criterion] = f"{status:<4}  criterion {criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def recovery_fixture():
    return generate(RECOVERY_CONFIG)


@pytest.fixture(scope="session")
def recovery_files(tmp_path_factory, recovery_fixture):
    cube, truth = recovery_fixture
    root = tmp_path_factory.mktemp("recovery")
    write_cube(cube, root / "cube")
    names = tuple(f"em_{j}" for j in range(truth.endmembers.shape[0]))
    write_spectral_library(SpectralLibrary(names, truth.endmembers), root / "library.csv")
    return root / "cube", root / "library.csv"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
