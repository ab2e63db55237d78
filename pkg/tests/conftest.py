import numpy as np
import pytest

from biteweight import kernels
from biteweight.dataset import SynthConfig, synth_generate


@pytest.fixture(params=kernels.available())
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def small_ds():
    """2 subjects x 4 foods x 2 bouts."""
    return synth_generate(SynthConfig(n_subjects=2, bouts_per_subject_per_food=2, seed=11))


@pytest.fixture(scope="session")
def medium_ds():
    """3 subjects x 4 foods x 4 bouts."""
    return synth_generate(SynthConfig(n_subjects=3, bouts_per_subject_per_food=4, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
