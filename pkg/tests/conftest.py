import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """A small synthetic train/val dataset shared by the slower tests."""
    from gancodec.runner.data import generate_synthetic

    root = tmp_path_factory.mktemp("synth")
    generate_synthetic(root / "train", 8, (64, 128), K=4, seed=11)
    generate_synthetic(root / "val", 4, (64, 128), K=4, seed=22)
    return root


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
