import numpy as np
import pytest

from gmfsim.config import from_dict


def small_config(**overrides):
    base = dict(
        task={"model": "logreg", "dataset": {"n_classes": 4, "n_features": 6, "n_samples": 400, "class_separation": 4.0}},
        n_clients=4,
        n_rounds=6,
        batch_size=8,
        policy={"kind": "dgcwgmf", "rate": 0.2},
        tau_schedule={"start": 0.0, "end": 0.6, "n_steps": 3},
        target_emd=0.5,
        seed=3,
    )
    base.update(overrides)
    return from_dict(base)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cfg():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "REPORT", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
