import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sparseot import CostModel, PointCloud  # noqa: E402
from sparseot.synthetic import sample_uniform_cube  # noqa: E402

FIXTURE_SEED = 2024

ALL_FAMILIES = [
    CostModel.sqeuclidean(),
    CostModel.elastic_l1(0.5),
    CostModel.elastic_stvs(0.5),
    CostModel.elastic_ksupport(0.5, 2),
]


@pytest.fixture(scope="session")
def clouds64():
    """n = m = 64 uniform-cube samples in d = 5 (independent streams)."""
    X = sample_uniform_cube(64, 5, FIXTURE_SEED, 1)
    Y = sample_uniform_cube(64, 5, FIXTURE_SEED, 2)
    return X, Y


@pytest.fixture(scope="session")
def two_clouds():
    """Two separated 2-d Gaussian blobs, the setting used to compare flows."""
    rng = np.random.default_rng(7)
    src = PointCloud(rng.normal(size=(40, 2)) * 0.3 + [-1.5, 0.0])
    tgt = PointCloud(rng.normal(size=(40, 2)) * 0.3 + [1.5, 1.0])
    return src, tgt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, title, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
