import numpy as np
import pytest

from gridrep.ingest.frames import write_dataset
from gridrep.ingest.synthetic import generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """40 synthetic days at 64x64 with labels."""
    root = tmp_path_factory.mktemp("ds40")
    frames, labels = generate_synthetic(40, 64, 5)
    write_dataset(str(root), frames, labels)
    return str(root)


@pytest.fixture(scope="session")
def dataset_128(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds128")
    frames, labels = generate_synthetic(30, 128, 9)
    write_dataset(str(root), frames, labels)
    return str(root)


ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
