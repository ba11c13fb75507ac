import os

import pytest

from personabench import synthetic, treebank

REAL_DATA_ENV = "PERSONABENCH_DATA"


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    return synthetic.write_corpus(str(tmp_path_factory.mktemp("synthetic")), seed=11)


@pytest.fixture(scope="session")
def synthetic_corpus(synthetic_dir):
    return treebank.load_corpus(synthetic_dir)


@pytest.fixture(scope="session")
def real_data_dir():
    path = os.environ.get(REAL_DATA_ENV)
    if not path or not os.path.isfile(os.path.join(path, "train.txt")):
        pytest.skip(f"real sentiment treebank not available (set {REAL_DATA_ENV})")
    return path


ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Collect one summary line per acceptance criterion."""
    def _record(criterion, status, detail=""):
        ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
