import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trendclass.cli import example_csv  # noqa: E402
from trendclass.ingest import parse_dataset, prepare  # noqa: E402
from trendclass.trend import fit_all  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def example_text():
    return example_csv()


@pytest.fixture(scope="session")
def example_fits(example_text):
    return fit_all(prepare(parse_dataset(example_text)))


@pytest.fixture
def example_file(tmp_path, example_text):
    path = tmp_path / "example.csv"
    path.write_text(example_text)
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
