import sys

import numpy as np
import pytest

from ghost2.dataset import WarningDataset


def make_dataset(X, y, t=None, project="p"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    t = np.arange(len(y)) if t is None else t
    return WarningDataset(project, X, tuple(f"f{i}" for i in range(X.shape[1])), np.asarray(y), t)


@pytest.fixture
def tiny_csv(tmp_path):
    path = tmp_path / "demo.csv"
    path.write_text(
        "a,b,c,label,timestamp\n"
        "1,2.5,3,1,100\n"
        "4,5,6,0,101\n"
        "7,8.25,9,0,102\n"
        "-1,0,0.125,1,103\n"
    )
    return path


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda t: t.split("]", 1)[1]):
            terminalreporter.write_line(line)
