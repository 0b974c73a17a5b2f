import json
from pathlib import Path

import numpy as np
import pytest

from matchlab import ProblemInstance, load_instances

DATA = Path(__file__).parent / "data"


def make_instance(rows, caps, w_max=None):
    rows = np.asarray(rows, dtype=np.float64)
    if w_max is None:
        w_max = [float(rows.max(initial=0.0))] * len(caps)
    return ProblemInstance(capacities=caps, weight_caps=w_max, weights=rows.reshape(-1, len(caps)))


@pytest.fixture
def hand_instance():
    """2x2, c=[1,1], caps [5,5], rows [3,2] then [5,1]."""
    return make_instance([[3, 2], [5, 1]], [1, 1], [5.0, 5.0])


@pytest.fixture
def counterexample():
    return load_instances(DATA / "hedge_counterexample.jsonl")[0]


@pytest.fixture
def golden_record():
    return json.loads((DATA / "golden_2x3_seed42.json").read_text())


# one line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS = []


def record_acceptance(criterion, ok, detail):
    ACCEPTANCE_RESULTS.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
