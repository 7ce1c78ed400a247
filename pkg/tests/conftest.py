import numpy as np
import pytest

from gosf.model import Dataset, make_dataset
from gosf.solver import trace_recorder


@pytest.fixture(autouse=True, scope="session")
def _record_lamm_traces():
    # every LAMM run in the suite feeds the descent-invariant check
    trace_recorder.enabled = True
    yield trace_recorder
    trace_recorder.enabled = False


def null_data(family, n, p, seed, standardize=True):
    """Design with i.i.d. N(0,1) entries and a response independent of it."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if family == "logistic":
        y = rng.integers(0, 2, n).astype(float)
    elif family == "poisson":
        y = rng.poisson(1.0, n).astype(float)
    else:
        y = rng.standard_normal(n)
    if standardize:
        return make_dataset(X, y, family)
    return Dataset(X, y)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=_criterion_key):
            terminalreporter.write_line(line)


def _criterion_key(line):
    num = line.split("criterion")[1].split()[0]
    return (int(num.rstrip("ab")), num)
