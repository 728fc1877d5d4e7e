import numpy as np
import pytest

from dpvb.dpmech import privatize
from dpvb.nbmodel import ModelShape, sample_counts, sample_model_params
from dpvb.statdist import RngStream

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, title, passed, detail)``."""

    def record(number, title, passed, detail=""):
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}  {detail}")


@pytest.fixture
def small_shape():
    return ModelShape(2, (2, 3), 60)


@pytest.fixture
def make_problem():
    """Factory for (params, truth, noisy) triples on a fixed seed."""

    def build(shape, epsilon, seed=0, tag=0):
        root = RngStream(seed).child("fixture", tag)
        params = sample_model_params(shape, root.child("p"))
        truth = sample_counts(params, shape, root.child("c"))
        noisy = privatize(truth, epsilon, root.child("e"))
        return params, truth, noisy

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
