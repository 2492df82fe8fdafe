import numpy as np
import pytest

from crest.datasets import SyntheticSpec, generate_synthetic
from crest.models import SoftmaxRegression, TwoLayerMLP


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_data():
    return generate_synthetic(SyntheticSpec(n=200, d=5, K=3, spread=1.0, noise=0.05), seed=3)


@pytest.fixture
def softmax_model(small_data):
    return SoftmaxRegression(small_data.d, small_data.n_classes)


@pytest.fixture
def mlp_model(small_data):
    return TwoLayerMLP(small_data.d, 6, small_data.n_classes, bias=True)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(key, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[key] = f"{key}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES.values():
        terminalreporter.write_line(line)
