import numpy as np
import pytest

from crest.datasets import (
    Dataset,
    DatasetFormatError,
    EmptyDatasetError,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from crest.models import SoftmaxRegression, batch_weighted_grad, mean_loss


def test_synthetic_is_deterministic():
    spec = SyntheticSpec(n=150, d=4, K=3, spread=0.7, noise=0.1, heteroscedasticity=1.0)
    a, b = generate_synthetic(spec, 11), generate_synthetic(spec, 11)
    assert a.same_as(b)
    assert not a.same_as(generate_synthetic(spec, 12))


def test_synthetic_imbalance():
    ds = generate_synthetic(SyntheticSpec(n=100, d=3, K=2, imbalance=0.9), 0)
    assert np.sum(ds.y == 0) == 90


def test_synthetic_rejects_bad_spec():
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(n=1, K=2))
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(n=10, K=1))
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(noise=1.5))


def test_point_masses_are_fit_by_gradient_descent():
    ds = generate_synthetic(SyntheticSpec(n=100, d=3, K=2, spread=0.0), 4)
    assert len(np.unique(ds.X, axis=0)) == 2
    model = SoftmaxRegression(3, 2)
    w = np.zeros(model.n_params)
    idx = np.arange(ds.n)
    for _ in range(3000):
        w -= 1.0 * batch_weighted_grad(model, w, ds, idx)
    assert mean_loss(model, w, ds) < 1e-3


def test_load_three_lines(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("2 3\n0.5 1.0 0\n-1 2 2\n3.25 0 1\n", encoding="utf-8")
    ds = load_dataset(p)
    assert ds.n == 3 and ds.d == 2 and ds.n_classes == 3
    assert ds.active.all()
    assert list(ds.y) == [0, 2, 1]


def test_header_only_is_empty(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("2 3\n", encoding="utf-8")
    with pytest.raises(EmptyDatasetError):
        load_dataset(p)


@pytest.mark.parametrize(
    "body, line",
    [("2 2\n1 2 0\n1 x 1\n", 3), ("2 2\n1 2 0\n1 2\n", 3), ("2 2\n1 2 5\n", 2), ("two 2\n", 1)],
)
def test_format_errors_name_the_line(tmp_path, body, line):
    p = tmp_path / "d.txt"
    p.write_text(body, encoding="utf-8")
    with pytest.raises(DatasetFormatError, match=f"line {line}"):
        load_dataset(p)


def test_round_trip(tmp_path):
    ds = generate_synthetic(SyntheticSpec(n=60, d=4, K=3, spread=1.3), 2)
    p = tmp_path / "d.txt"
    save_dataset(ds, p)
    assert load_dataset(p).same_as(ds)


def test_dataset_is_read_only():
    ds = Dataset(np.zeros((3, 2)), np.array([0, 1, 0]), 2)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.array([0, 2]), 2)
