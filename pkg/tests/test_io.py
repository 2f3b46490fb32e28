import numpy as np
import pytest

from mixctl import ScenarioConfig, build_model, sample
from mixctl.io import (
    fmt,
    read_label_column,
    read_model_json,
    read_posteriors_csv,
    read_sample_csv,
    write_model_json,
    write_posteriors_csv,
    write_predictions_csv,
    write_sample_csv,
)


def test_float_format_round_trips():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=1000) * 10.0 ** rng.integers(-20, 20, size=1000):
        assert float(fmt(float(x))) == x
    assert fmt(np.inf) == "inf" and fmt(3) == "3"


def test_sample_round_trip(tmp_path):
    data = sample(build_model(ScenarioConfig(D=1, sigma2=2)), [5, 5, 5], seed=0)
    write_sample_csv(tmp_path / "s.csv", data)
    pts, labels = read_sample_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(pts, data.points)
    np.testing.assert_array_equal(labels, data.labels)
    write_sample_csv(tmp_path / "u.csv", data, with_labels=False)
    pts, labels = read_sample_csv(tmp_path / "u.csv")
    assert labels is None and pts.shape == (15, 2)


def test_posterior_round_trip(tmp_path):
    T = np.random.default_rng(1).dirichlet([1, 1, 1], size=20)
    write_posteriors_csv(tmp_path / "t.csv", T)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "tau_1,tau_2,tau_3"
    np.testing.assert_array_equal(read_posteriors_csv(tmp_path / "t.csv"), T)


def test_predictions_round_trip(tmp_path):
    write_predictions_csv(tmp_path / "p.csv", [0, 3, 1])
    assert (tmp_path / "p.csv").read_text() == "label\n0\n3\n1\n"
    assert read_label_column(tmp_path / "p.csv").tolist() == [0, 3, 1]


def test_model_round_trip(tmp_path):
    m = build_model(ScenarioConfig(family="student", D=3, dof=10))
    write_model_json(tmp_path / "m.json", m)
    assert read_model_json(tmp_path / "m.json").to_dict() == m.to_dict()


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "tau_1,tau_2\n0.5\n", "tau_1,tau_2\nx,y\n"])
def test_malformed_posteriors(tmp_path, text):
    (tmp_path / "t.csv").write_text(text)
    with pytest.raises(ValueError):
        read_posteriors_csv(tmp_path / "t.csv")
