import csv
import io
import json

import numpy as np
import pytest

from gpb.experiments import (
    ConfigError,
    ExperimentConfig,
    boundary_target,
    boundary_test_set,
    diagonal_target,
    diagonal_test_set,
    run,
)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_target_values():
    assert boundary_target(np.zeros((1, 2)))[0] == pytest.approx(1.0, abs=1e-15)
    assert diagonal_target(np.zeros((1, 2)))[0] == 0.0
    assert diagonal_target(np.array([[0.0, 0.5]]))[0] == pytest.approx(0.0, abs=1e-15)


def test_test_sets():
    B = boundary_test_set()
    assert B.shape == (200, 2)
    assert np.allclose(np.max(np.abs(B), axis=1), 0.9)
    D = diagonal_test_set()
    assert D.shape == (400, 2)
    assert np.all(np.abs(D) <= 1 + 1e-15)
    np.testing.assert_allclose(np.abs(D[:, 1] - D[:, 0]), 0.1, atol=1e-12)


def test_reproduce_rows_and_determinism():
    cfg = ExperimentConfig("reproduce", nodes=[5, 10, 20, 40])
    text = run(cfg)
    r = rows(text)
    assert len(r) == 16
    assert list(r[0]) == ["function", "backend", "N", "n_effective", "max_error"]
    f1_interp = [x for x in r if x["function"] == "f1" and x["backend"] == "interpolation"]
    assert float(f1_interp[-1]["max_error"]) <= 1e-6
    assert run(cfg) == text


def test_boundary_no_constraint_no_data():
    r = rows(run(ExperimentConfig("boundary", nodes=[0], m_points=0, backends=[{"backend": "interpolation"}])))
    assert len(r) == 1
    expected = np.max(np.abs(boundary_target(boundary_test_set())))
    assert float(r[0]["max_error"]) == pytest.approx(expected, rel=1e-14)
    assert expected > 0


def test_boundary_improves():
    r = rows(run(ExperimentConfig("boundary", nodes=[5, 60])))
    for b in ("interpolation", "spectral"):
        e = {int(x["N"]): float(x["max_error"]) for x in r if x["backend"] == b}
        assert e[60] <= e[5]


def test_diagonal_spectral_faster():
    r = rows(run(ExperimentConfig("diagonal", nodes=[10])))
    e = {x["backend"]: float(x["max_error"]) for x in r}
    assert e["spectral"] <= e["interpolation"]


def test_row_counts_follow_config():
    cfg = ExperimentConfig(
        "boundary",
        nodes=[3, 7],
        m_points=4,
        backends=[{"backend": "interpolation"}, {"backend": "spectral", "nugget": 1e-4},
                  {"backend": "sum_kernel", "q": {"family": "matern", "params": {"nu": 0.5, "dimension": 2}}}],
        grid=20,
    )
    r = rows(run(cfg))
    assert len(r) == 6
    assert sorted({x["backend"] for x in r}) == ["interpolation", "spectral(nugget=0.0001)", "sum_kernel"]


def test_eig_single_point():
    cfg = ExperimentConfig("eig", constraint={"variant": "finite", "params": {"points": [[0.0]]}})
    r = rows(run(cfg))
    assert len(r) == 1
    assert float(r[0]["eigenvalue"]) == pytest.approx(1.0)


def test_condition_mean_equals_prior_mean_and_zero_variance():
    cfg = ExperimentConfig("condition", constraint={"variant": "diagonal", "params": {}}, target="zero")
    r = rows(run(cfg))
    assert len(r) == 64
    assert all(float(x["mean"]) == 0.0 for x in r)
    assert max(float(x["variance"]) for x in r) <= 1e-6
    r = rows(run(ExperimentConfig("condition", target="boundary", probes=5)))
    assert len(r) == 25 and list(r[0]) == ["x1", "x2", "mean", "variance"]


def test_config_round_trip():
    cfg = ExperimentConfig("diagonal", nodes=[1, 2, 3], m_points=0, seed=7, out="x.csv",
                           kernel={"family": "matern", "params": {"nu": 2.5, "dimension": 2}})
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert ExperimentConfig.from_dict(json.loads(cfg.to_json())).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "bad",
    [
        {"experiment": "fig5"},
        {"experiment": "boundary", "nodes": [10, 5]},
        {"experiment": "boundary", "nodes": [-1]},
        {"experiment": "boundary", "m_points": -1},
        {"experiment": "boundary", "backends": [{"backend": "magic"}]},
        {"experiment": "boundary", "colour": "blue"},
        {"nodes": [1]},
    ],
)
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_json_error_has_line():
    with pytest.raises(ConfigError, match=r"cfg.json:2:"):
        ExperimentConfig.from_json('{"experiment": "boundary",\n  nodes: [1]}', "cfg.json")


def test_kernel_dimension_checked():
    cfg = ExperimentConfig("boundary", kernel={"family": "powered_exponential", "params": {}})
    with pytest.raises(ConfigError, match="dimension"):
        run(cfg)
