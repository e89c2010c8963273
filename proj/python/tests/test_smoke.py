import math
import os

import numpy as np
import pytest

import stlfmp

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

PREDS = {
    "goal": {"kind": "disk_inside", "center": [0.0, 0.0], "radius": 1.0},
    "obs": {"kind": "disk_outside", "center": [2.0, 0.0], "radius": 0.5},
    "box": {"kind": "box_inside", "lower": [-5.0, -5.0], "upper": [5.0, 5.0]},
}


def test_chi2_quantile():
    # Wilson-Hilferty free reference values for chi-square inverse CDF.
    assert stlfmp.chi2_quantile(2, 0.5) == pytest.approx(2.0 * math.log(2.0), rel=1e-9)
    assert stlfmp.chi2_quantile(2, 0.999) == pytest.approx(-2.0 * math.log(1e-3), rel=1e-9)
    assert stlfmp.chi2_quantile(1, 0.95) == pytest.approx(3.841458820694124, rel=1e-6)
    assert stlfmp.chi2_quantile(3, 0.99) == pytest.approx(11.344866730144373, rel=1e-6)


def test_optimize_epsilon_in_search_range():
    eps = stlfmp.optimize_epsilon(3, 1e-3, 10.0, 0.5)
    assert 0.05 <= eps <= 0.995
    # The optimum is interior for these settings.
    assert eps != pytest.approx(0.05) and eps != pytest.approx(0.995)


def test_parse_and_horizon():
    f = stlfmp.parse_formula("G[0,5] (obs & box) & F[2,8] goal", PREDS)
    assert stlfmp.horizon(f) == pytest.approx(8.0)


def test_robustness_and_boolean_agree():
    f = stlfmp.parse_formula("F[0,2] goal", PREDS)
    t = [0.0, 1.0, 2.0]
    x = np.array([[3.0, 0.0], [2.0, 0.0], [0.5, 0.0]])
    rho = stlfmp.robustness(f, t, x)
    assert rho == pytest.approx(0.5)
    assert stlfmp.eval_boolean(f, t, x)

    x_far = x + np.array([10.0, 0.0])
    assert stlfmp.robustness(f, t, x_far) < 0.0
    assert not stlfmp.eval_boolean(f, t, x_far)


def test_until_semantics():
    f = stlfmp.parse_formula("box U[0,3] goal", PREDS)
    t = [0.0, 1.0, 2.0, 3.0]
    x = np.array([[4.0, 0.0], [3.0, 0.0], [1.5, 0.0], [0.2, 0.0]])
    assert stlfmp.eval_boolean(f, t, x)
    assert stlfmp.robustness(f, t, x) > 0.0


def test_run_pipeline_quadrotor():
    out = stlfmp.run_pipeline(os.path.join(ROOT, "configs", "quadrotor.toml"))
    assert out["converged"]
    assert out["plan_feasible"]
    assert out["plan_robustness_support"] > 0.0
    assert out["max_erosion"] > 0.0


def test_run_pipeline_mc_quadrotor():
    out = stlfmp.run_pipeline_mc(
        os.path.join(ROOT, "configs", "quadrotor.toml"), rollouts=50, seed=7
    )
    assert out["converged"]
    assert out["mc_rollouts"] == 50
    assert out["mc_satisfaction"] == pytest.approx(1.0)
