import math

import numpy as np
import pytest

import mfd3


def test_special_functions():
    assert mfd3.c_gamma(1) == pytest.approx(0.5, rel=1e-12)
    assert mfd3.c_gamma(2) == pytest.approx(math.sqrt(2) / math.pi, rel=1e-12)
    assert mfd3.log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
    # J_{1/2}(x) = sqrt(2 / (pi x)) sin x
    x = 3.7
    assert mfd3.bessel_j(0.5, x) == pytest.approx(math.sqrt(2 / (math.pi * x)) * math.sin(x), rel=1e-12)
    with pytest.raises(ValueError):
        mfd3.log_gamma(-1.0)


def test_distribution_and_sampling():
    dist = mfd3.RadialDistribution(10)
    assert dist.d == 10
    assert abs(dist.raw_mass - 1.0) < 1e-3
    assert dist.cdf(dist.quantile(0.5)) == pytest.approx(0.5, abs=1e-6)
    X = dist.sample(2000, seed=3)
    assert X.shape == (2000, 10)
    assert np.array_equal(X, dist.sample(2000, seed=3))
    r = np.linalg.norm(X, axis=1)
    assert np.all((r >= dist.r_min) & (r <= dist.r_max))
    assert mfd3.DistributionParams(10).pdf(0.5) > 0.0


def test_network_forward():
    W = np.array([[1.0, 0.0], [0.0, 2.0]])
    s = mfd3.NetworkState(W, np.array([-1.0]), np.array([0.5]))
    assert (s.d, s.m1, s.m2) == (2, 2, 1)
    X = np.array([[1.0, 1.0], [-1.0, -1.0]])
    # F(x) = mean_i |v_i| relu(v_i . x)
    assert s.F(X) == pytest.approx([(1.0 + 4.0) / 2, 0.0])
    assert s.f(X) == pytest.approx([0.0, 0.5])
    assert mfd3.f_star(np.array([[0.25, 0.0]])) == pytest.approx([0.75])
    mean, se = s.loss(X)
    assert mean == pytest.approx(0.5 * (0.0 + 0.25) / 2)
    assert se >= 0.0
    with pytest.raises(ValueError):
        mfd3.NetworkState(W, np.array([np.nan]), np.array([0.5]))


def test_state_round_trip(tmp_path):
    W = np.arange(6.0).reshape(3, 2) / 7
    s = mfd3.NetworkState(W, np.array([-0.1, 0.2]), np.array([0.5, 0.4]))
    path = str(tmp_path / "s.state")
    s.save(path)
    t = mfd3.load_state(path)
    assert np.array_equal(t.first_layer, s.first_layer)
    assert np.array_equal(t.w2, s.w2)
    assert np.array_equal(t.b2, s.b2)


def test_train_small():
    cfg = {"d": "10", "m1": "32", "m2": "4", "seed": "5", "max_steps": "40", "batch": "512",
           "eta": "0.05", "checkpoint_every": "20", "diag_samples": "2048", "direction_samples": "128",
           "radii_samples": "20", "fshape_directions": "8"}
    out = mfd3.train(cfg)
    assert out["steps"] == 40
    assert out["final_loss"] <= out["initial_loss"]
    assert out["state"].m1 == 32
    assert mfd3.train(cfg)["final_loss"] == out["final_loss"]
    with pytest.raises(mfd3.ConfigError):
        mfd3.train({"d": "10"})
