import numpy as np
import pytest

from gradcheck import check
from spikeforce.decoders import build_decoder, predict
from spikeforce.errors import ParameterError
from spikeforce.signals import ForceTrajectory, SpikeTrainSet
from spikeforce.training import (Adam, TrainConfig, forward, infer, segment_windows, smooth_spike,
                                 surrogate_spike_grad, train, trainable_arrays, window_starts)


@pytest.mark.parametrize("seed", range(4))
def test_li_gradients(seed):
    assert check("li", np.random.default_rng(seed)) < 1e-5


@pytest.mark.parametrize("seed", range(4))
def test_lif_gradients_smooth(seed):
    assert check("lif", np.random.default_rng(100 + seed)) < 1e-5


def test_surrogate_properties():
    v = np.linspace(-1, 1, 201)
    g = surrogate_spike_grad(v)
    assert g.max() == surrogate_spike_grad(0.0) == 25.0
    np.testing.assert_allclose(g, g[::-1])
    assert np.all(g > 0)
    # the smooth spike's numerical derivative is the surrogate
    h = 1e-7
    num = (smooth_spike(v + h) - smooth_spike(v - h)) / (2 * h)
    mask = np.abs(v) > 1e-3
    np.testing.assert_allclose(num[mask], g[mask], rtol=1e-5)


def test_forward_matches_streamed_predict(rng):
    for kind in ("li", "lif"):
        model = build_decoder(kind, 4, rng=rng)
        model.params["weight"] *= 10
        raster = rng.random((120, 4)) < 0.3
        y, _ = forward(model, raster[None].astype(float))
        np.testing.assert_allclose(y[0], predict(model, SpikeTrainSet(raster, 10.0)).values, atol=1e-13)


def test_dead_network_zero_gradient():
    from spikeforce.training import loss_and_grad
    model = build_decoder("li", 3, rng=np.random.default_rng(0))
    x = np.zeros((1, 20, 3))
    _, g = loss_and_grad(model, x, np.zeros((1, 20, 5)))
    assert np.all(g["weight"] == 0) and np.all(g["bias"] == 0)


def test_adam_first_step_is_lr_times_sign():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    Adam(0.01).step(p, {"w": np.array([0.5, -4.0, 0.0])})
    np.testing.assert_allclose(p["w"], [1.0 - 0.01, -2.0 + 0.01, 3.0], atol=1e-9)


def _pairs(rng, n_trials=3, n_steps=600, n_units=4):
    out = []
    for _ in range(n_trials):
        raster = rng.random((n_steps, n_units)) < 0.2
        force = np.repeat(raster[:, :1].astype(float) * 10, 5, axis=1)
        out.append((SpikeTrainSet(raster, 10.0), ForceTrajectory(force, 10.0)))
    return out


def test_training_respects_mask(rng):
    model = build_decoder("lif", 4, rng=rng)
    model.trainable["tau_m"] = False
    res = train(model, _pairs(rng), TrainConfig(epochs=2, window_s=2.0))
    for name in ("tau_m", "threshold", "conv_weight", "conv_tau_m", "smooth_tau_m"):
        np.testing.assert_array_equal(res.model.params[name], model.params[name])
    assert not np.array_equal(res.model.params["weight"], model.params["weight"])
    assert "rho" not in trainable_arrays(model)


def test_lif_tau_trained_when_flagged(rng):
    model = build_decoder("lif", 4, rng=rng)
    res = train(model, _pairs(rng), TrainConfig(epochs=2, window_s=2.0, lr=0.05))
    assert not np.array_equal(res.model.params["tau_m"], model.params["tau_m"])
    assert np.all(res.model.params["tau_m"] > 0)


def test_training_deterministic(rng):
    pairs = _pairs(rng)
    model = build_decoder("li", 4, rng=np.random.default_rng(1))
    a = train(model, pairs, TrainConfig(epochs=3, window_s=2.0), np.random.default_rng(7))
    b = train(model, pairs, TrainConfig(epochs=3, window_s=2.0), np.random.default_rng(7))
    assert a.losses == b.losses
    np.testing.assert_array_equal(a.model.params["weight"], b.model.params["weight"])


def test_training_reduces_loss(rng):
    model = build_decoder("li", 4, rng=np.random.default_rng(1))
    res = train(model, _pairs(rng), TrainConfig(epochs=15, window_s=2.0))
    assert res.losses[-1] < res.losses[0]


def test_window_counts():
    assert len(window_starts(3000, 1000, 500)) == 5
    assert len(window_starts(1000, 1000, 500)) == 1
    assert len(window_starts(999, 1000, 500)) == 0


def test_segment_windows_coverage(rng):
    pairs = _pairs(rng, 1, 3000)
    wins = segment_windows(pairs, 1000, 0.5)
    assert len(wins) == 5
    covered = np.zeros(3000, bool)
    for k, (s, f) in enumerate(wins):
        covered[500 * k:500 * k + 1000] = True
        np.testing.assert_array_equal(s.raster, pairs[0][0].raster[500 * k:500 * k + 1000])
    assert covered.all()


def test_short_trial_skipped_with_warning(rng):
    with pytest.warns(UserWarning):
        assert segment_windows(_pairs(rng, 1, 50), 100, concatenate=False) == []


def test_config_validation():
    with pytest.raises(ParameterError):
        TrainConfig(epochs=0)
    with pytest.raises(ParameterError):
        TrainConfig(window_overlap=1.0)
    assert TrainConfig().learning_rate("li") == 0.01
    assert TrainConfig().learning_rate("lif") == 0.001


@pytest.mark.parametrize("kind", ["li", "lif"])
def test_infer_segmented_equals_unsegmented(rng, kind):
    model = build_decoder(kind, 4, rng=rng)
    model.params["weight"] *= 10
    spikes = SpikeTrainSet(rng.random((2500, 4)) < 0.3, 10.0)
    whole = predict(model, spikes).values
    np.testing.assert_array_equal(infer(model, spikes, segment_s=3.0).values, whole)
    np.testing.assert_array_equal(infer(model, spikes, segment_s=0.01).values[:300], whole[:300])
