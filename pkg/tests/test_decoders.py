import numpy as np
import pytest

from oracles import scalar_li, smoother
from spikeforce.decoders import (DecoderConfig, DecoderModel, DecoderState, build_decoder,
                                 count_parameters, merge_directions, parameter_counts, predict,
                                 predict_stream)
from spikeforce.errors import ConfigError, SequencingError, ShapeError
from spikeforce.signals import SpikeTrainSet


def _spikes(rng, n_steps=300, n_units=8, p=0.1, dt=10.0):
    return SpikeTrainSet(rng.random((n_steps, n_units)) < p, dt)


# trainable counts for the four unit counts used by the subject presets
@pytest.mark.parametrize("m,li,lif", [(121, 610, 615), (196, 985, 990), (51, 260, 265), (93, 470, 475)])
def test_trainable_counts(m, li, lif):
    assert parameter_counts("li", m)[1] == li
    assert parameter_counts("lif", m)[1] == lif
    assert count_parameters(build_decoder("li", m, rng=np.random.default_rng(0)))[1] == li
    assert count_parameters(build_decoder("lif", m, rng=np.random.default_rng(0)))[1] == lif


def test_total_counts_121():
    assert parameter_counts("li", 121)[0] == 615
    assert parameter_counts("lif", 121)[0] == 657


@pytest.mark.parametrize("m", [0, 1, 7, 500])
def test_count_formula(m):
    assert parameter_counts("li", m) == (5 * m + 10, 5 * m + 5)
    assert parameter_counts("lif", m) == (5 * m + 52, 5 * m + 10)
    if m:
        for kind in ("li", "lif"):
            assert count_parameters(build_decoder(kind, m, rng=np.random.default_rng(1))) == \
                parameter_counts(kind, m)


def test_frozen_lif_tau_moves_to_fixed():
    assert parameter_counts("lif", 10, train_lif_tau_m=False) == (102, 55)


def test_init_ranges():
    rng = np.random.default_rng(2)
    li = build_decoder("li", 200, rng=rng)
    lif = build_decoder("lif", 200, rng=rng)
    assert np.abs(li.params["weight"]).max() < 0.1
    assert np.abs(lif.params["weight"]).max() < 0.01
    assert np.all(li.params["bias"] == 0) and np.all(li.params["tau_m"] == 80.0)
    assert abs(lif.params["tau_m"].mean() - 30.0) < 2.0
    assert not li.trainable["tau_m"] and lif.trainable["tau_m"]


def test_li_tau_configurable():
    m = build_decoder("li", 4, DecoderConfig(li_tau_m=30.0), np.random.default_rng(0))
    assert np.all(m.params["tau_m"] == 30.0)


@pytest.mark.parametrize("kind", ["li", "lif"])
def test_zero_input_zero_output(kind):
    model = build_decoder(kind, 6, rng=np.random.default_rng(0))
    out = predict(model, SpikeTrainSet.empty(100, 6))
    assert out.values.shape == (100, 5)
    assert np.all(out.values == 0)


def test_single_weight_li_matches_filter_oracle(rng):
    model = build_decoder("li", 3, rng=np.random.default_rng(0))
    model.params["weight"][:] = 0.0
    model.params["weight"][2, 1] = 0.07
    spikes = _spikes(rng, 400, 3, 0.2)
    out = predict(model, spikes).values
    expected = smoother(scalar_li(spikes.raster[:, 1].astype(float), 0.07, 10, 80), 80)
    np.testing.assert_allclose(out[:, 2], expected, rtol=0, atol=1e-12)
    assert np.all(out[:, [0, 1, 3, 4]] == 0)


def test_one_output_per_step(rng):
    model = build_decoder("lif", 8, rng=rng)
    assert predict(model, _spikes(rng, 123)).values.shape == (123, 5)


@pytest.mark.parametrize("kind", ["li", "lif"])
def test_segmented_equals_unsegmented(rng, kind):
    model = build_decoder(kind, 8, rng=rng)
    model.params["weight"] *= 20  # make the LIF layer actually fire
    spikes = _spikes(rng, 500, 8, 0.3)
    whole = predict(model, spikes).values
    parts, carry = [], None
    for a, b in [(0, 137), (137, 138), (138, 400), (400, 500)]:
        y, carry = predict_stream(model, spikes.segment(a, b), carry)
        parts.append(y.values)
    np.testing.assert_array_equal(whole, np.vstack(parts))
    assert carry.t_last == 499


def test_fresh_state_between_segments_differs(rng):
    model = build_decoder("li", 8, rng=rng)
    spikes = _spikes(rng, 200, 8, 0.3)
    whole = predict(model, spikes).values
    a = predict(model, spikes.segment(0, 100)).values
    b = predict(model, spikes.segment(100, 200)).values
    assert not np.array_equal(whole, np.vstack([a, b]))


def test_wrong_input_dim(rng):
    model = build_decoder("li", 8, rng=rng)
    with pytest.raises(ShapeError):
        predict(model, _spikes(rng, 10, 7))


def test_grid_mismatch(rng):
    model = build_decoder("li", 8, rng=rng)
    with pytest.raises(SequencingError):
        predict(model, _spikes(rng, 10, 8, dt=5.0))


def test_unknown_kind():
    with pytest.raises(ConfigError):
        build_decoder("gru", 3)


def test_li_with_cascade_rejected():
    lif = build_decoder("lif", 3, rng=np.random.default_rng(0))
    with pytest.raises(ConfigError):
        DecoderModel("li", 3, lif.params, lif.trainable)


def test_merge_directions(rng):
    f = build_decoder("li", 4, rng=rng)
    e = build_decoder("li", 6, rng=rng)
    merged = merge_directions(f, e)
    assert merged.params["weight"].shape == (10, 10)
    sf, se = _spikes(rng, 200, 4, 0.2), _spikes(rng, 200, 6, 0.2)
    both = SpikeTrainSet(np.hstack([sf.raster, se.raster]), 10.0)
    out = predict(merged, both).values
    np.testing.assert_allclose(out[:, :5], predict(f, sf).values, atol=1e-14)
    np.testing.assert_allclose(out[:, 5:], predict(e, se).values, atol=1e-14)


def test_state_zeros_layers():
    assert len(DecoderState.zeros(build_decoder("li", 2)).layers) == 2
    assert len(DecoderState.zeros(build_decoder("lif", 2)).layers) == 4
