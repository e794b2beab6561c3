import hashlib

import numpy as np
import pytest

from spikeforce.encoding import event_rate
from spikeforce.errors import ConfigError
from spikeforce.rng import substream
from spikeforce.signals import CHANNELS_PER_ELECTRODE, ForceTrajectory
from spikeforce.synthgen import (RATE_MAX, RATE_MIN, ForceProfileSpec, MotorUnitPool, SynthConfig,
                                 build_dataset, make_pool, profile_value, sample_mu_spikes, synth_iemg,
                                 trapezoid)

from conftest import SHORT


def test_profile_examples():
    spec = ForceProfileSpec()
    off = spec.rest_before_s
    assert profile_value(off + 1.5, spec) == pytest.approx(7.5)
    assert profile_value(off + 13.0, spec) == 15.0
    assert profile_value(off + 26.0, spec) == 0.0
    assert profile_value(0.0, spec) == 0.0
    assert spec.duration_s == 26.0 + spec.rest_before_s + spec.rest_after_s


def test_trapezoid_single_active_finger():
    f = trapezoid(ForceProfileSpec(), 3)
    assert f.values.shape == (3000, 5)
    assert np.all(f.values[:, [0, 1, 2, 4]] == 0)
    assert f.values[:, 3].max() == 15.0


def _flat_force(level, n_steps=3000, finger=0):
    v = np.zeros((n_steps, 5))
    v[:, finger] = level
    return ForceTrajectory(v, 10.0)


def test_zero_force_zero_spikes():
    pool = make_pool(20, 12.0, 3.0, np.random.default_rng(0))
    assert sample_mu_spikes(pool, _flat_force(0.0), np.random.default_rng(1), 0.15, 1.0, 0.1).count() == 0


def test_pooled_rate_band():
    # hold-phase pooled rate of the S1 flexion pool sits in the 11.90 +- 3.70 pps band
    ds = build_dataset(SynthConfig(preset="S1", directions=("flexion",), emg=False), seed=5)
    rates = []
    for t in ds.trials:
        a, b = (int(x * 100) for x in ForceProfileSpec().hold_window_s)
        active = ds.pools["flexion"].finger == t.finger
        seg = t.spikes.segment(a, b)
        rates.append(event_rate(seg).per_unit[active])
    pooled = float(np.concatenate(rates).mean())
    assert 11.90 - 3.70 <= pooled <= 11.90 + 3.70


def test_periodic_without_isi_jitter():
    pool = make_pool(5, 10.0, 0.0, np.random.default_rng(0), isi_cov=0.0)
    pool.recruitment_threshold[:] = 0.0
    pool.min_rate[:] = 10.0
    pool.rate_gain[:] = 0.0
    spikes = sample_mu_spikes(pool, _flat_force(15.0, 2000), np.random.default_rng(2))
    steps = np.nonzero(spikes.raster[:, 0])[0]
    assert set(np.diff(steps)) <= {10}


def test_rates_clamped():
    pool = MotorUnitPool(np.zeros(3, int), np.array([0.0, 1.0, 5.0]), np.full(3, 1.0),
                         np.full(3, 100.0), np.full(3, RATE_MAX))
    r = pool.rates(_flat_force(3.0, 2).values)
    assert r[0, 0] == RATE_MAX and r[0, 2] == 0.0
    r = pool.rates(_flat_force(1.0, 2).values)
    assert r[0, 1] == RATE_MIN


def test_rate_monotone_in_force():
    pool = make_pool(30, 12.0, 3.0, np.random.default_rng(0))
    counts = [sample_mu_spikes(pool, _flat_force(lv, 6000), np.random.default_rng(9)).count()
              for lv in (5.0, 10.0, 15.0)]
    assert counts[0] < counts[1] < counts[2]


def test_iemg_support_on_unit_electrode():
    pool = make_pool(10, 12.0, 3.0, np.random.default_rng(0), electrode_probs=(0, 1, 0))
    assert np.all(pool.electrode == 2)
    spikes = sample_mu_spikes(pool, _flat_force(15.0, 500), np.random.default_rng(1))
    emg = synth_iemg(spikes, pool, np.random.default_rng(2), noise_sd=0.0)
    c = CHANNELS_PER_ELECTRODE
    assert np.all(emg.samples[:, :c] == 0) and np.all(emg.samples[:, 2 * c:] == 0)
    assert np.any(emg.samples[:, c:2 * c] != 0)


def test_dataset_layout(small_dataset):
    assert len(small_dataset.trials) == 20
    assert small_dataset.unit_counts() == {"flexion": 51, "extension": 93}
    keys = {t.key for t in small_dataset.trials}
    assert len(keys) == 20


def test_s1_unit_counts():
    ds = build_dataset(SynthConfig(preset="S1", fingers=(0,), repetitions=(1,), emg=False, profile=SHORT))
    assert ds.unit_counts() == {"flexion": 121, "extension": 196}


def test_unknown_preset():
    with pytest.raises(ConfigError):
        SynthConfig(preset="S9")


def _digests(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir())}


def test_same_seed_identical_files(tmp_path):
    cfg = SynthConfig(preset="S2", directions=("flexion",), fingers=(0, 1), profile=SHORT)
    build_dataset(cfg, seed=4, out_dir=tmp_path / "a", write_emg=True)
    build_dataset(cfg, seed=4, out_dir=tmp_path / "b", write_emg=True)
    build_dataset(cfg, seed=5, out_dir=tmp_path / "c", write_emg=True)
    a, b, c = (_digests(tmp_path / x) for x in "abc")
    assert a == b and len(a) == 4
    assert a != c


def test_substreams_independent_of_order():
    a = substream(7, "x", 1).random(3)
    substream(7, "y").random(100)
    assert np.array_equal(a, substream(7, "x", 1).random(3))
    assert not np.array_equal(a, substream(7, "x", 2).random(3))
