import numpy as np
import pytest

from spikeforce.baseline import fit_baseline
from spikeforce.datasets import load_dataset_dir, read_trial, validate_dataset, write_dataset_dir, write_trial
from spikeforce.decoders import build_decoder, predict
from spikeforce.errors import DatasetError
from spikeforce.modelio import dumps_model, load_model, loads_model, model_meta, save_model


@pytest.fixture
def trial(small_dataset):
    return small_dataset.trials[3]


def test_trial_round_trip(tmp_path, trial):
    p = tmp_path / "t.sfd"
    write_trial(p, trial, include_emg=True)
    back = read_trial(p)
    assert back.key == trial.key and back.subject == trial.subject
    np.testing.assert_array_equal(back.spikes.raster, trial.spikes.raster)
    np.testing.assert_array_equal(back.force.values, trial.force.values)
    np.testing.assert_array_equal(back.emg.samples, trial.emg.samples)
    assert validate_dataset(p)[0].ok


def test_dataset_dir_round_trip(tmp_path, small_dataset):
    write_dataset_dir(small_dataset, tmp_path)
    back = load_dataset_dir(tmp_path)
    assert len(back.trials) == 20 and back.subject == "S2"
    assert back.unit_counts() == small_dataset.unit_counts()
    assert back.trials[0].emg is None


def _corrupt(tmp_path, trial, old, new, count=1):
    p = tmp_path / "bad.sfd"
    write_trial(p, trial)
    p.write_text(p.read_text().replace(old, new, count))
    return p


def test_validate_reports_out_of_range_step(tmp_path, trial):
    n = trial.spikes.n_steps
    steps, units = trial.spikes.events()
    p = _corrupt(tmp_path, trial, f"\n{steps[-1]} {units[-1]}\n", f"\n{n + 5} {units[-1]}\n")
    (report,) = validate_dataset(p)
    assert not report.ok
    assert any("record" in v and "line" in v for v in report.violations)
    with pytest.raises(DatasetError):
        read_trial(p)


def test_validate_reports_wrong_force_width(tmp_path, trial):
    p = tmp_path / "bad.sfd"
    write_trial(p, trial)
    lines = p.read_text().splitlines(keepends=True)
    k = lines.index("[force]\n") + 2
    lines[k] = " ".join(lines[k].split()[:4]) + "\n"
    p.write_text("".join(lines))
    (report,) = validate_dataset(p)
    assert len(report.violations) >= 1
    assert f"line {k + 1}" in report.violations[0]


def test_validate_bad_magic(tmp_path):
    p = tmp_path / "x.sfd"
    p.write_text("hello\n")
    assert not validate_dataset(p)[0].ok


def test_validate_empty_dir(tmp_path):
    (report,) = validate_dataset(tmp_path)
    assert not report.ok


@pytest.mark.parametrize("kind", ["li", "lif"])
def test_model_round_trip(tmp_path, rng, kind, trial):
    model = build_decoder(kind, trial.spikes.n_units, rng=rng)
    p = tmp_path / "m.sfm"
    save_model(model, p, {"decoder": kind, "seed": 3})
    back = load_model(p)
    assert back.kind == kind and back.config == model.config and back.trainable == model.trainable
    for k in model.params:
        np.testing.assert_array_equal(back.params[k], model.params[k])
    np.testing.assert_array_equal(predict(back, trial.spikes).values, predict(model, trial.spikes).values)
    assert model_meta(p) == {"decoder": kind, "seed": 3}
    assert dumps_model(back, {"decoder": kind, "seed": 3}) == p.read_bytes()


def test_baseline_model_round_trip(small_dataset):
    pairs = [(t.spikes, t.force) for t in small_dataset.select("flexion", 1)]
    model = fit_baseline(pairs)
    back = loads_model(dumps_model(model))
    np.testing.assert_array_equal(back.coefficients, model.coefficients)
    np.testing.assert_array_equal(back.feature_max, model.feature_max)
    assert back.hop_ms == 40.0


def test_model_truncated_and_bad_magic(rng):
    blob = dumps_model(build_decoder("li", 3, rng=rng))
    with pytest.raises(DatasetError):
        loads_model(blob[:-8])
    with pytest.raises(DatasetError):
        loads_model(b"not-a-model 1\n" + blob[18:])
    with pytest.raises(DatasetError):
        loads_model(blob.replace(b"spikeforce-model 1", b"spikeforce-model 9", 1))
