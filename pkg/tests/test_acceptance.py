"""Acceptance criteria 1-11, one test each.

Every test is tagged ``criterion(n)``; the terminal summary prints one
PASS/FAIL line per criterion.  Criteria 6, 7 and 11 share trained runs on
the full-length S1 flexion preset and take a few minutes on one CPU.

    pytest tests/test_acceptance.py -v
"""
import csv
import time

import numpy as np
import pytest

from gradcheck import check
from oracles import mw_enumerate, qr_lstsq, scalar_li, scalar_lif, window_tally
from spikeforce.baseline import LinearModel, bin_counts, fit_linear, predict_linear
from spikeforce.config import ExperimentConfig
from spikeforce.decoders import build_decoder, count_parameters, predict_stream
from spikeforce.dynamics import LayerState, NeuronParams, SynapseParams, lif_step, run_layer
from spikeforce.encoding import EncoderConfig, calibrate_thresholds, encode
from spikeforce.evaluation import footprint, mann_whitney_u
from spikeforce.evaluation.footprint import decomposition_memory
from spikeforce.runner import read_manifest, run_experiment
from spikeforce.signals import CHANNELS_PER_ELECTRODE, SpikeTrainSet
from spikeforce.synthgen import SynthConfig, build_dataset

# unit counts of the four (subject, direction) recordings
UNITS = (121, 196, 51, 93)


def _detail(record_property, text):
    record_property("detail", text)
    print(text)


@pytest.mark.criterion(1)
def test_parameter_counts(record_property):
    t0 = time.perf_counter()
    expected = {"li": (610, 985, 260, 470), "lif": (615, 990, 265, 475), "baseline": (605, 980, 255, 465)}
    got = {}
    rng = np.random.default_rng(0)
    for kind in ("li", "lif"):
        got[kind] = tuple(count_parameters(build_decoder(kind, m, rng=rng))[1] for m in UNITS)
    got["baseline"] = tuple(count_parameters(LinearModel(np.zeros((5, m)), np.zeros(5)))[1] for m in UNITS)
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"trainable {got}, {elapsed:.3f} s")
    assert got == expected
    assert elapsed < 1.0


@pytest.mark.criterion(2)
def test_footprint(record_property):
    decomp = tuple(decomposition_memory(m) for m in UNITS)
    base = tuple(footprint("baseline", m).parameter_memory for m in UNITS)
    path_decomp = tuple(footprint(p, m).decomposition_memory for p in ("baseline", "li", "lif") for m in UNITS)
    enc = footprint("encoded-li", 120).decomposition_memory
    _detail(record_property, f"decomposition {decomp}, baseline memory {base}, encoding path {enc}")
    assert decomp == (58080, 94080, 24480, 44640)
    assert path_decomp == decomp * 3
    assert base == (2420, 3920, 1020, 1860)
    assert enc == 0


@pytest.mark.criterion(3)
def test_dynamics_oracle(record_property):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst, spike_mismatch = 0.0, 0
    for k in range(1000):
        tau_syn, tau_m = rng.uniform(5, 200, 2)
        w = rng.uniform(-0.1, 0.1) if k % 2 == 0 else rng.uniform(0.0, 0.05)
        x = (rng.random(500) < rng.uniform(0.05, 0.6)).astype(float)
        syn = SynapseParams(np.array([[w]]), None, tau_syn)
        if k % 2 == 0:
            out, _ = run_layer(x[:, None], syn, NeuronParams(np.array([tau_m])))
            ref = np.array(scalar_li(x, w, tau_syn, tau_m))
            worst = max(worst, float(np.max(np.abs(out[:, 0] - ref))))
        else:
            neu = NeuronParams(np.array([tau_m]), 0.045)
            us, ss = scalar_lif(x, w, tau_syn, tau_m, 0.045)
            state, traj, fired = LayerState.zeros(1), [], []
            for v in x:
                state, frame = lif_step(state, np.array([v]), syn, neu)
                traj.append(state.u_mem[0])
                fired.append(bool(frame.fired[0]))
            worst = max(worst, float(np.max(np.abs(np.array(traj) - np.array(us)))))
            spike_mismatch += fired != ss
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"max abs deviation {worst:.2e} over 1000 trajectories, "
                             f"{spike_mismatch} spike-train mismatches, {elapsed:.1f} s")
    assert worst <= 1e-12 and spike_mismatch == 0
    assert elapsed < 10.0


@pytest.mark.criterion(4)
def test_segment_invariance(record_property):
    rng = np.random.default_rng(4)
    mismatches = 0
    for k in range(100):
        kind = "li" if k % 2 == 0 else "lif"
        m = int(rng.integers(1, 20))
        model = build_decoder(kind, m, rng=rng)
        model.params["weight"] *= rng.uniform(1, 30)
        model.params["bias"] = rng.normal(0, 0.01, 5)
        n = int(rng.integers(50, 400))
        spikes = SpikeTrainSet(rng.random((n, m)) < rng.uniform(0.05, 0.5), 10.0)
        whole, _ = predict_stream(model, spikes)
        cuts = np.sort(rng.choice(np.arange(1, n), size=int(rng.integers(1, 6)), replace=False))
        parts, carry = [], None
        for a, b in zip([0, *cuts], [*cuts, n]):
            y, carry = predict_stream(model, spikes.segment(int(a), int(b)), carry)
            parts.append(y.values)
        mismatches += not np.array_equal(whole.values, np.vstack(parts))
    _detail(record_property, f"{mismatches}/100 decoders differ between segmented and unsegmented runs")
    assert mismatches == 0


@pytest.mark.criterion(5)
def test_gradient_check(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    li = [check("li", rng) for _ in range(20)]
    lif = [check("lif", rng) for _ in range(20)]
    elapsed = time.perf_counter() - t0
    _detail(record_property, f"max relative error LI {max(li):.1e}, LIF (smooth surrogate) {max(lif):.1e}, "
                             f"{elapsed:.1f} s")
    assert max(li) < 1e-5 and max(lif) < 1e-5
    assert elapsed < 60.0


# ---------------------------------------------------------------- end-to-end runs

def _criterion6_config() -> ExperimentConfig:
    # training settings are the package defaults: 100 epochs, batch 16, lr 0.01, 10 s windows
    return ExperimentConfig().replace(
        seed=0, seeds=(0, 1, 2), decoders=("li",),
        dataset={"preset": "S1", "directions": ("flexion",)},
        robustness={"enabled": True},
    )


@pytest.fixture(scope="module")
def li_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("criterion6")
    t0 = time.perf_counter()
    result = run_experiment(_criterion6_config(), out)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def other_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("criterion7")
    cfg = _criterion6_config().replace(decoders=("baseline", "lif"))
    return run_experiment(cfg, out)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_end_to_end_learning(record_property, li_run):
    result, elapsed = li_run
    (s,) = result.summary
    _detail(record_property, f"LI S1 flexion, 3 seeds: R2 {s['r2']:.3f}, RMSE {s['rmse']:.3f} %MVC, "
                             f"{elapsed:.0f} s")
    assert s["n_seeds"] == 3
    assert s["r2"] >= 0.80
    assert s["rmse"] <= 3.0
    assert elapsed < 15 * 60


@pytest.mark.slow
@pytest.mark.criterion(7)
def test_robustness_trend(record_property, li_run, other_run):
    curves, worst_drop = {}, 0.0
    for run in (li_run[0], other_run):
        for r in _rows(run.out_dir / "robustness_summary.csv"):
            curves.setdefault(r["decoder"], []).append(float(r["rmse_mean"]))
    for means in curves.values():
        worst_drop = max([worst_drop] + [a - b for a, b in zip(means, means[1:])])
    # rate-0 rows against the clean cross-validation rows, value for value
    exact = True
    for run in (li_run[0], other_run):
        clean = {(r["decoder"], r["direction"], r["finger"], r["repetition"], r["seed"]): r["rmse"]
                 for r in _rows(run.out_dir / "metrics.csv")}
        zero = {(r["decoder"], r["direction"], r["finger"], r["repetition"], r["seed"]): r["rmse"]
                for r in _rows(run.out_dir / "robustness.csv") if float(r["rate"]) == 0.0}
        exact &= zero == clean
    text = ", ".join(f"{d}: " + " ".join(f"{v:.2f}" for v in m) for d, m in sorted(curves.items()))
    _detail(record_property, f"mean RMSE by omission rate {text}; largest decrease {worst_drop:.3f}; "
                             f"rate 0 equals clean: {exact}")
    assert set(curves) == {"baseline", "li", "lif"}
    assert all(len(m) == 6 for m in curves.values())
    assert worst_drop <= 0.05
    assert exact


@pytest.mark.criterion(8)
def test_baseline_oracle(record_property):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        n, m = int(rng.integers(30, 300)), int(rng.integers(1, 25))
        x = rng.normal(size=(n, m))
        y = rng.normal(size=(n, 5))
        pred = predict_linear(fit_linear(x, y), x).values
        ref = x @ qr_lstsq(x, y)
        worst = max(worst, float(np.linalg.norm(pred - ref) / np.linalg.norm(ref)))
    tally_bad = 0
    for _ in range(100):
        raster = rng.random((int(rng.integers(8, 200)), int(rng.integers(1, 8)))) < rng.uniform(0, 1)
        tally_bad += not np.array_equal(bin_counts(SpikeTrainSet(raster, 10.0)), window_tally(raster, 8, 4))
    _detail(record_property, f"max relative prediction error {worst:.1e} on 50 systems; "
                             f"{tally_bad}/100 count mismatches")
    assert worst <= 1e-8
    assert tally_bad == 0


@pytest.mark.criterion(9)
def test_statistics_oracle(record_property):
    rng = np.random.default_rng(9)
    worst, pairs = 0.0, 0
    for na in range(1, 12):
        for nb in range(1, 13 - na):
            for values in (rng.normal(size=na + nb), rng.integers(0, 4, na + nb).astype(float)):
                a, b = values[:na], values[na:]
                _, p = mw_enumerate(a, b)
                worst = max(worst, abs(mann_whitney_u(a, b).p - p))
            pairs += 1
    p_sep = mann_whitney_u([1, 2, 3], [10, 11, 12]).p
    _detail(record_property, f"max |p - enumeration| {worst:.1e} over {pairs} size pairs; "
                             f"{{1,2,3}} vs {{10,11,12}} p = {p_sep!r}")
    assert worst <= 1e-12
    assert abs(p_sep - 0.1) <= 1e-12


@pytest.mark.criterion(10)
def test_encoding_calibration(record_property):
    data = build_dataset(SynthConfig(preset="S1", directions=("flexion",), emg=True), seed=10)
    blocks = [t.emg for t in data.trials]
    res = calibrate_thresholds(blocks, 5.0, 0.5)
    cfg = EncoderConfig(thresholds=res.thresholds)
    # independent check: encode every channel and count spikes per electrode
    duration = sum(b.n_steps * b.dt for b in blocks) / 1000.0
    totals = sum(encode(b, cfg).raster.sum(axis=0) for b in blocks)
    rates = [float(totals[g * CHANNELS_PER_ELECTRODE:(g + 1) * CHANNELS_PER_ELECTRODE].mean() / duration)
             for g in range(3)]
    monotone = True
    for steps in res.trace.values():
        ordered = sorted(steps)
        monotone &= all(r1 <= r0 for (_, r0), (_, r1) in zip(ordered, ordered[1:]))
    _detail(record_property, f"thresholds {tuple(round(t, 4) for t in res.thresholds)}, "
                             f"rates {tuple(round(r, 3) for r in rates)} Hz, monotone trace: {monotone}")
    assert all(abs(r - 5.0) <= 0.5 for r in rates)
    assert monotone


@pytest.mark.slow
@pytest.mark.criterion(11)
def test_determinism(record_property, li_run, tmp_path):
    first = li_run[0]
    second = run_experiment(_criterion6_config(), tmp_path / "again")
    same = first.artifacts == second.artifacts
    m1, m2 = read_manifest(first.out_dir), read_manifest(second.out_dir)
    _detail(record_property, f"{len(first.artifacts)} artifacts, checksums identical: {same}")
    assert same and m1 == m2
    assert (first.out_dir / "manifest.json").read_bytes() == (second.out_dir / "manifest.json").read_bytes()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
