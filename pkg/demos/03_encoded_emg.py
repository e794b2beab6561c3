"""Decode from encoded iEMG instead of decomposed motor units.

Each of the 120 channels drives its own LIF neuron.  Thresholds are first
calibrated per electrode so every array fires at about 5 Hz, then an LI
decoder is trained on the encoded channels.  The footprint table shows why
this path is attractive: it needs no separation matrix.

    python demos/03_encoded_emg.py
"""
import numpy as np

from spikeforce.decoders import build_decoder
from spikeforce.encoding import calibrate_thresholds, encode, event_rate
from spikeforce.evaluation import footprint, metrics
from spikeforce.synthgen import SynthConfig, build_dataset
from spikeforce.training import TrainConfig, infer, train

data = build_dataset(SynthConfig(preset="S1", directions=("flexion",)), seed=0)
train_trials, test_trials = data.select(repetition=1), data.select(repetition=2)

cal = calibrate_thresholds([t.emg for t in train_trials], target_rate_hz=5.0)
enc = cal.config()
print("thresholds per electrode:", ", ".join(f"{v:.3f}" for v in cal.thresholds))
print("calibrated rates (Hz):   ", ", ".join(f"{v:.2f}" for v in cal.rates))

pairs = [(encode(t.emg, enc), t.force) for t in train_trials]
print(f"mean encoded rate on training data: {np.mean([event_rate(s).mean for s, _ in pairs]):.2f} Hz")
model = train(build_decoder("li", 120, rng=np.random.default_rng(0)), pairs,
              TrainConfig(epochs=30), np.random.default_rng(1)).model
scores = [metrics(infer(model, encode(t.emg, enc)), t.force) for t in test_trials]
print(f"held-out RMSE {np.mean([m.rmse for m in scores]):.2f} %MVC, "
      f"R2 {np.nanmean([m.r2 for m in scores]):.2f}")

for path, n in (("li", 121), ("encoded-li", 120)):
    fp = footprint(path, n)
    print(f"{path:10s}  params {fp.total_params:5d}  memory {fp.parameter_memory:5d} B  "
          f"decomposition {fp.decomposition_memory:5d} B")
