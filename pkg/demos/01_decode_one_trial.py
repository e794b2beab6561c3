"""Train an LI decoder on one repetition and decode a held-out trial.

Generates the S2 flexion preset (51 motor units), trains on repetition 1,
then streams repetition 2 of the index-finger task through the decoder in
10 s segments and prints the error metrics next to the linear baseline.

    python demos/01_decode_one_trial.py
"""
import numpy as np

from spikeforce.baseline import fit_baseline, predict_baseline
from spikeforce.decoders import build_decoder
from spikeforce.evaluation import metrics
from spikeforce.synthgen import SynthConfig, build_dataset
from spikeforce.training import TrainConfig, infer, train

data = build_dataset(SynthConfig(preset="S2", directions=("flexion",), emg=False), seed=0)
train_pairs = [(t.spikes, t.force) for t in data.select(repetition=1)]
(test,) = data.select(repetition=2, finger=1)
print(f"{len(train_pairs)} training trials, {test.spikes.n_units} units, "
      f"{test.spikes.n_steps} steps per trial")

# 30 epochs keeps the demo short; the experiment default is 100
model = build_decoder("li", test.spikes.n_units, rng=np.random.default_rng(0))
result = train(model, train_pairs, TrainConfig(epochs=30), np.random.default_rng(1))
print(f"training loss {result.losses[0]:.3f} -> {result.losses[-1]:.3f}")

snn = metrics(infer(result.model, test.spikes), test.force)
lin = metrics(predict_baseline(fit_baseline(train_pairs), test.spikes), test.force)
for name, m in (("LI decoder", snn), ("baseline", lin)):
    print(f"{name:10s}  RMSE {m.rmse:.2f} %MVC  MAE {m.mae:.2f}  R2 {m.r2:.2f}")
