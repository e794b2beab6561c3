"""How decoders degrade when input spikes go missing.

Trains the baseline and an LI decoder once on clean data, then deletes a
growing fraction of the test spikes.  Deletions are nested: the spikes
removed at 10% are also removed at 20%, so the curves compare like with like.

    python demos/02_spike_omission.py
"""
import numpy as np

from spikeforce.baseline import fit_baseline, predict_baseline
from spikeforce.decoders import build_decoder
from spikeforce.evaluation import metrics, omit_spikes
from spikeforce.rng import substream
from spikeforce.synthgen import SynthConfig, build_dataset
from spikeforce.training import TrainConfig, infer, train

data = build_dataset(SynthConfig(preset="S2", directions=("flexion",), emg=False), seed=0)
pairs = [(t.spikes, t.force) for t in data.select(repetition=1)]
tests = data.select(repetition=2)

baseline = fit_baseline(pairs)
li = train(build_decoder("li", pairs[0][0].n_units, rng=np.random.default_rng(0)), pairs,
           TrainConfig(epochs=30), np.random.default_rng(1)).model

print("omission  baseline RMSE  LI RMSE")
for rate in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
    rb, rl = [], []
    for t in tests:
        spikes = omit_spikes(t.spikes, rate, substream(0, "omission", t.finger))
        rb.append(metrics(predict_baseline(baseline, spikes), t.force).rmse)
        rl.append(metrics(infer(li, spikes), t.force).rmse)
    print(f"{rate:8.0%}  {np.mean(rb):13.2f}  {np.mean(rl):7.2f}")
