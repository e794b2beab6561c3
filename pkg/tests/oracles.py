"""Independent reference implementations used only by the tests.

Each oracle is written from the defining formula with plain Python loops
or a different numerical method than the package, so agreement is evidence
rather than a tautology.
"""
import itertools
import math

import numpy as np


def scalar_li(inputs, w, tau_syn, tau_m, dt=10.0, bias=0.0):
    """Single LI neuron driven by a scalar input sequence."""
    a, b = math.exp(-dt / tau_syn), math.exp(-dt / tau_m)
    i = u = 0.0
    out = []
    for x in inputs:
        i = a * i + w * x + bias
        u = b * u + i
        out.append(u)
    return out


def scalar_lif(inputs, w, tau_syn, tau_m, thr, dt=10.0, bias=0.0, reset="zero"):
    """Single LIF neuron; returns (membrane after reset, spikes)."""
    a, b = math.exp(-dt / tau_syn), math.exp(-dt / tau_m)
    i = u = 0.0
    us, ss = [], []
    for x in inputs:
        i = a * i + w * x + bias
        u = b * u + i
        s = u >= thr
        if s:
            u = 0.0 if reset == "zero" else u - thr
        us.append(u)
        ss.append(s)
    return us, ss


def smoother(x, tau, dt=10.0):
    g = math.exp(-dt / tau)
    y, out = 0.0, []
    for v in x:
        y = g * y + (1 - g) * v
        out.append(y)
    return out


def window_tally(raster, length, hop):
    """Per-window spike counts by explicit double loop."""
    n_steps, n_units = raster.shape
    rows = []
    start = 0
    while start + length <= n_steps:
        rows.append([sum(int(raster[t, u]) for t in range(start, start + length)) for u in range(n_units)])
        start += hop
    return np.array(rows, dtype=int).reshape(len(rows), n_units)


def qr_lstsq(x, y):
    """Least squares through a QR factorisation (no normal equations)."""
    q, r = np.linalg.qr(x)
    return np.linalg.solve(r, q.T @ y)


def mw_enumerate(a, b):
    """Two-sided Mann-Whitney p by enumerating every split of the pooled sample.

    U is computed by pairwise comparison (ties count 1/2), so this shares no
    code path with a rank-sum implementation.
    """
    pooled = list(a) + list(b)
    na, n = len(a), len(a) + len(b)

    def u_of(idx):
        ga = [pooled[i] for i in idx]
        gb = [pooled[i] for i in range(n) if i not in idx]
        return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in ga for y in gb)

    mu = na * (n - na) / 2.0
    observed = abs(u_of(tuple(range(na))) - mu)
    us = [abs(u_of(set(c)) - mu) for c in itertools.combinations(range(n), na)]
    return u_of(tuple(range(na))), sum(1 for u in us if u >= observed - 1e-9) / len(us)


def naive_metrics(pred, target):
    n, f = target.shape
    rmse, mae, r2 = [], [], []
    for j in range(f):
        se = sum((pred[t, j] - target[t, j]) ** 2 for t in range(n))
        ae = sum(abs(pred[t, j] - target[t, j]) for t in range(n))
        mean = sum(target[t, j] for t in range(n)) / n
        tot = sum((target[t, j] - mean) ** 2 for t in range(n))
        rmse.append(math.sqrt(se / n))
        mae.append(ae / n)
        r2.append(1 - se / tot if tot > 0 else float("nan"))
    ok = [v for v in r2 if not math.isnan(v)]
    return sum(rmse) / f, sum(mae) / f, (sum(ok) / len(ok) if ok else float("nan"))


def central_difference(f, arrays, h=1e-6):
    """Central finite differences of scalar ``f(arrays)`` w.r.t. every entry of every array."""
    grads = {}
    for name, a in arrays.items():
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            up = f(arrays)
            a[idx] = orig - h
            down = f(arrays)
            a[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def max_rel_err(a, b, floor=1e-8):
    """Largest |a-b| / max(|a|, |b|, floor) over all entries."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
