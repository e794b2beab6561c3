"""RMSE, MAE and R^2 between predicted and target force trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..signals import ForceTrajectory, check_same_grid

R2_UNDEFINED = "r2-undefined"
R2_PARTIAL = "r2-partial"


@dataclass
class MetricReport:
    rmse: float
    mae: float
    r2: float
    finger_rmse: np.ndarray = field(repr=False, default=None)
    finger_mae: np.ndarray = field(repr=False, default=None)
    finger_r2: np.ndarray = field(repr=False, default=None)
    flags: tuple[str, ...] = ()
    keys: dict = field(default_factory=dict)


def metrics(pred: ForceTrajectory, target: ForceTrajectory, keys: dict | None = None) -> MetricReport:
    """Per-finger metrics over the whole trial and their mean across fingers.

    R^2 is ``1 - SS_res / SS_tot`` per finger, with ``SS_tot`` about the
    target mean.  Fingers whose target is constant (the resting fingers of a
    single-finger task) have no defined R^2; they get NaN and the reported R^2
    averages the remaining fingers.  If every finger is constant, ``r2`` is NaN
    and flagged.
    """
    check_same_grid(pred.dt, target.dt)
    p, y = pred.values, target.values
    if p.shape != y.shape:
        raise ShapeError(f"prediction {p.shape} and target {y.shape} differ")
    err = p - y
    f_rmse = np.sqrt(np.mean(err * err, axis=0))
    f_mae = np.mean(np.abs(err), axis=0)
    ss_res = np.sum(err * err, axis=0)
    ss_tot = np.sum((y - y.mean(axis=0)) ** 2, axis=0)
    defined = ss_tot > 0
    f_r2 = np.full(y.shape[1], np.nan)
    f_r2[defined] = 1.0 - ss_res[defined] / ss_tot[defined]
    flags = []
    if not defined.any():
        flags.append(R2_UNDEFINED)
        r2 = float("nan")
    else:
        if not defined.all():
            flags.append(R2_PARTIAL)
        r2 = float(np.mean(f_r2[defined]))
    return MetricReport(float(f_rmse.mean()), float(f_mae.mean()), r2, f_rmse, f_mae, f_r2,
                        tuple(flags), dict(keys or {}))


def mean_report(reports, keys: dict | None = None) -> MetricReport:
    """Plain average of several reports (R^2 ignores undefined entries)."""
    reports = list(reports)
    r2 = np.array([r.r2 for r in reports], dtype=float)
    ok = np.isfinite(r2)
    return MetricReport(float(np.mean([r.rmse for r in reports])),
                        float(np.mean([r.mae for r in reports])),
                        float(r2[ok].mean()) if ok.any() else float("nan"),
                        flags=() if ok.any() else (R2_UNDEFINED,), keys=dict(keys or {}))
