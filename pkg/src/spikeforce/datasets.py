"""Plain-text dataset files, one per trial.

Layout (every section header on its own line)::

    spikeforce-dataset 1
    [metadata]
    subject S1
    direction flexion
    finger 0
    repetition 1
    dt 10
    n_steps 3000
    n_units 121
    [spikes]
    <step_index> <unit_id>          one event per line, sorted by step then unit
    [force]
    <f0> <f1> <f2> <f3> <f4>        one row per step
    [emg]                           optional, one row of 120 values per step
    [end]

Floats are written with 17 significant digits so files round-trip exactly.
Records are counted per section starting at 0; violations name the record
and the line it sits on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .signals import N_FINGERS, EmgBlock, ForceTrajectory, SpikeTrainSet

MAGIC = "spikeforce-dataset"
VERSION = 1
SUFFIX = ".sfd"
_META_INT = ("finger", "repetition", "n_steps", "n_units")
_META_REQUIRED = ("subject", "direction", "finger", "repetition", "dt", "n_steps", "n_units")


def trial_filename(subject: str, direction: str, finger: int, repetition: int) -> str:
    return f"{subject}_{direction}_f{finger}_r{repetition}{SUFFIX}"


def _fmt_rows(values: np.ndarray) -> str:
    return "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in values.tolist())


def write_trial(path, trial, include_emg: bool = False, extra_meta: dict | None = None) -> None:
    """Write one :class:`~spikeforce.synthgen.Trial` (or anything with the same fields)."""
    spikes, force = trial.spikes, trial.force
    meta = {
        "subject": trial.subject, "direction": trial.direction, "finger": trial.finger,
        "repetition": trial.repetition, "dt": f"{spikes.dt:.17g}", "n_steps": spikes.n_steps,
        "n_units": spikes.n_units,
    }
    meta.update(extra_meta or {})
    steps, units = spikes.events()
    parts = [f"{MAGIC} {VERSION}\n", "[metadata]\n"]
    parts += [f"{k} {v}\n" for k, v in meta.items()]
    parts.append("[spikes]\n")
    parts += [f"{s} {u}\n" for s, u in zip(steps.tolist(), units.tolist())]
    parts.append("[force]\n")
    parts.append(_fmt_rows(force.values))
    if include_emg and trial.emg is not None:
        parts.append("[emg]\n")
        parts.append(_fmt_rows(trial.emg.samples))
    parts.append("[end]\n")
    Path(path).write_text("".join(parts), encoding="utf-8")


@dataclass
class ParsedTrial:
    meta: dict
    spikes: SpikeTrainSet | None
    force: ForceTrajectory | None
    emg: EmgBlock | None
    violations: list[str] = field(default_factory=list)


def _parse(text: str, stop_at_first: bool) -> ParsedTrial:
    violations: list[str] = []

    def fail(msg, record=None, line=None):
        where = f"line {line}: " if line is not None else ""
        err = DatasetError(where + msg, record)
        if stop_at_first:
            raise err
        violations.append(str(err))

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        fail(f"first line must be '{MAGIC} {VERSION}'", line=1)
        return ParsedTrial({}, None, None, None, violations)
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    ended = False
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current == "end":
                ended = True
                break
            if current not in ("metadata", "spikes", "force", "emg"):
                fail(f"unknown section [{current}]", line=ln)
            if current in sections:
                fail(f"duplicate section [{current}]", line=ln)
            sections[current] = []
        elif current is None:
            fail("content before the first section header", line=ln)
        else:
            sections[current].append((ln, line))
    if not ended:
        fail("missing [end] marker", line=len(lines))
    for name in ("metadata", "spikes", "force"):
        if name not in sections:
            fail(f"missing [{name}] section")
    if violations or "metadata" not in sections:
        return ParsedTrial({}, None, None, None, violations)

    meta: dict = {}
    for k, (ln, line) in enumerate(sections["metadata"]):
        key, _, value = line.partition(" ")
        meta[key] = value.strip()
    for key in _META_REQUIRED:
        if key not in meta:
            fail(f"metadata is missing '{key}'")
    if violations:
        return ParsedTrial(meta, None, None, None, violations)
    try:
        for key in _META_INT:
            meta[key] = int(meta[key])
        meta["dt"] = float(meta["dt"])
    except ValueError as exc:
        fail(f"bad metadata value: {exc}")
        return ParsedTrial(meta, None, None, None, violations)
    n_steps, n_units, dt = meta["n_steps"], meta["n_units"], meta["dt"]
    if n_steps < 0 or n_units < 0 or not dt > 0:
        fail("metadata n_steps/n_units must be >= 0 and dt > 0")
        return ParsedTrial(meta, None, None, None, violations)

    raster = np.zeros((n_steps, n_units), dtype=bool)
    prev = (-1, -1)
    for k, (ln, line) in enumerate(sections["spikes"]):
        fields = line.split()
        try:
            step, unit = (int(f) for f in fields) if len(fields) == 2 else (None, None)
        except ValueError:
            step = None
        if step is None:
            fail("spike record must be '<step_index> <unit_id>'", k, ln)
            continue
        if not 0 <= step < n_steps:
            fail(f"step index {step} outside [0, {n_steps})", k, ln)
            continue
        if not 0 <= unit < n_units:
            fail(f"unit id {unit} outside [0, {n_units})", k, ln)
            continue
        if (step, unit) <= prev:
            fail(f"spike ({step}, {unit}) not sorted by step then unit, or duplicated", k, ln)
        prev = max(prev, (step, unit))
        raster[step, unit] = True

    force = _parse_matrix(sections["force"], n_steps, N_FINGERS, "force", fail)
    emg = None
    if "emg" in sections:
        rows = sections["emg"]
        width = len(rows[0][1].split()) if rows else 0
        emg = _parse_matrix(rows, n_steps, width, "emg", fail)
    if violations:
        return ParsedTrial(meta, None, None, None, violations)
    return ParsedTrial(meta, SpikeTrainSet(raster, dt), ForceTrajectory(force, dt),
                       EmgBlock(emg, dt) if emg is not None else None, violations)


def _parse_matrix(rows, n_steps: int, width: int, name: str, fail):
    if len(rows) != n_steps:
        fail(f"[{name}] has {len(rows)} rows, expected n_steps = {n_steps}")
        return None
    out = np.zeros((n_steps, width))
    for k, (ln, line) in enumerate(rows):
        fields = line.split()
        if len(fields) != width:
            fail(f"{name} row has {len(fields)} columns, expected {width}", k, ln)
            return None
        try:
            out[k] = [float(f) for f in fields]
        except ValueError:
            fail(f"{name} row is not numeric", k, ln)
            return None
        if not np.all(np.isfinite(out[k])):
            fail(f"{name} row contains non-finite values", k, ln)
            return None
    return out


def read_trial(path):
    """Load one dataset file as a :class:`~spikeforce.synthgen.Trial`; raises on the first violation."""
    from .synthgen import Trial

    parsed = _parse(Path(path).read_text(encoding="utf-8"), stop_at_first=True)
    m = parsed.meta
    return Trial(m["subject"], m["direction"], m["finger"], m["repetition"],
                 parsed.spikes, parsed.force, parsed.emg)


@dataclass
class ValidationReport:
    path: str
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(path) -> list[ValidationReport]:
    """Check one dataset file, or every ``*.sfd`` file in a directory."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path} does not exist")
    files = sorted(path.glob(f"*{SUFFIX}")) if path.is_dir() else [path]
    if path.is_dir() and not files:
        return [ValidationReport(str(path), [f"no *{SUFFIX} files found"])]
    reports = []
    for f in files:
        parsed = _parse(f.read_text(encoding="utf-8"), stop_at_first=False)
        reports.append(ValidationReport(str(f), parsed.violations))
    return reports


def write_dataset_dir(dataset, out_dir, include_emg: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for trial in dataset.trials:
        p = out / trial_filename(trial.subject, trial.direction, trial.finger, trial.repetition)
        write_trial(p, trial, include_emg, {"seed": dataset.seed})
        paths.append(p)
    return paths


def load_dataset_dir(path):
    """Read every trial file in ``path`` into a dataset (no unit pools attached)."""
    from .synthgen import SyntheticDataset

    files = sorted(Path(path).glob(f"*{SUFFIX}"))
    if not files:
        raise DatasetError(f"no *{SUFFIX} files in {path}")
    trials = [read_trial(f) for f in files]
    subjects = {t.subject for t in trials}
    if len(subjects) != 1:
        raise DatasetError(f"files mix subjects {sorted(subjects)}")
    for d in {t.direction for t in trials}:
        widths = {t.spikes.n_units for t in trials if t.direction == d}
        if len(widths) != 1:
            raise DatasetError(f"{d} trials disagree on unit count: {sorted(widths)}")
    trials.sort(key=lambda t: (t.direction != "flexion", t.finger, t.repetition))
    return SyntheticDataset(trials, {}, -1, subjects.pop())
