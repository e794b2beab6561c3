"""Command-line entry point.

Exit status: 0 on success, 1 on runtime failure (including dataset
violations found by ``validate``), 2 on invalid configuration or arguments.
"""
from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

from . import __version__
from .config import DECODERS, ExperimentConfig, load_config
from .errors import ConfigError, SpikeForceError

log = logging.getLogger("spikeforce")

PRESET_CHOICES = ("s1", "s2", "s1-flexion", "s1-extension", "s2-flexion", "s2-extension")
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return value


def _seed_list(text: str) -> tuple[int, ...]:
    return tuple(_seed(s) for s in text.split(",") if s.strip())


def _rates(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"rates must be comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, decoder: bool = True) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--seed", type=_seed, help="top-level seed (data generation, initialisation, omission)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--preset", choices=PRESET_CHOICES, help="synthetic subject preset, optionally one direction")
    p.add_argument("--data", type=Path, help="directory of dataset files instead of a synthetic preset")
    if decoder:
        p.add_argument("--decoder", choices=DECODERS, action="append",
                       help="decoding path (repeatable); default from config")
        p.add_argument("--seeds", type=_seed_list, help="comma-separated model replicate ids, e.g. 0,1,2")
        p.add_argument("--epochs", type=int, help="override training epochs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikeforce", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spikeforce {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full experiment: cross-validation, robustness, footprint, tables")
    _common(p)
    p.add_argument("--dry-run", action="store_true", help="validate the config and write the manifest only")

    p = sub.add_parser("generate", help="write a synthetic dataset (one file per trial)")
    _common(p, decoder=False)
    p.add_argument("--emg", action="store_true", help="include the surrogate iEMG section")

    p = sub.add_parser("train", help="train decoders on one repetition and save them")
    _common(p)
    p.add_argument("--train-rep", type=int, choices=(1, 2), default=1)

    p = sub.add_parser("evaluate", help="evaluate saved models on the held-out repetition")
    _common(p, decoder=False)
    p.add_argument("--model", type=Path, action="append", required=True, help="model file (repeatable)")
    p.add_argument("--test-rep", type=int, choices=(1, 2), default=2)

    p = sub.add_parser("robustness", help="evaluate saved models under random spike omission")
    _common(p, decoder=False)
    p.add_argument("--model", type=Path, action="append", required=True)
    p.add_argument("--test-rep", type=int, choices=(1, 2), default=2)
    p.add_argument("--rates", type=_rates, default=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5))

    p = sub.add_parser("footprint", help="parameter counts, memory and latency per decoder")
    _common(p)
    p.add_argument("--model", type=Path, action="append", help="count nonzero entries of saved models")

    p = sub.add_parser("report", help="render summary tables from a run directory")
    p.add_argument("run_dir", type=Path)

    p = sub.add_parser("validate", help="check dataset files against the format")
    p.add_argument("path", type=Path)
    return parser


# --------------------------------------------------------------------------
# config assembly

def experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    changes: dict = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "seeds", None):
        changes["seeds"] = args.seeds
    if getattr(args, "decoder", None):
        changes["decoders"] = tuple(dict.fromkeys(args.decoder))
    dataset = {}
    if getattr(args, "preset", None):
        subject, _, direction = args.preset.partition("-")
        dataset["preset"] = subject.upper()
        dataset["path"] = None
        if direction:
            dataset["directions"] = (direction,)
    if getattr(args, "data", None):
        dataset["path"] = str(args.data)
    if dataset:
        changes["dataset"] = dataset
    if getattr(args, "epochs", None) is not None:
        if args.epochs < 1:
            raise ConfigError("--epochs must be >= 1")
        changes["train"] = {"epochs": args.epochs}
    if getattr(args, "out", None) is not None:
        changes["output"] = {"dir": str(args.out)}
    return cfg.replace(**changes)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# commands

def cmd_run(args) -> int:
    from .report import report_tables
    from .runner import run_experiment

    cfg = experiment_config(args)
    out = _out_dir(cfg)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    log.addHandler(handler)
    try:
        result = run_experiment(cfg, out, dry_run=args.dry_run)
    finally:
        log.removeHandler(handler)
        handler.close()
    if args.dry_run:
        print(f"config valid; manifest written to {out / 'manifest.json'}")
    else:
        print(report_tables(out), end="")
        print(f"{len(result.artifacts)} artifacts in {out}")
    return 0


def cmd_generate(args) -> int:
    from .synthgen import SynthConfig, build_dataset

    cfg = experiment_config(args)
    if cfg.dataset.path and not args.preset:
        raise ConfigError("generate writes synthetic data; --data is not accepted here")
    d = cfg.dataset
    synth = SynthConfig(preset=d.preset, directions=d.directions, fingers=d.fingers, isi_cov=d.isi_cov,
                        common_drive_sd=d.common_drive_sd, gain_jitter=d.gain_jitter, emg=args.emg,
                        emg_noise_sd=d.emg_noise_sd)
    out = _out_dir(cfg)
    data = build_dataset(synth, seed=cfg.seed, out_dir=out, write_emg=args.emg)
    print(f"wrote {len(data.trials)} trials ({data.unit_counts()}) to {out}")
    return 0


def cmd_train(args) -> int:
    from .encoding import EncoderConfig
    from .evaluation.crossval import fit_model, trial_inputs
    from .modelio import save_model
    from .runner import LOSS_COLUMNS, csv_text, encoder_config, load_data, run_spec

    cfg = experiment_config(args)
    out = _out_dir(cfg)
    data = load_data(cfg)
    encoder = encoder_config(cfg, data) if "encoded-li" in cfg.decoders else EncoderConfig()
    rows = []
    for decoder in cfg.decoders:
        spec = run_spec(cfg, decoder, encoder)
        for direction in data.directions:
            trials = data.select(direction=direction, repetition=args.train_rep)
            pairs = [(trial_inputs(t, spec), t.force) for t in trials]
            seeds = cfg.seeds[:1] if decoder == "baseline" else cfg.seeds
            for s in seeds:
                model, losses = fit_model(spec, pairs, s, (direction, 3 - args.train_rep), cfg.seed)
                path = out / f"{decoder}_{direction}_train{args.train_rep}_seed{s}.sfm"
                save_model(model, path, {"decoder": decoder, "direction": direction,
                                         "train_repetition": args.train_rep, "seed": s})
                rows += [(decoder, direction, 3 - args.train_rep, s, e + 1, v) for e, v in enumerate(losses)]
                print(f"saved {path}" + (f" (final loss {losses[-1]:.4g})" if losses else ""))
    if rows:
        (out / "loss_curves.csv").write_text(csv_text(LOSS_COLUMNS, rows))
    return 0


def _load_models(paths):
    from .baseline import LinearModel
    from .modelio import load_model, model_meta

    out = []
    for p in paths:
        model = load_model(p)
        default = "baseline" if isinstance(model, LinearModel) else model.kind
        out.append((p, model_meta(p).get("decoder", default), model))
    return out


def _matching_trials(data, model, decoder, rep):
    from .signals import N_CHANNELS

    n_in = model.n_features if decoder == "baseline" else model.input_dim
    trials = []
    for d in data.directions:
        sel = data.select(direction=d, repetition=rep)
        width = N_CHANNELS if decoder == "encoded-li" else sel[0].spikes.n_units
        if sel and width == n_in:
            trials = sel
            break
    if not trials:
        raise ConfigError(f"no direction in the dataset has {n_in} inputs for this {decoder} model")
    return trials


def cmd_evaluate(args) -> int:
    from .evaluation import RunSpec, metrics
    from .evaluation.crossval import predict_trial, trial_inputs
    from .runner import METRIC_COLUMNS, csv_text, encoder_config, load_data

    cfg = experiment_config(args)
    data = load_data(cfg.replace(decoders=("encoded-li",)))
    encoder = encoder_config(cfg, data)
    rows = []
    for path, decoder, model in _load_models(args.model):
        spec = RunSpec(decoder, encoder=encoder)
        for t in _matching_trials(data, model, decoder, args.test_rep):
            m = metrics(predict_trial(model, trial_inputs(t, spec), spec), t.force)
            rows.append((decoder, t.direction, t.finger, t.repetition, path.stem, m.rmse, m.mae, m.r2))
    text = csv_text(METRIC_COLUMNS[:4] + ("model",) + METRIC_COLUMNS[5:], rows)
    if args.out:
        out = _out_dir(cfg)
        (out / "metrics.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_robustness(args) -> int:
    from .evaluation import RunSpec, metrics, omit_spikes
    from .evaluation.crossval import predict_trial, trial_inputs
    from .rng import substream
    from .runner import ROBUST_COLUMNS, csv_text, encoder_config, load_data

    cfg = experiment_config(args)
    if any(not 0 <= r <= 1 for r in args.rates):
        raise ConfigError("--rates must lie in [0, 1]")
    data = load_data(cfg.replace(decoders=("encoded-li",)))
    encoder = encoder_config(cfg, data)
    rows = []
    for path, decoder, model in _load_models(args.model):
        spec = RunSpec(decoder, encoder=encoder)
        for t in _matching_trials(data, model, decoder, args.test_rep):
            clean = trial_inputs(t, spec)
            for rate in args.rates:
                rng = substream(cfg.seed, "omission", t.direction, t.finger, t.repetition)
                m = metrics(predict_trial(model, omit_spikes(clean, rate, rng), spec), t.force)
                rows.append((decoder, rate, t.direction, t.finger, t.repetition, path.stem, m.rmse, m.mae, m.r2))
    text = csv_text(ROBUST_COLUMNS[:5] + ("model",) + ROBUST_COLUMNS[6:], rows)
    if args.out:
        (_out_dir(cfg) / "robustness.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_footprint(args) -> int:
    from .evaluation import footprint
    from .report import footprint_table
    from .runner import FOOTPRINT_COLUMNS, csv_text
    from .signals import N_CHANNELS
    from .synthgen import get_preset

    cfg = experiment_config(args)
    rows = []
    if args.model:
        for path, decoder, model in _load_models(args.model):
            n_in = model.n_features if decoder == "baseline" else model.input_dim
            fp = footprint(decoder, n_in, model=model)
            rows.append((decoder, path.stem, *_fp_cells(fp)))
    else:
        preset = get_preset(cfg.dataset.preset)
        for decoder in cfg.decoders:
            for d in cfg.dataset.directions:
                n_in = N_CHANNELS if decoder == "encoded-li" else preset.directions[d].n_units
                rows.append((decoder, d, *_fp_cells(footprint(decoder, n_in))))
    text = csv_text(FOOTPRINT_COLUMNS, rows)
    if args.out:
        (_out_dir(cfg) / "footprint.csv").write_text(text)
    print(footprint_table([dict(zip(FOOTPRINT_COLUMNS, map(str, r))) for r in rows]))
    return 0


def _fp_cells(fp):
    return (fp.n_inputs, fp.total_params, fp.trainable_params, fp.nonzero_params, fp.parameter_memory,
            fp.decomposition_memory, fp.latency_ms, fp.total_params_full,
            "" if fp.trained_nonzero is None else fp.trained_nonzero)


def cmd_report(args) -> int:
    from .report import report_tables
    print(report_tables(args.run_dir), end="")
    return 0


def cmd_validate(args) -> int:
    from .datasets import validate_dataset

    reports = validate_dataset(args.path)
    bad = 0
    for r in reports:
        if r.ok:
            print(f"ok       {r.path}")
        else:
            bad += 1
            print(f"INVALID  {r.path}")
            for v in r.violations:
                print(f"  {v}")
    print(f"{len(reports) - bad}/{len(reports)} files valid")
    return 1 if bad else 0


COMMANDS = {"run": cmd_run, "generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate,
            "robustness": cmd_robustness, "footprint": cmd_footprint, "report": cmd_report,
            "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format=LOG_FORMAT,
                        stream=sys.stderr)
    log.setLevel(logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SpikeForceError, OSError) as exc:
        log.error("%s failed: %s", args.command, exc)
        log.debug("%s", traceback.format_exc())
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
