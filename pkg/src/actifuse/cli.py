"""Command-line entry point.

Subcommands: extract, train, classify, evaluate, synth, compare. Options can
come from a JSON config file (--config) with command-line flags taking
precedence. Outputs are written atomically (temp file + rename) and contain
no timestamps, so a rerun with identical inputs produces byte-identical
files.

Exit codes: 0 success, 1 missing/invalid configuration, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from .evaluate import (compare_modalities, comparison_table, evaluate,
                       write_reports_csv, write_reports_json, write_timeline)
from .features import write_feature_csv
from .fusion import fuse
from .ingest import (SyncConfig, apply_sync, decode_audio, decode_kinematic,
                     encode_audio, read_annotations, write_annotations,
                     write_kinematic_csv)
from .pipeline import (ActivityModel, PipelineParams, classify_pipeline,
                       extract_matrices, train_pipeline)
from .smoothing import STAGES
from .svm import (TrainingSelection, select_training_rows,
                  training_selection_from_annotations)
from .synth import SynthSpec, synth_recording


class UsageError(Exception):
    """Missing or invalid configuration; maps to exit code 1."""


@contextmanager
def _atomic(path: Path):
    """Yield a temp path that is renamed onto `path` on success."""
    tmp = path.with_name(path.name + ".tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError(f"missing required field(s): {', '.join(missing)}")


def _input_path(cfg: dict, key: str) -> Path:
    path = Path(cfg[key])
    if not path.exists():
        raise UsageError(f"{key} path does not exist: {path}")
    return path


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_streams(cfg: dict):
    audio = decode_audio(_input_path(cfg, "audio"))
    kin = decode_kinematic(_input_path(cfg, "kinematic"))
    kin = apply_sync(kin, SyncConfig(float(cfg["sync_offset_s"])))
    return audio, kin


def _pipeline_params(cfg: dict) -> PipelineParams:
    try:
        return PipelineParams(
            modality=cfg["modality"],
            C=float(cfg["c"]),
            kernel=cfg["kernel"],
            gamma=None if cfg["gamma"] is None else float(cfg["gamma"]),
            tol=float(cfg["tol"]),
            max_passes=int(cfg["max_passes"]),
            swf_window=int(cfg["swf_window"]),
            bwf_window=int(cfg["bwf_window"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _training_selection(cfg: dict, annotations) -> TrainingSelection:
    if cfg.get("major_periods") or cfg.get("minor_periods"):
        if not (cfg.get("major_periods") and cfg.get("minor_periods")):
            raise UsageError("config must give both major_periods and minor_periods")
        return TrainingSelection(tuple(tuple(p) for p in cfg["major_periods"]),
                                 tuple(tuple(p) for p in cfg["minor_periods"]))
    return training_selection_from_annotations(
        annotations, per_class=int(cfg["train_per_class"]),
        truncate_s=float(cfg["train_truncate_s"]))


def _load_model(cfg: dict) -> ActivityModel:
    _require(cfg, "model")
    model_path = _input_path(cfg, "model")
    std_path = Path(cfg["standardizer"]) if cfg.get("standardizer") \
        else model_path.with_name("standardizer.json")
    if not std_path.exists():
        raise UsageError(f"standardizer path does not exist: {std_path}")
    return ActivityModel.load(model_path, std_path)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(cfg: dict) -> int:
    _require(cfg, "duration_s", "seed")
    spec = SynthSpec(
        duration_s=float(cfg["duration_s"]),
        seed=int(cfg["seed"]),
        audio_snr_db=float(cfg["audio_snr_db"]),
        kin_snr_db=float(cfg["kin_snr_db"]),
        audio_confusability=float(cfg["audio_confusability"]),
        kin_confusability=float(cfg["kin_confusability"]),
    )
    audio, kin, track = synth_recording(spec)
    out = _out_dir(cfg)
    with _atomic(out / "audio.wav") as tmp:
        encode_audio(tmp, audio, sample_format="pcm16")
    with _atomic(out / "kinematic.csv") as tmp:
        write_kinematic_csv(tmp, kin)
    with _atomic(out / "annotations.csv") as tmp:
        write_annotations(tmp, track)
    print(f"wrote audio.wav, kinematic.csv, annotations.csv to {out}")
    return 0


def cmd_extract(cfg: dict) -> int:
    _require(cfg, "audio", "kinematic")
    audio, kin = _load_streams(cfg)
    grid, audio_fm, kin_fm = extract_matrices(audio, kin)
    out = _out_dir(cfg)
    for name, fm in (("audio", audio_fm), ("kinematic", kin_fm),
                     ("fused", fuse(audio_fm, kin_fm))):
        with _atomic(out / f"features_{name}.csv") as tmp:
            write_feature_csv(tmp, fm, grid)
    print(f"wrote features for {grid.n_segments} segments to {out}")
    return 0


def cmd_train(cfg: dict) -> int:
    _require(cfg, "audio", "kinematic", "annotations")
    audio, kin = _load_streams(cfg)
    annotations = read_annotations(_input_path(cfg, "annotations"))
    try:
        selection = _training_selection(cfg, annotations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = _pipeline_params(cfg)
    model, stages, grid = train_pipeline(audio, kin, selection, params)
    out = _out_dir(cfg)
    with _atomic(out / "model.json") as tmp_model, \
            _atomic(out / "standardizer.json") as tmp_std:
        model.save(tmp_model, tmp_std)
    with _atomic(out / "timeline.csv") as tmp:
        write_timeline(tmp, stages, grid, annotations)
    status = "converged" if model.svm.converged else "NOT converged"
    print(f"trained {params.modality} model ({model.svm.n_support} support vectors, "
          f"{status}); wrote model.json, standardizer.json, timeline.csv to {out}")
    return 0


def cmd_classify(cfg: dict) -> int:
    _require(cfg, "audio", "kinematic")
    model = _load_model(cfg)
    audio, kin = _load_streams(cfg)
    annotations = (read_annotations(_input_path(cfg, "annotations"))
                   if cfg.get("annotations") else None)
    stages, grid = classify_pipeline(model, audio, kin)
    out = _out_dir(cfg)
    with _atomic(out / "timeline.csv") as tmp:
        write_timeline(tmp, stages, grid, annotations)
    print(f"classified {grid.n_segments} segments; wrote timeline.csv to {out}")
    return 0


def cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "audio", "kinematic", "annotations")
    model = _load_model(cfg)
    audio, kin = _load_streams(cfg)
    annotations = read_annotations(_input_path(cfg, "annotations"))
    stages, grid = classify_pipeline(model, audio, kin)
    rows, _ = select_training_rows(grid, model.training)
    reports = [evaluate(stages.stage(s), annotations, grid, exclude_training=rows,
                        stage=s, modality=model.modality) for s in STAGES]
    out = _out_dir(cfg)
    with _atomic(out / "report.json") as tmp:
        write_reports_json(tmp, reports)
    for r in reports:
        print(f"{r.stage:>4}: accuracy {r.accuracy:.4f} on {r.n_eval_segments} segments")
    return 0


def cmd_compare(cfg: dict) -> int:
    _require(cfg, "audio", "kinematic", "annotations")
    audio, kin = _load_streams(cfg)
    annotations = read_annotations(_input_path(cfg, "annotations"))
    try:
        selection = _training_selection(cfg, annotations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = _pipeline_params(cfg)
    reports, details, grid = compare_modalities(audio, kin, annotations, selection,
                                                params)
    out = _out_dir(cfg)
    with _atomic(out / "comparison.json") as tmp:
        write_reports_json(tmp, reports)
    with _atomic(out / "comparison.csv") as tmp:
        write_reports_csv(tmp, reports)
    table = comparison_table(reports)
    with _atomic(out / "comparison.txt") as tmp:
        tmp.write_text(table)
    for modality, (_, stages) in details.items():
        with _atomic(out / f"timeline_{modality}.csv") as tmp:
            write_timeline(tmp, stages, grid, annotations)
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

_COMMON_DEFAULTS = {
    "out_dir": ".",
    "sync_offset_s": 0.0,
    "modality": "fused",
    "seed": 42,
}

_PIPELINE_DEFAULTS = {
    "c": 1.0,
    "kernel": "linear",
    "gamma": None,
    "tol": 1e-3,
    "max_passes": 200,
    "swf_window": 2,
    "bwf_window": 6,
    "train_per_class": 4,
    "train_truncate_s": 6.0,
    "major_periods": None,
    "minor_periods": None,
}

_SYNTH_DEFAULTS = {
    "duration_s": 600.0,
    "audio_snr_db": 20.0,
    "kin_snr_db": 20.0,
    "audio_confusability": 0.0,
    "kin_confusability": 0.0,
}

_PATH_DEFAULTS = {
    "audio": None,
    "kinematic": None,
    "annotations": None,
    "model": None,
    "standardizer": None,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--modality", choices=("audio", "kinematic", "fused"))
    p.add_argument("--sync-offset-s", dest="sync_offset_s", type=float,
                   help="seconds added to kinematic time to align with audio")


def _add_paths(p: argparse.ArgumentParser, *names: str) -> None:
    for name in names:
        p.add_argument(f"--{name}", dest=name)


def _add_pipeline(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", dest="c", type=float, help="SVM soft-margin C")
    p.add_argument("--kernel", choices=("linear", "rbf"))
    p.add_argument("--gamma", type=float, help="RBF gamma (default 1/n_features)")
    p.add_argument("--tol", type=float, help="SMO KKT tolerance")
    p.add_argument("--max-passes", dest="max_passes", type=int)
    p.add_argument("--swf-window", dest="swf_window", type=int)
    p.add_argument("--bwf-window", dest="bwf_window", type=int)
    p.add_argument("--train-per-class", dest="train_per_class", type=int,
                   help="labeled periods per class taken from annotations")
    p.add_argument("--train-truncate-s", dest="train_truncate_s", type=float,
                   help="cap on each training period's duration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actifuse",
        description="Recognize major/minor construction-equipment activity from "
                    "fused audio and kinematic recordings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic recording")
    _add_common(p)
    p.add_argument("--duration-s", dest="duration_s", type=float)
    p.add_argument("--audio-snr-db", dest="audio_snr_db", type=float)
    p.add_argument("--kin-snr-db", dest="kin_snr_db", type=float)
    p.add_argument("--audio-confusability", dest="audio_confusability", type=float)
    p.add_argument("--kin-confusability", dest="kin_confusability", type=float)
    p.set_defaults(func=cmd_synth, defaults={**_COMMON_DEFAULTS, **_SYNTH_DEFAULTS})

    p = sub.add_parser("extract", help="write per-segment feature CSVs")
    _add_common(p)
    _add_paths(p, "audio", "kinematic")
    p.set_defaults(func=cmd_extract, defaults={**_COMMON_DEFAULTS, **_PATH_DEFAULTS})

    p = sub.add_parser("train", help="train a model on labeled periods")
    _add_common(p)
    _add_paths(p, "audio", "kinematic", "annotations")
    _add_pipeline(p)
    p.set_defaults(func=cmd_train,
                   defaults={**_COMMON_DEFAULTS, **_PATH_DEFAULTS, **_PIPELINE_DEFAULTS})

    p = sub.add_parser("classify", help="label a recording with a trained model")
    _add_common(p)
    _add_paths(p, "audio", "kinematic", "annotations", "model", "standardizer")
    p.set_defaults(func=cmd_classify, defaults={**_COMMON_DEFAULTS, **_PATH_DEFAULTS})

    p = sub.add_parser("evaluate", help="score a trained model against annotations")
    _add_common(p)
    _add_paths(p, "audio", "kinematic", "annotations", "model", "standardizer")
    p.set_defaults(func=cmd_evaluate, defaults={**_COMMON_DEFAULTS, **_PATH_DEFAULTS})

    p = sub.add_parser("compare", help="audio vs kinematic vs fused comparison")
    _add_common(p)
    _add_paths(p, "audio", "kinematic", "annotations")
    _add_pipeline(p)
    p.set_defaults(func=cmd_compare,
                   defaults={**_COMMON_DEFAULTS, **_PATH_DEFAULTS, **_PIPELINE_DEFAULTS})
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    merged = dict(args.defaults)
    if args.config:
        config_path = Path(args.config)
        if not config_path.exists():
            raise UsageError(f"config file does not exist: {config_path}")
        try:
            with open(config_path) as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        unknown = set(file_cfg) - set(merged)
        if unknown:
            raise UsageError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        merged.update(file_cfg)
    for key in merged:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return args.func(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run `actifuse {args.command} --help` for usage", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
