"""Scoring against annotations and the per-modality comparison experiment.

Accuracy is segment-level: every 120 ms tile fully covered by an annotation
interval is one trial. Segments used for training are excluded from
evaluation by default, mirroring the train-on-few-periods / test-on-the-rest
protocol. The comparison experiment runs the identical pipeline three times
(audio-only, kinematic-only, fused) and reports all four smoothing stages
for each, which is what demonstrates the value of fusing the modalities.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .features import SegmentGrid
from .ingest import AnnotationTrack, AudioStream, KinematicStream
from .labels import MAJOR, MINOR, LabelSequence, label_name
from .pipeline import MODALITIES, PipelineParams, modality_matrix, train_on_features
from .pipeline import extract_matrices
from .smoothing import STAGES, StageLabels
from .svm import TrainingSelection, select_training_rows

NO_TRUTH = -1


@dataclass(frozen=True)
class EvalReport:
    """Segment-level scores of one (modality, stage) pair."""

    modality: str
    stage: str
    accuracy: float
    per_class_recall: dict
    confusion: np.ndarray  # [truth][pred], indexed by label value
    n_eval_segments: int

    def to_dict(self) -> dict:
        return {
            "modality": self.modality,
            "stage": self.stage,
            "accuracy": self.accuracy,
            "per_class_recall": dict(self.per_class_recall),
            # rows = truth, cols = predicted, in (minor, major) label order
            "confusion": self.confusion.astype(int).tolist(),
            "n_eval_segments": self.n_eval_segments,
        }


def segment_truth(grid: SegmentGrid, track: AnnotationTrack) -> np.ndarray:
    """Per-segment truth labels; NO_TRUTH where no interval fully covers."""
    eps = 1e-9
    seg = grid.segment_s
    truth = np.full(grid.n_segments, NO_TRUTH, dtype=np.int64)
    for start, end, label in track.intervals:
        first = int(np.ceil(start / seg - eps))
        last_excl = int(np.floor(end / seg + eps))
        truth[max(first, 0):min(last_excl, grid.n_segments)] = label
    return truth


def evaluate(pred: LabelSequence, truth: AnnotationTrack, grid: SegmentGrid,
             exclude_training=None, stage: str = "raw",
             modality: str = "fused") -> EvalReport:
    """Score predictions on annotated segments outside the training rows.

    Recall of a class absent from the evaluated truth is reported as 0.0 by
    convention.
    """
    truth_seg = segment_truth(grid, track=truth)
    mask = truth_seg != NO_TRUTH
    if exclude_training is not None and len(exclude_training):
        mask[np.asarray(exclude_training, dtype=np.int64)] = False
    n_eval = int(mask.sum())
    if n_eval == 0:
        raise ValueError("no evaluable segments: annotations cover nothing "
                         "outside the excluded training rows")

    t = truth_seg[mask]
    p = pred.labels[mask]
    confusion = np.zeros((2, 2), dtype=np.int64)
    for i in (MINOR, MAJOR):
        for j in (MINOR, MAJOR):
            confusion[i, j] = np.count_nonzero((t == i) & (p == j))
    accuracy = float(np.trace(confusion) / n_eval)
    recall = {}
    for lab in (MAJOR, MINOR):
        n_lab = int(confusion[lab].sum())
        recall[label_name(lab)] = float(confusion[lab, lab] / n_lab) if n_lab else 0.0
    return EvalReport(modality=modality, stage=stage, accuracy=accuracy,
                      per_class_recall=recall, confusion=confusion,
                      n_eval_segments=n_eval)


def compare_modalities(audio: AudioStream, kin: KinematicStream,
                       annotations: AnnotationTrack, selection: TrainingSelection,
                       params: PipelineParams | None = None) -> tuple:
    """Run the pipeline per modality with identical training selection.

    Returns (reports, details, grid): 3 modalities x 4 stages EvalReports in
    a fixed order, plus per-modality (model, stages) for export. Features
    are extracted once and sliced per modality, which is equivalent to three
    independent runs because extraction is deterministic.
    """
    params = params or PipelineParams()
    grid, audio_fm, kin_fm = extract_matrices(audio, kin)
    rows, _ = select_training_rows(grid, selection)
    reports, details = [], {}
    for modality in MODALITIES:
        fm = modality_matrix(audio_fm, kin_fm, modality)
        model, stages = train_on_features(fm, grid, selection,
                                          params.with_modality(modality))
        details[modality] = (model, stages)
        for stage in STAGES:
            reports.append(evaluate(stages.stage(stage), annotations, grid,
                                    exclude_training=rows, stage=stage,
                                    modality=modality))
    return reports, details, grid


def comparison_table(reports) -> str:
    """Aligned-column text table, modalities as rows and stages as columns."""
    by_key = {(r.modality, r.stage): r for r in reports}
    stages = [s for s in STAGES if any(k[1] == s for k in by_key)]
    modalities = [m for m in MODALITIES if any(k[0] == m for k in by_key)]
    header = ["modality"] + [f"acc_{s}" for s in stages] + ["n_eval"]
    rows = [header]
    for m in modalities:
        cells = [m]
        for s in stages:
            r = by_key.get((m, s))
            cells.append(f"{r.accuracy:.4f}" if r else "-")
        any_r = next(r for (mm, _), r in by_key.items() if mm == m)
        cells.append(str(any_r.n_eval_segments))
        rows.append(cells)
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


def write_reports_json(path, reports) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)
        fh.write("\n")


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["modality", "stage", "accuracy", "recall_major",
                         "recall_minor", "n_eval_segments"])
        for r in reports:
            writer.writerow([r.modality, r.stage, repr(r.accuracy),
                             repr(r.per_class_recall["major"]),
                             repr(r.per_class_recall["minor"]),
                             r.n_eval_segments])


def write_timeline(path, stages: StageLabels, grid: SegmentGrid,
                   annotations: AnnotationTrack | None = None) -> None:
    """Per-segment stage outputs as CSV; truth column only with annotations.

    Segments not fully covered by any annotation interval get an empty truth
    cell.
    """
    truth = segment_truth(grid, annotations) if annotations is not None else None
    centers = grid.centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["segment_index", "t_center_s", "raw", "swf", "bwf", "mcf"]
        if truth is not None:
            header.append("truth")
        writer.writerow(header)
        for k in range(grid.n_segments):
            row = [k, repr(float(centers[k]))]
            row += [label_name(stages.stage(s).labels[k]) for s in STAGES]
            if truth is not None:
                row.append(label_name(truth[k]) if truth[k] != NO_TRUTH else "")
            writer.writerow(row)
