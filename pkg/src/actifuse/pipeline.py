"""End-to-end wiring: features -> fusion -> SVM -> smoothing.

A trained bundle carries everything classification needs beyond the raw
recordings: the fitted standardizer, the SVM with its Platt calibration,
the transition model for the Markov chain filter (estimated once, at
training time, from the BWF-stage predictions over the training periods),
and the filter windows. Bundles serialize to a pair of JSON files so runs
are reproducible artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .features import FeatureMatrix, SegmentGrid, extract_segment_features
from .fusion import Standardizer, fit_standardizer, fuse, standardize
from .ingest import AudioStream, KinematicStream
from .labels import LabelSequence
import numpy as np

from .smoothing import (BWF_WINDOW, SWF_WINDOW, StageLabels, TransitionModel,
                        estimate_transitions_pooled, smooth_stages, window_filter)
from .svm import (SvmModel, TrainingSelection, decision_values, fit_platt,
                  predict, probabilities, select_training_rows, train_svm)

MODALITIES = ("audio", "kinematic", "fused")


@dataclass(frozen=True)
class PipelineParams:
    """Knobs of one training/classification run."""

    modality: str = "fused"
    C: float = 1.0
    kernel: str = "linear"
    gamma: float | None = None
    tol: float = 1e-3
    max_passes: int = 200
    swf_window: int = SWF_WINDOW
    bwf_window: int = BWF_WINDOW

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}")

    def with_modality(self, modality: str) -> "PipelineParams":
        return replace(self, modality=modality)


@dataclass
class ActivityModel:
    """Everything needed to score new recordings of the same setup."""

    modality: str
    standardizer: Standardizer
    svm: SvmModel
    transitions: TransitionModel
    training: TrainingSelection
    swf_window: int = SWF_WINDOW
    bwf_window: int = BWF_WINDOW

    def to_dict(self) -> dict:
        d = self.svm.to_dict()
        d["modality"] = self.modality
        d["transitions"] = self.transitions.to_dict()
        d["training_periods"] = self.training.to_dict()
        d["swf_window"] = self.swf_window
        d["bwf_window"] = self.bwf_window
        return d

    @classmethod
    def from_dict(cls, d: dict, standardizer: Standardizer) -> "ActivityModel":
        return cls(
            modality=d["modality"],
            standardizer=standardizer,
            svm=SvmModel.from_dict(d),
            transitions=TransitionModel.from_dict(d["transitions"]),
            training=TrainingSelection.from_dict(d["training_periods"]),
            swf_window=int(d.get("swf_window", SWF_WINDOW)),
            bwf_window=int(d.get("bwf_window", BWF_WINDOW)),
        )

    def save(self, model_path, standardizer_path) -> None:
        with open(model_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
        self.standardizer.save(standardizer_path)

    @classmethod
    def load(cls, model_path, standardizer_path) -> "ActivityModel":
        with open(model_path) as fh:
            d = json.load(fh)
        return cls.from_dict(d, Standardizer.load(standardizer_path))


def modality_matrix(audio_fm: FeatureMatrix, kin_fm: FeatureMatrix,
                    modality: str) -> FeatureMatrix:
    if modality == "audio":
        return audio_fm
    if modality == "kinematic":
        return kin_fm
    if modality == "fused":
        return fuse(audio_fm, kin_fm)
    raise ValueError(f"modality must be one of {MODALITIES}")


def extract_matrices(audio: AudioStream, kin: KinematicStream) -> tuple:
    """Grid plus both per-modality feature matrices."""
    grid = SegmentGrid.from_durations(audio.duration_s, kin.duration_s)
    audio_fm, kin_fm = extract_segment_features(audio, kin, grid)
    return grid, audio_fm, kin_fm


def _score(svm: SvmModel, z: FeatureMatrix) -> LabelSequence:
    scores = decision_values(svm, z.values)
    return LabelSequence(labels=predict(svm, z.values),
                         scores=scores,
                         probs=probabilities(svm, z.values))


def train_on_features(fm: FeatureMatrix, grid: SegmentGrid, selection: TrainingSelection,
                      params: PipelineParams) -> tuple:
    """Train a bundle on one feature matrix; returns (model, stage labels).

    Transition probabilities for the Markov chain filter come from the
    BWF-stage predictions over the training-period segments (counted within
    each contiguous period, never across the gaps between periods), so a
    saved bundle can smooth recordings that ship without annotations.
    """
    rows, y = select_training_rows(grid, selection)
    standardizer = fit_standardizer(fm, rows)
    z = standardize(fm, standardizer)
    svm = train_svm(z.values[rows], y, C=params.C, kernel=params.kernel,
                    gamma=params.gamma, tol=params.tol, max_passes=params.max_passes)
    svm.feature_names = fm.names

    svm.platt_a, svm.platt_b = fit_platt(decision_values(svm, z.values[rows]), y)

    raw = _score(svm, z)
    bwf_pre = window_filter(window_filter(raw, params.swf_window), params.bwf_window)
    label_blocks = np.split(bwf_pre.labels[rows], np.where(np.diff(rows) > 1)[0] + 1)
    transitions = estimate_transitions_pooled(label_blocks)

    model = ActivityModel(modality=params.modality, standardizer=standardizer, svm=svm,
                          transitions=transitions, training=selection,
                          swf_window=params.swf_window, bwf_window=params.bwf_window)
    stages = smooth_stages(raw, transitions, params.swf_window, params.bwf_window)
    return model, stages


def train_pipeline(audio: AudioStream, kin: KinematicStream, selection: TrainingSelection,
                   params: PipelineParams) -> tuple:
    """Full training run from decoded streams; returns (model, stages, grid)."""
    grid, audio_fm, kin_fm = extract_matrices(audio, kin)
    fm = modality_matrix(audio_fm, kin_fm, params.modality)
    model, stages = train_on_features(fm, grid, selection, params)
    return model, stages, grid


def score_features(model: ActivityModel, fm: FeatureMatrix) -> StageLabels:
    """Score a feature matrix with a trained bundle and smooth all stages."""
    if fm.names != tuple(model.svm.feature_names or ()):
        raise ValueError("feature names do not match the trained model; "
                         f"check the modality (model expects {model.modality})")
    z = standardize(fm, model.standardizer)
    raw = _score(model.svm, z)
    return smooth_stages(raw, model.transitions, model.swf_window, model.bwf_window)


def classify_pipeline(model: ActivityModel, audio: AudioStream,
                      kin: KinematicStream) -> tuple:
    """Classify decoded streams with a trained bundle; returns (stages, grid)."""
    grid, audio_fm, kin_fm = extract_matrices(audio, kin)
    fm = modality_matrix(audio_fm, kin_fm, model.modality)
    return score_features(model, fm), grid
