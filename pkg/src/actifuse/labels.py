"""Binary activity labels shared across the pipeline.

Major activities are the value-adding ones (digging, drilling, lifting);
minor activities are the supporting motions (cabin rotation, maneuvering).
Labels are small ints so they can live in numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

MINOR = 0
MAJOR = 1

_NAMES = {MINOR: "minor", MAJOR: "major"}
_VALUES = {"minor": MINOR, "major": MAJOR}


def label_name(label: int) -> str:
    return _NAMES[int(label)]


def label_value(name: str) -> int:
    try:
        return _VALUES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown label {name!r}; expected 'major' or 'minor'") from None


@dataclass(frozen=True)
class LabelSequence:
    """Per-segment labels plus the classifier state they came from.

    labels: int array of MAJOR/MINOR, one per segment.
    scores: raw decision values, one per segment.
    probs:  calibrated P(major), one per segment, in [0, 1].
    """

    labels: np.ndarray
    scores: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if not (labels.shape == scores.shape == probs.shape):
            raise ValueError("labels, scores and probs must have equal lengths")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise ValueError("probs must lie in [0, 1]")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.labels.size

    def with_labels(self, labels: np.ndarray) -> "LabelSequence":
        """Copy of the sequence with substituted labels; scores/probs pass through."""
        return replace(self, labels=np.asarray(labels, dtype=np.int64))
