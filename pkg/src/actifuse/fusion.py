"""Early fusion of per-modality features and train-set standardization.

Fusion is plain column-wise concatenation on the shared segment grid, audio
columns first. Features mix heterogeneous units (Hz, m/s^2, unitless), so
each column is z-scored before the margin classifier; the statistics are
fitted on training rows only to keep test segments out of the fit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix

CONST_STD = 1e-12  # below this a column is treated as constant and silenced


class AlignmentError(Exception):
    """Feature matrices do not share the segment grid."""


@dataclass(frozen=True)
class Standardizer:
    """Per-column mean and population standard deviation from training rows."""

    names: tuple
    means: np.ndarray
    stds: np.ndarray
    fitted_on: int

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        names = tuple(self.names)
        if not (len(names) == means.size == stds.size):
            raise ValueError("names, means and stds must have equal lengths")
        if (stds < 0).any():
            raise ValueError("stds must be non-negative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "names", names)

    def to_dict(self) -> dict:
        return {"names": list(self.names),
                "means": self.means.tolist(),
                "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(tuple(d["names"]), np.asarray(d["means"]), np.asarray(d["stds"]),
                   fitted_on=int(d.get("fitted_on", 0)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Standardizer":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fuse(audio_fm: FeatureMatrix, kin_fm: FeatureMatrix) -> FeatureMatrix:
    """Concatenate the two feature matrices column-wise, audio first."""
    if audio_fm.n_rows != kin_fm.n_rows:
        raise AlignmentError(
            f"row counts differ: audio has {audio_fm.n_rows}, kinematic has {kin_fm.n_rows}")
    values = np.hstack([audio_fm.values, kin_fm.values])
    return FeatureMatrix(values, audio_fm.names + kin_fm.names)


def fit_standardizer(fm: FeatureMatrix, train_rows) -> Standardizer:
    """Column statistics over the given training rows only."""
    rows = np.asarray(train_rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("cannot fit a standardizer on an empty training set")
    sub = fm.values[rows]
    return Standardizer(fm.names, sub.mean(axis=0), sub.std(axis=0), fitted_on=rows.size)


def standardize(fm: FeatureMatrix, s: Standardizer) -> FeatureMatrix:
    """z = (x - mean)/std per column; constant columns are silenced to zero."""
    if fm.n_features != s.means.size:
        raise ValueError(f"matrix has {fm.n_features} columns, standardizer {s.means.size}")
    centered = fm.values - s.means
    live = s.stds > CONST_STD
    z = np.divide(centered, s.stds, out=np.zeros_like(centered), where=live)
    return FeatureMatrix(z, fm.names)
