"""Label-sequence smoothing: majority-window filters and a Markov chain filter.

Raw per-segment predictions flip on very short time scales, far faster than
a machine can switch between activities. Three filters run in order, each
preserving sequence length: small window filtering (SWF, one-sided window
2), big window filtering (BWF, window 6), and a two-state Markov chain
filter (MCF) that Viterbi-decodes the label sequence using calibrated
classifier probabilities as emissions and transition probabilities
estimated from smoothed predictions over the training periods.

Window filters read a frozen copy of their input: substitutions made during
a pass never cascade into later decisions of the same pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .labels import MAJOR, MINOR, LabelSequence

SWF_WINDOW = 2
BWF_WINDOW = 6


@dataclass(frozen=True)
class TransitionModel:
    """Row-stochastic 2x2 transition matrix plus initial distribution.

    Rows/columns are indexed by label value (MINOR=0, MAJOR=1), matrix[i][j]
    being P(next=j | current=i). The matrix is add-one smoothed so every
    entry is positive; the initial distribution is empirical and may contain
    zeros.
    """

    matrix: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        initial = np.asarray(self.initial, dtype=np.float64)
        if matrix.shape != (2, 2) or initial.shape != (2,):
            raise ValueError("need a 2x2 matrix and a length-2 initial distribution")
        if not np.allclose(matrix.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("matrix rows must sum to 1")
        if (matrix <= 0).any():
            raise ValueError("matrix entries must be positive (smoothed)")
        if not np.isclose(initial.sum(), 1.0, atol=1e-12) or (initial < 0).any():
            raise ValueError("initial must be a distribution")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "initial", initial)

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "initial": self.initial.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionModel":
        return cls(np.asarray(d["matrix"]), np.asarray(d["initial"]))


def window_filter(seq: LabelSequence, w: int) -> LabelSequence:
    """Majority vote over up to w labels before and w after each index.

    The vote excludes the index itself and is clamped at the boundaries; a
    tie keeps the original label. Scores and probs pass through unchanged.
    """
    if w < 1:
        raise ValueError("window must be at least 1")
    labels = seq.labels
    n = labels.size
    if n == 0:
        return seq
    is_major = (labels == MAJOR).astype(np.int64)
    csum = np.concatenate([[0], np.cumsum(is_major)])
    idx = np.arange(n)
    lo = np.maximum(idx - w, 0)
    hi = np.minimum(idx + w, n - 1)
    majors = csum[hi + 1] - csum[lo] - is_major
    total = hi - lo  # window size excluding self
    minors = total - majors
    out = np.where(majors > minors, MAJOR, np.where(minors > majors, MINOR, labels))
    return seq.with_labels(out)


def estimate_transitions(labels) -> TransitionModel:
    """Add-one-smoothed transition counts and empirical state frequencies."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size < 2:
        raise ValueError("need at least 2 labels to estimate transitions")
    return estimate_transitions_pooled([labels])


def estimate_transitions_pooled(blocks) -> TransitionModel:
    """Transition model from several label runs that are not adjacent in time.

    Counts are pooled across blocks but no transition is counted across a
    block boundary, so gaps between labeled periods do not masquerade as
    state changes. Same add-one smoothing and empirical initial distribution
    as `estimate_transitions`.
    """
    counts = np.zeros((2, 2))
    initial = np.zeros(2)
    total = 0
    for labels in blocks:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            continue
        src, dst = labels[:-1], labels[1:]
        for i in (MINOR, MAJOR):
            for j in (MINOR, MAJOR):
                counts[i, j] += np.count_nonzero((src == i) & (dst == j))
            initial[i] += np.count_nonzero(labels == i)
        total += labels.size
    if total == 0:
        raise ValueError("need at least one label to estimate transitions")
    matrix = (counts + 1.0) / (counts.sum(axis=1, keepdims=True) + 2.0)
    return TransitionModel(matrix, initial / total)


def markov_filter(seq: LabelSequence, tm: TransitionModel) -> LabelSequence:
    """Viterbi decoding of the two-state chain with P(major) emissions.

    Emission likelihoods are e_t(MAJOR) = probs_t and e_t(MINOR) =
    1 - probs_t; arithmetic is in the log domain. Score ties, both during
    backtracking and at the final state, prefer the state matching the
    incoming label at that index.
    """
    n = len(seq)
    if n == 0:
        return seq
    probs = seq.probs
    if (probs < 0).any() or (probs > 1).any():
        raise ValueError("probs must lie in [0, 1]")

    with np.errstate(divide="ignore"):
        log_emit = np.log(np.stack([1.0 - probs, probs], axis=1))  # (n, 2)
        log_trans = np.log(tm.matrix)
        log_init = np.log(tm.initial)

    raw = seq.labels
    delta = np.empty((n, 2))
    delta[0] = log_init + log_emit[0]
    back = np.zeros((n, 2), dtype=np.int64)
    for t in range(1, n):
        for state in (MINOR, MAJOR):
            cand = delta[t - 1] + log_trans[:, state]
            best = _argmax_prefer(cand, raw[t - 1])
            back[t, state] = best
            delta[t, state] = cand[best] + log_emit[t, state]

    states = np.empty(n, dtype=np.int64)
    states[-1] = _argmax_prefer(delta[-1], raw[-1])
    for t in range(n - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    return seq.with_labels(states)


def _argmax_prefer(pair: np.ndarray, preferred: int) -> int:
    """Index of the larger of two values; exact ties go to `preferred`."""
    if pair[0] == pair[1]:
        return int(preferred)
    return int(np.argmax(pair))


@dataclass(frozen=True)
class StageLabels:
    """The label sequence at each smoothing stage of one pipeline run."""

    raw: LabelSequence
    swf: LabelSequence
    bwf: LabelSequence
    mcf: LabelSequence

    def stage(self, name: str) -> LabelSequence:
        if name not in STAGES:
            raise ValueError(f"unknown stage {name!r}")
        return getattr(self, name)


STAGES = ("raw", "swf", "bwf", "mcf")


def smooth_stages(raw: LabelSequence, tm: TransitionModel,
                  swf_w: int = SWF_WINDOW, bwf_w: int = BWF_WINDOW) -> StageLabels:
    """Run SWF -> BWF -> MCF in order, keeping every stage's output."""
    swf = window_filter(raw, swf_w)
    bwf = window_filter(swf, bwf_w)
    mcf = markov_filter(bwf, tm)
    return StageLabels(raw=raw, swf=swf, bwf=bwf, mcf=mcf)
