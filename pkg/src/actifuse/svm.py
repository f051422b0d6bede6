"""Soft-margin SVM trained by sequential minimal optimization.

The training sets here are tiny (a few hundred segments picked from eight
short labeled periods), so the dual problem is solved exactly-ish by SMO
with maximal-violating-pair working set selection: at each step the pair
(i, j) with the largest KKT violation is optimized analytically, ties
broken by lowest index, which makes training fully deterministic. The
solver terminates when every KKT violation is within `tol`.

Decision values are turned into P(major) by logistic (Platt) calibration so
the downstream Markov chain filter has emission probabilities to work with.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .features import SegmentGrid
from .labels import MAJOR, MINOR


@dataclass(frozen=True)
class TrainingSelection:
    """Labeled time periods (seconds) whose segments become training rows."""

    major_periods: tuple
    minor_periods: tuple

    def __post_init__(self):
        majors = tuple((float(s), float(e)) for s, e in self.major_periods)
        minors = tuple((float(s), float(e)) for s, e in self.minor_periods)
        spans = sorted(majors + minors)
        if not spans:
            raise ValueError("training selection is empty")
        for s, e in spans:
            if not (0.0 <= s < e):
                raise ValueError(f"bad training period [{s}, {e})")
        for (_, e_prev), (s_next, _) in zip(spans, spans[1:]):
            if s_next < e_prev:
                raise ValueError("training periods overlap")
        object.__setattr__(self, "major_periods", majors)
        object.__setattr__(self, "minor_periods", minors)

    def labeled_periods(self):
        """All periods as (start_s, end_s, label), sorted by start."""
        both = [(s, e, MAJOR) for s, e in self.major_periods]
        both += [(s, e, MINOR) for s, e in self.minor_periods]
        return sorted(both)

    def to_dict(self) -> dict:
        return {"major_periods": [list(p) for p in self.major_periods],
                "minor_periods": [list(p) for p in self.minor_periods]}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingSelection":
        return cls(tuple(tuple(p) for p in d["major_periods"]),
                   tuple(tuple(p) for p in d["minor_periods"]))


def training_selection_from_annotations(track, per_class: int = 4,
                                        truncate_s: float | None = None) -> TrainingSelection:
    """First `per_class` periods of each label, optionally truncated.

    Mirrors the protocol of picking a handful of short labeled periods per
    class for training and testing on everything else.
    """
    majors, minors = [], []
    for start, end, label in track.intervals:
        bucket = majors if label == MAJOR else minors
        if len(bucket) < per_class:
            if truncate_s is not None:
                end = min(end, start + truncate_s)
            bucket.append((start, end))
    if len(majors) < per_class or len(minors) < per_class:
        raise ValueError(
            f"need {per_class} periods per class, found {len(majors)} major / {len(minors)} minor")
    return TrainingSelection(tuple(majors), tuple(minors))


def select_training_rows(grid: SegmentGrid, sel: TrainingSelection) -> tuple:
    """Row indices and +-1 labels of segments fully inside a training period.

    A segment qualifies only when its whole [start, end) span lies inside a
    selected interval; it is labeled by that interval (+1 major, -1 minor).
    """
    eps = 1e-9
    seg = grid.segment_s
    rows, ys = [], []
    for start, end, label in sel.labeled_periods():
        if end > grid.duration_s + eps:
            raise ValueError(f"training period [{start}, {end}) extends past the grid "
                             f"({grid.duration_s:.3f} s)")
        first = int(np.ceil(start / seg - eps))
        last_excl = int(np.floor(end / seg + eps))
        for k in range(max(first, 0), min(last_excl, grid.n_segments)):
            rows.append(k)
            ys.append(1 if label == MAJOR else -1)
    if not rows:
        raise ValueError("no segment lies fully inside any training period; "
                         "select longer intervals")
    order = np.argsort(rows, kind="stable")
    return np.asarray(rows, dtype=np.int64)[order], np.asarray(ys, dtype=np.int64)[order]


@dataclass
class SvmModel:
    """Trained classifier: f(x) = sum_i dual_coef_i * K(sv_i, x) + bias."""

    kernel: str
    C: float
    bias: float
    dual_coefs: np.ndarray
    support_vectors: np.ndarray
    gamma: float | None = None
    platt_a: float = 1.0
    platt_b: float = 0.0
    feature_names: tuple | None = None
    converged: bool = True
    objective_history: list = field(default_factory=list, repr=False)

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    def to_dict(self) -> dict:
        d = {
            "kernel": self.kernel,
            "C": self.C,
            "bias": self.bias,
            "platt_a": self.platt_a,
            "platt_b": self.platt_b,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "feature_names": list(self.feature_names) if self.feature_names else None,
        }
        if self.kernel == "rbf":
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        return cls(
            kernel=d["kernel"],
            C=float(d["C"]),
            bias=float(d["bias"]),
            dual_coefs=np.asarray(d["dual_coefs"], dtype=np.float64),
            support_vectors=np.asarray(d["support_vectors"], dtype=np.float64),
            gamma=d.get("gamma"),
            platt_a=float(d.get("platt_a", 1.0)),
            platt_b=float(d.get("platt_b", 0.0)),
            feature_names=tuple(d["feature_names"]) if d.get("feature_names") else None,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SvmModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _kernel_matrix(kernel: str, gamma: float | None, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        sq = (np.square(A).sum(axis=1)[:, None]
              + np.square(B).sum(axis=1)[None, :]
              - 2.0 * (A @ B.T))
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


def train_svm(X, y, C: float = 1.0, kernel: str = "linear", gamma: float | None = None,
              tol: float = 1e-3, max_passes: int = 200) -> SvmModel:
    """Solve the soft-margin dual with SMO on the maximal violating pair.

    One pass is a sweep of up to n pair updates; the solver stops early once
    the largest KKT violation drops to `tol`. If `max_passes` sweeps pass
    without convergence, a warning is emitted and the best-so-far model is
    returned with converged=False.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) with one label per row")
    if not np.isfinite(X).all():
        raise ValueError("training rows must be finite")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +-1")
    if (y > 0).all() or (y < 0).all():
        raise ValueError("training data contains a single class; need both")
    if C <= 0:
        raise ValueError("C must be positive")
    if kernel == "rbf" and gamma is None:
        gamma = 1.0 / X.shape[1]

    n = X.shape[0]
    K = _kernel_matrix(kernel, gamma, X, X)
    diag = np.diag(K).copy()

    alpha = np.zeros(n)
    # viol_i = y_i - f_i (no bias); KKT gap = max over I_up - min over I_low
    viol = y.copy()
    objective_history = []
    converged = False

    for _ in range(max_passes):
        for _ in range(n):
            at_upper = alpha >= C
            at_lower = alpha <= 0
            in_up = np.where(y > 0, ~at_upper, ~at_lower)
            in_low = np.where(y > 0, ~at_lower, ~at_upper)
            i = int(np.argmax(np.where(in_up, viol, -np.inf)))
            j = int(np.argmin(np.where(in_low, viol, np.inf)))
            gap = viol[i] - viol[j]
            if gap <= tol:
                converged = True
                break

            eta = max(diag[i] + diag[j] - 2.0 * K[i, j], 1e-12)
            t_max_i = C - alpha[i] if y[i] > 0 else alpha[i]
            t_max_j = alpha[j] if y[j] > 0 else C - alpha[j]
            t = min(gap / eta, t_max_i, t_max_j)

            new_ai = alpha[i] + y[i] * t
            new_aj = alpha[j] - y[j] * t
            # land exactly on a box bound when the step is capped by it
            if t == t_max_i:
                new_ai = C if y[i] > 0 else 0.0
            if t == t_max_j:
                new_aj = 0.0 if y[j] > 0 else C
            alpha[i] = min(max(new_ai, 0.0), C)
            alpha[j] = min(max(new_aj, 0.0), C)
            viol -= t * (K[:, i] - K[:, j])

        # dual objective of the maximization form, from grad = -y * viol
        objective_history.append(0.5 * (alpha.sum() + alpha @ (y * viol)))
        if converged:
            break

    if not converged:
        warnings.warn(f"SMO did not reach tol={tol} within {max_passes} passes; "
                      "returning best-so-far model", RuntimeWarning, stacklevel=2)

    at_upper = alpha >= C
    at_lower = alpha <= 0
    in_up = np.where(y > 0, ~at_upper, ~at_lower)
    in_low = np.where(y > 0, ~at_lower, ~at_upper)
    m_up = np.max(np.where(in_up, viol, -np.inf))
    m_low = np.min(np.where(in_low, viol, np.inf))
    bias = 0.5 * (m_up + m_low) if np.isfinite(m_up) and np.isfinite(m_low) else 0.0

    support = alpha > 0
    return SvmModel(
        kernel=kernel,
        C=C,
        bias=float(bias),
        dual_coefs=(alpha * y)[support],
        support_vectors=X[support],
        gamma=gamma if kernel == "rbf" else None,
        converged=converged,
        objective_history=objective_history,
    )


def decision_values(model: SvmModel, X) -> np.ndarray:
    """f(x) = sum_i dual_coef_i * K(sv_i, x) + bias for each row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(f"feature count mismatch: model expects "
                         f"{model.support_vectors.shape[1]}, got {X.shape[1]}")
    k = _kernel_matrix(model.kernel, model.gamma, X, model.support_vectors)
    return k @ model.dual_coefs + model.bias


def predict(model: SvmModel, X) -> np.ndarray:
    """MAJOR where the decision value is >= 0, MINOR otherwise."""
    return np.where(decision_values(model, X) >= 0.0, MAJOR, MINOR)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_platt(scores, y, max_iter: int = 100) -> tuple:
    """Logistic calibration p(major|f) = sigmoid(a*f + b) by damped Newton.

    Minimizes the cross-entropy of sigmoid(a*f + b) against the targets.
    Targets are prior-smoothed, (N+ + 1)/(N+ + 2) for positives and
    1/(N- + 2) for negatives, which keeps the fit finite on separable
    scores and caps the confidence assigned to any one segment. Degenerate
    inputs (all scores identical) fall back to (1, 0).
    """
    f = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if f.size != y.size or f.size == 0:
        raise ValueError("scores and labels must be non-empty and equal length")
    if (y > 0).all() or (y < 0).all():
        raise ValueError("calibration requires both classes")
    if np.ptp(f) == 0.0:
        return 1.0, 0.0
    n_pos = float(np.count_nonzero(y > 0))
    n_neg = float(y.size - n_pos)
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def loss(a, b):
        z = a * f + b
        return float(np.sum(t * np.logaddexp(0.0, -z) + (1.0 - t) * np.logaddexp(0.0, z)))

    a, b = 0.0, 0.0
    current = loss(a, b)
    for _ in range(max_iter):
        p = _sigmoid(a * f + b)
        r = p - t
        g = np.array([r @ f, r.sum()])
        if np.abs(g).max() <= 1e-10 * f.size:
            break
        w = p * (1.0 - p)
        h11 = w @ np.square(f)
        h12 = w @ f
        h22 = w.sum()
        hess = np.array([[h11, h12], [h12, h22]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(hess, g)
        scale = 1.0
        for _ in range(50):
            cand = loss(a - scale * step[0], b - scale * step[1])
            if cand <= current:
                break
            scale *= 0.5
        else:
            break
        a -= scale * step[0]
        b -= scale * step[1]
        current = cand
    return float(a), float(b)


def probabilities(model: SvmModel, X) -> np.ndarray:
    """Calibrated P(major) for each row of X."""
    return _sigmoid(model.platt_a * decision_values(model, X) + model.platt_b)
