"""Per-segment feature extraction on the shared 120 ms grid.

Both modalities are tiled onto the same non-overlapping 120 ms segment
grid; one label is predicted per segment. Features for a segment are
computed from an analysis window centered on it: the audio window equals
the segment, while kinematic features use a 1.2 s window (12 samples at
100 Hz are too few for a useful spectrum, so the label grid keeps its
resolution but the kinematic analysis span is 10x the hop).

Spectral descriptors are computed from a segment-averaged magnitude
spectrum (Hann-weighted frames, 50% overlap) and always exclude the DC
bin: engine and tool signatures are AC phenomena, DC reflects sensor bias.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ingest import AudioStream, KinematicStream

SEGMENT_S = 0.12

AUDIO_WINDOW_S = 0.12
AUDIO_FRAME_LEN = 1024
AUDIO_FFT_LEN = 1024

KIN_WINDOW_S = 1.2
KIN_FRAME_LEN = 64
KIN_FFT_LEN = 128

N_BANDS = 25
ROLLOFF_Q = 0.85

_EPS = 1e-9  # slack for duration / segment-boundary arithmetic on floats


@dataclass(frozen=True)
class SegmentGrid:
    """The shared 120 ms tiling: segment k covers [k*segment_s, (k+1)*segment_s)."""

    n_segments: int
    segment_s: float = SEGMENT_S

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("grid must contain at least one segment")
        if self.segment_s <= 0:
            raise ValueError("segment_s must be positive")

    @property
    def hop_s(self) -> float:
        return self.segment_s

    @property
    def duration_s(self) -> float:
        return self.n_segments * self.segment_s

    @classmethod
    def from_durations(cls, audio_duration_s: float, kinematic_duration_s: float,
                       segment_s: float = SEGMENT_S) -> "SegmentGrid":
        """Grid over the overlap of the two recordings."""
        shorter = min(audio_duration_s, kinematic_duration_s)
        n = int(np.floor(shorter / segment_s + _EPS))
        if n < 1:
            raise ValueError(
                f"streams overlap for {shorter:.3f} s, less than one {segment_s:.3f} s segment")
        return cls(n_segments=n, segment_s=segment_s)

    def centers(self) -> np.ndarray:
        return (np.arange(self.n_segments) + 0.5) * self.segment_s

    def spans(self) -> np.ndarray:
        """(n_segments, 2) array of [start_s, end_s) per segment."""
        edges = np.arange(self.n_segments + 1) * self.segment_s
        return np.stack([edges[:-1], edges[1:]], axis=1)


@dataclass(frozen=True)
class SpectrumFrame:
    """Averaged magnitude spectrum; bin k sits at frequency k * bin_hz."""

    magnitudes: np.ndarray
    bin_hz: float

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 1:
            raise ValueError("magnitudes must be one-dimensional")
        if not np.isfinite(mags).all() or (mags < 0).any():
            raise ValueError("magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitudes", mags)


@dataclass(frozen=True)
class FeatureMatrix:
    """Rectangular per-segment feature table with named columns."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        names = tuple(self.names)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if values.shape[1] != len(names):
            raise ValueError(f"{values.shape[1]} columns but {len(names)} names")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if values.size and not np.isfinite(values).all():
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# windowing

def window_starts(n_samples: int, rate_hz: int, grid: SegmentGrid, window_s: float) -> tuple:
    """Start index and length of each segment's analysis window.

    Windows are centered on segment centers and clamped to the signal
    (shifted inward at the edges, never shortened).
    """
    if window_s < grid.segment_s - _EPS:
        raise ValueError("analysis window must be at least one segment long")
    length = int(round(window_s * rate_hz))
    if length < 8:
        raise ValueError("analysis window must span at least 8 samples")
    if n_samples < length:
        raise ValueError(
            f"signal has {n_samples} samples, shorter than one {length}-sample window")
    centers = grid.centers() * rate_hz
    starts = np.rint(centers - length / 2).astype(np.int64)
    np.clip(starts, 0, n_samples - length, out=starts)
    return starts, length


def segment_windows(x, rate_hz: int, grid: SegmentGrid, window_s: float) -> np.ndarray:
    """Materialize one analysis window per grid segment as an (n, L) array."""
    x = np.asarray(x, dtype=np.float64)
    starts, length = window_starts(x.size, rate_hz, grid, window_s)
    return x[starts[:, None] + np.arange(length)[None, :]]


# ---------------------------------------------------------------------------
# spectra

def _hann(n: int) -> np.ndarray:
    # 0.5 - 0.5*cos(2*pi*k/(N-1))
    return np.hanning(n)


def _avg_mag_spectra(windows: np.ndarray, frame_len: int, fft_len: int) -> np.ndarray:
    """Frame each window (hop = frame_len/2, Hann), zero-pad to fft_len,
    and average per-frame magnitude spectra. Returns (n_windows, fft_len/2 + 1)."""
    length = windows.shape[1]
    hop = frame_len // 2
    if length < frame_len:
        raise ValueError(f"window of {length} samples holds no full {frame_len}-sample frame")
    n_frames = (length - frame_len) // hop + 1
    offsets = (np.arange(n_frames) * hop)[:, None] + np.arange(frame_len)[None, :]
    frames = windows[:, offsets] * _hann(frame_len)
    mags = np.abs(np.fft.rfft(frames, n=fft_len, axis=-1))
    return mags.mean(axis=1)


def avg_spectrum(window, rate_hz: int, frame_len: int, fft_len: int) -> SpectrumFrame:
    """Segment-averaged magnitude spectrum of one analysis window."""
    window = np.asarray(window, dtype=np.float64)
    if fft_len < frame_len:
        raise ValueError("fft_len must be >= frame_len")
    if fft_len & (fft_len - 1):
        raise ValueError("fft_len must be a power of two")
    mags = _avg_mag_spectra(window[None, :], frame_len, fft_len)[0]
    return SpectrumFrame(mags, rate_hz / fft_len)


# ---------------------------------------------------------------------------
# batched feature kernels (the scalar operations below are 1-row wrappers)

def _band_coeffs(mags: np.ndarray, n_bands: int) -> np.ndarray:
    ac = mags[:, 1:]
    n_bins = ac.shape[1]
    if n_bins < n_bands:
        raise ValueError(f"need at least {n_bands} non-DC bins, got {n_bins}")
    base, rem = divmod(n_bins, n_bands)
    sizes = np.full(n_bands, base)
    sizes[:rem] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    sums = np.add.reduceat(ac, bounds, axis=1)
    bands = sums / sizes
    peak = bands.max(axis=1, keepdims=True)
    return np.divide(bands, peak, out=np.zeros_like(bands), where=peak > 0)


def _centroids(mags: np.ndarray, bin_hz: float) -> np.ndarray:
    freqs = np.arange(mags.shape[1]) * bin_hz
    num = mags[:, 1:] @ freqs[1:]
    den = mags[:, 1:].sum(axis=1)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _rolloffs(mags: np.ndarray, bin_hz: float, q: float) -> np.ndarray:
    power = np.square(mags[:, 1:])
    cum = np.cumsum(power, axis=1)
    total = cum[:, -1]
    reached = cum >= q * total[:, None]
    idx = reached.argmax(axis=1)
    return np.where(total > 0, (idx + 1) * bin_hz, 0.0)


def _entropies(mags: np.ndarray) -> np.ndarray:
    power = np.square(mags[:, 1:])
    n_bins = power.shape[1]
    if n_bins < 2:
        return np.zeros(mags.shape[0])
    total = power.sum(axis=1, keepdims=True)
    p = np.divide(power, total, out=np.zeros_like(power), where=total > 0)
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -plogp.sum(axis=1) / np.log(n_bins)


def _flux_chain(mags: np.ndarray) -> np.ndarray:
    """Flux between consecutive rows; row 0 is compared against all-zero."""
    ac = mags[:, 1:]
    norm = np.abs(ac).sum(axis=1, keepdims=True)
    unit = np.divide(ac, norm, out=np.zeros_like(ac), where=norm > 0)
    prev = np.vstack([np.zeros((1, unit.shape[1])), unit[:-1]])
    return np.square(unit - prev).sum(axis=1)


def _zcrs(windows: np.ndarray) -> np.ndarray:
    """Mean-removed zero-crossing rate; zeros inherit the previous nonzero sign."""
    centered = windows - windows.mean(axis=1, keepdims=True)
    # constant windows must cancel exactly, not to float dust
    centered[np.ptp(windows, axis=1) == 0] = 0.0
    signs = np.sign(centered)
    nonzero = signs != 0
    idx = np.where(nonzero, np.arange(windows.shape[1])[None, :], 0)
    filled_idx = np.maximum.accumulate(idx, axis=1)
    filled = np.take_along_axis(signs, filled_idx, axis=1)
    # positions before the first nonzero sample keep sign 0 and cannot cross
    filled[~np.maximum.accumulate(nonzero, axis=1)] = 0
    crossings = (filled[:, 1:] * filled[:, :-1] < 0).sum(axis=1)
    return crossings / (windows.shape[1] - 1)


# ---------------------------------------------------------------------------
# scalar operations

def stft_band_coeffs(spec: SpectrumFrame, n_bands: int = N_BANDS) -> np.ndarray:
    """Mean magnitude of contiguous nearly-equal non-DC bin groups, scaled by
    1/max when the maximum is positive."""
    return _band_coeffs(spec.magnitudes[None, :], n_bands)[0]


def rms(window) -> float:
    """Root mean square, sqrt(mean(x^2))."""
    window = np.asarray(window, dtype=np.float64)
    if window.size == 0:
        raise ValueError("empty window")
    return float(np.sqrt(np.mean(np.square(window))))


def ste(window) -> float:
    """Short-time energy, sum(x^2)/N; window-length invariant."""
    window = np.asarray(window, dtype=np.float64)
    if window.size == 0:
        raise ValueError("empty window")
    return float(np.mean(np.square(window)))


def zcr(window) -> float:
    """Zero-crossing rate of the mean-removed window, in [0, 1]."""
    window = np.asarray(window, dtype=np.float64)
    if window.size < 2:
        raise ValueError("zcr needs at least 2 samples")
    return float(_zcrs(window[None, :])[0])


def spectral_centroid(spec: SpectrumFrame) -> float:
    """Magnitude-weighted mean frequency over non-DC bins; 0 for silence."""
    return float(_centroids(spec.magnitudes[None, :], spec.bin_hz)[0])


def spectral_rolloff(spec: SpectrumFrame, q: float = ROLLOFF_Q) -> float:
    """Lowest frequency below which a fraction q of spectral power lies."""
    return float(_rolloffs(spec.magnitudes[None, :], spec.bin_hz, q)[0])


def spectral_entropy(spec: SpectrumFrame) -> float:
    """Normalized Shannon entropy of the power distribution, in [0, 1]."""
    return float(_entropies(spec.magnitudes[None, :])[0])


def spectral_flux(spec: SpectrumFrame, prev: SpectrumFrame | None = None) -> float:
    """Squared L2 distance between consecutive L1-normalized spectra.

    With prev=None the previous spectrum is taken as all-zero, matching the
    first segment of a recording.
    """
    if prev is None:
        prev = SpectrumFrame(np.zeros_like(spec.magnitudes), spec.bin_hz)
    if prev.magnitudes.size != spec.magnitudes.size or prev.bin_hz != spec.bin_hz:
        raise ValueError("spectra must share bin count and bin width")
    pair = np.stack([prev.magnitudes, spec.magnitudes])
    return float(_flux_chain(pair)[1])


# ---------------------------------------------------------------------------
# per-modality extraction

def _segment_batches(n_segments: int, samples_per_window: int, budget: int = 4_000_000):
    step = max(1, budget // samples_per_window)
    for lo in range(0, n_segments, step):
        yield lo, min(lo + step, n_segments)


def _spectral_columns(mags: np.ndarray, bin_hz: float) -> dict:
    return {
        "sf": _flux_chain(mags),
        "se": _entropies(mags),
        "sc": _centroids(mags, bin_hz),
        "sro": _rolloffs(mags, bin_hz, ROLLOFF_Q),
    }


def _channel_features(windows: np.ndarray, rate_hz: int, frame_len: int, fft_len: int,
                      with_zcr: bool) -> tuple:
    """Feature block for one channel: 25 bands, rms, ste, sf, se, sc, sro [, zcr]."""
    mags = _avg_mag_spectra(windows, frame_len, fft_len)
    cols = [_band_coeffs(mags, N_BANDS)]
    energy = np.mean(np.square(windows), axis=1)
    cols.append(np.sqrt(energy)[:, None])
    cols.append(energy[:, None])
    spectral = _spectral_columns(mags, rate_hz / fft_len)
    cols.extend(col[:, None] for col in spectral.values())
    names = [f"stft{i:02d}" for i in range(1, N_BANDS + 1)]
    names += ["rms", "ste", *spectral.keys()]
    if with_zcr:
        cols.append(_zcrs(windows)[:, None])
        names.append("zcr")
    return np.hstack(cols), names


def _audio_features(audio: AudioStream, grid: SegmentGrid) -> FeatureMatrix:
    x = audio.samples
    starts, length = window_starts(x.size, audio.sample_rate_hz, grid, AUDIO_WINDOW_S)
    mags = np.empty((grid.n_segments, AUDIO_FFT_LEN // 2 + 1))
    energy = np.empty(grid.n_segments)
    for lo, hi in _segment_batches(grid.n_segments, length):
        windows = x[starts[lo:hi, None] + np.arange(length)[None, :]]
        mags[lo:hi] = _avg_mag_spectra(windows, AUDIO_FRAME_LEN, AUDIO_FFT_LEN)
        energy[lo:hi] = np.mean(np.square(windows), axis=1)

    cols = [_band_coeffs(mags, N_BANDS), np.sqrt(energy)[:, None], energy[:, None]]
    spectral = _spectral_columns(mags, audio.sample_rate_hz / AUDIO_FFT_LEN)
    cols.extend(col[:, None] for col in spectral.values())
    names = [f"aud.stft{i:02d}" for i in range(1, N_BANDS + 1)]
    names += ["aud.rms", "aud.ste"] + [f"aud.{k}" for k in spectral.keys()]
    return FeatureMatrix(np.hstack(cols), names)


def _kinematic_features(kin: KinematicStream, grid: SegmentGrid) -> FeatureMatrix:
    starts, length = window_starts(kin.n_samples, kin.sample_rate_hz, grid, KIN_WINDOW_S)
    gather = starts[:, None] + np.arange(length)[None, :]
    axes = kin.channels[:, gather]  # (6, n_segments, L)

    # accel magnitude after per-window mean removal per axis (cancels gravity);
    # gyro magnitude is taken raw.
    acc = axes[:3] - axes[:3].mean(axis=2, keepdims=True)
    acc[np.ptp(axes[:3], axis=2) == 0] = 0.0  # constant axes cancel exactly
    accmag = np.sqrt(np.square(acc).sum(axis=0))
    gyrmag = np.sqrt(np.square(axes[3:]).sum(axis=0))

    blocks, names = [], []
    for channel_name, windows in (("acc", accmag), ("gyr", gyrmag)):
        values, base_names = _channel_features(
            windows, kin.sample_rate_hz, KIN_FRAME_LEN, KIN_FFT_LEN, with_zcr=True)
        blocks.append(values)
        names += [f"kin.{channel_name}.{n}" for n in base_names]
    return FeatureMatrix(np.hstack(blocks), names)


def extract_segment_features(audio: AudioStream, kin: KinematicStream,
                             grid: SegmentGrid) -> tuple:
    """Per-segment feature matrices for both modalities.

    Audio: 25 band coefficients + RMS + STE + SF + SE + SC + SRO = 31 columns.
    Kinematic: the same set plus ZCR on each of two orientation-invariant
    magnitude channels (mean-removed accel, raw gyro), 2 x 32 = 64 columns.
    """
    return _audio_features(audio, grid), _kinematic_features(kin, grid)


def write_feature_csv(path, fm: FeatureMatrix, grid: SegmentGrid) -> None:
    """Feature table as CSV with segment_index and t_center_s columns."""
    centers = grid.centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_index", "t_center_s", *fm.names])
        for k in range(fm.n_rows):
            writer.writerow([k, repr(float(centers[k]))]
                            + [repr(float(v)) for v in fm.values[k]])
