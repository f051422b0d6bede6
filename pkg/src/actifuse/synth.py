"""Deterministic synthetic multimodal recordings for tests and benchmarks.

Real jobsite recordings are not redistributable, so experiments run on a
seeded generator instead. A recording alternates major/minor dwells with
uniformly drawn durations. Major audio is a harmonic stack (110 Hz
fundamental, 8 harmonics at 1/k amplitudes) plus 800-2000 Hz band noise;
minor audio is pink-ish noise scaled so the nominal major:minor segment RMS
ratio is 4:1. Major kinematics carry an 8 Hz accel oscillation (1.5 m/s^2)
with gyro jitter; minor kinematics are low-variance drift. Gravity rides on
the accel z-axis so the gravity-cancellation path is exercised.

Confusability c in [0, 1] mixes the signal toward a common broadband
texture, independently per modality. The common texture is the equal mix
of the two class processes, so in feature space it sits between the class
clusters and carries no label information of its own. The blend strength
is a piecewise-constant profile over 3-5 s spans (think of a passing truck
masking the microphone, or chassis rattle swamping the IMU): a span is
fully replaced by the common texture with probability c^2, otherwise
blended by a low-skewed factor c*u^3. On top of the independent spans,
short joint bursts (~1 s, rate proportional to the product of the two
confusabilities) mask both modalities at once. At c=1 the modality carries
no class information; at c=0 it is clean. Fully-ambiguous spans are what
the classifier cannot recover from one modality alone, which is exactly
where fusing the second modality pays off - the spans are drawn
independently per modality, so one of them usually still carries the
signal.

Every random quantity flows from the single seed; no global entropy
sources are used anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import AnnotationTrack, AudioStream, KinematicStream
from .labels import MAJOR, MINOR

AUDIO_MAJOR_RMS = 0.10
AUDIO_MINOR_RMS = 0.025  # major:minor = 4:1
AUDIO_FUNDAMENTAL_HZ = 110.0
AUDIO_HARMONICS = 8
AUDIO_BAND_HZ = (800.0, 2000.0)

KIN_MAJOR_ACCEL_AMP = 1.5      # m/s^2 at 8 Hz
KIN_MAJOR_ACCEL_HZ = 8.0
KIN_MAJOR_ACCEL_NOISE = 0.1
KIN_MAJOR_GYRO_STD = 0.4
KIN_MINOR_ACCEL_STD = 0.15     # low-variance drift
KIN_MINOR_GYRO_STD = 0.03
KIN_DRIFT_CUTOFF_HZ = 0.3
GRAVITY_MS2 = 9.81

CONFUSION_SPAN_S = (3.0, 5.0)   # duration range of constant-ambiguity spans
JOINT_BURST_S = (0.7, 1.2)      # duration range of joint two-modality bursts
JOINT_BURST_EVERY_S = 30.0      # one burst per this many seconds at c_a*c_k = 1

AUDIO_PEAK_LIMIT = 0.98


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic recording; all randomness flows from seed."""

    duration_s: float
    seed: int
    major_dwell_s: tuple = (5.0, 10.0)
    minor_dwell_s: tuple = (5.0, 10.0)
    audio_snr_db: float = 20.0
    kin_snr_db: float = 20.0
    audio_confusability: float = 0.0
    kin_confusability: float = 0.0
    audio_rate_hz: int = 44100
    kin_rate_hz: int = 100

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        for lo, hi in (self.major_dwell_s, self.minor_dwell_s):
            if not (0 < lo <= hi):
                raise ValueError("dwell ranges must be positive and ordered")
        for c in (self.audio_confusability, self.kin_confusability):
            if not (0.0 <= c <= 1.0):
                raise ValueError("confusability must lie in [0, 1]")


def _unit_rms(x: np.ndarray) -> np.ndarray:
    scale = np.sqrt(np.mean(np.square(x)))
    return x / scale if scale > 0 else x


def _band_noise(rng, n: int, rate_hz: float, lo_hz: float, hi_hz: float) -> np.ndarray:
    """Unit-RMS noise band-limited to [lo_hz, hi_hz]."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    mask = (freqs >= lo_hz) & (freqs <= hi_hz)
    if mask.sum() < 2:  # degenerate for very short signals; keep lowest AC bins
        mask[1:3] = True
    spectrum[~mask] = 0.0
    return _unit_rms(np.fft.irfft(spectrum, n=n))


def _pink_noise(rng, n: int, rate_hz: float, floor_hz: float = 20.0) -> np.ndarray:
    """Unit-RMS noise with a 1/sqrt(f) amplitude rolloff above floor_hz."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    spectrum *= 1.0 / np.sqrt(np.maximum(freqs, floor_hz))
    spectrum[0] = 0.0
    return _unit_rms(np.fft.irfft(spectrum, n=n))


def _harmonic_stack(rng, n: int, rate_hz: float) -> np.ndarray:
    """Unit-RMS stack of AUDIO_HARMONICS partials at 1/k amplitudes."""
    t = np.arange(n) / rate_hz
    out = np.zeros(n)
    for k in range(1, AUDIO_HARMONICS + 1):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out += np.sin(2.0 * np.pi * AUDIO_FUNDAMENTAL_HZ * k * t + phase) / k
    return _unit_rms(out)


def _dwell_sequence(rng, spec: SynthSpec) -> list:
    dwells = []
    t, label = 0.0, MAJOR
    while t < spec.duration_s - 1e-9:
        lo, hi = spec.major_dwell_s if label == MAJOR else spec.minor_dwell_s
        end = min(t + rng.uniform(lo, hi), spec.duration_s)
        dwells.append((t, end, label))
        t, label = end, 1 - label
    return dwells


def _severity_profile(rng, n: int, rate_hz: float, confusability: float) -> np.ndarray:
    """Piecewise-constant blend strength toward the common texture.

    Spans last 3-5 s; a span is fully ambiguous (severity 1) with
    probability c^2, otherwise its severity is c*u^3 with u uniform, skewed
    low so partially-degraded spans stay mostly recognizable. Spans are
    independent of the dwell structure, the way real interference is.
    """
    sev = np.empty(n)
    pos = 0
    while pos < n:
        length = int(round(rng.uniform(*CONFUSION_SPAN_S) * rate_hz))
        if rng.uniform() < confusability ** 2:
            value = 1.0
        else:
            value = confusability * rng.uniform() ** 3
        sev[pos:pos + max(length, 1)] = value
        pos += max(length, 1)
    return sev


def _add_noise(rng, x: np.ndarray, signal_power: float, snr_db: float) -> np.ndarray:
    sigma = np.sqrt(signal_power) * 10.0 ** (-snr_db / 20.0)
    return x + sigma * rng.standard_normal(x.shape)


def synth_recording(spec: SynthSpec) -> tuple:
    """Generate (AudioStream, KinematicStream, AnnotationTrack) from the spec."""
    rng = np.random.default_rng(spec.seed)
    dwells = _dwell_sequence(rng, spec)

    n_aud = int(round(spec.duration_s * spec.audio_rate_hz))
    n_kin = int(round(spec.duration_s * spec.kin_rate_hz))

    # full-length building blocks (drawn in fixed order for determinism)
    aud_major = AUDIO_MAJOR_RMS * _unit_rms(
        0.8 * _harmonic_stack(rng, n_aud, spec.audio_rate_hz)
        + 0.35 * _band_noise(rng, n_aud, spec.audio_rate_hz, *AUDIO_BAND_HZ))
    aud_minor = AUDIO_MINOR_RMS * _pink_noise(rng, n_aud, spec.audio_rate_hz)
    aud_common = 0.5 * (aud_major + aud_minor)

    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    wave = np.sin(2.0 * np.pi * KIN_MAJOR_ACCEL_HZ
                  * np.arange(n_kin) / spec.kin_rate_hz + rng.uniform(0, 2 * np.pi))
    kin_major = np.empty((6, n_kin))
    kin_major[:3] = (KIN_MAJOR_ACCEL_AMP * direction[:, None] * wave
                     + KIN_MAJOR_ACCEL_NOISE * rng.standard_normal((3, n_kin)))
    kin_major[3:] = KIN_MAJOR_GYRO_STD * rng.standard_normal((3, n_kin))

    kin_minor = np.empty((6, n_kin))
    for c in range(3):
        kin_minor[c] = KIN_MINOR_ACCEL_STD * _band_noise(
            rng, n_kin, spec.kin_rate_hz, 0.0, KIN_DRIFT_CUTOFF_HZ)
    for c in range(3, 6):
        kin_minor[c] = KIN_MINOR_GYRO_STD * _band_noise(
            rng, n_kin, spec.kin_rate_hz, 0.0, KIN_DRIFT_CUTOFF_HZ)

    kin_common = 0.5 * (kin_major + kin_minor)

    # clean class signal per dwell, then blend with the ambiguity profiles
    audio = np.empty(n_aud)
    kin = np.empty((6, n_kin))
    for start, end, label in dwells:
        a_lo, a_hi = (int(round(start * spec.audio_rate_hz)),
                      int(round(end * spec.audio_rate_hz)))
        k_lo, k_hi = (int(round(start * spec.kin_rate_hz)),
                      int(round(end * spec.kin_rate_hz)))
        class_aud = aud_major if label == MAJOR else aud_minor
        audio[a_lo:a_hi] = class_aud[a_lo:a_hi]
        class_kin = kin_major if label == MAJOR else kin_minor
        kin[:, k_lo:k_hi] = class_kin[:, k_lo:k_hi]

    sev_a = _severity_profile(rng, n_aud, spec.audio_rate_hz, spec.audio_confusability)
    sev_k = _severity_profile(rng, n_kin, spec.kin_rate_hz, spec.kin_confusability)
    n_bursts = int(round(spec.duration_s * spec.audio_confusability
                         * spec.kin_confusability / JOINT_BURST_EVERY_S))
    for _ in range(n_bursts):
        t0 = rng.uniform(0.0, spec.duration_s)
        t1 = min(t0 + rng.uniform(*JOINT_BURST_S), spec.duration_s)
        sev_a[int(round(t0 * spec.audio_rate_hz)):int(round(t1 * spec.audio_rate_hz))] = 1.0
        sev_k[int(round(t0 * spec.kin_rate_hz)):int(round(t1 * spec.kin_rate_hz))] = 1.0
    audio = (1.0 - sev_a) * audio + sev_a * aud_common
    kin = (1.0 - sev_k)[None, :] * kin + sev_k[None, :] * kin_common

    audio = _add_noise(rng, audio, np.mean(np.square(audio)), spec.audio_snr_db)
    peak = np.abs(audio).max()
    if peak > AUDIO_PEAK_LIMIT:
        audio *= AUDIO_PEAK_LIMIT / peak

    ac_power = np.mean(np.var(kin, axis=1))
    kin = _add_noise(rng, kin, ac_power, spec.kin_snr_db)
    kin[2] += GRAVITY_MS2

    track = AnnotationTrack(tuple(dwells))
    return (AudioStream(audio, spec.audio_rate_hz),
            KinematicStream(kin, spec.kin_rate_hz),
            track)
