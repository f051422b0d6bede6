"""Decode audio and kinematic recordings and align them in time.

Audio arrives as RIFF/WAVE PCM (16/24-bit int or 32-bit float, little
endian) and is downmixed to mono in [-1, 1]. Kinematic data arrives as a
timestamped CSV (phones emit irregular ticks) and is resampled onto a
uniform 100 Hz grid at ingest so all downstream windowing is plain index
arithmetic. Clock alignment between the two streams is a user-supplied
constant offset; automatic cross-correlation sync is out of scope, so any
residual offset error propagates into the labels (see README).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .labels import MAJOR, MINOR, label_name, label_value

AUDIO_RATE_HZ = 44100
KINEMATIC_RATE_HZ = 100

KINEMATIC_COLUMNS = ("t", "ax", "ay", "az", "gx", "gy", "gz")


class WavDecodeError(Exception):
    """Malformed WAV container; message names the failing byte offset."""


class UnsupportedFormatError(Exception):
    """Well-formed WAV whose encoding we do not decode."""


class KinematicFormatError(Exception):
    """Malformed kinematic CSV; message cites the offending data row."""


class AnnotationFormatError(Exception):
    """Malformed or inconsistent annotation CSV."""


@dataclass(frozen=True)
class AudioStream:
    """Mono audio samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = AUDIO_RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if samples.size and not np.isfinite(samples).all():
            raise ValueError("audio samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class KinematicStream:
    """Six synchronized channels (accel x/y/z in m/s^2, gyro x/y/z in rad/s)."""

    channels: np.ndarray
    sample_rate_hz: int = KINEMATIC_RATE_HZ

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if channels.ndim != 2 or channels.shape[0] != 6:
            raise ValueError("channels must be a 6 x n array")
        if channels.size and not np.isfinite(channels).all():
            raise ValueError("kinematic samples must be finite")
        object.__setattr__(self, "channels", channels)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def accel(self) -> np.ndarray:
        return self.channels[:3]

    @property
    def gyro(self) -> np.ndarray:
        return self.channels[3:]


@dataclass(frozen=True)
class AnnotationTrack:
    """Ordered, non-overlapping labeled time intervals (start_s, end_s, label)."""

    intervals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        clean = []
        prev_end = None
        for i, (start, end, label) in enumerate(self.intervals):
            start, end, label = float(start), float(end), int(label)
            if label not in (MAJOR, MINOR):
                raise ValueError(f"interval {i}: label must be MAJOR or MINOR")
            if not (0.0 <= start < end):
                raise ValueError(f"interval {i}: need 0 <= start < end, got [{start}, {end})")
            if prev_end is not None and start < prev_end:
                raise ValueError(f"interval {i}: overlaps or precedes the previous interval")
            prev_end = end
            clean.append((start, end, label))
        object.__setattr__(self, "intervals", tuple(clean))

    def __len__(self) -> int:
        return len(self.intervals)

    def spans(self, label: int | None = None):
        """Yield (start_s, end_s, label), optionally only for one label."""
        for start, end, lab in self.intervals:
            if label is None or lab == label:
                yield start, end, lab


@dataclass(frozen=True)
class SyncConfig:
    """Signed seconds added to kinematic timestamps to align with audio time zero."""

    kinematic_offset_s: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.kinematic_offset_s):
            raise ValueError("kinematic offset must be finite")


def decode_audio(path) -> AudioStream:
    """Decode a PCM WAV file to a mono AudioStream in [-1, 1].

    Supports 16/24-bit integer and 32-bit IEEE float samples; multichannel
    input is averaged to mono. Integer samples are scaled by 1/2^(bits-1);
    float samples are clipped into [-1, 1].
    """
    with open(path, "rb") as fh:
        data = fh.read()

    def fail(msg, offset):
        raise WavDecodeError(f"{msg} at byte offset {offset}")

    if len(data) < 12:
        fail("file too short for RIFF header", len(data))
    if data[0:4] != b"RIFF":
        fail("missing RIFF magic", 0)
    if data[8:12] != b"WAVE":
        fail("missing WAVE form type", 8)

    fmt = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        body_end = body_start + chunk_size
        if chunk_id == b"fmt ":
            if chunk_size < 16 or body_end > len(data):
                fail("truncated fmt chunk", min(body_end, len(data)))
            audio_format, n_channels, sample_rate, _, block_align, bits = struct.unpack_from(
                "<HHIIHH", data, body_start)
            fmt = (audio_format, n_channels, sample_rate, block_align, bits)
        elif chunk_id == b"data":
            if fmt is None:
                fail("data chunk before fmt chunk", pos)
            if body_end > len(data):
                fail("truncated data chunk", len(data))
            return _decode_pcm(data[body_start:body_end], fmt, body_start)
        # skip unknown chunks; chunk bodies are word-aligned
        pos = body_end + (chunk_size & 1)
    fail("no data chunk found", len(data))


def _decode_pcm(raw: bytes, fmt, data_offset: int) -> AudioStream:
    audio_format, n_channels, sample_rate, block_align, bits = fmt
    if n_channels < 1:
        raise WavDecodeError(f"fmt chunk declares zero channels at byte offset {data_offset}")
    if audio_format == 1 and bits == 16:
        bytes_per = 2
    elif audio_format == 1 and bits == 24:
        bytes_per = 3
    elif audio_format == 3 and bits == 32:
        bytes_per = 4
    else:
        raise UnsupportedFormatError(
            f"unsupported WAV encoding: format tag {audio_format}, {bits}-bit")
    frame_size = bytes_per * n_channels
    if len(raw) % frame_size:
        raise WavDecodeError(
            f"data chunk ends mid-frame at byte offset {data_offset + len(raw)}")

    if bits == 16:
        values = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 2.0 ** 15
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints -= (ints & 0x800000) << 1  # sign extension
        values = ints.astype(np.float64) / 2.0 ** 23
    else:
        values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        values = np.clip(values, -1.0, 1.0)

    if n_channels > 1:
        values = values.reshape(-1, n_channels).mean(axis=1)
    return AudioStream(values, sample_rate)


def encode_audio(path, stream: AudioStream, sample_format: str = "pcm16") -> None:
    """Write an AudioStream as a mono WAV file.

    sample_format is one of pcm16, pcm24, float32. Integer formats quantize
    by round(x * 2^(bits-1)) clipped to the representable range, so a decode
    round-trip recovers samples within 1/2^(bits-1).
    """
    x = np.clip(stream.samples, -1.0, 1.0)
    if sample_format == "pcm16":
        ints = np.clip(np.rint(x * 2.0 ** 15), -(2 ** 15), 2 ** 15 - 1).astype("<i2")
        payload = ints.tobytes()
        fmt_tag, bits = 1, 16
    elif sample_format == "pcm24":
        ints = np.clip(np.rint(x * 2.0 ** 23), -(2 ** 23), 2 ** 23 - 1).astype(np.int64)
        b = np.empty((ints.size, 3), dtype=np.uint8)
        b[:, 0] = ints & 0xFF
        b[:, 1] = (ints >> 8) & 0xFF
        b[:, 2] = (ints >> 16) & 0xFF
        payload = b.tobytes()
        fmt_tag, bits = 1, 24
    elif sample_format == "float32":
        payload = x.astype("<f4").tobytes()
        fmt_tag, bits = 3, 32
    else:
        raise ValueError(f"unknown sample format {sample_format!r}")

    block_align = bits // 8
    byte_rate = stream.sample_rate_hz * block_align
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, fmt_tag, 1, stream.sample_rate_hz, byte_rate, block_align, bits,
        b"data", len(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def decode_kinematic(path) -> KinematicStream:
    """Read a `t,ax,ay,az,gx,gy,gz` CSV and resample to a uniform 100 Hz grid.

    Timestamps must be strictly increasing; values are linearly interpolated
    between the first and last timestamp, giving
    round((t_last - t_first) * 100) + 1 output samples.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise KinematicFormatError("empty file") from None
        header = tuple(h.strip() for h in header)
        if header != KINEMATIC_COLUMNS:
            missing = set(KINEMATIC_COLUMNS) - set(header)
            if missing:
                raise KinematicFormatError(f"missing column(s): {', '.join(sorted(missing))}")
            raise KinematicFormatError(
                f"header must be {','.join(KINEMATIC_COLUMNS)}, got {','.join(header)}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 7:
                raise KinematicFormatError(f"expected 7 fields at data row {i}, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise KinematicFormatError(f"non-numeric value at data row {i}") from None

    if not rows:
        raise KinematicFormatError("no data rows")
    table = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(table).all():
        bad = int(np.argwhere(~np.isfinite(table).all(axis=1))[0, 0]) + 1
        raise KinematicFormatError(f"non-finite value at data row {bad}")
    t = table[:, 0]
    steps = np.diff(t)
    if (steps <= 0).any():
        bad = int(np.argmax(steps <= 0)) + 2  # 1-based row of the offending timestamp
        raise KinematicFormatError(f"non-increasing timestamp at data row {bad}")

    n_out = int(round((t[-1] - t[0]) * KINEMATIC_RATE_HZ)) + 1
    grid = t[0] + np.arange(n_out) / KINEMATIC_RATE_HZ
    channels = np.stack([np.interp(grid, t, table[:, c]) for c in range(1, 7)])
    return KinematicStream(channels, KINEMATIC_RATE_HZ)


def write_kinematic_csv(path, stream: KinematicStream, t0_s: float = 0.0) -> None:
    """Write a KinematicStream as a uniformly timestamped CSV."""
    t = t0_s + np.arange(stream.n_samples) / stream.sample_rate_hz
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(KINEMATIC_COLUMNS)
        for k in range(stream.n_samples):
            writer.writerow([repr(float(t[k]))]
                            + [repr(float(v)) for v in stream.channels[:, k]])


def apply_sync(kin: KinematicStream, cfg: SyncConfig) -> KinematicStream:
    """Shift the kinematic stream by the configured offset, preserving length.

    The offset is rounded to whole samples. Samples shifted out of range are
    dropped; a leading gap repeats the first valid sample and a trailing gap
    repeats the last one.
    """
    shift = int(round(cfg.kinematic_offset_s * kin.sample_rate_hz))
    n = kin.n_samples
    if shift == 0 or n == 0:
        return kin
    if abs(shift) >= n:
        pad = kin.channels[:, :1] if shift > 0 else kin.channels[:, -1:]
        return KinematicStream(np.repeat(pad, n, axis=1), kin.sample_rate_hz)
    if shift > 0:
        lead = np.repeat(kin.channels[:, :1], shift, axis=1)
        shifted = np.concatenate([lead, kin.channels[:, : n - shift]], axis=1)
    else:
        tail = np.repeat(kin.channels[:, -1:], -shift, axis=1)
        shifted = np.concatenate([kin.channels[:, -shift:], tail], axis=1)
    return KinematicStream(shifted, kin.sample_rate_hz)


def read_annotations(path) -> AnnotationTrack:
    """Read a `start_s,end_s,label` CSV with labels major/minor (case-insensitive)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise AnnotationFormatError("empty file") from None
        if [h.strip().lower() for h in header] != ["start_s", "end_s", "label"]:
            raise AnnotationFormatError("header must be start_s,end_s,label")
        intervals = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 3:
                raise AnnotationFormatError(f"expected 3 fields at data row {i}")
            try:
                start, end = float(row[0]), float(row[1])
                label = label_value(row[2])
            except ValueError as exc:
                raise AnnotationFormatError(f"data row {i}: {exc}") from None
            intervals.append((start, end, label))
    try:
        return AnnotationTrack(tuple(intervals))
    except ValueError as exc:
        raise AnnotationFormatError(str(exc)) from None


def write_annotations(path, track: AnnotationTrack) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_s", "end_s", "label"])
        for start, end, label in track.intervals:
            writer.writerow([repr(start), repr(end), label_name(label)])
