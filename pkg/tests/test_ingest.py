"""Decoding, synchronization, and annotation ingest."""

import struct

import numpy as np
import pytest

from actifuse.ingest import (AnnotationTrack, AudioStream, KinematicFormatError,
                             KinematicStream, SyncConfig, UnsupportedFormatError,
                             WavDecodeError, AnnotationFormatError, apply_sync,
                             decode_audio, decode_kinematic, encode_audio,
                             read_annotations, write_annotations,
                             write_kinematic_csv)
from actifuse.labels import MAJOR, MINOR


def write_raw_wav(path, fmt_tag, channels, rate, bits, payload, data_size=None):
    data_size = len(payload) if data_size is None else data_size
    block_align = channels * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, fmt_tag, channels, rate, rate * block_align, block_align, bits,
        b"data", data_size)
    path.write_bytes(header + payload)


class TestDecodeAudio:
    def test_16bit_scaling_identity(self, tmp_path):
        """One second of constant 16384 decodes to constant 0.5."""
        payload = struct.pack("<44100h", *([16384] * 44100))
        path = tmp_path / "const.wav"
        write_raw_wav(path, 1, 1, 44100, 16, payload)
        stream = decode_audio(path)
        assert stream.sample_rate_hz == 44100
        assert stream.samples.shape == (44100,)
        assert np.all(stream.samples == 0.5)

    def test_stereo_opposite_channels_average_to_zero(self, tmp_path):
        rng = np.random.default_rng(0)
        v = np.clip(rng.normal(0, 0.3, 500), -1, 1)
        ints = np.clip(np.rint(v * 2 ** 15), -32767, 32767).astype(np.int16)
        interleaved = np.empty(1000, dtype=np.int16)
        interleaved[0::2] = ints
        interleaved[1::2] = -ints
        path = tmp_path / "stereo.wav"
        write_raw_wav(path, 1, 2, 44100, 16, interleaved.tobytes())
        stream = decode_audio(path)
        assert np.all(stream.samples == 0.0)

    def test_truncated_data_chunk_reports_offset(self, tmp_path):
        payload = struct.pack("<10h", *range(10))
        path = tmp_path / "trunc.wav"
        write_raw_wav(path, 1, 1, 44100, 16, payload, data_size=len(payload) + 2)
        with pytest.raises(WavDecodeError, match=r"byte offset \d+"):
            decode_audio(path)

    def test_bad_riff_magic_offset_zero(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"JUNK" + b"\x00" * 40)
        with pytest.raises(WavDecodeError, match="offset 0"):
            decode_audio(path)

    def test_unsupported_encoding(self, tmp_path):
        path = tmp_path / "u8.wav"
        write_raw_wav(path, 1, 1, 8000, 8, bytes(16))
        with pytest.raises(UnsupportedFormatError):
            decode_audio(path)

    def test_data_before_fmt_is_decode_error(self, tmp_path):
        body = struct.pack("<4sI", b"data", 4) + b"\x00" * 4
        path = tmp_path / "nofmt.wav"
        path.write_bytes(struct.pack("<4sI4s", b"RIFF", 4 + len(body), b"WAVE") + body)
        with pytest.raises(WavDecodeError, match="before fmt"):
            decode_audio(path)

    def test_unknown_chunks_are_skipped(self, tmp_path):
        payload = struct.pack("<4h", 0, 100, -100, 0)
        extra = struct.pack("<4sI", b"LIST", 6) + b"junk06"  # odd size, padded
        fmt = struct.pack("<4sIHHIIHH", b"fmt ", 16, 1, 1, 44100, 88200, 2, 16)
        data = struct.pack("<4sI", b"data", len(payload)) + payload
        body = extra + fmt + data
        path = tmp_path / "chunks.wav"
        path.write_bytes(struct.pack("<4sI4s", b"RIFF", 4 + len(body), b"WAVE") + body)
        stream = decode_audio(path)
        assert stream.samples.shape == (4,)

    @pytest.mark.parametrize("fmt,bits", [("pcm16", 16), ("pcm24", 24), ("float32", 25)])
    def test_roundtrip_within_quantization(self, tmp_path, fmt, bits):
        """encode -> decode recovers samples within 1/2^(bits-1)."""
        rng = np.random.default_rng(1)
        samples = np.clip(rng.normal(0, 0.4, 2048), -1, 1)
        samples[0], samples[1] = 1.0, -1.0
        path = tmp_path / f"rt_{fmt}.wav"
        encode_audio(path, AudioStream(samples, 44100), sample_format=fmt)
        back = decode_audio(path)
        tol = 1.0 / 2 ** (bits - 1) if fmt != "float32" else 1e-7
        assert np.abs(back.samples - samples).max() <= tol


class TestDecodeKinematic:
    def write_csv(self, path, rows):
        lines = ["t,ax,ay,az,gx,gy,gz"]
        lines += [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")

    def test_uniform_grid_identity(self, tmp_path):
        rows = [[round(k * 0.01, 2), k, -k, 2 * k, 0.1 * k, 0, 1] for k in range(100)]
        path = tmp_path / "k.csv"
        self.write_csv(path, rows)
        stream = decode_kinematic(path)
        assert stream.n_samples == 100
        assert np.allclose(stream.channels[0], np.arange(100), atol=1e-9)
        assert np.allclose(stream.channels[2], 2 * np.arange(100), atol=1e-9)

    def test_linear_midpoint(self, tmp_path):
        path = tmp_path / "mid.csv"
        self.write_csv(path, [[0.0, 0, 0, 0, 0, 0, 0], [0.02, 2, 0, 0, 0, 0, 0]])
        stream = decode_kinematic(path)
        assert stream.n_samples == 3
        assert stream.channels[0, 1] == pytest.approx(1.0)

    def test_non_monotonic_cites_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        self.write_csv(path, [[0.0, 0, 0, 0, 0, 0, 0],
                              [0.5, 0, 0, 0, 0, 0, 0],
                              [0.1, 0, 0, 0, 0, 0, 0]])
        with pytest.raises(KinematicFormatError, match="row 3"):
            decode_kinematic(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("t,ax,ay,az,gx,gy\n0,0,0,0,0,0\n")
        with pytest.raises(KinematicFormatError, match="gz"):
            decode_kinematic(path)

    def test_non_numeric_cites_row(self, tmp_path):
        path = tmp_path / "nan.csv"
        self.write_csv(path, [[0.0, 0, 0, 0, 0, 0, 0], [0.01, "x", 0, 0, 0, 0, 0]])
        with pytest.raises(KinematicFormatError, match="row 2"):
            decode_kinematic(path)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_output_length_formula(self, tmp_path, seed):
        """n_out = round((t_last - t_first) * 100) + 1 for irregular ticks."""
        rng = np.random.default_rng(seed)
        t = np.cumsum(rng.uniform(0.004, 0.02, 150))
        rows = [[ti] + list(rng.normal(0, 1, 6)) for ti in t]
        path = tmp_path / "irr.csv"
        self.write_csv(path, rows)
        stream = decode_kinematic(path)
        assert stream.n_samples == int(round((t[-1] - t[0]) * 100)) + 1

    def test_roundtrip_of_written_stream(self, tmp_path):
        rng = np.random.default_rng(3)
        stream = KinematicStream(rng.normal(0, 1, (6, 250)))
        path = tmp_path / "rt.csv"
        write_kinematic_csv(path, stream)
        back = decode_kinematic(path)
        assert back.n_samples == 250
        assert np.allclose(back.channels, stream.channels, atol=1e-12)


class TestApplySync:
    def stream(self, n=100):
        rng = np.random.default_rng(4)
        return KinematicStream(rng.normal(0, 1, (6, n)))

    def test_zero_offset_identity(self):
        kin = self.stream()
        out = apply_sync(kin, SyncConfig(0.0))
        assert np.array_equal(out.channels, kin.channels)

    def test_positive_offset_repeats_first_sample(self):
        kin = self.stream()
        out = apply_sync(kin, SyncConfig(0.10))
        assert out.n_samples == kin.n_samples
        assert np.array_equal(out.channels[:, :10],
                              np.repeat(kin.channels[:, :1], 10, axis=1))
        assert np.array_equal(out.channels[:, 10:], kin.channels[:, :-10])

    def test_negative_offset_pads_tail(self):
        kin = self.stream()
        out = apply_sync(kin, SyncConfig(-0.05))
        assert np.array_equal(out.channels[:, :-5], kin.channels[:, 5:])
        assert np.array_equal(out.channels[:, -5:],
                              np.repeat(kin.channels[:, -1:], 5, axis=1))

    def test_roundtrip_restores_central_region(self):
        kin = self.stream()
        for offset in (0.07, -0.13):
            back = apply_sync(apply_sync(kin, SyncConfig(offset)), SyncConfig(-offset))
            shift = abs(int(round(offset * 100)))
            assert np.array_equal(back.channels[:, shift:-shift],
                                  kin.channels[:, shift:-shift])

    def test_offset_beyond_length(self):
        kin = self.stream(20)
        out = apply_sync(kin, SyncConfig(5.0))
        assert np.array_equal(out.channels,
                              np.repeat(kin.channels[:, :1], 20, axis=1))


class TestAnnotations:
    def test_roundtrip_and_case_insensitive_labels(self, tmp_path):
        track = AnnotationTrack(((0.0, 2.5, MAJOR), (2.5, 4.0, MINOR)))
        path = tmp_path / "ann.csv"
        write_annotations(path, track)
        assert read_annotations(path).intervals == track.intervals

        path.write_text("start_s,end_s,label\n0,1,MAJOR\n1,2,Minor\n")
        track = read_annotations(path)
        assert [lab for _, _, lab in track.intervals] == [MAJOR, MINOR]

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            AnnotationTrack(((0.0, 2.0, MAJOR), (1.5, 3.0, MINOR)))

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("start_s,end_s,label\n0,1,working\n")
        with pytest.raises(AnnotationFormatError, match="row 1"):
            read_annotations(path)

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            AnnotationTrack(((2.0, 1.0, MAJOR),))
