"""Waveform container, RIFF/WAVE I/O and elementary transforms."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInput, FormatError, NotMono, NotStereo

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioTrack:
    """Sampled waveform, shape ``(channels, n)``, amplitudes normalized to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[0] not in (1, 2):
            raise ValueError(f"expected 1 or 2 channels, got shape {arr.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"bad sample rate {self.sample_rate}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[1]

    @property
    def duration_sec(self) -> float:
        return len(self) / self.sample_rate

    @property
    def mono(self) -> np.ndarray:
        """The single channel of a mono track."""
        if self.channels != 1:
            raise NotMono("expected a mono track")
        return self.samples[0]

    @classmethod
    def from_mono(cls, x, sample_rate) -> "AudioTrack":
        return cls(np.asarray(x, dtype=np.float64)[np.newaxis, :], sample_rate)

    @classmethod
    def from_stereo(cls, left, right, sample_rate) -> "AudioTrack":
        return cls(np.vstack([left, right]), sample_rate)


@dataclass(frozen=True)
class Envelope:
    values: np.ndarray
    frame_sec: float
    hop_sec: float
    origin_sec: float

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or np.any(v < 0):
            raise ValueError("envelope values must be a 1-d non-negative sequence")
        if self.hop_sec <= 0 or self.frame_sec <= 0:
            raise ValueError("frame_sec and hop_sec must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def frame_time(self, i) -> float:
        """Center time of frame ``i`` in seconds."""
        return self.origin_sec + i * self.hop_sec


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # (frames, bins)
    frame_sec: float
    hop_sec: float
    origin_sec: float

    def __post_init__(self):
        m = np.array(self.magnitudes, dtype=np.float64)
        if m.ndim != 2 or np.any(m < 0):
            raise ValueError("magnitudes must be a non-negative 2-d matrix")
        m.setflags(write=False)
        object.__setattr__(self, "magnitudes", m)

    @property
    def bins(self) -> int:
        return self.magnitudes.shape[1]

    def __len__(self):
        return self.magnitudes.shape[0]


# -- WAV I/O ------------------------------------------------------------------

def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise FormatError("fmt chunk too short")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise FormatError("truncated WAVE_FORMAT_EXTENSIBLE header")
        tag = struct.unpack("<H", body[24:26])[0]
    return tag, channels, rate, block_align, bits


def load_wav(path) -> AudioTrack:
    """Read a 16-bit PCM or 32-bit float WAV file with one or two channels."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"{path}: truncated {cid!r} chunk "
                              f"({len(body)} of {size} bytes)")
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            pcm = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    if pcm is None:
        raise FormatError(f"{path}: missing data chunk")
    tag, channels, rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise FormatError(f"{path}: {channels} channels, only 1 or 2 supported")
    if rate <= 0:
        raise FormatError(f"{path}: bad sample rate {rate}")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise FormatError(f"{path}: unsupported encoding (format {tag:#x}, {bits} bits)")
    if block_align != channels * dtype.itemsize or len(pcm) % block_align:
        raise FormatError(f"{path}: data chunk is not a whole number of frames")
    frames = np.frombuffer(pcm, dtype=dtype).reshape(-1, channels)
    return AudioTrack(frames.T.astype(np.float64) / scale, rate)


def write_wav(track: AudioTrack, path, bit_depth=16):
    """Write ``track`` as 16-bit PCM (``bit_depth=16``) or 32-bit float (``32``).

    Values outside [-1, 1] saturate.
    """
    x = np.clip(track.samples.T, -1.0, 1.0)
    if bit_depth == 16:
        tag, payload = WAVE_FORMAT_PCM, np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    elif bit_depth == 32:
        tag, payload = WAVE_FORMAT_IEEE_FLOAT, x.astype("<f4")
    else:
        raise ValueError(f"bit_depth must be 16 or 32, got {bit_depth}")
    raw = np.ascontiguousarray(payload).tobytes()
    width = payload.dtype.itemsize
    ch, rate = track.channels, track.sample_rate
    fmt = struct.pack("<HHIIHH", tag, ch, rate, rate * ch * width, ch * width, width * 8)
    pad = b"\x00" if len(raw) & 1 else b""
    body = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(raw)) + raw + pad)
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)


# -- transforms -----------------------------------------------------------------

def to_mono(track: AudioTrack) -> AudioTrack:
    if track.channels == 1:
        return track
    left, right = track.samples
    return AudioTrack.from_mono((left + right) / 2.0, track.sample_rate)


def mid_side(track: AudioTrack) -> tuple[AudioTrack, AudioTrack]:
    """Split a stereo track into mid ``(L+R)/2`` and side ``(L-R)/2``."""
    if track.channels != 2:
        raise NotStereo("mid/side needs a stereo track")
    left, right = track.samples
    rate = track.sample_rate
    return (AudioTrack.from_mono((left + right) / 2.0, rate),
            AudioTrack.from_mono((left - right) / 2.0, rate))


def _frame_params(track: AudioTrack, frame_sec, hop_sec):
    if frame_sec <= 0 or hop_sec <= 0:
        raise ValueError("frame_sec and hop_sec must be positive")
    x = track.mono
    if len(x) == 0:
        raise EmptyInput("empty track")
    frame = max(1, int(round(frame_sec * track.sample_rate)))
    hop = max(1, int(round(hop_sec * track.sample_rate)))
    return x, frame, hop


def frame_starts(n, frame, hop) -> list[int]:
    """Start offsets of analysis windows over ``n`` samples.

    Full windows every ``hop`` samples, then one trailing partial window if it
    covers at least half a frame.
    """
    starts = list(range(0, n - frame + 1, hop)) if n >= frame else []
    nxt = starts[-1] + hop if starts else 0
    if nxt < n and 2 * (n - nxt) >= frame:
        starts.append(nxt)
    return starts


def energy_envelope(track: AudioTrack, frame_sec, hop_sec) -> Envelope:
    """Per-window RMS of a mono track."""
    x, frame, hop = _frame_params(track, frame_sec, hop_sec)
    rate = track.sample_rate
    values = np.array([np.sqrt(np.mean(np.square(x[s:s + frame])))
                       for s in frame_starts(len(x), frame, hop)])
    return Envelope(values, frame / rate, hop / rate, frame / 2 / rate)


def hann(n) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def fft_length(frame) -> int:
    return 1 << (int(frame) - 1).bit_length()


def spectrogram(track: AudioTrack, frame_sec, hop_sec) -> Spectrogram:
    """Hann-windowed magnitude STFT; each frame zero-padded to a power of two."""
    x, frame, hop = _frame_params(track, frame_sec, hop_sec)
    rate = track.sample_rate
    nfft = fft_length(frame)
    win = hann(frame)
    starts = frame_starts(len(x), frame, hop)
    frames = np.zeros((len(starts), frame))
    for i, s in enumerate(starts):
        seg = x[s:s + frame]
        frames[i, :len(seg)] = seg
    mags = np.abs(np.fft.rfft(frames * win, n=nfft, axis=1))
    return Spectrogram(mags, frame / rate, hop / rate, frame / 2 / rate)
