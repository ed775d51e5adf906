"""Narration segmentation: thresholding, smoothing and end padding, plus the
two end-to-end pipelines (NLMS-based automatic and spectrogram-difference
semi-automatic)."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import audio, isolate, sync
from .audio import AudioTrack, Envelope
from .errors import DegenerateThresholdWarning, EmptyEnvelope, RateMismatch

log = logging.getLogger(__name__)

_TOL = 1e-9


@dataclass(frozen=True)
class NarrationSegment:
    start_sec: float
    end_sec: float
    peak_energy: float
    mean_energy: float

    def __post_init__(self):
        if not 0 <= self.start_sec < self.end_sec:
            raise ValueError(f"bad segment [{self.start_sec}, {self.end_sec}]")

    @property
    def duration(self) -> float:
        return self.end_sec - self.start_sec


def threshold_segments(env: Envelope, threshold, min_seg_sec=1.0, min_gap_sec=0.5):
    """Frames above ``threshold`` become segments.

    Active runs closer than ``min_gap_sec`` are merged first; merged runs
    shorter than ``min_seg_sec`` are then dropped. Frame ``i`` owns the
    interval ``center_i +- hop/2``.
    """
    if len(env) == 0:
        raise EmptyEnvelope("envelope has no frames")
    if threshold <= 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    if min_seg_sec < 0 or min_gap_sec < 0:
        raise ValueError("min_seg_sec and min_gap_sec must be >= 0")
    vals = env.values
    active = np.concatenate([[False], vals > threshold, [False]])
    edges = np.flatnonzero(np.diff(active.astype(np.int8)))
    runs = [[int(s), int(e) - 1] for s, e in zip(edges[::2], edges[1::2])]

    def start_of(i):
        return max(0.0, env.frame_time(i) - env.hop_sec / 2)

    def end_of(j):
        return env.frame_time(j) + env.hop_sec / 2

    merged = []
    for run in runs:
        if merged and start_of(run[0]) - end_of(merged[-1][1]) < min_gap_sec - _TOL:
            merged[-1][1] = run[1]
        else:
            merged.append(run)

    out = []
    for i, j in merged:
        s, e = start_of(i), end_of(j)
        if e - s + _TOL < min_seg_sec:
            continue
        inside = vals[i:j + 1]
        out.append(NarrationSegment(s, e, float(inside.max()), float(inside.mean())))
    return out


def auto_threshold(env: Envelope, quantile=0.5, factor=3.0):
    """``factor`` times the ``quantile`` of the envelope values.

    A zero quantile (mostly-silent envelope) falls back to ``factor * mean``
    with a ``DegenerateThresholdWarning``.
    """
    if len(env) == 0:
        raise EmptyEnvelope("envelope has no frames")
    if not 0 < quantile < 1:
        raise ValueError(f"quantile must be in (0, 1), got {quantile}")
    if factor <= 0:
        raise ValueError(f"factor must be > 0, got {factor}")
    thr = factor * float(np.quantile(env.values, quantile))
    if thr <= 0:
        warnings.warn(f"quantile {quantile} of the envelope is 0; using {factor} x mean",
                      DegenerateThresholdWarning, stacklevel=2)
        thr = factor * float(np.mean(env.values))
    return thr


def pad_segments(segs, pad_end_sec=2.0, track_duration_sec=None):
    """Extend every segment end by ``pad_end_sec`` (clamped), merging overlaps."""
    if pad_end_sec < 0:
        raise ValueError("pad_end_sec must be >= 0")
    limit = float("inf") if track_duration_sec is None else track_duration_sec
    out: list[NarrationSegment] = []
    weights: list[float] = []
    for seg in segs:
        end = min(seg.end_sec + pad_end_sec, limit)
        start = seg.start_sec
        if start >= end:
            continue
        if out and start <= out[-1].end_sec:
            prev, w = out[-1], weights[-1]
            mean = (prev.mean_energy * w + seg.mean_energy * seg.duration) / (w + seg.duration)
            out[-1] = NarrationSegment(prev.start_sec, max(prev.end_sec, end),
                                       max(prev.peak_energy, seg.peak_energy), mean)
            weights[-1] = w + seg.duration
        else:
            out.append(NarrationSegment(start, end, seg.peak_energy, seg.mean_energy))
            weights.append(seg.duration)
    return out


# -- pipelines ------------------------------------------------------------------

@dataclass
class SegmentationResult:
    segments: list
    offset: sync.OffsetEstimate
    threshold: float
    envelope: Envelope = field(repr=False)


def _as_track(x) -> AudioTrack:
    return x if isinstance(x, AudioTrack) else audio.load_wav(x)


def _align(movie: AudioTrack, ad: AudioTrack, sync_cfg):
    """Shift ``ad`` onto the movie timeline; zero both outside the shared span."""
    if movie.sample_rate != ad.sample_rate:
        raise RateMismatch(f"{movie.sample_rate} Hz vs {ad.sample_rate} Hz")
    est = sync.estimate_offset(movie, ad, sync_cfg.max_lag_sec, sync_cfg.low_confidence_ratio)
    k = est.offset_samples
    n = len(movie)
    a = movie.mono.copy()
    b = np.zeros(n)
    # b[t] = ad[t + k] wherever both exist
    lo, hi = max(0, -k), min(n, len(ad) - k)
    if hi > lo:
        b[lo:hi] = ad.mono[lo + k:hi + k]
    a[:lo] = 0.0
    a[max(hi, lo):] = 0.0
    rate = movie.sample_rate
    valid = slice(lo, max(hi, lo))
    return AudioTrack.from_mono(a, rate), AudioTrack.from_mono(b, rate), est, valid


def _floor(level, floor_db):
    return level * 10.0 ** (floor_db / 20.0)


def _segment_envelope(env, level, cfg, duration):
    seg = cfg.segment
    thr = max(auto_threshold(env, seg.threshold_quantile, seg.threshold_factor),
              _floor(level, seg.floor_db))
    if thr <= 0:
        return [], thr
    segs = threshold_segments(env, thr, seg.min_seg_sec, seg.min_gap_sec)
    return pad_segments(segs, seg.pad_end_sec, duration), thr


def analyze_auto(movie_wav, ad_wav, config=None) -> SegmentationResult:
    """Automatic path: center extraction, alignment, NLMS residual, thresholding.

    Steps: center channel (stereo inputs), offset estimate and shift, NLMS
    residual of the AD track given the movie track, RMS envelope, per-movie
    threshold (never below ``segment.floor_db`` relative to the AD level),
    merge/discard smoothing, end padding.
    """
    from .config import Config

    cfg = config or Config()
    movie, ad = _as_track(movie_wav), _as_track(ad_wav)
    if movie.sample_rate != ad.sample_rate:
        raise RateMismatch(f"{movie.sample_rate} Hz vs {ad.sample_rate} Hz")

    def center(t):
        return isolate.extract_center(t, cfg.isolate.side_gain) if t.channels == 2 else t

    ref, mix, est, valid = _align(center(movie), center(ad), cfg.sync)
    log.info("offset %d samples (peak %.3f, ratio %.2f)", est.offset_samples,
             est.peak_correlation, est.secondary_ratio)
    iso = cfg.isolate
    resid = isolate.nlms_cancel(mix, ref, iso.taps, iso.mu, iso.eps)
    env = audio.energy_envelope(resid, cfg.audio.frame_sec, cfg.audio.hop_sec)
    if iso.bidirectional:
        # forward adaptation lags after each burst, backward before it;
        # the frame-wise minimum keeps both edges sharp
        back = isolate.nlms_cancel_backward(mix, ref, iso.taps, iso.mu, iso.eps)
        env_b = audio.energy_envelope(back, cfg.audio.frame_sec, cfg.audio.hop_sec)
        env = Envelope(np.minimum(env.values, env_b.values), env.frame_sec, env.hop_sec,
                       env.origin_sec)
    shared = mix.mono[valid]
    level = float(np.sqrt(np.mean(shared ** 2))) if len(shared) else 0.0
    segs, thr = _segment_envelope(env, level, cfg, movie.duration_sec)
    return SegmentationResult(segs, est, thr, env)


def analyze_semi(movie_wav, admix_wav, config=None) -> SegmentationResult:
    """Semi-automatic path: alignment, then spectrogram difference thresholding."""
    from .config import Config

    cfg = config or Config()
    movie, ad = _as_track(movie_wav), _as_track(admix_wav)
    ref, mix, est, _ = _align(audio.to_mono(movie), audio.to_mono(ad), cfg.sync)
    spec_ref = audio.spectrogram(ref, cfg.audio.frame_sec, cfg.audio.hop_sec)
    spec_mix = audio.spectrogram(mix, cfg.audio.frame_sec, cfg.audio.hop_sec)
    env = isolate.spectral_difference(spec_mix, spec_ref)
    row_level = spec_mix.magnitudes.mean(axis=1)
    live = row_level[row_level > 0]
    level = float(live.mean()) if len(live) else 0.0
    segs, thr = _segment_envelope(env, level, cfg, movie.duration_sec)
    return SegmentationResult(segs, est, thr, env)


def auto_ad_pipeline(movie_wav, ad_wav, config=None) -> list:
    return analyze_auto(movie_wav, ad_wav, config).segments


def semi_auto_pipeline(movie_wav, admix_wav, config=None) -> list:
    return analyze_semi(movie_wav, admix_wav, config).segments


# -- serialization ----------------------------------------------------------------

def segments_to_json(segs) -> str:
    """Segment list as a JSON array, every number with three decimals."""
    rows = [
        "  {"
        f"\"start_sec\": {s.start_sec:.3f}, \"end_sec\": {s.end_sec:.3f}, "
        f"\"peak_energy\": {s.peak_energy:.3f}, \"mean_energy\": {s.mean_energy:.3f}"
        "}"
        for s in segs
    ]
    if not rows:
        return "[]\n"
    return "[\n" + ",\n".join(rows) + "\n]\n"


def segments_from_json(text) -> list:
    return [NarrationSegment(float(d["start_sec"]), float(d["end_sec"]),
                             float(d["peak_energy"]), float(d["mean_energy"]))
            for d in json.loads(text)]
