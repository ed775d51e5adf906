"""Global offset estimation between two recordings of the same soundtrack."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .audio import AudioTrack
from .errors import (EmptyInput, LagTooLarge, LowConfidenceWarning, OffsetTooLarge,
                     RateMismatch)

LOW_CONFIDENCE_RATIO = 1.2


@dataclass(frozen=True)
class OffsetEstimate:
    """``offset_samples`` > 0 means ``b`` lags ``a``: ``b[n] ~ a[n - offset]``."""

    offset_samples: int
    peak_correlation: float
    secondary_ratio: float
    sample_rate: int

    @property
    def offset_sec(self) -> float:
        return self.offset_samples / self.sample_rate

    def to_dict(self):
        return {"offset_samples": self.offset_samples,
                "offset_sec": self.offset_sec,
                "peak_correlation": self.peak_correlation,
                "secondary_ratio": self.secondary_ratio}


def cross_correlation(a, b, max_lag):
    """Raw cross-correlation ``c[k] = sum_n a[n] * b[n + k]`` for ``|k| <= max_lag``.

    Computed with a zero-padded real FFT. Returns ``(lags, c)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    nfft = 1 << (len(a) + len(b) - 2).bit_length()
    spec = np.conj(np.fft.rfft(a, nfft)) * np.fft.rfft(b, nfft)
    circ = np.fft.irfft(spec, nfft)
    lags = np.arange(-max_lag, max_lag + 1)
    return lags, circ[lags % nfft]


def normalized_cross_correlation(a, b, max_lag):
    """Cross-correlation divided by the L2 norms of the overlapping parts.

    At lag ``k`` the overlap is ``a[n]`` and ``b[n + k]`` for every ``n`` where
    both exist; lags whose overlap has zero energy score 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    lags, c = cross_correlation(a, b, max_lag)
    ca = np.concatenate([[0.0], np.cumsum(a * a)])
    cb = np.concatenate([[0.0], np.cumsum(b * b)])
    lo = np.maximum(0, -lags)
    hi = np.minimum(len(a), len(b) - lags)
    ea = ca[hi] - ca[lo]
    eb = cb[hi + lags] - cb[lo + lags]
    denom = np.sqrt(np.maximum(ea, 0.0) * np.maximum(eb, 0.0))
    out = np.zeros_like(c)
    ok = denom > 1e-12 * max(ca[-1], cb[-1], 1e-300)
    out[ok] = c[ok] / denom[ok]
    return lags, np.clip(out, -1.0, 1.0)


def _secondary_ratio(ncc, peak_idx):
    peak = ncc[peak_idx]
    inner = ncc[1:-1]
    is_max = (inner > ncc[:-2]) & (inner >= ncc[2:])
    cand = np.flatnonzero(is_max) + 1
    if ncc[0] > ncc[1]:
        cand = np.append(cand, 0)
    if ncc[-1] > ncc[-2]:
        cand = np.append(cand, len(ncc) - 1)
    others = ncc[cand[cand != peak_idx]]
    others = others[others > 0]
    if peak <= 0:
        return 1.0
    if len(others) == 0:
        return float("inf")
    return float(max(1.0, peak / others.max()))


def estimate_offset(a: AudioTrack, b: AudioTrack, max_lag_sec,
                    low_confidence_ratio=LOW_CONFIDENCE_RATIO) -> OffsetEstimate:
    """Lag of ``b`` relative to ``a`` at the normalized cross-correlation peak.

    Ties go to the smaller ``|lag|``. Emits ``LowConfidenceWarning`` when the
    peak is less than ``low_confidence_ratio`` times the next-highest local
    maximum.
    """
    if a.sample_rate != b.sample_rate:
        raise RateMismatch(f"{a.sample_rate} Hz vs {b.sample_rate} Hz")
    x, y = a.mono, b.mono
    if len(x) == 0 or len(y) == 0:
        raise EmptyInput("cannot align an empty track")
    max_lag = int(round(max_lag_sec * a.sample_rate))
    if max_lag < 0 or max_lag >= min(len(x), len(y)):
        raise LagTooLarge(f"max lag {max_lag} samples needs tracks longer than that "
                          f"(got {len(x)} and {len(y)})")
    lags, ncc = normalized_cross_correlation(x, y, max_lag)
    best = ncc.max()
    tied = np.flatnonzero(ncc >= best - 1e-12)
    peak_idx = int(tied[np.argmin(np.abs(lags[tied]))])
    ratio = _secondary_ratio(ncc, peak_idx) if len(ncc) > 1 else float("inf")
    est = OffsetEstimate(int(lags[peak_idx]), float(ncc[peak_idx]), ratio, a.sample_rate)
    if ratio < low_confidence_ratio:
        warnings.warn(f"offset {est.offset_samples} samples: correlation peak only "
                      f"{ratio:.3f}x the runner-up", LowConfidenceWarning, stacklevel=2)
    return est


def apply_offset(track: AudioTrack, offset_samples) -> AudioTrack:
    """Shift by ``offset_samples`` keeping the length: positive delays, negative advances."""
    k = int(offset_samples)
    n = len(track)
    if abs(k) >= n and k != 0:
        raise OffsetTooLarge(f"|{k}| >= track length {n}")
    if k == 0:
        return track
    out = np.zeros_like(track.samples)
    if k > 0:
        out[:, k:] = track.samples[:, :n - k]
    else:
        out[:, :n + k] = track.samples[:, -k:]
    return AudioTrack(out, track.sample_rate)
