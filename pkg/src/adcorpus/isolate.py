"""Vocal isolation and dialogue suppression.

Two routes produce a narration-dominant signal: center extraction followed by
an NLMS canceller that predicts the AD-mixed track from the movie track, or a
frame-wise spectral difference of the two soundtracks.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .audio import AudioTrack, Envelope, Spectrogram, energy_envelope, mid_side
from .errors import BadParam, FramingMismatch, LengthMismatch, NotStereo, RateMismatch

DEFAULT_TAPS = 64
DEFAULT_MU = 0.5
DEFAULT_EPS = 1e-6


def extract_center(stereo: AudioTrack, side_gain=0.0, nperseg=1024) -> AudioTrack:
    """Center channel of a stereo track.

    With ``side_gain == 0`` this is the plain mid signal ``(L+R)/2``. A positive
    gain additionally subtracts ``side_gain * |S|`` from the mid STFT magnitude
    (floored at zero, mid phase kept), attenuating ambience that leaks into
    the center.
    """
    if stereo.channels != 2:
        raise NotStereo("center extraction needs a stereo track")
    if side_gain < 0:
        raise BadParam("side_gain must be >= 0")
    mid, side = mid_side(stereo)
    if side_gain == 0:
        return mid
    m, s = mid.mono, side.mono
    n = len(m)
    nperseg = min(nperseg, n)
    _, _, zm = signal.stft(m, nperseg=nperseg)
    _, _, zs = signal.stft(s, nperseg=nperseg)
    mag = np.maximum(np.abs(zm) - side_gain * np.abs(zs), 0.0)
    _, out = signal.istft(mag * np.exp(1j * np.angle(zm)), nperseg=nperseg)
    out = np.pad(out[:n], (0, max(0, n - len(out))))
    return AudioTrack.from_mono(out, stereo.sample_rate)


def nlms_cancel(primary: AudioTrack, reference: AudioTrack, taps=DEFAULT_TAPS,
                mu=DEFAULT_MU, eps=DEFAULT_EPS, return_weights=False):
    """Residual of a normalized-LMS filter predicting ``primary`` from ``reference``.

    For each sample ``n`` with reference window ``x = ref[n], ref[n-1], ...,
    ref[n-taps+1]`` (zeros before the start)::

        e[n] = primary[n] - w . x
        w   += mu / (eps + x . x) * e[n] * x

    One pass over the whole signal. Whatever the reference can explain is
    removed; content present only in ``primary`` survives in the residual.
    """
    if primary.sample_rate != reference.sample_rate:
        raise RateMismatch(f"{primary.sample_rate} Hz vs {reference.sample_rate} Hz")
    d, x = primary.mono, reference.mono
    if len(d) != len(x):
        raise LengthMismatch(f"{len(d)} vs {len(x)} samples")
    if int(taps) != taps or taps < 1:
        raise BadParam(f"taps must be a positive integer, got {taps}")
    if not 0 < mu <= 2:
        raise BadParam(f"mu must be in (0, 2], got {mu}")
    if not eps > 0:
        raise BadParam(f"eps must be > 0, got {eps}")
    taps = int(taps)

    # padded[n:n+taps] is the window oldest-first, so w is kept reversed
    padded = np.concatenate([np.zeros(taps - 1), x])
    w = np.zeros(taps)
    e = np.empty(len(d))
    for n in range(len(d)):
        win = padded[n:n + taps]
        err = d[n] - w.dot(win)
        e[n] = err
        w += (mu * err / (eps + win.dot(win))) * win
    out = AudioTrack.from_mono(e, primary.sample_rate)
    if return_weights:
        return out, w[::-1].copy()
    return out


def nlms_cancel_backward(primary: AudioTrack, reference: AudioTrack, taps=DEFAULT_TAPS,
                         mu=DEFAULT_MU, eps=DEFAULT_EPS) -> AudioTrack:
    """:func:`nlms_cancel` run over the time-reversed signals, returned in forward time.

    Its adaptation transients fall before, not after, any content the
    reference cannot explain, which makes it the complement of the forward
    pass when locating segment edges.
    """
    rate = primary.sample_rate
    resid = nlms_cancel(AudioTrack.from_mono(primary.mono[::-1], rate),
                        AudioTrack.from_mono(reference.mono[::-1], rate), taps, mu, eps)
    return AudioTrack.from_mono(resid.mono[::-1], rate)


def spectral_difference(spec_a: Spectrogram, spec_b: Spectrogram) -> Envelope:
    """Per-frame mean absolute magnitude difference (L1 over bins / bins)."""
    same = (spec_a.magnitudes.shape == spec_b.magnitudes.shape
            and np.isclose(spec_a.frame_sec, spec_b.frame_sec)
            and np.isclose(spec_a.hop_sec, spec_b.hop_sec)
            and np.isclose(spec_a.origin_sec, spec_b.origin_sec))
    if not same:
        raise FramingMismatch(
            f"spectrograms differ: {spec_a.magnitudes.shape} frame={spec_a.frame_sec} "
            f"hop={spec_a.hop_sec} vs {spec_b.magnitudes.shape} frame={spec_b.frame_sec} "
            f"hop={spec_b.hop_sec}")
    diff = np.abs(spec_a.magnitudes - spec_b.magnitudes).mean(axis=1)
    return Envelope(diff, spec_a.frame_sec, spec_a.hop_sec, spec_a.origin_sec)


def power_difference(primary: AudioTrack, reference: AudioTrack, frame_sec, hop_sec) -> Envelope:
    """Envelope of the squared-signal difference: ``sqrt(max(0, ms(primary) - ms(reference)))``.

    ``ms`` is the per-frame mean square, so values share the units of
    :func:`energy_envelope`.
    """
    if primary.sample_rate != reference.sample_rate:
        raise RateMismatch(f"{primary.sample_rate} Hz vs {reference.sample_rate} Hz")
    if len(primary) != len(reference):
        raise LengthMismatch(f"{len(primary)} vs {len(reference)} samples")
    ep = energy_envelope(primary, frame_sec, hop_sec)
    er = energy_envelope(reference, frame_sec, hop_sec)
    vals = np.sqrt(np.maximum(ep.values ** 2 - er.values ** 2, 0.0))
    return Envelope(vals, ep.frame_sec, ep.hop_sec, ep.origin_sec)
