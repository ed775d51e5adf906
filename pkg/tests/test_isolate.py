import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import lfilter

from adcorpus import audio, isolate
from adcorpus.audio import AudioTrack, Spectrogram
from adcorpus.errors import BadParam, FramingMismatch, LengthMismatch, NotStereo, RateMismatch
from oracles import textbook_nlms

RATE = 16000


def mono(x, rate=RATE):
    return AudioTrack.from_mono(x, rate)


def test_matches_textbook_recursion():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(3000)
    d = lfilter([0.6, -0.2, 0.1], [1.0], x) + 0.05 * rng.standard_normal(3000)
    got, w = isolate.nlms_cancel(mono(d), mono(x), taps=16, mu=0.7, eps=1e-4, return_weights=True)
    ref_e, ref_w = textbook_nlms(d, x, 16, 0.7, 1e-4)
    assert np.max(np.abs(got.mono - ref_e)) < 1e-9
    assert np.max(np.abs(w - ref_w)) < 1e-9
    assert w[:3] == pytest.approx([0.6, -0.2, 0.1], abs=0.05)


def test_identity_taps8_converges():
    x = np.random.default_rng(1).standard_normal(RATE)
    e = isolate.nlms_cancel(mono(x), mono(x), taps=8, mu=0.5).mono
    tail = slice(int(0.9 * len(x)), None)
    assert np.sqrt(np.mean(e[tail] ** 2)) < 1e-2 * np.sqrt(np.mean(x ** 2))


def test_zero_reference_passes_primary():
    x = np.random.default_rng(2).standard_normal(500)
    e = isolate.nlms_cancel(mono(x), mono(np.zeros(500)))
    assert np.array_equal(e.mono, x)


def test_burst_survives_background_cancelled():
    rng = np.random.default_rng(3)
    n = 2 * RATE
    bg = lfilter([1.0], [1.0, -0.9], rng.standard_normal(n))
    path = lfilter([0.8, 0.3, -0.1, 0.05], [1.0], bg)
    burst = np.zeros(n)
    burst[RATE:RATE + 4000] = 0.7 * np.std(path) * rng.standard_normal(4000)
    e = isolate.nlms_cancel(mono(path + burst), mono(bg)).mono
    seg = slice(RATE, RATE + 4000)
    # energy of the burst component left in the residual, relative to the burst
    gain = (e[seg] @ burst[seg]) / (burst[seg] @ burst[seg])
    assert gain ** 2 >= 0.8
    quiet = np.r_[4000:RATE, RATE + 8000:n]
    supp = 10 * np.log10(np.mean(path[quiet] ** 2) / np.mean(e[quiet] ** 2))
    assert supp >= 20


def test_backward_pass_is_time_reversed_forward():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(800)
    d = 0.5 * x + 0.1 * rng.standard_normal(800)
    back = isolate.nlms_cancel_backward(mono(d), mono(x), taps=4)
    fwd_rev = isolate.nlms_cancel(mono(d[::-1]), mono(x[::-1]), taps=4)
    assert np.array_equal(back.mono, fwd_rev.mono[::-1])


@pytest.mark.parametrize("kw,err", [
    ({"taps": 0}, BadParam), ({"taps": 2.5}, BadParam), ({"mu": 0}, BadParam),
    ({"mu": 2.5}, BadParam), ({"eps": 0}, BadParam),
])
def test_bad_params(kw, err):
    x = mono(np.ones(10))
    with pytest.raises(err):
        isolate.nlms_cancel(x, x, **kw)


def test_shape_errors():
    with pytest.raises(RateMismatch):
        isolate.nlms_cancel(mono(np.ones(10)), mono(np.ones(10), 8000))
    with pytest.raises(LengthMismatch):
        isolate.nlms_cancel(mono(np.ones(10)), mono(np.ones(11)))


def test_extract_center_examples():
    rng = np.random.default_rng(5)
    v, n = rng.standard_normal(1000), rng.standard_normal(1000)
    out = isolate.extract_center(AudioTrack.from_stereo(v + n, v - n, RATE))
    assert np.allclose(out.mono, v)
    assert np.all(isolate.extract_center(AudioTrack.from_stereo(n, -n, RATE)).mono == 0)
    assert np.array_equal(isolate.extract_center(AudioTrack.from_stereo(v, v, RATE)).mono, v)
    with pytest.raises(NotStereo):
        isolate.extract_center(mono(v))


def test_extract_center_side_gain():
    rng = np.random.default_rng(6)
    v = np.sin(2 * np.pi * 440 * np.arange(RATE) / RATE)
    n = 0.5 * rng.standard_normal(RATE)
    st_ = AudioTrack.from_stereo(v + n + 0.3 * n, v - n + 0.3 * n, RATE)  # some noise leaks into mid
    plain = isolate.extract_center(st_)
    cleaned = isolate.extract_center(st_, side_gain=0.3)
    assert len(cleaned) == len(plain)
    err_plain = np.mean((plain.mono - v) ** 2)
    err_clean = np.mean((cleaned.mono - v) ** 2)
    assert err_clean < err_plain
    with pytest.raises(BadParam):
        isolate.extract_center(st_, side_gain=-1)


def spec(m):
    return Spectrogram(np.asarray(m, dtype=float), 0.05, 0.025, 0.025)


def test_spectral_difference_examples():
    rng = np.random.default_rng(7)
    a = np.abs(rng.standard_normal((20, 9)))
    assert np.all(isolate.spectral_difference(spec(a), spec(a)).values == 0)
    b = a.copy()
    b[5] = 0
    d = isolate.spectral_difference(spec(a), spec(b)).values
    assert np.flatnonzero(d).tolist() == [5]
    assert d[5] == pytest.approx(a[5].mean())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_spectral_difference_pseudometric(seed):
    rng = np.random.default_rng(seed)
    a, b = np.abs(rng.standard_normal((2, 6, 5)))
    dab = isolate.spectral_difference(spec(a), spec(b)).values
    dba = isolate.spectral_difference(spec(b), spec(a)).values
    assert np.array_equal(dab, dba) and np.all(dab >= 0)


def test_framing_mismatch():
    a = spec(np.ones((4, 3)))
    with pytest.raises(FramingMismatch):
        isolate.spectral_difference(a, spec(np.ones((5, 3))))
    with pytest.raises(FramingMismatch):
        isolate.spectral_difference(a, Spectrogram(np.ones((4, 3)), 0.05, 0.02, 0.025))


def test_power_difference():
    rng = np.random.default_rng(8)
    r = rng.standard_normal(RATE)
    p = r.copy()
    p[4000:8000] *= 2
    env = isolate.power_difference(mono(p), mono(r), 0.025, 0.025)
    assert np.all(env.values >= 0)
    ref = audio.energy_envelope(mono(r), 0.025, 0.025).values
    # frames fully inside the doubled region: sqrt(4 ms - ms) = sqrt(3) * rms
    assert env.values[11] == pytest.approx(np.sqrt(3) * ref[11])
    assert env.values[0] == 0
