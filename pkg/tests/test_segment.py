import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adcorpus import segment, synthetic
from adcorpus.audio import AudioTrack, Envelope
from adcorpus.config import Config
from adcorpus.errors import DegenerateThresholdWarning, EmptyEnvelope
from adcorpus.segment import NarrationSegment

RATE = synthetic.RATE


def env_from(active_spans, total_sec=6.0, hop=0.1, level=1.0):
    """Envelope whose frame i covers [i*hop, (i+1)*hop) and is ``level`` inside the spans."""
    n = int(round(total_sec / hop))
    vals = np.zeros(n)
    for s, e in active_spans:
        vals[int(round(s / hop)):int(round(e / hop))] = level
    return Envelope(vals, hop, hop, hop / 2)


def spans(segs):
    return [(round(s.start_sec, 9), round(s.end_sec, 9)) for s in segs]


def test_merge_then_discard_example():
    env = env_from([(1.0, 2.5), (4.0, 4.4)])
    out = segment.threshold_segments(env, 0.5, min_seg_sec=1.0, min_gap_sec=0.2)
    assert spans(out) == [(1.0, 2.5)]
    assert out[0].peak_energy == 1.0 and out[0].mean_energy == 1.0


def test_short_pause_is_merged():
    env = env_from([(1.0, 1.6), (1.9, 2.6)])
    assert spans(segment.threshold_segments(env, 0.5, 1.0, 0.5)) == [(1.0, 2.6)]
    assert spans(segment.threshold_segments(env, 0.5, 0.5, 0.2)) == [(1.0, 1.6), (1.9, 2.6)]


def test_threshold_edge_cases():
    zero = env_from([])
    assert segment.threshold_segments(zero, 0.1) == []
    full = Envelope(np.linspace(1, 2, 30), 0.1, 0.1, 0.05)
    assert spans(segment.threshold_segments(full, 0.5)) == [(0.0, 3.0)]
    with pytest.raises(EmptyEnvelope):
        segment.threshold_segments(Envelope([], 0.1, 0.1, 0.05), 0.1)
    with pytest.raises(ValueError):
        segment.threshold_segments(full, 0.0)


@st.composite
def envelopes(draw):
    vals = draw(st.lists(st.floats(0, 1), min_size=1, max_size=120))
    return Envelope(np.array(vals), 0.05, 0.025, 0.025)


@settings(max_examples=80, deadline=None)
@given(envelopes(), st.floats(0.01, 0.99), st.floats(0, 1), st.floats(0, 0.5))
def test_segments_sorted_disjoint_long_enough(env, thr, min_seg, min_gap):
    out = segment.threshold_segments(env, thr, min_seg, min_gap)
    for s in out:
        assert s.end_sec - s.start_sec >= min_seg - 1e-9
    for a, b in zip(out, out[1:]):
        assert a.end_sec <= b.start_sec


@settings(max_examples=80, deadline=None)
@given(envelopes(), st.floats(0.01, 0.98), st.floats(0.0, 0.5))
def test_active_duration_monotone_in_threshold(env, thr, bump):
    def total(t):
        return sum(s.duration for s in segment.threshold_segments(env, t, 0.0, 0.0))
    assert total(min(thr + bump, 0.99)) <= total(thr) + 1e-9


def test_auto_threshold_examples():
    const = Envelope(np.full(50, 0.2), 0.05, 0.025, 0.025)
    assert segment.auto_threshold(const, 0.5, 2.0) == pytest.approx(0.4)
    sparse = Envelope(np.r_[np.zeros(99), 1.0], 0.05, 0.025, 0.025)
    with pytest.warns(DegenerateThresholdWarning):
        thr = segment.auto_threshold(sparse, 0.5, 3.0)
    assert thr == pytest.approx(3.0 * 0.01)
    with pytest.raises(EmptyEnvelope):
        segment.auto_threshold(Envelope([], 0.05, 0.025, 0.025))


@settings(max_examples=40, deadline=None)
@given(envelopes(), st.floats(0.1, 50))
def test_auto_threshold_homogeneous(env, s):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateThresholdWarning)
        a = segment.auto_threshold(env, 0.5, 3.0)
        b = segment.auto_threshold(Envelope(env.values * s, 0.05, 0.025, 0.025), 0.5, 3.0)
    assert b == pytest.approx(s * a, rel=1e-9, abs=1e-12)


def seg(s, e, peak=1.0, mean=1.0):
    return NarrationSegment(s, e, peak, mean)


def test_pad_examples():
    assert spans(segment.pad_segments([seg(10.0, 12.0)], 2.0)) == [(10.0, 14.0)]
    src = [seg(1, 2), seg(3.5, 4)]
    assert segment.pad_segments(src, 0.0) == src
    merged = segment.pad_segments([seg(1, 2, 0.5, 0.4), seg(3.5, 4, 0.9, 0.1)], 2.0)
    assert spans(merged) == [(1.0, 6.0)]
    assert merged[0].peak_energy == 0.9
    assert merged[0].mean_energy == pytest.approx((0.4 * 1 + 0.1 * 0.5) / 1.5)
    assert spans(segment.pad_segments([seg(10.0, 12.0)], 2.0, 13.0)) == [(10.0, 13.0)]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 5), st.floats(0.01, 3)), max_size=8),
       st.floats(0, 4), st.floats(1, 40))
def test_pad_never_overlaps_or_overruns(raw, pad, duration):
    segs, t = [], 0.0
    for gap, length in raw:
        segs.append(seg(t + gap, t + gap + length))
        t += gap + length
    out = segment.pad_segments(segs, pad, duration)
    for s in out:
        assert s.end_sec <= duration
    for a, b in zip(out, out[1:]):
        assert a.end_sec < b.start_sec


@pytest.fixture(scope="module")
def pair():
    return synthetic.make_pair(seed=1)


def assert_matches_bursts(segs, bursts, pad, tol=0.1):
    assert len(segs) == len(bursts)
    for s, (b0, b1) in zip(segs, bursts):
        assert abs(s.start_sec - b0) <= tol
        assert abs(s.end_sec - pad - b1) <= tol


def test_auto_pipeline_finds_bursts(pair):
    segs = segment.auto_ad_pipeline(pair.movie, pair.ad, Config())
    assert_matches_bursts(segs, pair.bursts, 2.0)


def test_semi_pipeline_finds_bursts(pair):
    segs = segment.semi_auto_pipeline(pair.movie, pair.ad, Config())
    assert_matches_bursts(segs, pair.bursts, 2.0)


def test_forward_only_nlms_still_segments(pair):
    cfg = Config()
    cfg.isolate.bidirectional = False
    segs = segment.auto_ad_pipeline(pair.movie, pair.ad, cfg)
    assert len(segs) == 3
    assert_matches_bursts(segs, pair.bursts, 2.0, tol=0.15)


def test_identical_inputs_give_nothing(pair):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateThresholdWarning)
        assert segment.auto_ad_pipeline(pair.movie, pair.movie) == []
        assert segment.semi_auto_pipeline(pair.movie, pair.movie) == []


def test_semi_single_burst_within_one_frame():
    p = synthetic.make_pair(seed=2, bursts=((5.0, 7.0),), offset_sec=0.0, stereo=False)
    cfg = Config()
    cfg.segment.pad_end_sec = 0.0
    res = segment.analyze_semi(p.movie, p.ad, cfg)
    (s,) = res.segments
    hop = res.envelope.hop_sec
    assert abs(s.start_sec - 5.0) <= hop and abs(s.end_sec - 7.0) <= hop


def test_min_seg_zero_keeps_short_bursts():
    short = ((3.0, 3.4), (8.0, 8.5), (12.0, 12.3))
    p = synthetic.make_pair(seed=3, bursts=short)
    cfg = Config()
    assert segment.semi_auto_pipeline(p.movie, p.ad, cfg) == []
    cfg.segment.min_seg_sec = 0.0
    cfg.segment.pad_end_sec = 0.0
    got = segment.semi_auto_pipeline(p.movie, p.ad, cfg)
    assert_matches_bursts(got, short, 0.0)


def test_min_seg_override_reaches_auto_path():
    short = ((3.0, 3.6), (9.0, 9.6))
    p = synthetic.make_pair(seed=4, bursts=short)
    cfg = Config()
    assert segment.auto_ad_pipeline(p.movie, p.ad, cfg) == []
    cfg.segment.min_seg_sec = 0.5
    assert len(segment.auto_ad_pipeline(p.movie, p.ad, cfg)) == 2


def test_accepts_wav_paths(tmp_path):
    paths = synthetic.write_fixture(tmp_path)
    segs = segment.semi_auto_pipeline(paths["movie_wav"], paths["ad_wav"])
    assert len(segs) == 3


def test_segment_json_round_trip():
    segs = [seg(1.0, 2.5, 0.25, 0.125), seg(4.0, 6.0, 0.5, 0.3333)]
    text = segment.segments_to_json(segs)
    assert '"start_sec": 1.000' in text and '"mean_energy": 0.333' in text
    back = segment.segments_from_json(text)
    assert [(s.start_sec, s.end_sec) for s in back] == [(1.0, 2.5), (4.0, 6.0)]
    assert segment.segments_to_json([]) == "[]\n"


def test_mono_pipeline_input():
    p = synthetic.make_pair(seed=5, stereo=False)
    segs = segment.auto_ad_pipeline(p.movie, p.ad)
    assert_matches_bursts(segs, p.bursts, 2.0)
