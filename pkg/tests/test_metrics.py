import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adcorpus import metrics
from adcorpus.errors import (DimMismatch, DuplicateIds, EmptyCorpus, ExtraIds, LengthMismatch,
                             MalformedJson, MissingIds, TooFewClips, ZeroVector)
from adcorpus.metrics import FeatureVector
from adcorpus.text import stem
from oracles import brute_meteor_alignment, lcs, meteor_from, nn_brute

VOCAB = ["the", "cat", "sat", "on", "mat", "runs", "running", "run", "a", "dog"]
sentences = st.lists(st.sampled_from(VOCAB), min_size=1, max_size=6).map(" ".join)


def test_bleu_examples():
    assert metrics.bleu(["a b c d"], ["a b c d"]) == [1.0] * 4
    b1 = metrics.bleu(["the cat"], ["the cat sat on the mat"])[0]
    assert abs(b1 - math.exp(-2)) < 1e-9
    assert metrics.bleu(["x y z"], ["a b c"]) == [0.0] * 4
    with pytest.raises(LengthMismatch):
        metrics.bleu(["a"], [])
    with pytest.raises(EmptyCorpus):
        metrics.bleu([], [])


def test_bleu_is_corpus_level():
    # a zero 4-gram precision in one pair does not zero the corpus score
    hyps = ["a b c d e", "x y"]
    refs = ["a b c d e", "x y"]
    assert metrics.bleu(hyps, refs)[3] == 1.0
    assert metrics.sentence_bleu("x y", "x y")[3] == 0.0


def test_rouge_examples():
    assert metrics.rouge_l(["a b c d"], ["a c b d"]) == pytest.approx(0.75)
    assert metrics.rouge_l(["a b"], ["a b"]) == 1.0
    assert metrics.rouge_l(["a b"], ["c d"]) == 0.0


@settings(max_examples=150, deadline=None)
@given(sentences, sentences)
def test_rouge_against_lcs_oracle(h, r):
    ht, rt = h.split(), r.split()
    k = lcs(ht, rt)
    got = metrics.rouge_l_pair(h, r)
    if k == 0:
        assert got == 0.0
    else:
        p, rec = k / len(ht), k / len(rt)
        assert got == pytest.approx((1 + 1.44) * p * rec / (rec + 1.44 * p))
    assert 0.0 <= got <= 1.0 + 1e-12


def test_cider_examples():
    refs = ["the cat sat down", "a dog ran away"]
    assert metrics.cider(refs, refs) == pytest.approx(10.0)
    assert metrics.cider(["x y z w", "q r s t"], refs) == 0.0
    with pytest.raises(TooFewClips):
        metrics.cider(["a"], ["a"])


def test_meteor_examples():
    assert metrics.meteor_lite(["a b c d"], ["a b c d"]) == 0.9921875
    assert metrics.meteor_lite_pair("x", "y") == 0.0
    m, chunks = metrics._align_words(["runs"], ["running"])
    assert (m, chunks) == (1, 1)


def test_meteor_prefers_exact_match():
    # "run" could pair with "runs" (stem) or "run" (exact); exact wins
    assert metrics._align_words(["run"], ["runs", "run"]) == (1, 1)
    assert metrics.meteor_lite_pair("the cat", "the cat") == pytest.approx(1 - 0.5 / 8)


@settings(max_examples=200, deadline=None)
@given(sentences, sentences)
def test_meteor_against_brute_force(h, r):
    ht, rt = h.split(), r.split()
    _, m, chunks = brute_meteor_alignment(ht, rt, stem)
    assert metrics._align_words(ht, rt) == (m, chunks)
    assert metrics.meteor_lite_pair(h, r) == pytest.approx(meteor_from(m, chunks, len(ht), len(rt)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(sentences, sentences), min_size=2, max_size=6), st.randoms())
def test_reorder_invariance(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    h, r = zip(*pairs)
    hs, rs = zip(*shuffled)
    assert metrics.bleu(h, r) == pytest.approx(metrics.bleu(hs, rs))
    assert metrics.rouge_l(h, r) == pytest.approx(metrics.rouge_l(hs, rs))
    assert metrics.meteor_lite(h, r) == pytest.approx(metrics.meteor_lite(hs, rs))
    assert metrics.cider(h, r) == pytest.approx(metrics.cider(hs, rs))


# -- submissions -------------------------------------------------------------------

REFS = {"m_0000": "A man opens the door.", "m_0001": "Someone walks into the kitchen slowly."}


def sub(d):
    return json.dumps([{"video_id": k, "caption": v} for k, v in d.items()])


def test_identity_submission():
    rep = metrics.evaluate_submission(sub(REFS), REFS, per_sentence=True)
    assert rep.bleu == [1.0] * 4 and rep.rouge_l == 1.0 and rep.meteor_lite >= 0.99
    keys = list(json.loads(rep.to_json()))
    assert keys[:7] == ["bleu_1", "bleu_2", "bleu_3", "bleu_4", "meteor_lite", "rouge_l", "cider"]
    assert [p["video_id"] for p in rep.per_sentence] == sorted(REFS)


def test_submission_errors():
    with pytest.raises(MissingIds, match="m_0001"):
        metrics.evaluate_submission(sub({"m_0000": "x"}), REFS)
    with pytest.raises(ExtraIds, match="zzz"):
        metrics.evaluate_submission(sub({**REFS, "zzz": "x"}), REFS)
    dup = json.dumps([{"video_id": "m_0000", "caption": "a"}] * 2)
    with pytest.raises(DuplicateIds):
        metrics.evaluate_submission(dup, REFS)
    for bad in ["{", "{}", '[{"video_id": "a"}]', '[{"video_id": true, "caption": "x"}]']:
        with pytest.raises(MalformedJson):
            metrics.parse_submission(bad)


def test_names_not_anonymized_in_submissions():
    refs = {"a": "Someone waves.", "b": "A car stops."}
    rep = metrics.evaluate_submission(sub({"a": "Harry waves.", "b": "A car stops."}), refs)
    assert rep.bleu[0] < 1.0


# -- retrieval ---------------------------------------------------------------------

def fv(i, v):
    return FeatureVector(f"{i:03d}", np.asarray(v, float))


def test_nn_examples():
    train = [fv(0, [1, 0, 0]), fv(1, [0, 2, 1])]
    got = metrics.nn_retrieve([fv(9, [0, 4, 2])], train, ["s0", "s1"])
    assert got[0].sentence == "s1" and got[0].similarity == pytest.approx(1.0)
    assert metrics.intersection_similarity(np.array([1.0, 0]), np.array([0, 1.0])) == 0.0
    # tie goes to the lowest id
    tie = metrics.nn_retrieve([fv(9, [1, 1])], [fv(5, [1, 0]), fv(2, [0, 1])], ["a", "b"])
    assert tie[0].train_id == "002"
    with pytest.raises(DimMismatch):
        metrics.nn_retrieve([fv(9, [1, 1])], train, ["a", "b"])
    with pytest.raises(ZeroVector):
        metrics.nn_retrieve([fv(9, [0, 0, 0])], train, ["a", "b"])


def test_nn_matches_brute_force():
    rng = np.random.default_rng(0)
    train = rng.random((100, 12))
    test = rng.random((20, 12))
    tf = [fv(i, v) for i, v in enumerate(train)]
    got = metrics.nn_retrieve([fv(i, v) for i, v in enumerate(test)], tf, [str(i) for i in range(100)])
    for g, t in zip(got, test):
        k, s = nn_brute(t, train)
        assert g.train_id == f"{k:03d}" and g.similarity == pytest.approx(s)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1000))
def test_nn_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    train = [fv(i, v) for i, v in enumerate(rng.random((15, 6)))]
    t = rng.random(6)
    a = metrics.nn_retrieve([fv(99, t)], train, [str(i) for i in range(15)])[0]
    b = metrics.nn_retrieve([fv(99, t * scale)], train, [str(i) for i in range(15)])[0]
    assert a.train_id == b.train_id


def test_upper_bound_examples():
    assert metrics.retrieval_upper_bound(["a b c d"], ["x", "a b c d"]) == 0.9921875
    refs = ["the cat sat", "a dog runs"]
    single = metrics.retrieval_upper_bound(refs, ["the dog sat"])
    assert single == pytest.approx(np.mean([metrics.meteor_lite_pair("the dog sat", r)
                                            for r in refs]))
    with pytest.raises(EmptyCorpus):
        metrics.retrieval_upper_bound([], ["a"])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(sentences, min_size=2, max_size=8),
       st.lists(sentences, min_size=1, max_size=5))
def test_upper_bound_dominates_nn(seed, train_sents, test_refs):
    rng = np.random.default_rng(seed)
    train = [fv(i, rng.random(5)) for i in range(len(train_sents))]
    test = [fv(100 + i, rng.random(5)) for i in range(len(test_refs))]
    preds = [p.sentence for p in metrics.nn_retrieve(test, train, train_sents)]
    for name, fn, corpus_fn in [("meteor", metrics.meteor_lite_pair, metrics.meteor_lite),
                                ("rouge", metrics.rouge_l_pair, metrics.rouge_l)]:
        ub = metrics.retrieval_upper_bound(test_refs, train_sents, fn)
        assert ub >= corpus_fn(preds, test_refs) - 1e-12, name
