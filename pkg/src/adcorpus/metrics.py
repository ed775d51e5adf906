"""Caption metrics for the single-reference setting, submission evaluation,
and the retrieval baselines.

BLEU has no smoothing and aggregates at corpus level. CIDEr is the plain
(not -D) variant. ``meteor_lite`` matches exact words and Porter stems only,
so it is not comparable to the full METEOR with synonym tables.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (DimMismatch, DuplicateIds, EmptyCorpus, ExtraIds, LengthMismatch,
                     MalformedJson, MissingIds, TooFewClips, ZeroVector)
from .text import stem, tokenize


def _check_pairs(hypotheses, references):
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise EmptyCorpus("nothing to score")


def ngrams(tokens, n) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# -- BLEU -------------------------------------------------------------------------

def _bleu_from_stats(matches, totals, hyp_len, ref_len, max_n):
    if hyp_len == 0:
        return [0.0] * max_n
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    scores, log_sum = [], 0.0
    for k in range(max_n):
        if matches[k] == 0 or totals[k] == 0:
            scores.extend([0.0] * (max_n - k))
            break
        log_sum += math.log(matches[k] / totals[k])
        scores.append(bp * math.exp(log_sum / (k + 1)))
    return scores


def _bleu_stats(hyp, ref, max_n):
    matches, totals = [0] * max_n, [0] * max_n
    for k in range(max_n):
        h, r = ngrams(hyp, k + 1), ngrams(ref, k + 1)
        matches[k] = sum(min(c, r[g]) for g, c in h.items())
        totals[k] = max(0, len(hyp) - k)
    return matches, totals


def bleu(hypotheses, references, max_n=4) -> list[float]:
    """Corpus BLEU-1..``max_n`` with brevity penalty ``min(1, exp(1 - r/c))``."""
    _check_pairs(hypotheses, references)
    matches, totals = [0] * max_n, [0] * max_n
    hyp_len = ref_len = 0
    for h, r in zip(hypotheses, references):
        ht, rt = tokenize(h), tokenize(r)
        m, t = _bleu_stats(ht, rt, max_n)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(ht)
        ref_len += len(rt)
    return _bleu_from_stats(matches, totals, hyp_len, ref_len, max_n)


def sentence_bleu(hypothesis, reference, max_n=4) -> list[float]:
    ht, rt = tokenize(hypothesis), tokenize(reference)
    m, t = _bleu_stats(ht, rt, max_n)
    return _bleu_from_stats(m, t, len(ht), len(rt), max_n)


# -- ROUGE-L ----------------------------------------------------------------------

def lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(hypothesis, reference, beta=1.2) -> float:
    h, r = tokenize(hypothesis), tokenize(reference)
    lcs = lcs_length(h, r)
    if lcs == 0:
        return 0.0
    p, rec = lcs / len(h), lcs / len(r)
    return (1 + beta ** 2) * p * rec / (rec + beta ** 2 * p)


def rouge_l(hypotheses, references, beta=1.2) -> float:
    _check_pairs(hypotheses, references)
    return math.fsum(rouge_l_pair(h, r, beta) for h, r in zip(hypotheses, references)) / len(hypotheses)


# -- CIDEr ------------------------------------------------------------------------

def cider_scores(hypotheses, references, n=4) -> list[float]:
    """Per-clip plain CIDEr: mean over n-gram orders of tf-idf cosine, times 10.

    Document frequencies come from the references; an n-gram absent from
    every reference gets df = 1.
    """
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if len(references) < 2:
        raise TooFewClips("CIDEr needs at least two clips for document frequencies")
    hyp_grams = [[ngrams(tokenize(h), k) for k in range(1, n + 1)] for h in hypotheses]
    ref_grams = [[ngrams(tokenize(r), k) for k in range(1, n + 1)] for r in references]
    df = Counter()
    for grams in ref_grams:
        for g in grams:
            df.update(g.keys())
    log_n = math.log(len(references))

    def vec(counts):
        total = sum(counts.values())
        return {g: c / total * (log_n - math.log(max(1, df[g]))) for g, c in counts.items()}

    out = []
    for hg, rg in zip(hyp_grams, ref_grams):
        sims = []
        for h, r in zip(hg, rg):
            vh, vr = vec(h), vec(r)
            nh = math.sqrt(sum(v * v for v in vh.values()))
            nr = math.sqrt(sum(v * v for v in vr.values()))
            dot = sum(v * vr.get(g, 0.0) for g, v in vh.items())
            sims.append(dot / (nh * nr) if nh > 0 and nr > 0 else 0.0)
        out.append(10.0 * sum(sims) / n)
    return out


def cider(hypotheses, references, n=4) -> float:
    scores = cider_scores(hypotheses, references, n)
    return math.fsum(scores) / len(scores)


# -- METEOR-lite ------------------------------------------------------------------

def _align_words(h, r):
    """Best unigram alignment: most exact matches, then most matches, then fewest chunks.

    Returns ``(matches, chunks)``. Exhaustive search memoized on
    (hyp position, used ref positions, ref position of the previous match).
    """
    hs = [stem(w) for w in h]
    rs = [stem(w) for w in r]
    cands = [[(j, 1 if h[i] == r[j] else 0) for j in range(len(r)) if hs[i] == rs[j]]
             for i in range(len(h))]

    @lru_cache(maxsize=None)
    def best(i, used, prev):
        # objective tuple: (-exact, -matches, chunks); lower is better
        if i == len(h):
            return (0, 0, 0)
        options = [best(i + 1, used, -1)]
        for j, exact in cands[i]:
            if used >> j & 1:
                continue
            sub = best(i + 1, used | (1 << j), j)
            new_chunk = 0 if prev >= 0 and j == prev + 1 else 1
            options.append((sub[0] - exact, sub[1] - 1, sub[2] + new_chunk))
        return min(options)

    exact_neg, m_neg, chunks = best(0, 0, -1)
    return -m_neg, chunks


def meteor_lite_pair(hypothesis, reference) -> float:
    h, r = tokenize(hypothesis), tokenize(reference)
    if not h or not r:
        return 0.0
    m, chunks = _align_words(h, r)
    if m == 0:
        return 0.0
    p, rec = m / len(h), m / len(r)
    f = 10 * p * rec / (rec + 9 * p)
    return f * (1 - 0.5 * (chunks / m) ** 3)


def meteor_lite(hypotheses, references) -> float:
    _check_pairs(hypotheses, references)
    return math.fsum(meteor_lite_pair(h, r) for h, r in zip(hypotheses, references)) / len(hypotheses)


# -- reports and submissions ----------------------------------------------------------

@dataclass
class MetricReport:
    bleu: list
    meteor_lite: float
    rouge_l: float
    cider: float
    per_sentence: list | None = None

    def to_dict(self):
        d = {f"bleu_{k + 1}": v for k, v in enumerate(self.bleu)}
        d.update(meteor_lite=self.meteor_lite, rouge_l=self.rouge_l, cider=self.cider)
        if self.per_sentence is not None:
            d["per_sentence"] = self.per_sentence
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def score_all(hypotheses, references, per_sentence_ids=None) -> MetricReport:
    """Every metric over parallel hypothesis/reference lists."""
    cider_per = cider_scores(hypotheses, references) if len(references) >= 2 else None
    report = MetricReport(
        bleu=bleu(hypotheses, references),
        meteor_lite=meteor_lite(hypotheses, references),
        rouge_l=rouge_l(hypotheses, references),
        cider=math.fsum(cider_per) / len(cider_per) if cider_per else 0.0,
    )
    if per_sentence_ids is not None:
        report.per_sentence = [
            {"video_id": vid,
             "bleu_4": sentence_bleu(h, r)[3],
             "meteor_lite": meteor_lite_pair(h, r)}
            for vid, h, r in zip(per_sentence_ids, hypotheses, references)
        ]
    return report


def parse_submission(data):
    """Validate a COCO-style ``[{"video_id", "caption"}, ...]`` submission."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise MalformedJson(f"submission is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise MalformedJson("submission must be a JSON array")
    captions, dupes = {}, set()
    for k, item in enumerate(data):
        if not isinstance(item, dict) or "video_id" not in item or "caption" not in item:
            raise MalformedJson(f"item {k} needs 'video_id' and 'caption'")
        vid, cap = item["video_id"], item["caption"]
        if isinstance(vid, bool) or not isinstance(vid, (str, int)) or not isinstance(cap, str):
            raise MalformedJson(f"item {k}: video_id must be a string, caption a string")
        vid = str(vid)
        if vid in captions:
            dupes.add(vid)
        captions[vid] = cap
    if dupes:
        raise DuplicateIds(dupes)
    return captions


def evaluate_submission(submission, references, per_sentence=False) -> MetricReport:
    """Score a submission against reference sentences.

    ``references`` is a ``clip_id -> sentence`` mapping or a list of corpus
    entries. Captions are scored as submitted (no name anonymization).
    """
    if not isinstance(references, dict):
        references = {e.clip_id: e.sentence for e in references}
    captions = parse_submission(submission)
    missing = set(references) - set(captions)
    if missing:
        raise MissingIds(missing)
    extra = set(captions) - set(references)
    if extra:
        raise ExtraIds(extra)
    ids = sorted(references)
    return score_all([captions[i] for i in ids], [references[i] for i in ids],
                     ids if per_sentence else None)


# -- retrieval ---------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureVector:
    id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError(f"{self.id}: features must be finite and non-negative")
        object.__setattr__(self, "values", v)

    def normalized(self) -> np.ndarray:
        total = self.values.sum()
        if total <= 0:
            raise ZeroVector(f"{self.id}: all-zero feature vector")
        return self.values / total


def read_features(path) -> list[FeatureVector]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                d = json.loads(line)
                out.append(FeatureVector(str(d["id"]), d["values"]))
    return out


def intersection_similarity(x, y) -> float:
    return float(np.minimum(x, y).sum())


@dataclass(frozen=True)
class Retrieval:
    test_id: str
    train_id: str
    sentence: str
    similarity: float


def nn_retrieve(test_features, train_features, train_sentences) -> list[Retrieval]:
    """Nearest training clip per test clip under histogram intersection of
    L1-normalized features; ties go to the lowest training id.

    ``train_sentences`` maps training id to sentence (or is a list parallel
    to ``train_features``).
    """
    if not isinstance(train_sentences, dict):
        train_sentences = {f.id: s for f, s in zip(train_features, train_sentences)}
    train = sorted(train_features, key=lambda f: f.id)
    if not train:
        raise EmptyCorpus("no training features")
    dim = len(train[0].values)
    for f in list(train) + list(test_features):
        if len(f.values) != dim:
            raise DimMismatch(f"{f.id}: dimension {len(f.values)} != {dim}")
    bank = np.vstack([f.normalized() for f in train])
    out = []
    for t in test_features:
        sims = np.minimum(bank, t.normalized()).sum(axis=1)
        k = int(np.argmax(sims))
        out.append(Retrieval(t.id, train[k].id, train_sentences[train[k].id], float(sims[k])))
    return out


def closest_training_sentences(test_references, train_sentences, metric=meteor_lite_pair):
    """For each test reference, ``(best_score, best_sentence)`` over the training set."""
    train = list(dict.fromkeys(train_sentences))
    if not train or not test_references:
        raise EmptyCorpus("retrieval needs non-empty test and training sets")
    out = []
    for ref in test_references:
        best_score, best_sent = -1.0, None
        for cand in train:
            s = metric(cand, ref)
            if s > best_score:
                best_score, best_sent = s, cand
        out.append((best_score, best_sent))
    return out


def retrieval_upper_bound(test_references, train_sentences, metric=meteor_lite_pair) -> float:
    """Mean over test references of the best pairwise score any training sentence achieves."""
    best = closest_training_sentences(test_references, train_sentences, metric)
    return math.fsum(s for s, _ in best) / len(best)
