"""Corpus records and corpus-level transforms and statistics."""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (BadPattern, ClipLongerThanMovie, LengthMismatch, SplitConflict,
                     UnassignedMovie)
from .text import normalize_sentence, split_sentences, stem, tokenize

SPLITS = ("train", "val", "public_test", "blind_test")
SOURCES = ("ad", "script")


@dataclass(frozen=True)
class CorpusEntry:
    clip_id: str
    movie_id: str
    start_sec: float
    end_sec: float
    sentence: str
    source: str = "ad"
    score: float | None = None
    # interval before clip expansion; None when the clip was never expanded
    orig_start_sec: float | None = None
    orig_end_sec: float | None = None

    def __post_init__(self):
        if not self.start_sec < self.end_sec:
            raise ValueError(f"{self.clip_id}: empty interval [{self.start_sec}, {self.end_sec}]")
        if self.source not in SOURCES:
            raise ValueError(f"{self.clip_id}: unknown source {self.source!r}")

    @property
    def duration(self) -> float:
        return self.end_sec - self.start_sec

    @property
    def orig_duration(self) -> float:
        if self.orig_start_sec is None:
            return self.duration
        return self.orig_end_sec - self.orig_start_sec

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CorpusStats:
    movies: int
    words: int
    sentences: int
    clips: int
    avg_clip_sec: float
    total_hours: float
    avg_clip_sec_orig: float
    total_hours_orig: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DescriptionStats:
    avg_sentence_length: float
    vocab_size: int
    unique_sentences: int
    pct_novel: float

    def to_dict(self):
        return asdict(self)


# -- I/O ------------------------------------------------------------------------

def read_jsonl(path) -> list[CorpusEntry]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(CorpusEntry(**json.loads(line)))
    return out


def write_jsonl(entries, path, omit_sentences=False):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for e in entries:
            d = e.to_dict()
            if omit_sentences:
                del d["sentence"]
                del d["score"]
            f.write(json.dumps(d, ensure_ascii=False) + "\n")


def read_lines(path) -> list[str]:
    """Non-empty, non-comment lines of a text file (lexicons, pattern lists)."""
    with open(path, encoding="utf-8") as f:
        return [ln.rstrip("\n") for ln in f if ln.strip() and not ln.startswith("#")]


def read_split_assignment(path) -> dict[str, str]:
    """``movie_id,split`` CSV (optional header). A movie listed under two splits is an error."""
    out: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row or row[0].strip() in ("", "movie_id"):
                continue
            movie, split = row[0].strip(), row[1].strip()
            if movie in out and out[movie] != split:
                raise SplitConflict(f"movie {movie!r} assigned to both {out[movie]} and {split}")
            out[movie] = split
    return out


def read_durations(path) -> dict[str, float]:
    out = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if row and row[0].strip() not in ("", "movie_id"):
                out[row[0].strip()] = float(row[1])
    return out


# -- transforms -------------------------------------------------------------------

def _place(start, length, hi):
    """Interval of exactly ``length`` (in floating point) inside [0, hi] near ``start``."""
    start = min(max(start, 0.0), hi - length)
    for _ in range(8):
        step = math.ulp(start + length)
        s = round(start / step) * step
        if s < 0:
            s += step
        if s + length > hi:
            s -= step
        e = s + length
        if s >= 0 and e <= hi and e - s == length:
            return s, e
        start = s
    raise ArithmeticError(f"cannot place an interval of {length} s at {start}")


def expand_clip(entry: CorpusEntry, min_len_sec=2.0, movie_duration=math.inf) -> CorpusEntry:
    """Grow a clip shorter than ``min_len_sec`` symmetrically to exactly that length.

    At the movie boundaries the shortfall moves to the other side. The
    original interval is kept in ``orig_start_sec``/``orig_end_sec``.
    """
    length = entry.end_sec - entry.start_sec
    if length >= min_len_sec:
        return entry
    if min_len_sec > movie_duration:
        raise ClipLongerThanMovie(
            f"{entry.clip_id}: {min_len_sec} s clip does not fit a {movie_duration} s movie")
    center = (entry.start_sec + entry.end_sec) / 2
    start, end = _place(center - min_len_sec / 2, min_len_sec, movie_duration)
    return replace(entry, start_sec=start, end_sec=end,
                   orig_start_sec=entry.start_sec, orig_end_sec=entry.end_sec)


class Anonymizer:
    """Replace character names by "someone", coordinated names by "people"."""

    def __init__(self, names):
        names = sorted({n.strip() for n in names
                        if n.strip() and n.strip().lower() not in ("someone", "people")},
                       key=lambda n: (-len(n), n))
        self.empty = not names
        if self.empty:
            return
        name = "(?:" + "|".join(re.escape(n) for n in names) + ")"
        # two or more names whose last link is "and": "A and B", "A, B, and C"
        group = rf"{name}(?:\s*,\s*{name})*\s*,?\s+and\s+{name}"
        self._group = re.compile(rf"(?<![\w']){group}(?!\w)")
        self._single = re.compile(rf"(?<![\w']){name}(?!\w)")

    @staticmethod
    def _initial(text, pos):
        head = text[:pos].rstrip(" \t\"'“‘(")
        return not head or head[-1] in ".!?"

    def _replace(self, rx, word, text):
        return rx.sub(lambda m: word.capitalize() if self._initial(m.string, m.start()) else word,
                      text)

    def __call__(self, sentence):
        if self.empty:
            return sentence
        return self._replace(self._single, "someone",
                             self._replace(self._group, "people", sentence))


def anonymize(sentence, name_lexicon) -> str:
    lex = name_lexicon if isinstance(name_lexicon, Anonymizer) else Anonymizer(name_lexicon)
    return lex(sentence)


def filter_nonvisual(entries, movie_duration, intro_outro_sec=90.0, patterns=()):
    """Split entries into kept and ``(entry, reason)`` dropped pairs.

    ``movie_duration`` is a number or a ``movie_id -> seconds`` mapping.
    Reasons: ``intro_outro`` (interval entirely inside the first or last
    ``intro_outro_sec``) and ``pattern`` (sentence matches a drop pattern).
    """
    compiled = []
    for p in patterns:
        try:
            compiled.append(re.compile(p))
        except re.error as exc:
            raise BadPattern(f"{p!r}: {exc}") from exc
    kept, dropped = [], []
    for e in entries:
        dur = movie_duration[e.movie_id] if isinstance(movie_duration, dict) else movie_duration
        if e.end_sec <= intro_outro_sec or e.start_sec >= dur - intro_outro_sec:
            dropped.append((e, "intro_outro"))
        elif any(rx.search(e.sentence) for rx in compiled):
            dropped.append((e, "pattern"))
        else:
            kept.append(e)
    return kept, dropped


def assemble_corpus(sentences, movie_duration, intro_outro_sec=90.0, min_clip_sec=2.0,
                    names=(), patterns=()):
    """Turn timed sentences into corpus entries.

    Sentences are ordered per movie by ``(start, end, text)`` and numbered
    ``<movie>_<k:04d>``. Intervals are clipped to the movie length (a sentence
    starting after the end is dropped as ``outside_movie``), non-visual
    entries are dropped, short clips expanded and names anonymized. Returns ``(entries, dropped)`` where
    ``dropped`` holds ``(entry, reason)`` pairs.
    """
    def duration_of(movie):
        return movie_duration[movie] if isinstance(movie_duration, dict) else movie_duration

    rows = sorted(sentences, key=lambda s: (s.movie_id, s.start_sec, s.end_sec, s.sentence))
    counter: Counter = Counter()
    entries, outside = [], []
    for s in rows:
        k = counter[s.movie_id]
        counter[s.movie_id] += 1
        clip_id = f"{s.movie_id}_{k:04d}"
        end = min(s.end_sec, duration_of(s.movie_id))
        if s.start_sec >= end:
            outside.append((CorpusEntry(clip_id, s.movie_id, s.start_sec, s.end_sec, s.sentence,
                                        s.source, s.score), "outside_movie"))
            continue
        entries.append(CorpusEntry(clip_id, s.movie_id, s.start_sec, end, s.sentence,
                                   s.source, s.score))
    kept, dropped = filter_nonvisual(entries, movie_duration, intro_outro_sec, patterns)
    dropped = outside + dropped
    anon = Anonymizer(names)
    out = []
    for e in kept:
        e = expand_clip(e, min_clip_sec, duration_of(e.movie_id))
        out.append(replace(e, sentence=anon(e.sentence)))
    return out, dropped


def split_by_movie(entries, assignment):
    """Partition entries by their movie's split.

    ``assignment`` maps movie id to one of ``SPLITS``; an iterable of
    ``(movie_id, split)`` pairs is also accepted and checked for conflicts.
    """
    if not isinstance(assignment, dict):
        table: dict[str, str] = {}
        for movie, split in assignment:
            if movie in table and table[movie] != split:
                raise SplitConflict(f"movie {movie!r} assigned to both {table[movie]} and {split}")
            table[movie] = split
        assignment = table
    bad = {m: s for m, s in assignment.items() if s not in SPLITS}
    if bad:
        raise UnassignedMovie(f"unknown split name(s): {bad}")
    out = {s: [] for s in SPLITS}
    missing = sorted({e.movie_id for e in entries} - set(assignment))
    if missing:
        raise UnassignedMovie(f"movies without a split: {', '.join(missing)}")
    for e in entries:
        out[assignment[e.movie_id]].append(e)
    return out


def write_splits(splits, out_dir):
    """One JSONL file per split; the blind test file carries no sentences."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, entries in splits.items():
        write_jsonl(entries, out_dir / f"{name}.jsonl", omit_sentences=(name == "blind_test"))


# -- statistics -------------------------------------------------------------------

def corpus_stats(entries) -> CorpusStats:
    entries = list(entries)
    n = len(entries)
    total = math.fsum(e.duration for e in entries)
    total_orig = math.fsum(e.orig_duration for e in entries)
    return CorpusStats(
        movies=len({e.movie_id for e in entries}),
        words=sum(len(e.sentence.split()) for e in entries),
        sentences=sum(max(1, len(split_sentences(e.sentence))) for e in entries if e.sentence.strip()),
        clips=n,
        avg_clip_sec=total / n if n else 0.0,
        total_hours=total / 3600,
        avg_clip_sec_orig=total_orig / n if n else 0.0,
        total_hours_orig=total_orig / 3600,
    )


def vocab_stats(sentences) -> dict:
    """Vocabulary size before and after Porter stemming."""
    raw = set()
    for s in sentences:
        raw.update(tokenize(s.sentence if isinstance(s, CorpusEntry) else s))
    return {"vocab_size_raw": len(raw), "vocab_size_stemmed": len({stem(w) for w in raw})}


def description_stats(hypotheses, training_sentences) -> DescriptionStats:
    hyps = list(hypotheses)
    if not hyps:
        return DescriptionStats(0.0, 0, 0, 0.0)
    train = {normalize_sentence(s) for s in training_sentences}
    norm = [normalize_sentence(h) for h in hyps]
    vocab = {w for h in hyps for w in tokenize(h)}
    novel = sum(1 for h in norm if h not in train)
    return DescriptionStats(
        avg_sentence_length=sum(len(h.split()) for h in hyps) / len(hyps),
        vocab_size=len(vocab),
        unique_sentences=len(set(norm)),
        pct_novel=100.0 * novel / len(hyps),
    )


def moving_average(values, window):
    """Centered mean filter, window truncated at the edges."""
    x = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    left, right = (window - 1) // 2, window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(len(x))
    lo = np.maximum(0, idx - left)
    hi = np.minimum(len(x), idx + right + 1)
    return (csum[hi] - csum[lo]) / (hi - lo)


def difficulty_order(references, sort_key="length_asc", word_counts=None):
    """Indices of ``references`` sorted by length (ascending) or mean word frequency (descending)."""
    toks = [tokenize(r) for r in references]
    if sort_key == "length_asc":
        keys = [len(t) for t in toks]
    elif sort_key == "word_freq_desc":
        counts = word_counts if word_counts is not None else Counter(w for t in toks for w in t)
        keys = [-(sum(counts.get(w, 0) for w in t) / len(t)) if t else 0.0 for t in toks]
    else:
        raise ValueError(f"unknown sort key {sort_key!r}")
    return sorted(range(len(references)), key=lambda i: keys[i])


def difficulty_curve(per_sentence_scores, references, sort_key="length_asc", window=500,
                     word_counts=None):
    """Per-sentence scores reordered by reference difficulty and mean-filtered."""
    if len(per_sentence_scores) != len(references):
        raise LengthMismatch(f"{len(per_sentence_scores)} scores vs {len(references)} references")
    order = difficulty_order(references, sort_key, word_counts)
    return moving_average(np.asarray(per_sentence_scores, dtype=np.float64)[order], window)
