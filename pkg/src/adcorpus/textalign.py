"""Subtitle and script parsing, script-to-subtitle alignment, and timestamp
inference for script description sentences."""

from __future__ import annotations

import html
import json
import logging
import re
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from .errors import EmptyFile, EmptyInput, NoAnchors
from .text import match_words, split_sentences

log = logging.getLogger(__name__)

SCENE_HEADING = "scene_heading"
DIALOGUE = "dialogue"
DESCRIPTION = "description"


@dataclass(frozen=True)
class Subtitle:
    index: int
    start_sec: float
    end_sec: float
    text: str


@dataclass(frozen=True)
class SrtWarning:
    block: int  # 1-based position of the block in the file
    line: int   # 1-based line number where the block starts
    message: str

    def __str__(self):
        return f"block {self.block} (line {self.line}): {self.message}"


@dataclass(frozen=True)
class ScriptElement:
    kind: str
    text: str
    ordinal: int
    speaker: str | None = None

    def __post_init__(self):
        if self.kind not in (SCENE_HEADING, DIALOGUE, DESCRIPTION):
            raise ValueError(f"unknown script element kind {self.kind!r}")
        if (self.speaker is not None) != (self.kind == DIALOGUE):
            raise ValueError("speaker is set exactly for dialogue elements")


@dataclass(frozen=True)
class AlignedSentence:
    sentence: str
    start_sec: float
    end_sec: float
    score: float
    source: str = "script"
    movie_id: str = ""

    def __post_init__(self):
        if not self.start_sec < self.end_sec:
            raise ValueError(f"empty interval [{self.start_sec}, {self.end_sec}]")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    def to_dict(self):
        return {"sentence": self.sentence, "start_sec": self.start_sec,
                "end_sec": self.end_sec, "score": self.score,
                "source": self.source, "movie_id": self.movie_id}


# -- SRT ------------------------------------------------------------------------

_TC = r"(\d+):([0-5]\d):([0-5]\d)[,.](\d{1,3})"
_TIMING = re.compile(rf"^\s*{_TC}\s*-->\s*{_TC}(?:\s+.*)?$")
_TAG = re.compile(r"<[^>]*>|\{\\[^}]*\}")


def _seconds(h, m, s, ms):
    return ((int(h) * 3600 + int(m) * 60 + int(s)) * 1000 + int(ms.ljust(3, "0"))) / 1000.0


def _clean(line):
    return html.unescape(_TAG.sub("", line)).strip()


def parse_srt(text):
    """Parse SRT text into ``(subtitles, warnings)``.

    Malformed blocks (bad index, bad timing line, end not after start) are
    skipped and reported; they never abort the parse.
    """
    text = text.lstrip("\ufeff").replace("\r\n", "\n").replace("\r", "\n")
    if not text.strip():
        raise EmptyFile("subtitle file is empty")
    subs, warns = [], []
    blocks = []
    current, first_line = [], 0
    for lineno, line in enumerate(text.split("\n"), 1):
        if line.strip():
            if not current:
                first_line = lineno
            current.append(line)
        elif current:
            blocks.append((first_line, current))
            current = []
    if current:
        blocks.append((first_line, current))

    for bno, (lineno, lines) in enumerate(blocks, 1):
        head = lines[0].strip()
        if _TIMING.match(head):
            index, rest = len(subs) + 1, lines
        elif head.isdigit() and len(lines) >= 2:
            index, rest = int(head), lines[1:]
        else:
            warns.append(SrtWarning(bno, lineno, f"expected an index line, got {head!r}"))
            continue
        m = _TIMING.match(rest[0])
        if not m:
            warns.append(SrtWarning(bno, lineno, f"unparseable timing line {rest[0].strip()!r}"))
            continue
        start, end = _seconds(*m.groups()[:4]), _seconds(*m.groups()[4:])
        if end <= start:
            warns.append(SrtWarning(bno, lineno, f"end {end:.3f}s is not after start {start:.3f}s"))
            continue
        body = [c for c in (_clean(t) for t in rest[1:]) if c]
        subs.append(Subtitle(index, start, end, "\n".join(body)))
    subs.sort(key=lambda s: s.start_sec)
    return subs, warns


def format_timecode(sec) -> str:
    ms = int(round(sec * 1000))
    h, ms = divmod(ms, 3_600_000)
    m, ms = divmod(ms, 60_000)
    s, ms = divmod(ms, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def serialize_srt(subs) -> str:
    blocks = [f"{s.index}\n{format_timecode(s.start_sec)} --> {format_timecode(s.end_sec)}\n{s.text}\n"
              for s in subs]
    return "\n".join(blocks)


# -- scripts ----------------------------------------------------------------------

@dataclass
class ScriptFormat:
    """Layout knobs for scripts that deviate from the usual screenplay format.

    ``dialogue_indented``: dialogue lines must be indented deeper than the
    least-indented line of the script. Set it to False for flush-left scripts
    where a speaker cue is simply followed by the speech.
    """

    scene_prefixes: tuple = ("INT.", "EXT.", "INT/EXT", "EXT/INT", "I/E", "INT ", "EXT ")
    max_speaker_words: int = 4
    dialogue_indented: bool = True
    transition_pattern: str = r"^[A-Z0-9 .'-]*(?:TO:|IN:|OUT[.:]?|FADE OUT)$"


_PAREN = re.compile(r"\([^)]*\)")


def _speaker_name(line, fmt):
    """Speaker name if ``line`` looks like a cue (all caps, short), else None."""
    name = _PAREN.sub("", line).strip()
    if not name or not any(c.isalpha() for c in name) or name != name.upper():
        return None
    if name[-1] in ".!?:;," or len(name.split()) > fmt.max_speaker_words:
        return None
    return name


def _is_heading(line, fmt):
    up = line.upper()
    return line == up and any(up.startswith(p) for p in fmt.scene_prefixes)


def parse_script(text, format_hints=None):
    """Classify screenplay text into scene headings, dialogue and descriptions.

    A short all-caps line immediately followed by an indented block is a
    speaker cue and that block is its dialogue (parenthetical direction lines
    are dropped). Lines starting with INT./EXT. are scene headings; transitions
    ("CUT TO:") are dropped. Everything else is description, with consecutive
    lines merged and split into sentences.
    """
    fmt = format_hints if isinstance(format_hints, ScriptFormat) else ScriptFormat(**(format_hints or {}))
    transition = re.compile(fmt.transition_pattern)
    lines = text.lstrip("\ufeff").replace("\r\n", "\n").expandtabs(8).split("\n")
    if not any(ln.strip() for ln in lines):
        raise EmptyFile("script is empty")
    indent = [len(ln) - len(ln.lstrip()) for ln in lines]
    base = min(i for i, ln in zip(indent, lines) if ln.strip())

    out: list[ScriptElement] = []
    para: list[str] = []

    def emit(kind, body, speaker=None):
        out.append(ScriptElement(kind, body, len(out), speaker))

    def flush():
        if para:
            for sent in split_sentences(" ".join(para)):
                emit(DESCRIPTION, sent)
            para.clear()

    def speechlike(k):
        if k >= len(lines) or not lines[k].strip():
            return False
        return indent[k] > base or not fmt.dialogue_indented

    i = 0
    while i < len(lines):
        s = lines[i].strip()
        if not s:
            flush()
            i += 1
            continue
        if _is_heading(s, fmt):
            flush()
            emit(SCENE_HEADING, s)
            i += 1
            continue
        if transition.match(s):
            flush()
            i += 1
            continue
        speaker = _speaker_name(s, fmt)
        if speaker is not None and speechlike(i + 1) and _speaker_name(lines[i + 1].strip(), fmt) is None:
            flush()
            speech = []
            j = i + 1
            while speechlike(j) and _speaker_name(lines[j].strip(), fmt) is None:
                t = lines[j].strip()
                if not (t.startswith("(") and t.endswith(")")):
                    speech.append(t)
                j += 1
            emit(DIALOGUE, " ".join(speech), speaker)
            i = j
            continue
        para.append(s)
        i += 1
    flush()
    return out


# -- alignment ----------------------------------------------------------------------

@dataclass(frozen=True)
class DialoguePair:
    dialogue_ordinal: int
    subtitle_index: int
    ratio: float


@dataclass
class Alignment:
    pairs: list = field(default_factory=list)
    score: float = 0.0


def _count_matrix(bags, vocab):
    rows, cols, vals = [], [], []
    for r, bag in enumerate(bags):
        for w, c in bag.items():
            rows.append(r)
            cols.append(vocab[w])
            vals.append(c)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(bags), len(vocab)), dtype=np.int64)


def match_matrix(dialogue_texts, subtitle_texts):
    """``M[i, j]`` = matched-word ratio of dialogue ``i`` against subtitle ``j``.

    Matched words are the multiset intersection; the ratio divides by the
    dialogue's word count (0 for a dialogue without words).
    """
    dbags = [Counter(match_words(t)) for t in dialogue_texts]
    sbags = [Counter(match_words(t)) for t in subtitle_texts]
    vocab = {}
    for bag in dbags + sbags:
        for w in bag:
            vocab.setdefault(w, len(vocab))
    dm, sm = _count_matrix(dbags, vocab), _count_matrix(sbags, vocab)
    top = max([1] + [max(b.values()) for b in dbags + sbags if b])
    inter = np.zeros((len(dbags), len(sbags)))
    # sum_w min(a_w, b_w) == sum_t #{w : a_w >= t and b_w >= t}
    for t in range(1, top + 1):
        a = (dm >= t).astype(np.int64)
        b = (sm >= t).astype(np.int64)
        inter += (a @ b.T).toarray()
    lengths = np.array([sum(b.values()) for b in dbags], dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lengths[:, None] > 0, inter / lengths[:, None], 0.0)
    return ratio


def align_dialogue(dialogues, subs, gap=0.1) -> Alignment:
    """Monotone one-to-one alignment of script dialogue to subtitles.

    Maximizes the sum of matched-word ratios over aligned pairs minus
    ``gap`` for every dialogue or subtitle left unaligned.
    """
    if not dialogues or not subs:
        raise EmptyInput("need at least one dialogue and one subtitle")
    score = match_matrix([d.text for d in dialogues], [s.text for s in subs])
    n, m = score.shape
    best = np.empty((n + 1, m + 1))
    best[0, :] = -gap * np.arange(m + 1)
    best[:, 0] = -gap * np.arange(n + 1)
    move = np.zeros((n + 1, m + 1), dtype=np.int8)  # 0 diag, 1 skip dialogue, 2 skip subtitle
    move[1:, 0] = 1
    move[0, 1:] = 2
    for i in range(1, n + 1):
        row, prev, srow = best[i], best[i - 1], score[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + srow[j - 1]
            up = prev[j] - gap
            left = row[j - 1] - gap
            if diag >= up and diag >= left:
                row[j], move[i, j] = diag, 0
            elif up >= left:
                row[j], move[i, j] = up, 1
            else:
                row[j], move[i, j] = left, 2
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        mv = move[i, j]
        if mv == 0:
            pairs.append(DialoguePair(dialogues[i - 1].ordinal, subs[j - 1].index,
                                      float(score[i - 1, j - 1])))
            i, j = i - 1, j - 1
        elif mv == 1:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return Alignment(pairs, float(best[n, m]))


def _apportion(texts, start, end):
    weights = [max(1, len(match_words(t))) for t in texts]
    total = sum(weights)
    cuts, acc = [start], 0
    for w in weights[:-1]:
        acc += w
        cuts.append(start + (end - start) * acc / total)
    cuts.append(end)
    return list(zip(cuts[:-1], cuts[1:]))


def infer_timestamps(alignment: Alignment, script, subs, movie_id="", edge_span_sec=5.0):
    """Time intervals for description sentences from the surrounding dialogue anchors.

    Anchors are aligned pairs with a nonzero matched-word ratio. Descriptions
    between two anchors share the gap from the end of the earlier anchor's
    subtitle to the start of the later one, split in proportion to their word
    counts, and score the mean of the two anchor ratios. Descriptions before
    the first (after the last) anchor get the span reaching back (forward) to
    the neighbouring subtitle, at most ``edge_span_sec``, and that anchor's
    ratio.
    """
    anchors = sorted((p for p in alignment.pairs if p.ratio > 0),
                     key=lambda p: p.dialogue_ordinal)
    if not anchors:
        raise NoAnchors("no dialogue line matched any subtitle")
    ordered = sorted(subs, key=lambda s: s.start_sec)
    pos = {s.index: k for k, s in enumerate(ordered)}
    descriptions = sorted((e for e in script if e.kind == DESCRIPTION), key=lambda e: e.ordinal)

    groups: dict[int, list] = {}
    ords = [a.dialogue_ordinal for a in anchors]
    for e in descriptions:
        groups.setdefault(int(np.searchsorted(ords, e.ordinal)), []).append(e)

    out = []
    for g, elems in sorted(groups.items()):
        if 0 < g < len(anchors):
            a, b = anchors[g - 1], anchors[g]
            start = ordered[pos[a.subtitle_index]].end_sec
            end = ordered[pos[b.subtitle_index]].start_sec
            score = (a.ratio + b.ratio) / 2
        elif g == 0:
            b = anchors[0]
            k = pos[b.subtitle_index]
            end = ordered[k].start_sec
            floor = ordered[k - 1].end_sec if k > 0 else 0.0
            start = max(floor, end - edge_span_sec, 0.0)
            score = b.ratio
        else:
            a = anchors[-1]
            k = pos[a.subtitle_index]
            start = ordered[k].end_sec
            ceil = ordered[k + 1].start_sec if k + 1 < len(ordered) else float("inf")
            end = min(ceil, start + edge_span_sec)
            score = a.ratio
        if not end > start:
            log.warning("%d description(s) before ordinal %d fall in an empty span; skipped",
                        len(elems), elems[-1].ordinal)
            continue
        for e, (s, t) in zip(elems, _apportion([e.text for e in elems], start, end)):
            out.append(AlignedSentence(e.text, s, t, min(1.0, max(0.0, score)), "script", movie_id))
    return out


def reliability_filter(sentences, min_score=0.5):
    kept = [s for s in sentences if s.score >= min_score]
    dropped = [s for s in sentences if s.score < min_score]
    return kept, dropped


def sentences_to_json(sentences) -> str:
    return json.dumps([s.to_dict() for s in sentences], indent=1, ensure_ascii=False) + "\n"


def sentences_from_json(text):
    return [AlignedSentence(**d) for d in json.loads(text)]


def elements_to_json(elements) -> str:
    return json.dumps([asdict(e) for e in elements], indent=1, ensure_ascii=False) + "\n"


def subtitles_to_json(subs) -> str:
    return json.dumps([asdict(s) for s in subs], indent=1, ensure_ascii=False) + "\n"
