"""Tokenization shared by the corpus statistics and the caption metrics."""

from __future__ import annotations

import re
import string
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

_PUNCT = string.punctuation + "‘’“”–—…"
_WORD = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_stemmer = PorterStemmer()


def tokenize(sentence) -> list[str]:
    """Lowercase, split on whitespace, strip leading/trailing punctuation."""
    out = []
    for tok in sentence.lower().split():
        tok = tok.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


def match_words(text) -> list[str]:
    """Words used for subtitle/script matching: lowercase alphanumerics,
    keeping intra-word apostrophes ("don't")."""
    return _WORD.findall(text.lower().replace("’", "'"))


@lru_cache(maxsize=65536)
def stem(word) -> str:
    return _stemmer.stem(word)


def split_sentences(text) -> list[str]:
    return [s.strip() for s in _SENT_SPLIT.split(text.strip()) if s.strip()]


def normalize_sentence(sentence) -> str:
    return " ".join(tokenize(sentence))
