"""Abbreviation-aware sentence segmentation used everywhere in the repo."""

from __future__ import annotations

import re

from .errors import InputError

_TERMINAL = ".!?"
_CLOSERS = "\"')”’"
_OPENERS = "\"'(“‘"

# Undotted abbreviation words that do not end a sentence when followed by a period.
_ABBREVIATIONS = frozenset(
    """mr mrs ms dr prof sr jr st no vs etc fig ca approx inc ltd co al
    gen col sgt capt rev hon assn dept est min max""".split()
)
# Abbreviations that keep their internal dots.
_DOTTED_ABBREVIATIONS = frozenset({"e.g", "i.e", "u.s", "u.k", "a.m", "p.m", "ph.d"})


def _word_before(text: str, index: int) -> str:
    match = re.search(r"(\S+)$", text[:index])
    if not match:
        return ""
    return match.group(1).lstrip(_OPENERS)


def _is_abbreviation_dot(text: str, index: int) -> bool:
    word = _word_before(text, index)
    if re.fullmatch(r"[A-Z]", word):
        return True
    lowered = word.lower()
    if lowered.rstrip(".") in _DOTTED_ABBREVIATIONS or lowered in _DOTTED_ABBREVIATIONS:
        return True
    return lowered.strip(".") in _ABBREVIATIONS


def split_sentences(paragraph: str) -> list:
    """Split a paragraph into sentences.

    Joining the result with single spaces recovers the paragraph up to
    inter-sentence whitespace.
    """
    text = paragraph.strip()
    if not text:
        raise InputError("cannot split an empty paragraph")
    sentences = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINAL:
            i += 1
            continue
        j = i + 1
        while j < n and text[j] in _TERMINAL + _CLOSERS:
            j += 1
        if j >= n:
            break
        if not text[j].isspace():
            i = j
            continue
        if text[i] == "." and _is_abbreviation_dot(text, i):
            i = j
            continue
        k = j
        while k < n and text[k].isspace():
            k += 1
        nxt = text[k] if k < n else ""
        if nxt and (nxt.isupper() or nxt.isdigit() or nxt in _OPENERS):
            sentences.append(text[start:j].strip())
            start = k
            i = k
        else:
            i = j
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def count_sentences(text: str) -> int:
    if not text.strip():
        return 0
    return len(split_sentences(text))
