"""Deterministic non-neural backends for offline runs and fixtures.

The lexical-overlap entailment classifier stands in for a real NLI
checkpoint when none is installed; it honors the contract (labels,
normalized probabilities) but is only a crude semantic proxy.
"""

from __future__ import annotations

import re
from typing import Sequence

from .base import ConditionalGenerator, EntailmentClassifier
from .vocab import Vocabulary

_STOPWORDS = frozenset(
    """a an the is are was were be been being and or of in on at to for with by
    as from it its he she his her him they them their this that these those
    there here which who whom whose what when where has have had do does did
    will would can could""".split()
)
_NEGATION = frozenset({"not", "no", "never", "none", "cannot", "n't", "nobody", "nothing"})


def _content_tokens(text: str) -> set:
    words = re.findall(r"[a-z0-9']+", text.lower())
    return {w for w in words if w not in _STOPWORDS}


def _has_negation(text: str) -> bool:
    words = set(re.findall(r"[a-z']+", text.lower()))
    return bool(words & _NEGATION)


class OverlapEntailmentClassifier(EntailmentClassifier):
    """Entailment by content-word containment; contradiction by negation mismatch."""

    def __init__(self, containment_threshold: float = 0.95):
        self.containment_threshold = containment_threshold

    def probabilities(self, premise: str, hypothesis: str) -> dict:
        prem = _content_tokens(premise)
        hyp = _content_tokens(hypothesis)
        containment = len(hyp & prem) / max(len(hyp), 1) if hyp else 1.0
        neg_mismatch = _has_negation(premise) != _has_negation(hypothesis)
        if neg_mismatch and containment >= 0.6:
            probs = (0.05, 0.15, 0.80)
        elif containment >= self.containment_threshold:
            probs = (0.90, 0.08, 0.02)
        else:
            probs = (0.10 + 0.3 * containment, 0.85 - 0.3 * containment, 0.05)
        return dict(zip(self.labels, probs))


class EchoGenerator(ConditionalGenerator):
    """Returns its input unchanged; exercises the duplicate-split fallback."""

    kind = "echo"

    def __init__(self, max_length: int = 4096):
        self.vocab = Vocabulary([])
        self.max_length = max_length
        self.max_output_length = max_length

    def generate_tokens(self, tokens: Sequence[str]) -> list:
        return list(tokens)


class RuleSplitGenerator(ConditionalGenerator):
    """Splits a compound sentence at its first top-level conjunction.

    'X and Y.' becomes 'X. Y.' when both halves look clause-like;
    otherwise the input is echoed, which downstream treats as a
    cannot-split signal.
    """

    kind = "rule_split"

    def __init__(self, max_length: int = 4096, min_clause_tokens: int = 2):
        self.vocab = Vocabulary([])
        self.max_length = max_length
        self.max_output_length = max_length
        self.min_clause_tokens = min_clause_tokens

    def generate_tokens(self, tokens: Sequence[str]) -> list:
        text = " ".join(tokens)
        match = re.search(r",? and ", text)
        if not match:
            return list(tokens)
        left = text[: match.start()].strip()
        right = text[match.end() :].strip()
        if (
            len(left.split()) < self.min_clause_tokens
            or len(right.split()) < self.min_clause_tokens
        ):
            return list(tokens)
        if not left.endswith((".", "!", "?")):
            left += "."
        right = right[0].upper() + right[1:] if right else right
        if not right.endswith((".", "!", "?")):
            right += "."
        return f"{left} {right}".split()
