"""Delimiter prediction between ordered facts: fuse (0) or separate (1).

Facts are joined with a single ``</s>`` separator between each pair and
the token classifier is read only at those separator positions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .backend.base import TokenClassifier, TrainConfig
from .backend.toy import ToyConfig, ToyTokenClassifier
from .backend.vocab import EOS, Vocabulary, tokenize
from .errors import CorruptExampleError, InputError
from .ordering import fact_text

FUSE, SEPARATE = 0, 1


@dataclass
class DelimiterSequence:
    """Binary fuse/separate decisions between n facts; always length n-1."""

    values: list

    def __post_init__(self):
        if any(v not in (FUSE, SEPARATE) for v in self.values):
            raise InputError(f"delimiters must be 0 or 1: {self.values}")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, index):
        return self.values[index]

    def __eq__(self, other):
        if isinstance(other, DelimiterSequence):
            return self.values == other.values
        return self.values == other

    def validate_for(self, n_facts: int) -> None:
        if len(self.values) != max(n_facts - 1, 0):
            raise CorruptExampleError(
                f"{len(self.values)} delimiters for {n_facts} facts"
            )


def separator_layout(fact_texts: Sequence[str]):
    """Tokens of facts joined by single separators, plus separator positions."""
    tokens = []
    separator_positions = []
    for i, text in enumerate(fact_texts):
        if i > 0:
            tokens.append(EOS)
            separator_positions.append(len(tokens) - 1)
        tokens.extend(tokenize(text))
    return tokens, separator_positions


def predict_delimiters(ordered_facts: Sequence, model: TokenClassifier) -> DelimiterSequence:
    """Classify each separator position; ties resolve to keeping facts separate."""
    texts = [fact_text(f) for f in ordered_facts]
    if not texts:
        raise InputError("need at least one fact")
    if len(texts) == 1:
        return DelimiterSequence([])
    tokens, separator_positions = separator_layout(texts)
    probs = model.classify(tokens)
    values = []
    for position in separator_positions:
        fuse_p, separate_p = float(probs[position][FUSE]), float(probs[position][SEPARATE])
        values.append(SEPARATE if separate_p >= fuse_p else FUSE)
    return DelimiterSequence(values)


def train_aggregation(corpus: Sequence, config: TrainConfig,
                      cfg: Optional[ToyConfig] = None) -> ToyTokenClassifier:
    """Train the separator classifier on gold delimiter labels."""
    if not corpus:
        raise InputError("empty training corpus")
    examples = []
    all_sentences = []
    for item in corpus:
        if isinstance(item, tuple):
            sentences, labels = list(item[0]), list(item[1])
        else:
            sentences, labels = list(item.sentences), list(item.agg_labels)
        if len(labels) != max(len(sentences) - 1, 0):
            raise CorruptExampleError(
                f"{len(labels)} labels for {len(sentences)} sentences"
            )
        all_sentences.extend(sentences)
        if len(sentences) < 2:
            continue
        tokens, separator_positions = separator_layout(sentences)
        examples.append((tokens, separator_positions, labels))
    if not examples:
        raise InputError("no multi-sentence examples to train on")
    vocab = Vocabulary.from_texts(all_sentences)
    model = ToyTokenClassifier(vocab, cfg, num_classes=2, seed=config.seed)
    model.train_history = model.fit(examples, config)
    return model


def eval_aggregation(predicted: Sequence, gold: Sequence) -> dict:
    """Exact-sequence accuracy per example and pooled per-boundary accuracy."""
    if len(predicted) != len(gold):
        raise InputError("predicted and gold example counts differ")
    if not predicted:
        raise InputError("nothing to evaluate")
    exact = 0
    boundary_hits = 0
    boundary_total = 0
    for p, g in zip(predicted, gold):
        p, g = list(p), list(g)
        if len(p) != len(g):
            raise InputError(f"delimiter lengths differ: {len(p)} vs {len(g)}")
        if p == g:
            exact += 1
        boundary_hits += sum(1 for a, b in zip(p, g) if a == b)
        boundary_total += len(g)
    return {
        "acc_per_example": exact / len(predicted),
        "acc_per_boundary": boundary_hits / boundary_total if boundary_total else 1.0,
    }


def random_delimiters(n_facts: int, rng: random.Random) -> DelimiterSequence:
    """Uniform-random baseline over boundaries."""
    return DelimiterSequence([rng.choice((FUSE, SEPARATE)) for _ in range(max(n_facts - 1, 0))])
