"""Contracts for all learned components plus the shared training config.

The pipeline only ever talks to these interfaces, so a tiny from-scratch
model and a large pretrained checkpoint are interchangeable behind them.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Sequence

from ..errors import InputError, SequenceTooLongError
from .vocab import Vocabulary

NLI_LABELS = ("entailment", "neutral", "contradiction")


@dataclass
class TrainConfig:
    """Optimization hyperparameters. Defaults target the pretrained tier;
    use :meth:`toy` for the small from-scratch models."""

    learning_rate: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.997
    epsilon: float = 1e-9
    warmup: float = 0.1
    batch_size: int = 8
    grad_accum: int = 4
    epochs: int = 1
    seed: int = 13

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise InputError("learning rate and epsilon must be positive")
        if not (0.0 <= self.warmup <= 1.0):
            raise InputError("warmup proportion must lie in [0, 1]")
        for name in ("batch_size", "grad_accum", "epochs"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be a positive integer")

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        base = cls(learning_rate=1e-3, batch_size=16, grad_accum=1, epochs=200)
        return replace(base, **overrides) if overrides else base

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "warmup": self.warmup,
            "batch_size": self.batch_size,
            "grad_accum": self.grad_accum,
            "epochs": self.epochs,
            "seed": self.seed,
        }


class SequenceEncoder(ABC):
    """Maps a token sequence of length L to L state vectors of dimension b."""

    vocab: Vocabulary
    hidden_size: int
    max_length: int

    @abstractmethod
    def encode_tokens(self, tokens: Sequence[str]):
        """Return an (L, hidden_size) state matrix for the given tokens."""


class ConditionalGenerator(ABC):
    """Greedy sequence-to-sequence generator; deterministic for fixed weights."""

    vocab: Vocabulary
    max_length: int
    max_output_length: int

    @abstractmethod
    def generate_tokens(self, tokens: Sequence[str]) -> list:
        """Greedy-decode an output token sequence for the input tokens."""

    def generate_text(self, text: str) -> str:
        from .vocab import BOS, EOS, tokenize

        out = self.generate_tokens(tokenize(text))
        return " ".join(t for t in out if t not in (BOS, EOS))


class TokenClassifier(ABC):
    """Per-position distribution over a fixed number of classes."""

    vocab: Vocabulary
    num_classes: int = 2
    max_length: int

    @abstractmethod
    def classify(self, tokens: Sequence[str]):
        """Return an (L, num_classes) matrix of class probabilities."""


class EntailmentClassifier(ABC):
    """Three-way NLI judgment over a (premise, hypothesis) pair."""

    labels = NLI_LABELS

    @abstractmethod
    def probabilities(self, premise: str, hypothesis: str) -> dict:
        """Return {label: probability} summing to one."""


def encode(encoder: SequenceEncoder, tokens: Sequence[str]):
    """Contract wrapper: length check plus shape guarantee."""
    if len(tokens) > encoder.max_length:
        raise SequenceTooLongError(len(tokens), encoder.max_length)
    states = encoder.encode_tokens(tokens)
    assert states.shape == (len(tokens), encoder.hidden_size)
    return states


def generate(generator: ConditionalGenerator, tokens: Sequence[str]) -> list:
    if len(tokens) > generator.max_length:
        raise SequenceTooLongError(len(tokens), generator.max_length)
    return generator.generate_tokens(tokens)


def classify_tokens(classifier: TokenClassifier, tokens: Sequence[str]):
    if len(tokens) > classifier.max_length:
        raise SequenceTooLongError(len(tokens), classifier.max_length)
    return classifier.classify(tokens)


def entails(classifier: EntailmentClassifier, premise: str, hypothesis: str):
    """Return (argmax label, {label: probability})."""
    if not premise.strip() or not hypothesis.strip():
        raise InputError("premise and hypothesis must be non-empty")
    probs = classifier.probabilities(premise, hypothesis)
    label = max(NLI_LABELS, key=lambda name: probs[name])
    return label, probs
