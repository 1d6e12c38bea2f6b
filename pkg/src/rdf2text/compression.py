"""Paragraph compression: fuse, rephrase, and write the final text.

The generator consumes the plan-decorated fact sequence: ``<sep>`` marks
the boundaries where neighboring facts must stay in separate sentences;
its absence invites fusion.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .backend.base import ConditionalGenerator, TrainConfig
from .backend.toy import ToyConfig, ToySeq2Seq
from .backend.vocab import SEP, Vocabulary, tokenize
from .errors import GenerationError, InputError
from .ordering import fact_text
from .sentences import count_sentences


class PCVariant(Enum):
    PC = "pc"
    PC_AGG = "pc_agg"
    PC_ORD_AGG = "pc_ord_agg"


@dataclass
class PCInput:
    """Fact sequence rendered as generator input text."""

    text: str
    variant: PCVariant

    @property
    def sep_count(self) -> int:
        return tokenize(self.text).count(SEP)

    def without_separators(self) -> str:
        cleaned = self.text.replace(SEP, " ")
        return re.sub(r"\s+", " ", cleaned).strip()


def format_pc_input(facts: Sequence, delimiters=None, variant: PCVariant = PCVariant.PC,
                    shuffle_seed: Optional[int] = None) -> PCInput:
    """Render facts for the compressor according to the model variant.

    PC takes ordered facts with ``<sep>`` at separate-sentence boundaries;
    PC_AGG takes ordered facts plain; PC_ORD_AGG takes plain facts, shuffled
    when a seed is supplied (training-input construction only).
    """
    texts = [fact_text(f) for f in facts]
    if not texts:
        raise InputError("need at least one fact")
    if variant is PCVariant.PC:
        if delimiters is None:
            raise InputError("PC variant requires delimiters")
        values = list(delimiters)
        if len(values) != len(texts) - 1:
            raise InputError(
                f"{len(values)} delimiters for {len(texts)} facts"
            )
        parts = [texts[0]]
        for value, text in zip(values, texts[1:]):
            if value == 1:
                parts.append(SEP)
            parts.append(text)
        return PCInput(text=" ".join(parts), variant=variant)
    if delimiters is not None:
        raise InputError(f"variant {variant.value} does not take delimiters")
    if variant is PCVariant.PC_ORD_AGG and shuffle_seed is not None:
        order = list(range(len(texts)))
        random.Random(shuffle_seed).shuffle(order)
        texts = [texts[i] for i in order]
    return PCInput(text=" ".join(texts), variant=variant)


def compress(pc_input: PCInput, model: ConditionalGenerator) -> str:
    """Greedy-generate the final paragraph for a formatted input."""
    output = model.generate_text(pc_input.text)
    if not output.strip():
        raise GenerationError("compressor produced empty output")
    return output


def _example_fields(item):
    sentences = list(getattr(item, "sentences"))
    labels = list(getattr(item, "agg_labels"))
    paragraph = getattr(item, "paragraph")
    return sentences, labels, paragraph


def train_pc(corpus: Sequence, variant: PCVariant, config: TrainConfig,
             cfg: Optional[ToyConfig] = None) -> ToySeq2Seq:
    """Train a compressor on (synthesized sentences -> original paragraph)."""
    if not corpus:
        raise InputError("empty training corpus")
    sources, targets = [], []
    for item in corpus:
        sentences, labels, paragraph = _example_fields(item)
        if len(labels) != max(len(sentences) - 1, 0):
            raise InputError(
                f"{len(labels)} labels for {len(sentences)} sentences"
            )
        if variant is PCVariant.PC:
            source = format_pc_input(sentences, labels, variant)
        else:
            source = format_pc_input(sentences, None, variant)
        sources.append(source.text)
        targets.append(paragraph)
    vocab = Vocabulary.from_texts(sources + targets)
    model = ToySeq2Seq(vocab, cfg, seed=config.seed)

    if variant is PCVariant.PC_ORD_AGG:
        shuffle_rng = random.Random(config.seed)

        # facts arrive in random order each epoch; shuffling sentence units,
        # not tokens, needs the per-example sentence boundaries
        sentence_pairs = []
        for item in corpus:
            sentences, _, paragraph = _example_fields(item)
            sentence_pairs.append((sentences, tokenize(paragraph)))

        def reshuffle_sentences(epoch, epoch_pairs):
            reshuffled = []
            for sentences, tgt in epoch_pairs:
                order = list(range(len(sentences)))
                shuffle_rng.shuffle(order)
                src_tokens = tokenize(" ".join(sentences[i] for i in order))
                reshuffled.append((src_tokens, tgt))
            return reshuffled

        model.train_history = model.fit(sentence_pairs, config, epoch_hook=reshuffle_sentences)
    else:
        pairs = [(tokenize(s), tokenize(t)) for s, t in zip(sources, targets)]
        model.train_history = model.fit(pairs, config)
    return model


def pc_training_inputs(corpus: Sequence, variant: PCVariant, epoch_seed: int) -> list:
    """Materialize one epoch of compressor inputs (inspection/testing hook)."""
    rng = random.Random(epoch_seed)
    inputs = []
    for item in corpus:
        sentences, labels, _ = _example_fields(item)
        if variant is PCVariant.PC:
            inputs.append(format_pc_input(sentences, labels, variant).text)
        elif variant is PCVariant.PC_AGG:
            inputs.append(format_pc_input(sentences, None, variant).text)
        else:
            order = list(range(len(sentences)))
            rng.shuffle(order)
            inputs.append(" ".join(sentences[i] for i in order))
    return inputs


def check_plan_following(output: str, facts: Sequence, delimiters,
                         anchors: Optional[Sequence[str]] = None) -> dict:
    """Approximate plan compliance of a generated paragraph.

    order_ok: anchor first occurrences appear in non-decreasing plan order
    (a missing anchor counts as an order violation, not an exception).
    boundary_ok: the output has exactly 1 + sum(delimiters) sentences.
    """
    if anchors is None:
        anchors = []
        for fact in facts:
            source = getattr(fact, "source", None)
            if source is None:
                raise InputError("facts carry no source triples; pass anchors explicitly")
            anchors.append(source.object)
    if len(anchors) != len(list(facts)):
        raise InputError("one anchor per fact required")
    positions = []
    order_ok = True
    for anchor in anchors:
        index = output.find(anchor)
        if index < 0:
            order_ok = False
            break
        positions.append(index)
    if order_ok:
        order_ok = all(a <= b for a, b in zip(positions, positions[1:]))
    expected_sentences = 1 + sum(delimiters)
    boundary_ok = count_sentences(output) == expected_sentences
    return {"order_ok": order_ok, "boundary_ok": boundary_ok}
