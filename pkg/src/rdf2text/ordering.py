"""Pointer-network sentence ordering over per-fact encoder end states.

Facts are concatenated as ``<s> fact </s>`` blocks and encoded once; the
state at each ``</s>`` represents its fact.  Decoding selects facts
autoregressively: a query state attends over the fact states through a
scaled dot product, already-selected slots are masked out, and the argmax
becomes the next fact in the order.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import torch
from torch import nn

from .backend.base import SequenceEncoder, TrainConfig
from .backend.checkpoint import save_checkpoint
from .backend.toy import (
    TokenDecoder,
    TokenEncoder,
    ToyConfig,
    argmax_first,
    linear_schedule,
    make_optimizer,
    pad_id_batch,
)
from .backend.vocab import BOS, EOS, Vocabulary, tokenize
from .errors import ContractViolationError, InputError, SequenceTooLongError

RESERVED_SLOTS = 1  # slot 0 belongs to the bootstrap <s></s> pair and stays masked


def fact_text(fact) -> str:
    return fact.text if hasattr(fact, "text") else str(fact)


class PointerHead(nn.Module):
    """Query/key projections of the scaled dot-product fact selector."""

    def __init__(self, hidden_size: int, seed: Optional[int] = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.hidden_size = hidden_size
        self.w_q = nn.Parameter(torch.empty(hidden_size, hidden_size))
        self.w_k = nn.Parameter(torch.empty(hidden_size, hidden_size))
        nn.init.xavier_uniform_(self.w_q)
        nn.init.xavier_uniform_(self.w_k)

    def logits(self, query_state: torch.Tensor, fact_states: torch.Tensor) -> torch.Tensor:
        """(b,) query and (n, b) keys -> (n,) scaled dot-product logits."""
        q = query_state @ self.w_q
        k = fact_states @ self.w_k
        return (k @ q) / math.sqrt(self.hidden_size)

    def batched_logits(self, query_states: torch.Tensor, fact_states: torch.Tensor):
        """(B, b) queries and (B, n, b) keys -> (B, n) logits."""
        q = query_states @ self.w_q
        k = fact_states @ self.w_k
        return torch.einsum("bnh,bh->bn", k, q) / math.sqrt(self.hidden_size)


@dataclass
class PointerDistribution:
    """Selection probabilities over candidate slots at one decoding step."""

    probs: torch.Tensor
    step: int

    def __post_init__(self):
        total = float(self.probs.detach().sum())
        if abs(total - 1.0) > 1e-6:
            raise ContractViolationError(f"pointer probabilities sum to {total}")


def pointer_step(query_state: torch.Tensor, fact_states: torch.Tensor, head: PointerHead,
                 mask: Sequence[bool], step: int = 0) -> PointerDistribution:
    """One pointer selection: softmax over unmasked slots of the scaled scores."""
    mask_tensor = torch.as_tensor(list(mask), dtype=torch.bool)
    if mask_tensor.all():
        raise ContractViolationError("every pointer slot is masked")
    logits = head.logits(query_state, fact_states)
    logits = logits.masked_fill(mask_tensor, float("-inf"))
    return PointerDistribution(probs=torch.softmax(logits, dim=-1), step=step)


def encode_fact_sequence(facts: Sequence, encoder: SequenceEncoder) -> torch.Tensor:
    """Encode ``<s> f </s>`` blocks and return the (n, b) end-token states."""
    if not facts:
        raise InputError("need at least one fact")
    tokens = []
    end_positions = []
    for fact in facts:
        tokens.append(BOS)
        tokens.extend(tokenize(fact_text(fact)))
        tokens.append(EOS)
        end_positions.append(len(tokens) - 1)
    if len(tokens) > encoder.max_length:
        raise SequenceTooLongError(len(tokens), encoder.max_length)
    states = encoder.encode_tokens(tokens)
    return states[end_positions]


class ToyOrderingModel:
    """From-scratch encoder + decoder + pointer head, trained on shuffles."""

    kind = "toy_ordering"

    def __init__(self, vocab: Vocabulary, cfg: Optional[ToyConfig] = None, seed: int = 0):
        cfg = cfg or ToyConfig()
        torch.manual_seed(seed)
        self.vocab = vocab
        self.cfg = cfg
        self.max_length = cfg.max_length
        self.encoder = TokenEncoder(len(vocab), cfg)
        self.decoder = TokenDecoder(len(vocab), cfg)
        self.pointer = PointerHead(cfg.hidden_size)
        self.train_history = []
        self.eval()

    def modules(self):
        return (self.encoder, self.decoder, self.pointer)

    def parameters(self):
        for module in self.modules():
            yield from module.parameters()

    def train(self):
        for module in self.modules():
            module.train()

    def eval(self):
        for module in self.modules():
            module.eval()

    def _fact_ids(self, text: str) -> list:
        return (
            [self.vocab.bos_id]
            + self.vocab.encode(tokenize(text))
            + [self.vocab.eos_id]
        )

    def _concat_ids(self, texts: Sequence[str]):
        ids = []
        end_positions = []
        for text in texts:
            ids.extend(self._fact_ids(text))
            end_positions.append(len(ids) - 1)
        return ids, end_positions

    @torch.no_grad()
    def order(self, facts: Sequence) -> list:
        """Greedy autoregressive ordering; returns a permutation of 0..n-1."""
        texts = [fact_text(f) for f in facts]
        if not texts:
            raise InputError("need at least one fact")
        self.eval()
        ids, end_positions = self._concat_ids(texts)
        if len(ids) > self.cfg.max_length:
            raise SequenceTooLongError(len(ids), self.cfg.max_length)
        memory = self.encoder(torch.tensor([ids], dtype=torch.long))
        fact_states = memory[0, end_positions]
        n = len(texts)
        slots = torch.cat(
            [torch.zeros(RESERVED_SLOTS, self.cfg.hidden_size, dtype=fact_states.dtype),
             fact_states]
        )
        masked = [True] * RESERVED_SLOTS + [False] * n
        previous = None
        order = []
        for step in range(n):
            if previous is None:
                dec_ids = [self.vocab.bos_id, self.vocab.eos_id]
            else:
                dec_ids = self._fact_ids(texts[previous])
            states = self.decoder(torch.tensor([dec_ids], dtype=torch.long), memory)
            query = states[0, -1]
            dist = pointer_step(query, slots, self.pointer, masked, step=step)
            slot = argmax_first(dist.probs)
            masked[slot] = True
            previous = slot - RESERVED_SLOTS
            order.append(previous)
        return order

    def loss_batch(self, examples: Sequence) -> torch.Tensor:
        """Teacher-forced pointer loss for same-length examples.

        Each example is (sentences in original order, permutation), where
        ``permutation[k]`` names the original index shown at shuffled slot k.
        """
        n = len(examples[0][1])
        batch = len(examples)
        pad = self.vocab.pad_id
        concat_ids, end_positions = [], []
        for sentences, perm in examples:
            ids, ends = self._concat_ids([sentences[i] for i in perm])
            concat_ids.append(ids)
            end_positions.append(ends)
        ids, pad_mask = pad_id_batch(concat_ids, pad)
        memory = self.encoder(ids, pad_mask=pad_mask)
        gather_index = torch.tensor(end_positions, dtype=torch.long)
        fact_states = memory.gather(
            1, gather_index.unsqueeze(-1).expand(-1, -1, self.cfg.hidden_size)
        )
        zeros = torch.zeros(batch, RESERVED_SLOTS, self.cfg.hidden_size,
                            dtype=fact_states.dtype)
        slots = torch.cat([zeros, fact_states], dim=1)

        # gold slot for output step t is where original sentence t ended up
        gold = torch.tensor(
            [[perm.index(t) + RESERVED_SLOTS for t in range(n)] for _, perm in examples],
            dtype=torch.long,
        )
        masked = torch.zeros(batch, n + RESERVED_SLOTS, dtype=torch.bool)
        masked[:, :RESERVED_SLOTS] = True
        losses = []
        for t in range(n):
            if t == 0:
                step_ids = [[self.vocab.bos_id, self.vocab.eos_id]] * batch
            else:
                step_ids = [self._fact_ids(sentences[t - 1]) for sentences, _ in examples]
            dec_ids, _ = pad_id_batch(step_ids, pad)
            states = self.decoder(dec_ids, memory, memory_pad_mask=pad_mask)
            lengths = torch.tensor([len(s) for s in step_ids], dtype=torch.long)
            query = states[torch.arange(batch), lengths - 1]
            logits = self.pointer.batched_logits(query, slots)
            logits = logits.masked_fill(masked, float("-inf"))
            losses.append(nn.functional.cross_entropy(logits, gold[:, t]))
            masked = masked.scatter(1, gold[:, t : t + 1], True)
        return torch.stack(losses).mean()

    def fit(self, sentence_lists: Sequence, config: TrainConfig,
            optimizer_state: Optional[dict] = None) -> list:
        """Train to restore original order from per-epoch random shuffles."""
        usable = [list(s) for s in sentence_lists if len(s) > 1]
        if not usable:
            raise InputError("no multi-sentence examples to order")
        rng = random.Random(config.seed)
        optimizer = make_optimizer(self.parameters(), config)
        if optimizer_state is not None:
            optimizer.load_state_dict(optimizer_state)
        steps_per_epoch = math.ceil(len(usable) / config.batch_size / config.grad_accum)
        scheduler = linear_schedule(optimizer, steps_per_epoch * config.epochs, config.warmup)
        history = []
        self.train()
        for _ in range(config.epochs):
            examples = []
            for sentences in usable:
                perm = list(range(len(sentences)))
                rng.shuffle(perm)
                examples.append((sentences, perm))
            rng.shuffle(examples)
            buckets = {}
            for example in examples:
                buckets.setdefault(len(example[1]), []).append(example)
            total, count = 0.0, 0
            optimizer.zero_grad()
            for n in sorted(buckets):
                bucket = buckets[n]
                for start in range(0, len(bucket), config.batch_size):
                    loss = self.loss_batch(bucket[start : start + config.batch_size])
                    (loss / config.grad_accum).backward()
                    total += float(loss.detach())
                    count += 1
                    if count % config.grad_accum == 0:
                        optimizer.step()
                        scheduler.step()
                        optimizer.zero_grad()
            if count % config.grad_accum != 0:
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
            history.append(total / max(count, 1))
        self.eval()
        self.train_history.extend(history)
        self.last_optimizer_state = optimizer.state_dict()
        return history

    def state_dict(self) -> dict:
        return {
            "encoder": self.encoder.state_dict(),
            "decoder": self.decoder.state_dict(),
            "pointer": self.pointer.state_dict(),
        }

    def load_state_dict(self, state: dict) -> None:
        self.encoder.load_state_dict(state["encoder"])
        self.decoder.load_state_dict(state["decoder"])
        self.pointer.load_state_dict(state["pointer"])

    def save(self, path, extra: Optional[dict] = None) -> None:
        save_checkpoint(path, self, extra=extra)


def order_facts(facts: Sequence, model) -> list:
    """Order facts with the given model; always a valid permutation."""
    return model.order(facts)


def train_ordering(corpus: Sequence, config: TrainConfig,
                   cfg: Optional[ToyConfig] = None) -> ToyOrderingModel:
    """Train a toy ordering model on corpus examples (shuffle -> restore)."""
    if not corpus:
        raise InputError("empty training corpus")
    sentence_lists = [getattr(ex, "sentences", ex) for ex in corpus]
    vocab = Vocabulary.from_texts(s for sentences in sentence_lists for s in sentences)
    model = ToyOrderingModel(vocab, cfg, seed=config.seed)
    model.fit(sentence_lists, config)
    return model


def eval_ordering(predicted: Sequence, gold: Sequence) -> dict:
    """Exact-match accuracy plus BLEU-2 over position-token sequences."""
    from .evalsuite import bleu

    if len(predicted) != len(gold):
        raise InputError("predicted and gold permutation counts differ")
    if not predicted:
        raise InputError("nothing to evaluate")
    for p, g in zip(predicted, gold):
        if sorted(p) != sorted(g):
            raise InputError(f"permutations over different indices: {p} vs {g}")
    hits = sum(1 for p, g in zip(predicted, gold) if list(p) == list(g))
    candidates = [" ".join(str(i) for i in p) for p in predicted]
    references = [[" ".join(str(i) for i in g)] for g in gold]
    return {
        "accuracy": hits / len(predicted),
        "bleu2": bleu(candidates, references, max_ngram=2),
    }
