"""Tiny from-scratch transformer models trained on synthetic data.

These implement the backend contracts at desk scale: 2 layers, hidden
size 64, word-level vocabulary. They exist so that every pipeline
property is testable offline; quality at paper scale requires the
pretrained tier instead.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch
from torch import nn

from ..errors import InputError, SequenceTooLongError
from .base import ConditionalGenerator, SequenceEncoder, TokenClassifier, TrainConfig
from .vocab import BOS, EOS, Vocabulary


@dataclass
class ToyConfig:
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_size: int = 128
    max_length: int = 256
    max_output_length: int = 512

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class _SelfAttentionLayer(nn.Module):
    def __init__(self, cfg: ToyConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.hidden_size)
        self.attn = nn.MultiheadAttention(cfg.hidden_size, cfg.num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(cfg.hidden_size)
        self.ffn = nn.Sequential(
            nn.Linear(cfg.hidden_size, cfg.ffn_size),
            nn.GELU(),
            nn.Linear(cfg.ffn_size, cfg.hidden_size),
        )

    def forward(self, x, pad_mask=None, causal_mask=None):
        h = self.norm1(x)
        a, _ = self.attn(h, h, h, key_padding_mask=pad_mask, attn_mask=causal_mask,
                         need_weights=False)
        x = x + a
        return x + self.ffn(self.norm2(x))


class _CrossAttentionLayer(nn.Module):
    def __init__(self, cfg: ToyConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.hidden_size)
        self.self_attn = nn.MultiheadAttention(cfg.hidden_size, cfg.num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(cfg.hidden_size)
        self.cross_attn = nn.MultiheadAttention(cfg.hidden_size, cfg.num_heads, batch_first=True)
        self.norm3 = nn.LayerNorm(cfg.hidden_size)
        self.ffn = nn.Sequential(
            nn.Linear(cfg.hidden_size, cfg.ffn_size),
            nn.GELU(),
            nn.Linear(cfg.ffn_size, cfg.hidden_size),
        )

    def forward(self, x, memory, causal_mask, memory_pad_mask=None):
        h = self.norm1(x)
        a, _ = self.self_attn(h, h, h, attn_mask=causal_mask, need_weights=False)
        x = x + a
        h = self.norm2(x)
        a, _ = self.cross_attn(h, memory, memory, key_padding_mask=memory_pad_mask,
                               need_weights=False)
        x = x + a
        return x + self.ffn(self.norm3(x))


def _causal_mask(length: int, device, dtype) -> torch.Tensor:
    mask = torch.full((length, length), float("-inf"), device=device, dtype=dtype)
    return torch.triu(mask, diagonal=1)


class TokenEncoder(nn.Module):
    """Transformer encoder over token ids; returns one state per position."""

    def __init__(self, vocab_size: int, cfg: ToyConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(vocab_size, cfg.hidden_size)
        self.pos_emb = nn.Embedding(cfg.max_length, cfg.hidden_size)
        self.layers = nn.ModuleList(_SelfAttentionLayer(cfg) for _ in range(cfg.num_layers))
        self.norm = nn.LayerNorm(cfg.hidden_size)

    def forward(self, ids, pad_mask=None):
        if ids.shape[1] > self.cfg.max_length:
            raise SequenceTooLongError(ids.shape[1], self.cfg.max_length)
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(positions)[None, :, :]
        for layer in self.layers:
            x = layer(x, pad_mask=pad_mask)
        return self.norm(x)


class TokenDecoder(nn.Module):
    """Causal transformer decoder with cross-attention to encoder states."""

    def __init__(self, vocab_size: int, cfg: ToyConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(vocab_size, cfg.hidden_size)
        self.pos_emb = nn.Embedding(cfg.max_length, cfg.hidden_size)
        self.layers = nn.ModuleList(_CrossAttentionLayer(cfg) for _ in range(cfg.num_layers))
        self.norm = nn.LayerNorm(cfg.hidden_size)

    def forward(self, ids, memory, memory_pad_mask=None):
        if ids.shape[1] > self.cfg.max_length:
            raise SequenceTooLongError(ids.shape[1], self.cfg.max_length)
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(positions)[None, :, :]
        causal = _causal_mask(ids.shape[1], ids.device, x.dtype)
        for layer in self.layers:
            x = layer(x, memory, causal, memory_pad_mask=memory_pad_mask)
        return self.norm(x)


def pad_id_batch(sequences: Sequence[Sequence[int]], pad_id: int, device=None):
    """Pad id lists to a common length; returns (ids, pad_mask) tensors."""
    width = max(len(s) for s in sequences)
    ids = torch.full((len(sequences), width), pad_id, dtype=torch.long, device=device)
    mask = torch.ones((len(sequences), width), dtype=torch.bool, device=device)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = torch.tensor(seq, dtype=torch.long, device=device)
        mask[row, : len(seq)] = False
    return ids, mask


def make_optimizer(parameters, config: TrainConfig):
    return torch.optim.Adam(
        parameters,
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.epsilon,
    )


def linear_schedule(optimizer, total_steps: int, warmup: float):
    """Linear warmup followed by linear decay to zero."""
    warmup_steps = max(int(total_steps * warmup), 1)

    def factor(step):
        if step < warmup_steps:
            return (step + 1) / warmup_steps
        remaining = max(total_steps - warmup_steps, 1)
        return max(0.0, (total_steps - step) / remaining)

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


def argmax_first(values: torch.Tensor) -> int:
    """Index of the maximum; ties break toward the lowest index."""
    return int(torch.nonzero(values == values.max())[0].item())


class ToySequenceEncoder(SequenceEncoder):
    """Standalone encoder contract implementation."""

    def __init__(self, vocab: Vocabulary, cfg: Optional[ToyConfig] = None, seed: int = 0):
        cfg = cfg or ToyConfig()
        torch.manual_seed(seed)
        self.vocab = vocab
        self.cfg = cfg
        self.hidden_size = cfg.hidden_size
        self.max_length = cfg.max_length
        self.net = TokenEncoder(len(vocab), cfg)
        self.net.eval()

    @torch.no_grad()
    def encode_tokens(self, tokens: Sequence[str]):
        if not tokens:
            raise InputError("cannot encode an empty token sequence")
        ids = torch.tensor([self.vocab.encode(tokens)], dtype=torch.long)
        return self.net(ids)[0]


class ToySeq2Seq(ConditionalGenerator):
    """Encoder-decoder generator used for split-and-rephrase and compression."""

    kind = "toy_seq2seq"

    def __init__(self, vocab: Vocabulary, cfg: Optional[ToyConfig] = None, seed: int = 0):
        cfg = cfg or ToyConfig()
        torch.manual_seed(seed)
        self.vocab = vocab
        self.cfg = cfg
        self.max_length = cfg.max_length
        self.max_output_length = cfg.max_output_length
        self.encoder = TokenEncoder(len(vocab), cfg)
        self.decoder = TokenDecoder(len(vocab), cfg)
        self.lm_head = nn.Linear(cfg.hidden_size, len(vocab), bias=False)
        self.eval()

    def modules(self):
        return (self.encoder, self.decoder, self.lm_head)

    def parameters(self):
        for module in self.modules():
            yield from module.parameters()

    def train(self):
        for module in self.modules():
            module.train()

    def eval(self):
        for module in self.modules():
            module.eval()

    @torch.no_grad()
    def generate_tokens(self, tokens: Sequence[str]) -> list:
        if len(tokens) > self.max_length:
            raise SequenceTooLongError(len(tokens), self.max_length)
        if not tokens:
            raise InputError("cannot generate from an empty token sequence")
        self.eval()
        src_ids = torch.tensor([self.vocab.encode(tokens)], dtype=torch.long)
        memory = self.encoder(src_ids)
        out_ids = [self.vocab.bos_id]
        limit = min(self.max_output_length, self.cfg.max_length - 1)
        for _ in range(limit):
            dec_in = torch.tensor([out_ids], dtype=torch.long)
            states = self.decoder(dec_in, memory)
            logits = self.lm_head(states[0, -1])
            out_ids.append(argmax_first(logits))
            if out_ids[-1] == self.vocab.eos_id:
                break
        return self.vocab.decode(out_ids[1:])

    def loss_batch(self, src: Sequence[Sequence[str]], tgt: Sequence[Sequence[str]]):
        """Teacher-forced cross-entropy over a batch of token-sequence pairs."""
        pad = self.vocab.pad_id
        src_ids, src_mask = pad_id_batch([self.vocab.encode(s) for s in src], pad)
        tgt_full = [
            [self.vocab.bos_id] + self.vocab.encode(t) + [self.vocab.eos_id] for t in tgt
        ]
        dec_in, _ = pad_id_batch([t[:-1] for t in tgt_full], pad)
        labels, _ = pad_id_batch([t[1:] for t in tgt_full], pad)
        memory = self.encoder(src_ids, pad_mask=src_mask)
        states = self.decoder(dec_in, memory, memory_pad_mask=src_mask)
        logits = self.lm_head(states)
        return nn.functional.cross_entropy(
            logits.reshape(-1, logits.shape[-1]), labels.reshape(-1), ignore_index=pad
        )

    def fit(self, pairs: Sequence, config: TrainConfig,
            epoch_hook: Optional[Callable] = None,
            optimizer_state: Optional[dict] = None) -> list:
        """Train on (source tokens, target tokens) pairs; returns per-epoch losses."""
        if not pairs:
            raise InputError("empty training corpus")
        rng = random.Random(config.seed)
        optimizer = make_optimizer(self.parameters(), config)
        if optimizer_state is not None:
            optimizer.load_state_dict(optimizer_state)
        steps_per_epoch = math.ceil(len(pairs) / config.batch_size / config.grad_accum)
        scheduler = linear_schedule(optimizer, steps_per_epoch * config.epochs, config.warmup)
        history = []
        self.train()
        for epoch in range(config.epochs):
            order = list(range(len(pairs)))
            rng.shuffle(order)
            epoch_pairs = [pairs[i] for i in order]
            if epoch_hook is not None:
                epoch_pairs = epoch_hook(epoch, epoch_pairs)
            total, count = 0.0, 0
            optimizer.zero_grad()
            for start in range(0, len(epoch_pairs), config.batch_size):
                chunk = epoch_pairs[start : start + config.batch_size]
                loss = self.loss_batch([p[0] for p in chunk], [p[1] for p in chunk])
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
        self.last_optimizer_state = optimizer.state_dict()
        return history

    def state_dict(self) -> dict:
        return {
            "encoder": self.encoder.state_dict(),
            "decoder": self.decoder.state_dict(),
            "lm_head": self.lm_head.state_dict(),
        }

    def load_state_dict(self, state: dict) -> None:
        self.encoder.load_state_dict(state["encoder"])
        self.decoder.load_state_dict(state["decoder"])
        self.lm_head.load_state_dict(state["lm_head"])


class ToyTokenClassifier(TokenClassifier):
    """Encoder plus a 2-class head; used for delimiter prediction."""

    kind = "toy_token_classifier"

    def __init__(self, vocab: Vocabulary, cfg: Optional[ToyConfig] = None,
                 num_classes: int = 2, seed: int = 0):
        cfg = cfg or ToyConfig()
        torch.manual_seed(seed)
        self.vocab = vocab
        self.cfg = cfg
        self.num_classes = num_classes
        self.max_length = cfg.max_length
        self.encoder = TokenEncoder(len(vocab), cfg)
        self.head = nn.Linear(cfg.hidden_size, num_classes)
        self.eval()

    def modules(self):
        return (self.encoder, self.head)

    def parameters(self):
        for module in self.modules():
            yield from module.parameters()

    def train(self):
        for module in self.modules():
            module.train()

    def eval(self):
        for module in self.modules():
            module.eval()

    @torch.no_grad()
    def classify(self, tokens: Sequence[str]):
        if not tokens:
            raise InputError("cannot classify an empty token sequence")
        if len(tokens) > self.max_length:
            raise SequenceTooLongError(len(tokens), self.max_length)
        self.eval()
        ids = torch.tensor([self.vocab.encode(tokens)], dtype=torch.long)
        logits = self.head(self.encoder(ids))[0]
        return torch.softmax(logits, dim=-1)

    def loss_batch(self, batch: Sequence) -> torch.Tensor:
        """Batch items are (tokens, positions, labels); loss only at positions."""
        pad = self.vocab.pad_id
        ids, mask = pad_id_batch([self.vocab.encode(tokens) for tokens, _, _ in batch], pad)
        logits = self.head(self.encoder(ids, pad_mask=mask))
        picked_logits, picked_labels = [], []
        for row, (_, positions, labels) in enumerate(batch):
            for pos, label in zip(positions, labels):
                picked_logits.append(logits[row, pos])
                picked_labels.append(label)
        if not picked_logits:
            return logits.sum() * 0.0
        stacked = torch.stack(picked_logits)
        target = torch.tensor(picked_labels, dtype=torch.long)
        return nn.functional.cross_entropy(stacked, target)

    def fit(self, examples: Sequence, config: TrainConfig,
            optimizer_state: Optional[dict] = None) -> list:
        """Train on (tokens, separator positions, labels) triples."""
        usable = [ex for ex in examples if ex[1]]
        if not usable:
            raise InputError("no examples with classification positions")
        rng = random.Random(config.seed)
        optimizer = make_optimizer(self.parameters(), config)
        if optimizer_state is not None:
            optimizer.load_state_dict(optimizer_state)
        steps_per_epoch = math.ceil(len(usable) / config.batch_size / config.grad_accum)
        scheduler = linear_schedule(optimizer, steps_per_epoch * config.epochs, config.warmup)
        history = []
        self.train()
        for _ in range(config.epochs):
            order = list(range(len(usable)))
            rng.shuffle(order)
            total, count = 0.0, 0
            optimizer.zero_grad()
            for start in range(0, len(usable), config.batch_size):
                chunk = [usable[i] for i in order[start : start + config.batch_size]]
                loss = self.loss_batch(chunk)
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
        self.last_optimizer_state = optimizer.state_dict()
        return history

    def state_dict(self) -> dict:
        return {"encoder": self.encoder.state_dict(), "head": self.head.state_dict()}

    def load_state_dict(self, state: dict) -> None:
        self.encoder.load_state_dict(state["encoder"])
        self.head.load_state_dict(state["head"])
