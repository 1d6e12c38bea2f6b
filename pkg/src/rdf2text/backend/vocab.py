"""Word-level vocabulary with the special markers used across all models."""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
SEP = "<sep>"
UNK = "<unk>"

SPECIALS = (PAD, BOS, EOS, SEP, UNK)


def tokenize(text: str) -> list:
    """Whitespace tokenization; the single convention used by every toy model."""
    return text.split()


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


class Vocabulary:
    """Bidirectional token <-> id map. Specials occupy the first slots."""

    def __init__(self, tokens: Iterable[str]):
        self._tokens = list(SPECIALS)
        seen = set(SPECIALS)
        for token in tokens:
            if token not in seen:
                seen.add(token)
                self._tokens.append(token)
        self._ids = {token: i for i, token in enumerate(self._tokens)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        words = set()
        for text in texts:
            words.update(tokenize(text))
        return cls(sorted(words))

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def pad_id(self) -> int:
        return self._ids[PAD]

    @property
    def bos_id(self) -> int:
        return self._ids[BOS]

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    @property
    def sep_id(self) -> int:
        return self._ids[SEP]

    def encode(self, tokens: Sequence[str]) -> list:
        unk = self._ids[UNK]
        return [self._ids.get(token, unk) for token in tokens]

    def decode(self, ids: Sequence[int]) -> list:
        return [self._tokens[i] for i in ids]

    def tokens(self) -> list:
        return list(self._tokens)

    def content_hash(self) -> str:
        digest = hashlib.sha256("\n".join(self._tokens).encode("utf-8"))
        return digest.hexdigest()
