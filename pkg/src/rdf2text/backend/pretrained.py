"""Bindings for published checkpoints behind the backend contracts.

Everything here degrades to a BackendUnavailableError when the
transformers library or the requested weights are missing, so offline
runs can fall back to the toy tier.
"""

from __future__ import annotations

from typing import Sequence

from ..errors import BackendUnavailableError
from .base import ConditionalGenerator, EntailmentClassifier, TokenClassifier
from .checkpoint import model_cache_dir
from .vocab import Vocabulary


def _load_transformers():
    try:
        import transformers
    except ImportError as exc:
        raise BackendUnavailableError(
            "the transformers library is required for the pretrained tier"
        ) from exc
    return transformers


class PretrainedEntailmentClassifier(EntailmentClassifier):
    """Wraps an NLI sequence-classification checkpoint (e.g. roberta-large-mnli)."""

    def __init__(self, model_name_or_path: str, device: str = "cpu"):
        transformers = _load_transformers()
        import torch

        try:
            self.tokenizer = transformers.AutoTokenizer.from_pretrained(
                model_name_or_path, cache_dir=model_cache_dir()
            )
            self.model = transformers.AutoModelForSequenceClassification.from_pretrained(
                model_name_or_path, cache_dir=model_cache_dir()
            )
        except Exception as exc:
            raise BackendUnavailableError(
                f"cannot load NLI checkpoint {model_name_or_path!r}: {exc}"
            ) from exc
        self.model.to(device).eval()
        self.device = device
        self._torch = torch
        self._label_index = {}
        for idx, name in self.model.config.id2label.items():
            key = name.lower()
            if key in self.labels:
                self._label_index[key] = int(idx)
        if set(self._label_index) != set(self.labels):
            raise BackendUnavailableError(
                f"checkpoint labels {self.model.config.id2label} do not cover NLI labels"
            )

    def probabilities(self, premise: str, hypothesis: str) -> dict:
        torch = self._torch
        inputs = self.tokenizer(premise, hypothesis, return_tensors="pt",
                                truncation=True).to(self.device)
        with torch.no_grad():
            logits = self.model(**inputs).logits[0]
        probs = torch.softmax(logits, dim=-1).tolist()
        return {label: probs[self._label_index[label]] for label in self.labels}


class PretrainedGenerator(ConditionalGenerator):
    """Wraps a seq2seq checkpoint (e.g. BART) with greedy decoding."""

    kind = "pretrained_seq2seq"

    def __init__(self, model_name_or_path: str, device: str = "cpu",
                 max_output_length: int = 512):
        transformers = _load_transformers()
        try:
            self.tokenizer = transformers.AutoTokenizer.from_pretrained(
                model_name_or_path, cache_dir=model_cache_dir()
            )
            self.model = transformers.AutoModelForSeq2SeqLM.from_pretrained(
                model_name_or_path, cache_dir=model_cache_dir()
            )
        except Exception as exc:
            raise BackendUnavailableError(
                f"cannot load generator checkpoint {model_name_or_path!r}: {exc}"
            ) from exc
        self.model.to(device).eval()
        self.device = device
        self.vocab = Vocabulary([])
        self.max_length = self.tokenizer.model_max_length
        self.max_output_length = max_output_length

    def add_separator_token(self, token: str = "<sep>") -> None:
        """Register the aggregation control code as a genuinely new token."""
        if token not in self.tokenizer.get_vocab():
            self.tokenizer.add_tokens([token], special_tokens=True)
            self.model.resize_token_embeddings(len(self.tokenizer))

    def generate_tokens(self, tokens: Sequence[str]) -> list:
        return self.generate_text(" ".join(tokens)).split()

    def generate_text(self, text: str) -> str:
        inputs = self.tokenizer(text, return_tensors="pt", truncation=True).to(self.device)
        output = self.model.generate(
            **inputs,
            do_sample=False,
            num_beams=1,
            max_new_tokens=self.max_output_length,
        )
        return self.tokenizer.decode(output[0], skip_special_tokens=True).strip()


class PretrainedTokenClassifier(TokenClassifier):
    """Wraps a token-classification checkpoint (e.g. RoBERTa with a 2-class head)."""

    kind = "pretrained_token_classifier"

    def __init__(self, model_name_or_path: str, device: str = "cpu"):
        transformers = _load_transformers()
        import torch

        try:
            self.tokenizer = transformers.AutoTokenizer.from_pretrained(
                model_name_or_path, cache_dir=model_cache_dir()
            )
            self.model = transformers.AutoModelForTokenClassification.from_pretrained(
                model_name_or_path, cache_dir=model_cache_dir()
            )
        except Exception as exc:
            raise BackendUnavailableError(
                f"cannot load token classifier {model_name_or_path!r}: {exc}"
            ) from exc
        self.model.to(device).eval()
        self.device = device
        self._torch = torch
        self.vocab = Vocabulary([])
        self.num_classes = self.model.config.num_labels
        self.max_length = self.tokenizer.model_max_length

    def classify(self, tokens: Sequence[str]):
        torch = self._torch
        inputs = self.tokenizer(list(tokens), is_split_into_words=True,
                                return_tensors="pt", truncation=True).to(self.device)
        with torch.no_grad():
            logits = self.model(**inputs).logits[0]
        probs = torch.softmax(logits, dim=-1)
        word_ids = inputs.word_ids(0)
        rows = []
        seen = set()
        for position, word_id in enumerate(word_ids):
            if word_id is None or word_id in seen:
                continue
            seen.add(word_id)
            rows.append(probs[position])
        return torch.stack(rows)
