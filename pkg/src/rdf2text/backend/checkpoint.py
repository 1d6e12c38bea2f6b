"""Checkpoint persistence: a weights blob plus a JSON manifest per directory."""

from __future__ import annotations

import json
import os
from pathlib import Path

import torch

from ..errors import InputError
from .toy import ToyConfig, ToySeq2Seq, ToyTokenClassifier
from .vocab import Vocabulary

WEIGHTS_FILE = "weights.pt"
MANIFEST_FILE = "manifest.json"
VOCAB_FILE = "vocab.json"
TRAIN_STATE_FILE = "training_state.pt"


def save_checkpoint(path, model, extra: dict | None = None) -> None:
    """Write weights, vocabulary and manifest for any toy-tier model."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": model.kind,
        "vocab_hash": model.vocab.content_hash(),
        "hidden_size": model.cfg.hidden_size,
        "model_config": model.cfg.as_dict(),
    }
    if getattr(model, "num_classes", None) is not None:
        manifest["num_classes"] = model.num_classes
    if extra:
        manifest.update(extra)
    with open(out / VOCAB_FILE, "w", encoding="utf-8") as handle:
        json.dump(model.vocab.tokens(), handle)
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
    torch.save(model.state_dict(), out / WEIGHTS_FILE)


def read_manifest(path) -> dict:
    manifest_path = Path(path) / MANIFEST_FILE
    if not manifest_path.exists():
        raise InputError(f"not a checkpoint directory: {path}")
    with open(manifest_path, encoding="utf-8") as handle:
        return json.load(handle)


def load_vocab(path) -> Vocabulary:
    with open(Path(path) / VOCAB_FILE, encoding="utf-8") as handle:
        return Vocabulary(json.load(handle))


def load_checkpoint(path):
    """Reconstruct a model from a checkpoint directory, dispatching on kind."""
    manifest = read_manifest(path)
    kind = manifest["kind"]
    vocab = load_vocab(path)
    cfg = ToyConfig(**manifest["model_config"])
    if kind == ToySeq2Seq.kind:
        model = ToySeq2Seq(vocab, cfg)
    elif kind == ToyTokenClassifier.kind:
        model = ToyTokenClassifier(vocab, cfg, num_classes=manifest.get("num_classes", 2))
    elif kind == "toy_ordering":
        from ..ordering import ToyOrderingModel

        model = ToyOrderingModel(vocab, cfg)
    else:
        raise InputError(f"unknown checkpoint kind {kind!r} at {path}")
    state = torch.load(Path(path) / WEIGHTS_FILE, weights_only=True)
    model.load_state_dict(state)
    if hasattr(model, "eval"):
        model.eval()
    return model, manifest


def save_training_state(path, optimizer_state: dict, epoch: int) -> None:
    torch.save({"optimizer": optimizer_state, "epoch": epoch},
               Path(path) / TRAIN_STATE_FILE)


def load_training_state(path):
    state_path = Path(path) / TRAIN_STATE_FILE
    if not state_path.exists():
        return None
    return torch.load(state_path, weights_only=True)


def model_cache_dir() -> str:
    """Cache directory for downloaded/pretrained assets; overridable by env."""
    return os.environ.get("RDF2TEXT_CACHE_DIR", os.path.expanduser("~/.cache/rdf2text"))
