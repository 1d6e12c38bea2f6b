from .base import (
    ConditionalGenerator,
    EntailmentClassifier,
    SequenceEncoder,
    TokenClassifier,
    TrainConfig,
    classify_tokens,
    encode,
    entails,
    generate,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .heuristic import EchoGenerator, OverlapEntailmentClassifier, RuleSplitGenerator
from .toy import ToyConfig, ToySeq2Seq, ToySequenceEncoder, ToyTokenClassifier
from .vocab import BOS, EOS, PAD, SEP, UNK, Vocabulary, detokenize, tokenize

__all__ = [
    "BOS",
    "EOS",
    "PAD",
    "SEP",
    "UNK",
    "ConditionalGenerator",
    "EchoGenerator",
    "EntailmentClassifier",
    "OverlapEntailmentClassifier",
    "RuleSplitGenerator",
    "SequenceEncoder",
    "TokenClassifier",
    "ToyConfig",
    "ToySeq2Seq",
    "ToySequenceEncoder",
    "ToyTokenClassifier",
    "TrainConfig",
    "Vocabulary",
    "classify_tokens",
    "detokenize",
    "encode",
    "entails",
    "generate",
    "load_checkpoint",
    "save_checkpoint",
    "tokenize",
]
