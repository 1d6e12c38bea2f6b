"""Synthetic parallel corpus construction from encyclopedia paragraphs.

Each paragraph becomes a training example: its sentences are split into
simpler ones, referring expressions are replaced by their antecedents,
and two directional entailment checks flag omissions/hallucinations.
The original paragraph is the target; the synthesized sentences are the
source; fuse labels record which sentences came from one original.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .backend.base import ConditionalGenerator, EntailmentClassifier, entails
from .backend.vocab import SEP, tokenize
from .errors import CorruptExampleError, InputError
from .seeding import substream_rng
from .sentences import count_sentences, split_sentences

logger = logging.getLogger(__name__)

MIN_PARAGRAPH_CHARS = 30
MAX_PARAGRAPH_CHARS = 430

_PRONOUNS = frozenset(
    "he she it they him her them his hers its their theirs this that these those".split()
)
_BULLET_PATTERN = re.compile(r"(?:^|\n)\s*[\*\-•▪#]\s")
_BRACKET_PAIRS = (("(", ")"), ("[", "]"), ("{", "}"))


@dataclass(frozen=True)
class RawParagraph:
    """One candidate paragraph extracted from a dump record."""

    text: str
    article_id: str

    def __post_init__(self):
        trimmed = self.text.strip()
        if not (MIN_PARAGRAPH_CHARS <= len(trimmed) <= MAX_PARAGRAPH_CHARS):
            raise InputError(
                f"paragraph length {len(trimmed)} outside "
                f"[{MIN_PARAGRAPH_CHARS}, {MAX_PARAGRAPH_CHARS}]"
            )
        object.__setattr__(self, "text", trimmed)


@dataclass(frozen=True)
class LengthBuckets:
    """Equal-width character-length ranges with one shared quota each.

    Ranges are closed-open except the last, which includes its upper bound.
    """

    boundaries: tuple = (30, 130, 230, 330, 430)
    quota: int = 250_000

    def __post_init__(self):
        if len(self.boundaries) < 2 or list(self.boundaries) != sorted(set(self.boundaries)):
            raise InputError("bucket boundaries must be strictly increasing")
        if self.quota < 1:
            raise InputError("bucket quota must be positive")

    @property
    def n_buckets(self) -> int:
        return len(self.boundaries) - 1

    def bucket_of(self, length: int) -> Optional[int]:
        if length < self.boundaries[0] or length > self.boundaries[-1]:
            return None
        for i in range(self.n_buckets - 1):
            if length < self.boundaries[i + 1]:
                return i
        return self.n_buckets - 1


@dataclass
class CorpusExample:
    """(synthesized sentences, fuse labels, original paragraph) training unit."""

    paragraph: str
    sentences: list
    agg_labels: list
    kept: bool = True
    flags: dict = field(default_factory=lambda: {"omission": False, "hallucination": False})
    article_id: str = ""
    split: str = ""
    error: Optional[str] = None

    def __post_init__(self):
        if len(self.agg_labels) != max(len(self.sentences) - 1, 0):
            raise CorruptExampleError(
                f"{len(self.agg_labels)} labels for {len(self.sentences)} sentences"
            )
        if any(v not in (0, 1) for v in self.agg_labels):
            raise CorruptExampleError(f"labels must be 0/1: {self.agg_labels}")

    def as_dict(self) -> dict:
        record = {
            "paragraph": self.paragraph,
            "sentences": self.sentences,
            "agg_labels": self.agg_labels,
            "kept": self.kept,
            "flags": self.flags,
            "article_id": self.article_id,
            "split": self.split,
        }
        if self.error is not None:
            record["error"] = self.error
        return record

    @classmethod
    def from_dict(cls, record: dict) -> "CorpusExample":
        return cls(
            paragraph=record["paragraph"],
            sentences=list(record["sentences"]),
            agg_labels=list(record["agg_labels"]),
            kept=record.get("kept", True),
            flags=dict(record.get("flags", {"omission": False, "hallucination": False})),
            article_id=record.get("article_id", ""),
            split=record.get("split", ""),
            error=record.get("error"),
        )


def _looks_malformed(text: str) -> bool:
    if _BULLET_PATTERN.search(text):
        return True
    if len(re.findall(r"[A-Za-z]+", text)) < 4:
        return True
    for opener, closer in _BRACKET_PAIRS:
        if text.count(opener) != text.count(closer):
            return True
    return False


def _iter_dump_records(dump_path):
    path = Path(dump_path)
    if path.is_dir():
        files = sorted(path.glob("*.jsonl"))
        if not files:
            raise InputError(f"no .jsonl files under {dump_path}")
    elif path.exists():
        files = [path]
    else:
        raise InputError(f"dump not found: {dump_path}")
    for file_path in files:
        with open(file_path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if line.strip():
                    yield file_path, line_no, line


def extract_paragraphs(dump_path, buckets: LengthBuckets,
                       counters: Optional[dict] = None) -> list:
    """Select paragraphs per length bucket, dropping duplicates and junk.

    The dump is JSONL with ``article_id`` and ``text`` (optionally ``title``)
    per record; counters, when given, accumulate per-reason skip counts.
    """
    counters = counters if counters is not None else {}
    kept = []
    seen_texts = set()
    per_bucket = [0] * buckets.n_buckets
    for file_path, line_no, line in _iter_dump_records(dump_path):
        try:
            record = json.loads(line)
            text = str(record["text"])
            article_id = str(record["article_id"])
        except (json.JSONDecodeError, KeyError, TypeError):
            counters["malformed_record"] = counters.get("malformed_record", 0) + 1
            logger.warning("skipping malformed record at %s:%d", file_path, line_no)
            continue
        title = str(record.get("title", ""))
        if title.lower().endswith("(disambiguation)"):
            counters["disambiguation"] = counters.get("disambiguation", 0) + 1
            continue
        text = text.strip()
        bucket = buckets.bucket_of(len(text))
        if bucket is None:
            counters["length"] = counters.get("length", 0) + 1
            continue
        if _looks_malformed(text):
            counters["malformed_text"] = counters.get("malformed_text", 0) + 1
            continue
        if text in seen_texts:
            counters["duplicate"] = counters.get("duplicate", 0) + 1
            continue
        if per_bucket[bucket] >= buckets.quota:
            counters["quota"] = counters.get("quota", 0) + 1
            continue
        seen_texts.add(text)
        per_bucket[bucket] += 1
        kept.append(RawParagraph(text=text, article_id=article_id))
    return kept


def normalized_levenshtein(a: str, b: str) -> float:
    """Similarity in [0, 1]: 1 - edit distance / max length."""
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return 1.0 - previous[-1] / max(len(a), len(b))


def _duplicate_output(output_sentences: Sequence[str], original: str,
                      threshold: float) -> bool:
    joined = " ".join(output_sentences)
    if normalized_levenshtein(joined, original) >= threshold:
        return True
    if len(output_sentences) >= 2 and all(
        normalized_levenshtein(s, original) >= threshold for s in output_sentences
    ):
        return True
    return False


def _split_once(sentence: str, model: ConditionalGenerator, threshold: float):
    """One model application; None signals cannot-split (keep the original)."""
    try:
        raw = model.generate_text(sentence)
    except Exception as exc:
        logger.warning("split model failed on %r: %s", sentence, exc)
        return None
    raw = re.sub(r"\s+", " ", raw.replace(SEP, " ")).strip()
    if not raw:
        return None
    try:
        parts = split_sentences(raw)
    except InputError:
        return None
    if _duplicate_output(parts, sentence, threshold):
        return None
    return parts


def split_and_rephrase(sentence: str, model: ConditionalGenerator, depth: int,
                       duplicate_threshold: float = 0.9) -> list:
    """Recursively split a sentence ``depth`` times (0 = identity).

    Each level applies the model to every sentence produced so far; a
    duplicated or failed output keeps the original sentence and stops
    splitting it further.
    """
    if depth not in (0, 1, 2):
        raise InputError(f"split depth must be in 0..2, got {depth}")
    current = [(sentence, False)]
    for _ in range(depth):
        next_level = []
        for text, finished in current:
            if finished:
                next_level.append((text, True))
                continue
            parts = _split_once(text, model, duplicate_threshold)
            if parts is None:
                next_level.append((text, True))
            else:
                next_level.extend((part, False) for part in parts)
        current = next_level
    return [text for text, _ in current]


@dataclass(frozen=True)
class CorefMention:
    sentence: int
    start: int
    end: int
    text: str


@dataclass
class CorefCluster:
    mentions: list
    representative: str


class CorefBackend:
    """Finds mention clusters over a sentence sequence."""

    def clusters(self, sentences: Sequence[str]) -> list:
        raise NotImplementedError


_ENTITY_PATTERN = re.compile(r"\b[A-Z][a-z]+(?: [A-Z][a-z]+)*\b")
_SUBJECT_PRONOUNS = re.compile(r"\b(he|she|it|they)\b", re.IGNORECASE)
_NON_ENTITY_STARTS = frozenset(
    "the a an he she it they his her its their this that these those in on at".split()
)


class PronounCorefBackend(CorefBackend):
    """Heuristic resolver: subject pronouns bind to the latest proper noun."""

    def clusters(self, sentences: Sequence[str]) -> list:
        clusters = {}
        latest_entity = None
        for index, sentence in enumerate(sentences):
            events = []
            for match in _ENTITY_PATTERN.finditer(sentence):
                first_word = match.group().split()[0].lower()
                if first_word in _NON_ENTITY_STARTS:
                    continue
                events.append(("entity", match))
            for match in _SUBJECT_PRONOUNS.finditer(sentence):
                events.append(("pronoun", match))
            events.sort(key=lambda e: e[1].start())
            for kind, match in events:
                mention = CorefMention(index, match.start(), match.end(), match.group())
                if kind == "entity":
                    latest_entity = mention
                elif latest_entity is not None:
                    key = (latest_entity.sentence, latest_entity.start)
                    cluster = clusters.get(key)
                    if cluster is None:
                        cluster = CorefCluster(
                            mentions=[latest_entity], representative=latest_entity.text
                        )
                        clusters[key] = cluster
                    cluster.mentions.append(mention)
        return [clusters[key] for key in sorted(clusters)]


def replace_coreferences(sentences: Sequence[str], coref_backend: CorefBackend) -> list:
    """Rewrite non-first cluster mentions to the cluster representative.

    Clusters whose representative is itself a pronoun are skipped.
    """
    result = list(sentences)
    replacements = {}
    for cluster in coref_backend.clusters(sentences):
        if cluster.representative.lower() in _PRONOUNS:
            continue
        for mention in cluster.mentions[1:]:
            if mention.text == cluster.representative:
                continue
            replacements.setdefault(mention.sentence, []).append(
                (mention.start, mention.end, cluster.representative)
            )
    for index, edits in replacements.items():
        text = result[index]
        for start, end, replacement in sorted(edits, reverse=True):
            text = text[:start] + replacement + text[end:]
        result[index] = text
    return result


def nli_filter(example: CorpusExample, nli: EntailmentClassifier) -> CorpusExample:
    """Flag omissions/hallucinations via directional entailment; set kept."""
    if not example.sentences:
        raise InputError("example has no sentences")
    try:
        omission = False
        for sentence in example.sentences:
            label, _ = entails(nli, example.paragraph, sentence)
            if label != "entailment":
                omission = True
                break
        concatenated = " ".join(example.sentences)
        label, _ = entails(nli, concatenated, example.paragraph)
        hallucination = label != "entailment"
    except Exception as exc:
        example.kept = False
        example.error = f"nli failure: {exc}"
        return example
    example.flags = {"omission": omission, "hallucination": hallucination}
    example.kept = not (omission or hallucination)
    return example


@dataclass
class CorpusBuildConfig:
    """Everything the builder needs besides the dump itself."""

    out_dir: str
    split_model: ConditionalGenerator
    coref_backend: Optional[CorefBackend] = None
    nli: Optional[EntailmentClassifier] = None
    buckets: LengthBuckets = field(default_factory=lambda: LengthBuckets(quota=250_000))
    seed: int = 13
    dev_size: int = 0
    test_size: int = 0
    depth_choices: tuple = (0, 1, 2)
    duplicate_threshold: float = 0.9
    workers: int = 1

FULL_FILE = "corpus_full.jsonl"
FILTERED_FILE = "corpus_filtered.jsonl"
STATS_FILE = "stats.json"


def _synthesize(paragraph: RawParagraph, config: CorpusBuildConfig) -> CorpusExample:
    rng = substream_rng(config.seed, "paragraph", paragraph.article_id)
    original_sentences = split_sentences(paragraph.text)
    groups = []
    for sentence in original_sentences:
        depth = rng.choice(config.depth_choices)
        groups.append(
            split_and_rephrase(sentence, config.split_model, depth,
                               config.duplicate_threshold)
        )
    sentences = [s for group in groups for s in group]
    labels = []
    for group_index, group in enumerate(groups):
        labels.extend([0] * (len(group) - 1))
        if group_index < len(groups) - 1:
            labels.append(1)
    if config.coref_backend is not None:
        sentences = replace_coreferences(sentences, config.coref_backend)
    example = CorpusExample(
        paragraph=paragraph.text,
        sentences=sentences,
        agg_labels=labels,
        article_id=paragraph.article_id,
    )
    if config.nli is not None:
        example = nli_filter(example, config.nli)
    return example


def _assign_splits(article_ids: Sequence[str], config: CorpusBuildConfig) -> dict:
    shuffled = sorted(article_ids)
    substream_rng(config.seed, "split").shuffle(shuffled)
    assignment = {}
    for position, article_id in enumerate(shuffled):
        if position < config.dev_size:
            assignment[article_id] = "dev"
        elif position < config.dev_size + config.test_size:
            assignment[article_id] = "test"
        else:
            assignment[article_id] = "train"
    return assignment


def _averages(examples: Sequence[CorpusExample]) -> dict:
    if not examples:
        return {
            "tokens_per_source": 0.0,
            "tokens_per_target": 0.0,
            "sentences_per_source": 0.0,
            "sentences_per_target": 0.0,
        }
    n = len(examples)
    return {
        "tokens_per_source": sum(
            len(tokenize(" ".join(ex.sentences))) for ex in examples) / n,
        "tokens_per_target": sum(len(tokenize(ex.paragraph)) for ex in examples) / n,
        "sentences_per_source": sum(len(ex.sentences) for ex in examples) / n,
        "sentences_per_target": sum(count_sentences(ex.paragraph) for ex in examples) / n,
    }


def build_corpus(dump_path, config: CorpusBuildConfig) -> dict:
    """Run the full build; writes full/filtered JSONL plus a stats report.

    Output ordering is by article_id regardless of worker count, and all
    randomness comes from named substreams of the configured seed, so
    reruns are byte-identical.
    """
    counters = {}
    paragraphs = extract_paragraphs(dump_path, config.buckets, counters=counters)
    paragraphs = sorted(paragraphs, key=lambda p: p.article_id)
    assignment = _assign_splits([p.article_id for p in paragraphs], config)

    examples = []
    dropped = 0
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(
                lambda p: _build_one(p, config), paragraphs))
    else:
        results = [_build_one(p, config) for p in paragraphs]
    for paragraph, outcome in zip(paragraphs, results):
        if outcome is None:
            dropped += 1
            continue
        outcome.split = assignment[paragraph.article_id]
        examples.append(outcome)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    full_path = out_dir / FULL_FILE
    filtered_path = out_dir / FILTERED_FILE
    _write_jsonl(full_path, examples)
    _write_jsonl(filtered_path, [ex for ex in examples if ex.kept])

    kept = [ex for ex in examples if ex.kept]
    stats = {
        "n_input_paragraphs": len(paragraphs),
        "n_examples": len(examples),
        "n_kept": len(kept),
        "retention": len(kept) / len(examples) if examples else 0.0,
        "dropped": dropped,
        "skipped_at_extraction": counters,
        "split_sizes": {
            name: sum(1 for ex in examples if ex.split == name)
            for name in ("train", "dev", "test")
        },
        "full": _averages(examples),
        "filtered": _averages(kept),
    }
    with open(out_dir / STATS_FILE, "w", encoding="utf-8") as handle:
        json.dump(stats, handle, indent=2, sort_keys=True)
        handle.write("\n")
    stats["full_path"] = str(full_path)
    stats["filtered_path"] = str(filtered_path)
    return stats


def _build_one(paragraph: RawParagraph, config: CorpusBuildConfig):
    try:
        return _synthesize(paragraph, config)
    except Exception as exc:
        logger.warning("dropping %s: %s", paragraph.article_id, exc)
        return None


def _write_jsonl(path, examples: Sequence[CorpusExample]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example.as_dict(), sort_keys=True, ensure_ascii=False))
            handle.write("\n")


def load_corpus(path) -> list:
    with open(path, encoding="utf-8") as handle:
        return [CorpusExample.from_dict(json.loads(line)) for line in handle if line.strip()]


def train_split_model(records: Sequence, config, cfg=None):
    """Train the split-and-rephrase seq2seq on (complex, simple sentences) pairs.

    Records are dicts with ``complex`` and ``simple`` (a list of sentences)
    or plain (source, target) string tuples.
    """
    from .backend.toy import ToySeq2Seq
    from .backend.vocab import Vocabulary, tokenize

    if not records:
        raise InputError("empty training corpus")
    pairs = []
    for record in records:
        if isinstance(record, dict):
            source = record["complex"]
            target = " ".join(record["simple"])
        else:
            source, target = record
        pairs.append((tokenize(source), tokenize(target)))
    vocab = Vocabulary.from_texts(
        [" ".join(src) for src, _ in pairs] + [" ".join(tgt) for _, tgt in pairs]
    )
    model = ToySeq2Seq(vocab, cfg, seed=config.seed)
    model.train_history = model.fit(pairs, config)
    return model
