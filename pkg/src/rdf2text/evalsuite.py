"""Automatic metrics: BLEU/BLEU-2, entailment-based omission and
hallucination rates, and the per-module intrinsic table."""

from __future__ import annotations

import math
import re
import subprocess
import tempfile
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .aggregation import eval_aggregation, predict_delimiters
from .backend.base import EntailmentClassifier, entails
from .errors import BackendUnavailableError, EvaluationError, InputError
from .ordering import fact_text
from .seeding import substream_rng


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates: Sequence[str], reference_sets: Sequence, max_ngram: int = 4) -> float:
    """Corpus-level BLEU with brevity penalty and no smoothing, scaled to 0-100.

    Tokens are whitespace-delimited; ties in reference length resolve to
    the shorter reference.
    """
    if max_ngram not in (2, 4):
        raise InputError(f"max_ngram must be 2 or 4, got {max_ngram}")
    if not candidates:
        raise InputError("empty candidate set")
    if len(candidates) != len(reference_sets):
        raise InputError("candidates and reference sets are misaligned")
    clipped = [0] * max_ngram
    totals = [0] * max_ngram
    candidate_length = 0
    reference_length = 0
    for candidate, references in zip(candidates, reference_sets):
        references = list(references)
        if not references:
            raise InputError("every candidate needs at least one reference")
        cand_tokens = candidate.split()
        ref_token_lists = [r.split() for r in references]
        candidate_length += len(cand_tokens)
        reference_length += min(
            (abs(len(r) - len(cand_tokens)), len(r)) for r in ref_token_lists
        )[1]
        for n in range(1, max_ngram + 1):
            counts = _ngrams(cand_tokens, n)
            max_ref = Counter()
            for ref_tokens in ref_token_lists:
                ref_counts = _ngrams(ref_tokens, n)
                for gram, count in ref_counts.items():
                    max_ref[gram] = max(max_ref[gram], count)
            totals[n - 1] += sum(counts.values())
            clipped[n - 1] += sum(min(count, max_ref[gram]) for gram, count in counts.items())
    if candidate_length == 0:
        return 0.0
    if any(c == 0 or t == 0 for c, t in zip(clipped, totals)):
        return 0.0
    log_precision = sum(math.log(c / t) for c, t in zip(clipped, totals)) / max_ngram
    brevity = 1.0 if candidate_length > reference_length else math.exp(
        1.0 - reference_length / candidate_length
    )
    return 100.0 * brevity * math.exp(log_precision)


def semantic_accuracy(output: str, facts: Sequence, nli: EntailmentClassifier) -> dict:
    """Count facts the output fails to entail; flag output unsupported by facts."""
    if not output.strip():
        raise InputError("empty output")
    try:
        omissions = 0
        for fact in facts:
            label, _ = entails(nli, output, fact_text(fact))
            if label != "entailment":
                omissions += 1
        concatenated = " ".join(fact_text(f) for f in facts)
        label, _ = entails(nli, concatenated, output)
        hallucinated = label != "entailment"
    except Exception as exc:
        raise EvaluationError(f"NLI evaluation failed: {exc}") from exc
    return {"omissions": omissions, "hallucinated": hallucinated}


@dataclass
class EvalReport:
    """Metric bundle for one system run."""

    bleu: float
    n_examples: int
    system_tag: str
    meteor: Optional[float] = None
    omissions_per_fact: Optional[float] = None
    hallucinations_per_example: Optional[float] = None

    def __post_init__(self):
        if self.omissions_per_fact is not None and not (0.0 <= self.omissions_per_fact <= 1.0):
            raise InputError("omission rate outside [0, 1] under at-most-once counting")
        if self.hallucinations_per_example is not None and not (
            0.0 <= self.hallucinations_per_example <= 1.0
        ):
            raise InputError("hallucination rate outside [0, 1]")

    def as_dict(self) -> dict:
        return {
            "system_tag": self.system_tag,
            "n_examples": self.n_examples,
            "bleu": self.bleu,
            "meteor": self.meteor,
            "omissions_per_fact": self.omissions_per_fact,
            "hallucinations_per_example": self.hallucinations_per_example,
        }


class ExternalMeteorScorer:
    """Runs a packaged METEOR scorer via subprocess and file exchange.

    ``command_template`` must contain {hyp} and {ref} placeholders; the
    last floating-point number on stdout is taken as the score.
    """

    def __init__(self, command_template: str):
        if "{hyp}" not in command_template or "{ref}" not in command_template:
            raise InputError("command template needs {hyp} and {ref} placeholders")
        self.command_template = command_template

    def score(self, candidates: Sequence[str], reference_sets: Sequence) -> float:
        with tempfile.TemporaryDirectory() as workdir:
            hyp_path = Path(workdir) / "hyp.txt"
            ref_path = Path(workdir) / "ref.txt"
            hyp_path.write_text("\n".join(candidates) + "\n", encoding="utf-8")
            ref_path.write_text(
                "\n".join(list(refs)[0] for refs in reference_sets) + "\n",
                encoding="utf-8",
            )
            command = self.command_template.format(hyp=hyp_path, ref=ref_path)
            result = subprocess.run(command, shell=True, capture_output=True, text=True)
        if result.returncode != 0:
            raise EvaluationError(f"METEOR scorer failed: {result.stderr.strip()}")
        numbers = re.findall(r"-?\d+(?:\.\d+)?", result.stdout)
        if not numbers:
            raise EvaluationError("METEOR scorer printed no score")
        return float(numbers[-1])


def evaluate_system(outputs: Sequence[str], reference_sets: Sequence,
                    fact_sets: Optional[Sequence] = None,
                    nli: Optional[EntailmentClassifier] = None,
                    system_tag: str = "system",
                    meteor_scorer: Optional[ExternalMeteorScorer] = None,
                    details: Optional[list] = None) -> EvalReport:
    """Aggregate per-example metrics; rates are means of per-example values."""
    if len(outputs) != len(reference_sets):
        raise InputError("outputs and references are misaligned")
    if not outputs:
        raise InputError("nothing to evaluate")
    omission_rate = None
    hallucination_rate = None
    if fact_sets is not None:
        if nli is None:
            raise BackendUnavailableError(
                "semantic accuracy metrics require an NLI backend"
            )
        if len(fact_sets) != len(outputs):
            raise InputError("outputs and fact sets are misaligned")
        per_omission = []
        per_hallucination = []
        for index, (output, facts) in enumerate(zip(outputs, fact_sets)):
            row = semantic_accuracy(output, facts, nli)
            per_omission.append(row["omissions"] / max(len(list(facts)), 1))
            per_hallucination.append(1.0 if row["hallucinated"] else 0.0)
            if details is not None:
                details.append({"index": index, **row, "n_facts": len(list(facts))})
        omission_rate = sum(per_omission) / len(per_omission)
        hallucination_rate = sum(per_hallucination) / len(per_hallucination)
    meteor = meteor_scorer.score(outputs, reference_sets) if meteor_scorer else None
    return EvalReport(
        bleu=bleu(outputs, reference_sets, max_ngram=4),
        meteor=meteor,
        omissions_per_fact=omission_rate,
        hallucinations_per_example=hallucination_rate,
        n_examples=len(outputs),
        system_tag=system_tag,
    )


def intrinsic_eval(test_split: Sequence, ordering_model=None, aggregation_model=None,
                   pc_model=None, seed: int = 13,
                   meteor_scorer: Optional[ExternalMeteorScorer] = None) -> dict:
    """Score pipeline modules against a held-out split with gold plans.

    Ordering sees a seeded shuffle of each example's sentences; aggregation
    and compression consume the ground-truth content plans. Multi-sentence
    examples only for ordering/aggregation.
    """
    from .compression import PCVariant, compress, format_pc_input
    from .ordering import eval_ordering, order_facts

    examples = list(test_split)
    if not examples:
        raise InputError("empty test split")
    table = {}
    if ordering_model is not None:
        rng = substream_rng(seed, "intrinsic-ordering")
        predicted, gold = [], []
        for example in examples:
            n = len(example.sentences)
            if n < 2:
                continue
            perm = list(range(n))
            rng.shuffle(perm)
            shuffled = [example.sentences[i] for i in perm]
            slots = order_facts(shuffled, ordering_model)
            predicted.append([perm[s] for s in slots])
            gold.append(list(range(n)))
        if not predicted:
            raise InputError("no multi-sentence examples for ordering")
        table["ordering"] = eval_ordering(predicted, gold)
    if aggregation_model is not None:
        predicted, gold = [], []
        for example in examples:
            if len(example.sentences) < 2:
                continue
            predicted.append(list(predict_delimiters(example.sentences, aggregation_model)))
            gold.append(list(example.agg_labels))
        if not predicted:
            raise InputError("no multi-sentence examples for aggregation")
        table["aggregation"] = eval_aggregation(predicted, gold)
    if pc_model is not None:
        outputs, references = [], []
        for example in examples:
            pc_in = format_pc_input(example.sentences, example.agg_labels, PCVariant.PC)
            outputs.append(compress(pc_in, pc_model))
            references.append([example.paragraph])
        table["pc"] = {"bleu": bleu(outputs, references, max_ngram=4)}
        if meteor_scorer is not None:
            table["pc"]["meteor"] = meteor_scorer.score(outputs, references)
    return table
