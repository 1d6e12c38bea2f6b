"""Stage composition: 3-stage (order + aggregate + compress), 2-stage
(order + compress), and 1-stage (compress only) systems, plus the
template-copy baseline and batch generation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .aggregation import predict_delimiters
from .backend.checkpoint import load_checkpoint, read_manifest
from .compression import PCVariant, compress, format_pc_input
from .core import ContentPlan, TemplateRegistry, Triple, load_templates, realize_all
from .errors import InputError, StageError
from .ordering import order_facts


class Stages(Enum):
    THREE = 3
    TWO = 2
    ONE = 1


_EXPECTED_PC_VARIANT = {
    Stages.THREE: PCVariant.PC,
    Stages.TWO: PCVariant.PC_AGG,
    Stages.ONE: PCVariant.PC_ORD_AGG,
}


@dataclass
class PipelineConfig:
    """Which stages run and which artifacts back them."""

    stages: Stages
    pc_model: str
    templates: str
    ordering_model: Optional[str] = None
    aggregation_model: Optional[str] = None
    dataset_id: str = "dataset"
    corpus_variant: str = "full"
    seed: int = 13

    def __post_init__(self):
        if isinstance(self.stages, int):
            self.stages = Stages(self.stages)
        if self.corpus_variant not in ("full", "filtered"):
            raise InputError(f"corpus variant must be full or filtered: {self.corpus_variant}")
        needs_ordering = self.stages in (Stages.THREE, Stages.TWO)
        needs_aggregation = self.stages is Stages.THREE
        if needs_ordering and not self.ordering_model:
            raise InputError(f"{self.stages.name} pipeline requires an ordering model")
        if not needs_ordering and self.ordering_model:
            raise InputError(f"{self.stages.name} pipeline takes no ordering model")
        if needs_aggregation and not self.aggregation_model:
            raise InputError("THREE-stage pipeline requires an aggregation model")
        if not needs_aggregation and self.aggregation_model:
            raise InputError(f"{self.stages.name} pipeline takes no aggregation model")

    @property
    def expected_pc_variant(self) -> PCVariant:
        return _EXPECTED_PC_VARIANT[self.stages]


@dataclass
class GenerationRecord:
    """Full trace of one input through the configured stages."""

    triples: list
    facts: list
    plan: ContentPlan
    pc_input: str
    output: str
    id: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "triples": [t.as_dict() for t in self.triples],
            "facts": [f.text for f in self.facts],
            "plan": self.plan.as_dict(),
            "pc_input": self.pc_input,
            "output": self.output,
        }


class Pipeline:
    """Loaded models plus the template registry for one configuration."""

    def __init__(self, config: PipelineConfig, registry: TemplateRegistry,
                 pc_model, ordering_model=None, aggregation_model=None):
        self.config = config
        self.registry = registry
        self.pc_model = pc_model
        self.ordering_model = ordering_model
        self.aggregation_model = aggregation_model

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "Pipeline":
        registry = load_templates(config.templates, config.dataset_id)
        manifest = read_manifest(config.pc_model)
        stored_variant = manifest.get("pc_variant")
        if stored_variant is not None and stored_variant != config.expected_pc_variant.value:
            raise InputError(
                f"{config.stages.name}-stage pipeline needs a "
                f"{config.expected_pc_variant.value} compressor, found {stored_variant}"
            )
        pc_model, _ = load_checkpoint(config.pc_model)
        ordering_model = None
        aggregation_model = None
        if config.ordering_model:
            ordering_model, _ = load_checkpoint(config.ordering_model)
        if config.aggregation_model:
            aggregation_model, _ = load_checkpoint(config.aggregation_model)
        return cls(config, registry, pc_model, ordering_model, aggregation_model)

    def run(self, triples: Sequence[Triple], record_id: Optional[str] = None) -> GenerationRecord:
        stages = self.config.stages
        try:
            facts = realize_all(triples, self.registry)
        except Exception as exc:
            raise StageError("realize", exc) from exc
        order = None
        delimiters = None
        ordered = list(facts)
        if stages in (Stages.THREE, Stages.TWO):
            try:
                order = order_facts(facts, self.ordering_model)
            except Exception as exc:
                raise StageError("order", exc) from exc
            ordered = [facts[i] for i in order]
        if stages is Stages.THREE:
            try:
                delimiters = list(predict_delimiters(ordered, self.aggregation_model))
            except Exception as exc:
                raise StageError("aggregate", exc) from exc
            pc_in = format_pc_input(ordered, delimiters, PCVariant.PC)
        elif stages is Stages.TWO:
            pc_in = format_pc_input(ordered, None, PCVariant.PC_AGG)
        else:
            pc_in = format_pc_input(facts, None, PCVariant.PC_ORD_AGG)
        try:
            output = compress(pc_in, self.pc_model)
        except Exception as exc:
            raise StageError("compress", exc) from exc
        return GenerationRecord(
            triples=list(triples),
            facts=facts,
            plan=ContentPlan(order=order, delimiters=delimiters),
            pc_input=pc_in.text,
            output=output,
            id=record_id,
        )


def run_pipeline(triples: Sequence[Triple], pipeline) -> GenerationRecord:
    """Run one triple set through a Pipeline (or a config, loaded on the fly)."""
    if isinstance(pipeline, PipelineConfig):
        pipeline = Pipeline.from_config(pipeline)
    return pipeline.run(triples)


def copy_baseline(triples: Sequence[Triple], registry: TemplateRegistry) -> str:
    """Template facts joined with single spaces, input order preserved."""
    facts = realize_all(triples, registry)
    return " ".join(fact.text for fact in facts)


def _parse_dataset_line(line: str, line_no: int):
    record = json.loads(line)
    record_id = str(record.get("id", line_no))
    triples = [Triple.from_dict(t) for t in record["triples"]]
    return record_id, triples


def batch_generate(dataset_path, pipeline, out_path) -> dict:
    """Generate one output record per dataset line; failures do not stop the batch."""
    if isinstance(pipeline, PipelineConfig):
        pipeline = Pipeline.from_config(pipeline)
    summary = {"n_records": 0, "n_ok": 0, "n_errors": 0, "errors_per_stage": {}}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(dataset_path, encoding="utf-8") as src, \
            open(out_path, "w", encoding="utf-8") as dst:
        for line_no, line in enumerate(src, start=1):
            if not line.strip():
                continue
            summary["n_records"] += 1
            try:
                record_id, triples = _parse_dataset_line(line, line_no)
            except Exception as exc:
                summary["n_errors"] += 1
                stage_counts = summary["errors_per_stage"]
                stage_counts["parse"] = stage_counts.get("parse", 0) + 1
                dst.write(json.dumps({"id": str(line_no), "error": str(exc),
                                      "stage": "parse"}, sort_keys=True))
                dst.write("\n")
                continue
            try:
                record = pipeline.run(triples, record_id=record_id)
            except StageError as exc:
                summary["n_errors"] += 1
                stage_counts = summary["errors_per_stage"]
                stage_counts[exc.stage] = stage_counts.get(exc.stage, 0) + 1
                dst.write(json.dumps({"id": record_id, "error": str(exc),
                                      "stage": exc.stage}, sort_keys=True))
                dst.write("\n")
                continue
            summary["n_ok"] += 1
            dst.write(json.dumps(record.as_dict(), sort_keys=True, ensure_ascii=False))
            dst.write("\n")
    return summary
