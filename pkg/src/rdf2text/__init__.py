"""Zero-shot triple-to-text pipeline: templates, ordering, aggregation,
paragraph compression, synthetic corpus construction, and evaluation."""

__version__ = "0.1.0"

from .core import (
    ContentPlan,
    Fact,
    Template,
    TemplateRegistry,
    Triple,
    e2e_to_triples,
    load_templates,
    realize_all,
    realize_fact,
)

__all__ = [
    "ContentPlan",
    "Fact",
    "Template",
    "TemplateRegistry",
    "Triple",
    "__version__",
    "e2e_to_triples",
    "load_templates",
    "realize_all",
    "realize_fact",
]
