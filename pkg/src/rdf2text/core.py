"""Data model for triples, templates, facts and content plans.

A triple is realized into a single-sentence *fact* by filling the
predicate's template; the ordered facts plus binary fuse/separate
decisions form a *content plan* that downstream modules exchange.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    InputError,
    MissingTemplateError,
    PlaceholderCollisionError,
    TemplateConflictError,
    TemplateParseError,
)

SUBJ_PLACEHOLDER = "<s>"
OBJ_PLACEHOLDER = "<o>"
_TERMINAL = ".!?"


def normalize_predicate(predicate: str) -> str:
    """Trim and collapse internal whitespace; underscores and camelCase stay as-is."""
    return re.sub(r"\s+", " ", predicate.strip())


def _require_no_placeholders(value: str, role: str) -> None:
    for ph in (SUBJ_PLACEHOLDER, OBJ_PLACEHOLDER):
        if ph in value:
            raise PlaceholderCollisionError(
                f"{role} contains literal placeholder {ph!r}: {value!r}"
            )


@dataclass(frozen=True)
class Triple:
    """A (subject, predicate, object) structured fact."""

    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            value = getattr(self, name)
            if not value or not value.strip():
                raise InputError(f"triple {name} is empty")
            object.__setattr__(self, name, value.strip())

    def as_dict(self) -> dict:
        return {"subject": self.subject, "predicate": self.predicate, "object": self.object}

    @classmethod
    def from_dict(cls, record: Mapping) -> "Triple":
        try:
            return cls(record["subject"], record["predicate"], record["object"])
        except KeyError as exc:
            raise InputError(f"triple record missing key {exc}") from exc


@dataclass(frozen=True)
class Template:
    """Sentence pattern for one predicate with <s> and optional <o> slots."""

    predicate: str
    pattern: str

    def __post_init__(self):
        if self.pattern.count(SUBJ_PLACEHOLDER) != 1:
            raise InputError(
                f"template for {self.predicate!r} must contain exactly one {SUBJ_PLACEHOLDER}"
            )
        if self.pattern.count(OBJ_PLACEHOLDER) > 1:
            raise InputError(
                f"template for {self.predicate!r} may contain at most one {OBJ_PLACEHOLDER}"
            )
        if not self.pattern.rstrip() or self.pattern.rstrip()[-1] not in _TERMINAL:
            raise InputError(
                f"template for {self.predicate!r} must end with sentence-final punctuation"
            )

    def fill(self, subject: str, obj: str) -> str:
        return self.pattern.replace(SUBJ_PLACEHOLDER, subject).replace(OBJ_PLACEHOLDER, obj)


@dataclass
class TemplateRegistry:
    """Exact-match predicate -> template lookup for one dataset."""

    dataset_id: str
    entries: dict = field(default_factory=dict)

    def add(self, template: Template) -> None:
        key = normalize_predicate(template.predicate)
        if key in self.entries:
            raise TemplateConflictError(template.predicate)
        self.entries[key] = template

    def lookup(self, predicate: str) -> Template:
        key = normalize_predicate(predicate)
        if key not in self.entries:
            raise MissingTemplateError(predicate)
        return self.entries[key]

    def __contains__(self, predicate: str) -> bool:
        return normalize_predicate(predicate) in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Fact:
    """A single natural-language sentence realizing one triple."""

    text: str
    source: Triple

    def __post_init__(self):
        text = self.text.strip()
        if not text:
            raise InputError("fact text is empty")
        trailing = len(text) - len(text.rstrip(_TERMINAL))
        if trailing != 1:
            raise InputError(
                f"fact must end with exactly one terminal punctuation mark: {text!r}"
            )
        object.__setattr__(self, "text", text)


@dataclass
class ContentPlan:
    """Permutation of fact indices plus fuse/separate decisions between neighbors.

    ``delimiters[i] == 1`` keeps facts i and i+1 in separate sentences,
    ``0`` fuses them.  Either field may be absent for pipelines that skip
    the corresponding stage.
    """

    order: Optional[list] = None
    delimiters: Optional[list] = None

    def is_valid(self, n: int) -> bool:
        if self.order is not None and sorted(self.order) != list(range(n)):
            return False
        if self.delimiters is not None:
            if len(self.delimiters) != max(n - 1, 0):
                return False
            if any(v not in (0, 1) for v in self.delimiters):
                return False
        return True

    def validate(self, n: int) -> None:
        if not self.is_valid(n):
            raise InputError(f"invalid content plan for {n} facts: {self}")

    def as_dict(self) -> dict:
        return {"order": self.order, "delimiters": self.delimiters}


def load_templates(path, dataset_id: str) -> TemplateRegistry:
    """Load a JSONL template file with keys ``predicate`` and ``pattern``."""
    registry = TemplateRegistry(dataset_id=dataset_id)
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TemplateParseError(path, line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(record, dict) or "predicate" not in record or "pattern" not in record:
                raise TemplateParseError(path, line_no, "record needs predicate and pattern keys")
            try:
                template = Template(record["predicate"], record["pattern"])
            except InputError as exc:
                raise TemplateParseError(path, line_no, str(exc)) from exc
            registry.add(template)
    return registry


def realize_fact(triple: Triple, registry: TemplateRegistry) -> Fact:
    """Fill the predicate's template with subject and object, verbatim."""
    template = registry.lookup(triple.predicate)
    _require_no_placeholders(triple.subject, "subject")
    _require_no_placeholders(triple.object, "object")
    return Fact(text=template.fill(triple.subject, triple.object), source=triple)


def realize_all(triples: Sequence[Triple], registry: TemplateRegistry) -> list:
    """Realize each triple in order; the i-th fact comes from the i-th triple."""
    facts = []
    for index, triple in enumerate(triples):
        try:
            facts.append(realize_fact(triple, registry))
        except MissingTemplateError as exc:
            raise MissingTemplateError(exc.predicate, index=index) from exc
    return facts


def e2e_to_triples(name: str, attributes: Mapping) -> list:
    """Turn attribute-value pairs into triples with the entity name as subject.

    A ``name`` attribute is consumed as the subject and never emitted as
    its own triple.
    """
    if not name or not name.strip():
        raise InputError("missing name attribute")
    triples = []
    for attribute, value in attributes.items():
        if normalize_predicate(attribute) == "name":
            continue
        triples.append(Triple(subject=name, predicate=attribute, object=value))
    return triples
