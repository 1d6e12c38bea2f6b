"""Synthetic biography-style fixtures for desk-scale training and tests.

Each entity gets a subset of attribute sentences with a fixed canonical
order; adjacent attribute pairs from the same theme fuse into one
paragraph sentence. That gives every toy model a learnable signal:
ordering recovers the canonical attribute order, aggregation recovers
the theme-pair fusion rule, and compression recovers the fused wording.
"""

from __future__ import annotations

import json
from pathlib import Path

from .corpusbuilder import CorpusExample
from .seeding import substream_rng

FIRST_NAMES = [
    "Arlo", "Bena", "Ciro", "Dana", "Ezra", "Faye", "Grit", "Hugo", "Iris",
    "Jude", "Kira", "Liam", "Mona", "Nils", "Orla", "Pavo", "Quin", "Rosa",
    "Sten", "Tove",
]
LAST_NAMES = [
    "Abbott", "Bergen", "Castel", "Devlin", "Ekberg", "Farrow", "Gideon",
    "Hollis", "Ingram", "Jarvis", "Keller", "Lovell", "Marsh", "Norden",
    "Ostrov", "Pryce", "Quill", "Rourke", "Severin", "Thorne",
]
JOBS = ["teacher", "pilot", "chemist", "sculptor", "farmer", "violinist", "surveyor"]
CITIES = ["Oslo", "Lisbon", "Quito", "Tirana", "Windhoek", "Suva", "Tallinn", "Bogota"]
EMPLOYERS = ["Northfield Labs", "Harbor Line", "Vetra Group", "Calder Mills", "Iona Press"]
INSTRUMENTS = ["cello", "oboe", "banjo", "marimba", "zither"]
HOBBIES = ["chess", "archery", "orienteering", "calligraphy", "beekeeping"]

# (attribute name, fact phrase, value pool) in canonical order
ATTRIBUTES = [
    ("profession", "is a {}", JOBS),
    ("birthplace", "was born in {}", CITIES),
    ("residence", "lives in {}", CITIES),
    ("employer", "works for {}", EMPLOYERS),
    ("instrument", "plays the {}", INSTRUMENTS),
    ("hobby", "enjoys {}", HOBBIES),
]
# adjacent attribute pairs that fuse into one sentence
FUSABLE = {(0, 1), (2, 3), (4, 5)}

TEMPLATES = [
    {"predicate": name, "pattern": f"<s> {phrase.format('<o>')}."}
    for name, phrase, _ in ATTRIBUTES
]


def _entity(rng) -> str:
    return f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}"


def _pick_attributes(rng, min_facts: int, max_facts: int) -> list:
    count = rng.randint(min_facts, max_facts)
    return sorted(rng.sample(range(len(ATTRIBUTES)), count))


def _facts_for(name: str, kinds, rng):
    facts = []
    for kind in kinds:
        attr_name, phrase, pool = ATTRIBUTES[kind]
        value = rng.choice(pool)
        facts.append((kind, attr_name, value, f"{name} {phrase.format(value)}."))
    return facts


def _group_kinds(kinds) -> list:
    groups = []
    i = 0
    while i < len(kinds):
        if i + 1 < len(kinds) and (kinds[i], kinds[i + 1]) in FUSABLE:
            groups.append([i, i + 1])
            i += 2
        else:
            groups.append([i])
            i += 1
    return groups


def _paragraph(name: str, facts, groups) -> str:
    sentences = []
    for group in groups:
        phrases = []
        for position in group:
            kind, _, value, _ = facts[position]
            phrases.append(ATTRIBUTES[kind][1].format(value))
        sentences.append(f"{name} {' and '.join(phrases)}.")
    return " ".join(sentences)


def make_corpus_example(seed: int, index: int, min_facts: int = 2,
                        max_facts: int = 6) -> CorpusExample:
    rng = substream_rng(seed, "toydata", index)
    name = _entity(rng)
    kinds = _pick_attributes(rng, min_facts, max_facts)
    facts = _facts_for(name, kinds, rng)
    groups = _group_kinds(kinds)
    labels = []
    for g, group in enumerate(groups):
        labels.extend([0] * (len(group) - 1))
        if g < len(groups) - 1:
            labels.append(1)
    return CorpusExample(
        paragraph=_paragraph(name, facts, groups),
        sentences=[f[3] for f in facts],
        agg_labels=labels,
        article_id=f"toy-{index:05d}",
    )


def make_corpus(n: int, seed: int = 13, min_facts: int = 2, max_facts: int = 6) -> list:
    return [make_corpus_example(seed, i, min_facts, max_facts) for i in range(n)]


def write_dump(path, n: int, seed: int = 13) -> None:
    """Raw-paragraph dump for corpus-builder runs (one record per article)."""
    with open(path, "w", encoding="utf-8") as handle:
        for index in range(n):
            example = make_corpus_example(seed, index)
            record = {"article_id": example.article_id, "text": example.paragraph}
            handle.write(json.dumps(record, sort_keys=True))
            handle.write("\n")


def write_templates(path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in TEMPLATES:
            handle.write(json.dumps(record, sort_keys=True))
            handle.write("\n")


def write_triple_dataset(path, n: int, seed: int = 13, min_facts: int = 2,
                         max_facts: int = 6) -> None:
    """Triple-set records matching the toy templates, for generate runs."""
    with open(path, "w", encoding="utf-8") as handle:
        for index in range(n):
            rng = substream_rng(seed, "toytriples", index)
            name = _entity(rng)
            kinds = _pick_attributes(rng, min_facts, max_facts)
            triples = []
            for kind, attr_name, value, _ in _facts_for(name, kinds, rng):
                triples.append({"subject": name, "predicate": attr_name, "object": value})
            record = {"id": f"ex-{index:05d}", "triples": triples}
            handle.write(json.dumps(record, sort_keys=True))
            handle.write("\n")


def make_shuffled_dataset(examples, seed: int = 13):
    """(shuffled sentences, permutation) pairs for ordering evaluation."""
    rng = substream_rng(seed, "toydata-shuffle")
    dataset = []
    for example in examples:
        perm = list(range(len(example.sentences)))
        rng.shuffle(perm)
        dataset.append(([example.sentences[i] for i in perm], perm))
    return dataset
