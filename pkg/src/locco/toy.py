"""Synthetic text/triple-set corpus for desk-scale runs.

A small fixed world of facts is drawn first; every example verbalizes a
subset of those facts, one clause per triple, clauses joined by ``and``.
Each relation has several templates, some with subject and object swapped
in the surface order, so a structure has many valid sentences.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .logical_forms import Triple, TripleSet, linearize, split_camel_case

FIRST = ["Red", "North", "Stone", "Silver", "Green", "Lake", "Oak", "Iron", "Blue", "West",
         "Gold", "Old", "East", "White", "Black", "High"]
SECOND = ["River", "Hill", "Bridge", "Field", "Port", "Wood", "Gate", "Haven", "Ford", "Crest",
          "Vale", "Marsh", "Rock", "Bay", "Moor", "Dale"]

RELATION_TEMPLATES = {
    "locatedIn": ["{s} is located in {o}", "{s} lies in {o}", "{o} is home to {s}"],
    "foundedBy": ["{s} was founded by {o}", "{o} founded {s}", "{s} was established by {o}"],
    "leaderName": ["{s} is led by {o}", "{o} leads {s}", "the leader of {s} is {o}"],
    "partOf": ["{s} is part of {o}", "{s} belongs to {o}", "{o} includes {s}"],
    "neighbor": ["{s} borders {o}", "{s} is next to {o}", "{o} is adjacent to {s}"],
    "ownedBy": ["{s} is owned by {o}", "{o} owns {s}", "the owner of {s} is {o}"],
    "twinCity": ["{s} is twinned with {o}", "{o} has {s} as twin", "the twin of {s} is {o}"],
    "supplierOf": ["{s} supplies {o}", "{o} is supplied by {s}", "{s} delivers to {o}"],
}
DISTRACTORS = ["really", "also", "indeed", "quite", "still", "now"]
CONNECTIVE = "and"


class VocabularyTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    n_entities: int = 20
    n_relations: int = 5
    n_facts: int = 60
    min_triples: int = 1
    max_triples: int = 3
    templates_per_relation: int = 3
    noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_entities < 2 or self.n_relations < 2:
            raise VocabularyTooSmall("need at least 2 entities and 2 relations")
        if self.n_entities > len(FIRST) * len(SECOND) or self.n_relations > len(RELATION_TEMPLATES):
            raise VocabularyTooSmall("vocabulary larger than the built-in name banks")
        if not 1 <= self.min_triples <= self.max_triples <= 7:
            raise ValueError("triples-per-example range must lie within [1, 7]")
        if not 3 <= self.templates_per_relation <= 3:
            raise ValueError("the built-in bank has exactly 3 templates per relation")
        if not 0 <= self.noise_rate < 1:
            raise ValueError("noise_rate must lie in [0, 1)")


@dataclass
class ToyCorpus:
    supervised: list[tuple[str, TripleSet]]
    unlabeled: list[str]
    validation: list[tuple[str, TripleSet]]
    test: list[tuple[str, TripleSet]]
    # gold forms behind the unlabeled text; diagnostics only, never trained on
    unlabeled_forms: list[TripleSet] = field(default_factory=list, repr=False)

    def write(self, directory: str | Path) -> dict[str, Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "supervised": out / "train.tsv", "unlabeled": out / "unlabeled.txt",
            "validation": out / "valid.tsv", "test": out / "test.tsv",
        }
        for name in ("supervised", "validation", "test"):
            write_pairs(paths[name], getattr(self, name))
        paths["unlabeled"].write_text("".join(x + "\n" for x in self.unlabeled), encoding="utf-8")
        return paths


def write_pairs(path, pairs) -> None:
    Path(path).write_text("".join(f"{x}\t{linearize(z)}\n" for x, z in pairs), encoding="utf-8")


class ToyWorld:
    def __init__(self, spec: DomainSpec):
        self.spec = spec
        rng = random.Random(spec.seed)
        names = [a + b for a in FIRST for b in SECOND if a != b]
        self.entities = sorted(rng.sample(names, spec.n_entities))
        self.relations = sorted(rng.sample(sorted(RELATION_TEMPLATES), spec.n_relations))
        self.surface = {e: " ".join(split_camel_case(e)) for e in self.entities}
        possible = [(s, r, o) for s in self.entities for r in self.relations for o in self.entities if s != o]
        if spec.n_facts > len(possible):
            raise VocabularyTooSmall(f"only {len(possible)} distinct facts possible")
        self.facts = [self._triple(*f) for f in rng.sample(possible, spec.n_facts)]
        self._rng = rng
        alternatives = "|".join(re.escape(self.surface[e]) for e in self.entities)
        self._clause_patterns = []
        for r in self.relations:
            for tpl in RELATION_TEMPLATES[r][:spec.templates_per_relation]:
                pattern = re.escape(tpl).replace(r"\{s\}", f"(?P<s>{alternatives})")
                pattern = pattern.replace(r"\{o\}", f"(?P<o>{alternatives})")
                self._clause_patterns.append((re.compile(f"^{pattern}$"), r))

    def _triple(self, s: str, r: str, o: str) -> Triple:
        return Triple(self.surface.get(s) or " ".join(split_camel_case(s)),
                      " ".join(split_camel_case(r)), self.surface.get(o) or " ".join(split_camel_case(o)))

    def _relation_key(self, triple: Triple) -> str:
        for r in self.relations:
            if " ".join(split_camel_case(r)) == triple.relation:
                return r
        raise KeyError(triple.relation)

    def render(self, form: TripleSet, rng: random.Random, noise_rate: Optional[float] = None) -> str:
        noise = self.spec.noise_rate if noise_rate is None else noise_rate
        triples = list(form)  # canonical order, matching the linearization
        clauses = []
        for t in triples:
            tpl = rng.choice(RELATION_TEMPLATES[self._relation_key(t)][:self.spec.templates_per_relation])
            clause = tpl.format(s=t.subject, o=t.object)
            if noise:
                entity_words = set(t.subject.split()) | set(t.object.split())
                clause = " ".join(
                    rng.choice(DISTRACTORS) if w not in entity_words and rng.random() < noise else w
                    for w in clause.split()
                )
            clauses.append(clause)
        return f" {CONNECTIVE} ".join(clauses) + " ."

    def realizations(self, form: TripleSet) -> set[str]:
        """Every noiseless sentence for ``form`` (all clause orders and templates)."""
        per_triple = [
            [tpl.format(s=t.subject, o=t.object)
             for tpl in RELATION_TEMPLATES[self._relation_key(t)][:self.spec.templates_per_relation]]
            for t in form
        ]
        out = set()
        for order in itertools.permutations(range(len(per_triple))):
            for choice in itertools.product(*(per_triple[i] for i in order)):
                out.add(f" {CONNECTIVE} ".join(choice) + " .")
        return out

    def oracle_parse(self, text: str) -> Optional[TripleSet]:
        """Invert the templates; ``None`` when some clause matches no template."""
        body = " ".join(text.split())
        if not body.endswith(" ."):
            return None
        triples = []
        for clause in body[:-2].split(f" {CONNECTIVE} "):
            for pattern, r in self._clause_patterns:
                m = pattern.match(clause)
                if m:
                    triples.append(self._triple(m.group("s"), r, m.group("o")))
                    break
            else:
                return None
        return TripleSet(triples)

    def is_realization(self, text: str, form: TripleSet) -> bool:
        body = " ".join(text.split())
        if body.count(f" {CONNECTIVE} ") != len(form) - 1:
            return False
        return self.oracle_parse(body) == form

    def sample_structure(self, rng: random.Random) -> TripleSet:
        k = rng.randint(self.spec.min_triples, min(self.spec.max_triples, len(self.facts)))
        return TripleSet(rng.sample(self.facts, k))


def generate(spec: DomainSpec, n_supervised: int, n_unlabeled: int, n_val: int, n_test: int) -> ToyCorpus:
    sizes = (n_supervised, n_unlabeled, n_val, n_test)
    if min(sizes) < 1:
        raise ValueError("all split sizes must be >= 1")
    world = ToyWorld(spec)
    rng = random.Random(spec.seed * 1_000_003 + 17)
    needed = sum(sizes)
    seen: set[TripleSet] = set()
    structures: list[TripleSet] = []
    attempts = 0
    while len(structures) < needed:
        attempts += 1
        if attempts > 50 * needed + 1000:
            raise VocabularyTooSmall(f"could not draw {needed} distinct structures from {spec.n_facts} facts")
        form = world.sample_structure(rng)
        if form not in seen:
            seen.add(form)
            structures.append(form)

    def pairs(forms):
        return [(world.render(z, rng), z) for z in forms]

    a, b, c = n_supervised, n_supervised + n_unlabeled, n_supervised + n_unlabeled + n_val
    unlabeled_pairs = pairs(structures[a:b])
    return ToyCorpus(
        supervised=pairs(structures[:a]),
        unlabeled=[x for x, _ in unlabeled_pairs],
        validation=pairs(structures[b:c]),
        test=pairs(structures[c:]),
        unlabeled_forms=[z for _, z in unlabeled_pairs],
    )
