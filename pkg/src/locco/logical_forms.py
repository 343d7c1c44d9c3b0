"""Logical forms: lambda-calculus S-expressions and RDF triple sets.

Both shapes travel as whitespace-separated linearized text.  S-expressions
use ``<SE>`` / ``</SE>`` in place of parentheses; triple sets mark each
element with ``<S>``, ``<R>`` and ``<O>``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Union

SE_OPEN = "<SE>"
SE_CLOSE = "</SE>"
SUBJ, REL, OBJ = "<S>", "<R>", "<O>"

TEXT_TO_STRUCTURE = "text_to_structure"
STRUCTURE_TO_TEXT = "structure_to_text"
PROMPTS = {
    TEXT_TO_STRUCTURE: "Text to Graph:",
    STRUCTURE_TO_TEXT: "Graph to Text:",
}

_TAG_RE = re.compile(r"(</SE>|<SE>|<S>|<R>|<O>)")


class LogicalFormError(ValueError):
    pass


class UnbalancedDelimiters(LogicalFormError):
    pass


class EmptyExpression(LogicalFormError):
    pass


class MalformedForm(LogicalFormError):
    """Structurally invalid input not covered by a more specific error."""


class MissingTag(LogicalFormError):
    pass


class EmptySlot(LogicalFormError):
    pass


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization after isolating structural tags."""
    return _TAG_RE.sub(r" \1 ", text).split()


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class SExpr:
    """An S-expression node.  ``children`` holds atoms (str) or nested SExprs."""

    children: tuple[Union[str, "SExpr"], ...]

    def __post_init__(self):
        if not self.children:
            raise EmptyExpression("expression with no children")
        for child in self.children:
            if isinstance(child, str):
                if not child or any(c.isspace() for c in child) or child in _RESERVED:
                    raise MalformedForm(f"invalid atom {child!r}")
                if "(" in child or ")" in child:
                    raise MalformedForm(f"atom {child!r} contains a parenthesis")

    def __str__(self) -> str:
        return paren_string(self)


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        for name in ("subject", "relation", "object"):
            value = normalize_ws(getattr(self, name))
            if not value:
                raise EmptySlot(f"empty {name}")
            object.__setattr__(self, name, value)

    def linearize(self) -> str:
        return f"{SUBJ} {self.subject} {REL} {self.relation} {OBJ} {self.object}"


@dataclass(frozen=True)
class TripleSet:
    triples: frozenset[Triple]

    def __init__(self, triples: Iterable[Triple] = ()):
        object.__setattr__(self, "triples", frozenset(triples))

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(sorted(self.triples, key=Triple.linearize))


LogicalForm = Union[SExpr, TripleSet]

_RESERVED = {SE_OPEN, SE_CLOSE, SUBJ, REL, OBJ}


def parse_sexpr(text: str) -> SExpr:
    tokens = tokenize(text)
    opens, closes = tokens.count(SE_OPEN), tokens.count(SE_CLOSE)
    if opens != closes:
        raise UnbalancedDelimiters(f"{opens} {SE_OPEN} vs {closes} {SE_CLOSE}")
    if not tokens:
        raise EmptyExpression("empty input")
    if tokens[0] != SE_OPEN:
        raise MalformedForm("expression must start with " + SE_OPEN)

    stack: list[list] = []
    root = None
    for i, tok in enumerate(tokens):
        if tok == SE_OPEN:
            if root is not None:
                raise MalformedForm("more than one top-level expression")
            stack.append([])
        elif tok == SE_CLOSE:
            if not stack:
                raise UnbalancedDelimiters(f"unmatched {SE_CLOSE} at token {i}")
            node = SExpr(tuple(stack.pop()))
            if stack:
                stack[-1].append(node)
            else:
                root = node
        elif tok in _RESERVED:
            raise MalformedForm(f"triple tag {tok} inside an S-expression")
        else:
            if not stack:
                raise MalformedForm(f"atom {tok!r} outside any expression")
            stack[-1].append(tok)
    if stack or root is None:
        raise UnbalancedDelimiters("unclosed expression")
    return root


def parse_paren_sexpr(text: str) -> SExpr:
    """Parse the parenthesized notation, e.g. ``(lambda $0 e (loc:t ap0 $0))``."""
    spaced = text.replace("(", f" {SE_OPEN} ").replace(")", f" {SE_CLOSE} ")
    return parse_sexpr(spaced)


_PAREN_TRIPLE_RE = re.compile(r"\(\s*(<S>.*?)\)\s*(?=\(\s*<S>|$)", re.S)


def parse_paren_triples(text: str) -> TripleSet:
    """Parse the display notation ``(<S> a <R> b <O> c) (<S> ...)``."""
    text = text.strip()
    segments = _PAREN_TRIPLE_RE.findall(text)
    if _PAREN_TRIPLE_RE.sub("", text).strip():
        raise MalformedForm(f"not a parenthesized triple list: {text!r}")
    return parse_triples(" ".join(segments))


def parse_triples(text: str) -> TripleSet:
    tokens = tokenize(text)
    if not tokens:
        return TripleSet()
    if tokens[0] != SUBJ:
        raise MissingTag(f"expected {SUBJ} before {tokens[0]!r}")
    segments: list[list[str]] = []
    for tok in tokens:
        if tok == SUBJ:
            segments.append([])
        segments[-1].append(tok)

    triples = []
    for seg in segments:
        tags = [t for t in seg if t in _RESERVED]
        if tags != [SUBJ, REL, OBJ]:
            if any(t in (SE_OPEN, SE_CLOSE) for t in tags):
                raise MalformedForm("S-expression tag inside a triple")
            raise MissingTag(f"segment has tags {tags}, expected {[SUBJ, REL, OBJ]}")
        r, o = seg.index(REL), seg.index(OBJ)
        triples.append(Triple(" ".join(seg[1:r]), " ".join(seg[r + 1:o]), " ".join(seg[o + 1:])))
    return TripleSet(triples)


def parse_form(text: str, kind: str) -> LogicalForm:
    if kind == "triples":
        return parse_triples(text)
    if kind == "sexpr":
        return parse_sexpr(text)
    raise ValueError(f"unknown form kind {kind!r}")


def linearize(form: LogicalForm) -> str:
    if isinstance(form, TripleSet):
        return " ".join(t.linearize() for t in form)
    return _linearize_sexpr(form)


def _linearize_sexpr(node: SExpr) -> str:
    inner = " ".join(c if isinstance(c, str) else _linearize_sexpr(c) for c in node.children)
    return f"{SE_OPEN} {inner} {SE_CLOSE}"


def paren_string(node: SExpr) -> str:
    inner = " ".join(c if isinstance(c, str) else paren_string(c) for c in node.children)
    return f"({inner})"


def triple_part(triple: Triple) -> str:
    return f"({triple.linearize()})"


def part_counts(form: LogicalForm) -> Counter:
    """Multiset of parts.  A repeated subtree inside one S-expression counts once per occurrence."""
    if isinstance(form, TripleSet):
        return Counter(triple_part(t) for t in form.triples)
    counts: Counter = Counter()
    stack = [form]
    while stack:
        node = stack.pop()
        counts[paren_string(node)] += 1
        stack.extend(c for c in node.children if isinstance(c, SExpr))
    return counts


def parts(form: LogicalForm) -> set[str]:
    return set(part_counts(form))


def parse_part(part: str) -> LogicalForm:
    """Inverse of the part canonicalization: a subtree or a singleton triple set."""
    if not (part.startswith("(") and part.endswith(")")):
        raise MalformedForm(f"not a part: {part!r}")
    if part.startswith("(" + SUBJ):
        return parse_triples(part[1:-1])
    return parse_paren_sexpr(part)


_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[^A-Za-z]+")


def split_camel_case(token: str) -> list[str]:
    """Split ``AarhusAirport`` into ``['Aarhus', 'Airport']``.

    Capital runs stay together up to the last capital before a lowercase
    letter (``XMLFile`` -> ``['XML', 'File']``).  Non-letters attach to the
    preceding word so no characters are dropped or reordered.
    """
    words: list[str] = []
    for piece in _CAMEL_RE.findall(token):
        if not piece[0].isalpha() and words:
            words[-1] += piece
        elif words and words[-1] and not words[-1][-1].isalpha() and piece[0].islower():
            words[-1] += piece
        else:
            words.append(piece)
    return words


def apply_prompt(direction: str, body: str) -> str:
    try:
        prompt = PROMPTS[direction]
    except KeyError:
        raise ValueError(f"unknown direction {direction!r}") from None
    return f"{prompt} {body}"
