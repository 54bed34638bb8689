"""Symbolic terms and facts.

Atoms are plain Python values: ``str`` for symbols, ``int`` for integers,
``float`` for decimals and :class:`Text` for double-quoted strings.  Compound
terms are :class:`Compound` instances with a symbol functor and at least one
argument.  The textual form is an ordinary s-expression::

    (holdsIn (StartFn E1) (valueOf (Attackers Region1) 2))
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Union

__all__ = [
    "Compound",
    "Text",
    "Term",
    "CaseFacts",
    "ParseError",
    "parse_term",
    "parse_terms",
    "print_term",
    "substitute",
    "subterms",
    "is_symbol",
    "is_number",
    "make",
    "read_fact_file",
    "write_fact_file",
]


class ParseError(ValueError):
    """Malformed s-expression text; ``offset`` is the character index."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Text:
    """A double-quoted string atom (distinct from a symbol)."""

    value: str

    def __str__(self) -> str:
        escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


class Compound:
    """A functor applied to an ordered, non-empty tuple of argument terms."""

    __slots__ = ("functor", "args", "_hash")

    def __init__(self, functor: str, args: Iterable["Term"]):
        args = tuple(args)
        if not args:
            raise ValueError(f"compound term {functor!r} needs at least one argument")
        if not is_symbol(functor):
            raise ValueError(f"illegal functor {functor!r}")
        object.__setattr__(self, "functor", functor)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", hash((functor, args)))

    def __setattr__(self, name, value):
        raise AttributeError("Compound is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Compound) or self._hash != other._hash:
            return False
        if self.functor != other.functor or len(self.args) != len(other.args):
            return False
        # 1 == 1.0 in Python; integers and decimals are distinct atoms here.
        return all(type(a) is type(b) and a == b for a, b in zip(self.args, other.args))

    def __repr__(self) -> str:
        return f"Compound({print_term(self)})"

    def __str__(self) -> str:
        return print_term(self)

    def __reduce__(self):
        return (Compound, (self.functor, self.args))


Term = Union[str, int, float, Text, Compound]

_SYMBOL_BAD = re.compile(r'[\s()";]')
_INT_RE = re.compile(r"[+-]?\d+\Z")
_DEC_RE = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?\Z")


def is_symbol(t) -> bool:
    return (
        type(t) is str
        and t != ""
        and _SYMBOL_BAD.search(t) is None
        and _DEC_RE.match(t) is None
    )


def is_number(t) -> bool:
    return type(t) is int or type(t) is float


def make(functor: str, *args: Term) -> Compound:
    """Shorthand constructor: ``make("isa", "E1", "Battle")``."""
    return Compound(functor, args)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r'\s*(?:(\()|(\))|("(?:[^"\\]|\\.)*")|(;[^\n]*)|([^\s()";]+)|(")|(;))', re.S)


def _tokens(text: str) -> Iterator[tuple[str, object, int]]:
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            # only trailing whitespace remains
            if text[pos:].strip() == "":
                return
            raise ParseError("unreadable input", pos)
        start = m.start(m.lastindex) if m.lastindex else m.end()
        if m.group(1):
            yield "open", None, start
        elif m.group(2):
            yield "close", None, start
        elif m.group(3):
            raw = m.group(3)[1:-1]
            yield "atom", Text(re.sub(r"\\(.)", r"\1", raw)), start
        elif m.group(5):
            yield "atom", _atom(m.group(5), start), start
        elif m.group(6):
            raise ParseError("unterminated string", start)
        # group 4 is a comment; skipped
        pos = m.end()


def _atom(tok: str, offset: int) -> Term:
    if _INT_RE.match(tok):
        return int(tok)
    if _DEC_RE.match(tok):
        return float(tok)
    if not is_symbol(tok):
        raise ParseError(f"illegal atom {tok!r}", offset)
    return tok


def _read(tokens: list, i: int, text_len: int) -> tuple[Term, int]:
    if i >= len(tokens):
        raise ParseError("unexpected end of input", text_len)
    kind, value, offset = tokens[i]
    if kind == "atom":
        return value, i + 1
    if kind == "close":
        raise ParseError("unexpected ')'", offset)
    items = []
    i += 1
    while True:
        if i >= len(tokens):
            raise ParseError("unexpected end of input", text_len)
        if tokens[i][0] == "close":
            break
        item, i = _read(tokens, i, text_len)
        items.append(item)
    if not items:
        raise ParseError("empty compound", offset)
    functor = items[0]
    if not is_symbol(functor):
        raise ParseError(f"functor must be a symbol, got {print_term(functor)}", offset + 1)
    if len(items) == 1:
        raise ParseError(f"compound ({functor}) has no arguments", offset)
    return Compound(functor, items[1:]), i + 1


def parse_terms(text: str) -> list[Term]:
    """Parse every top-level term in ``text``."""
    tokens = list(_tokens(text))
    out = []
    i = 0
    while i < len(tokens):
        term, i = _read(tokens, i, len(text))
        out.append(term)
    return out


def parse_term(text: str) -> Term:
    """Parse exactly one s-expression."""
    tokens = list(_tokens(text))
    if not tokens:
        raise ParseError("empty input", len(text))
    term, i = _read(tokens, 0, len(text))
    if i != len(tokens):
        raise ParseError("trailing input after term", tokens[i][2])
    return term


# ---------------------------------------------------------------- printing

def print_term(t: Term) -> str:
    if isinstance(t, Compound):
        return "(" + t.functor + " " + " ".join(print_term(a) for a in t.args) + ")"
    if type(t) is float:
        return repr(t)
    if type(t) is int or type(t) is str:
        return str(t)
    if isinstance(t, Text):
        return str(t)
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------- traversal

def substitute(t: Term, bindings: Mapping[Term, Term]) -> Term:
    """Replace every bound subterm, recursively.  Unbound atoms are untouched."""
    if not bindings:
        return t
    return _subst(t, bindings)


def _subst(t, bindings):
    if isinstance(t, Compound):
        hit = bindings.get(t)
        if hit is not None:
            return hit
        new_args = tuple(_subst(a, bindings) for a in t.args)
        if all(x is y for x, y in zip(new_args, t.args)):
            return t
        return Compound(t.functor, new_args)
    if type(t) is str:
        return bindings.get(t, t)
    return t


def subterms(t: Term) -> Iterator[Term]:
    """Pre-order walk over ``t`` and all of its arguments."""
    yield t
    if isinstance(t, Compound):
        for a in t.args:
            yield from subterms(a)


# ---------------------------------------------------------------- cases

class CaseFacts:
    """An immutable set of ground facts with a derived entity index.

    Entities are the terms typed by an ``isa`` fact, i.e. the first argument
    of every ``(isa X Type)``, unless an explicit entity set is given.
    """

    __slots__ = ("facts", "entities")

    def __init__(self, facts: Iterable[Term], entities: Optional[Iterable[Term]] = None):
        fs = frozenset(facts)
        for f in fs:
            if not isinstance(f, Compound):
                raise ValueError(f"facts must be compound terms, got {f!r}")
        self.facts = fs
        if entities is None:
            entities = (f.args[0] for f in fs if f.functor == "isa" and len(f.args) == 2)
        self.entities = frozenset(entities)

    def __len__(self) -> int:
        return len(self.facts)

    def __iter__(self):
        return iter(self.sorted())

    def __contains__(self, fact) -> bool:
        return fact in self.facts

    def __eq__(self, other) -> bool:
        return isinstance(other, CaseFacts) and self.facts == other.facts and self.entities == other.entities

    def __hash__(self) -> int:
        return hash((self.facts, self.entities))

    def sorted(self) -> list[Compound]:
        return sorted(self.facts, key=print_term)

    def __repr__(self) -> str:
        return f"CaseFacts({len(self.facts)} facts, {len(self.entities)} entities)"


def write_fact_file(path: Union[str, Path], facts: Iterable[Term], comments: Iterable[str] = ()) -> None:
    """One fact per line, sorted by printed form, ``;`` header comments."""
    lines = [f"; {c}" for c in comments]
    lines.extend(sorted(print_term(f) for f in facts))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_fact_file(path: Union[str, Path]) -> list[Term]:
    facts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        s = line.strip()
        if not s or s.startswith(";"):
            continue
        try:
            facts.append(parse_term(s))
        except ParseError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}", exc.offset) from None
    return facts
