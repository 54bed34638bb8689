"""Quantity definitions, fluent sampling, qualitative encodings and Allen relations.

Every registered quantity is sampled for each entity in its extension at every
timepoint.  Each (quantity, entity, encoding scheme) key owns a timeline of
contiguous qualitative intervals; an interval closes and the next one opens
whenever the encoded value changes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, NamedTuple, Optional

from .terms import Compound, Term, is_number, make, parse_terms


class Timepoint(NamedTuple):
    """(turn, event index within the turn); tuples order lexicographically."""

    turn: int
    seq: int

    def __str__(self) -> str:
        return f"{self.turn}.{self.seq}"


class RecorderError(Exception):
    pass


# ------------------------------------------------------------------ encodings

DERIVATIVE_SIGN = "DerivativeSign"
MAGNITUDE_SIGN = "MagnitudeSign"
SCHEMES = (DERIVATIVE_SIGN, MAGNITUDE_SIGN)

INCREASING, CONSTANT, DECREASING = "Increasing", "Constant", "Decreasing"
NONE, SOME = "None", "Some"


def encode_derivative_sign(prev: float, curr: float) -> str:
    if curr > prev:
        return INCREASING
    if curr < prev:
        return DECREASING
    return CONSTANT


def encode_magnitude_sign(curr: float) -> str:
    if curr < 0:
        raise RecorderError(f"negative cardinality {curr}")
    return NONE if curr == 0 else SOME


# Davidsonian predicate for each encoding value
CHANGE_PREDICATE = {
    INCREASING: "increasingIn",
    CONSTANT: "constantIn",
    DECREASING: "monotonicallyNonIncreasingIn",
    SOME: "presentIn",
    NONE: "absentIn",
}


def numeric_value(v: Term) -> float:
    """The number inside a value term: ``3`` or a typed wrapper ``(UnitCount 3)``."""
    if is_number(v):
        return v
    if isinstance(v, Compound) and len(v.args) == 1 and is_number(v.args[0]):
        return v.args[0]
    raise RecorderError(f"not a numeric value term: {v}")


# ------------------------------------------------------------------ Allen algebra

class AllenRelation(str, Enum):
    precedes = "precedes"
    precededBy = "precededBy"
    meets = "meets"
    metBy = "metBy"
    overlaps = "overlaps"
    overlappedBy = "overlappedBy"
    starts = "starts"
    startedBy = "startedBy"
    during = "during"
    contains = "contains"
    finishes = "finishes"
    finishedBy = "finishedBy"
    equals = "equals"

    @property
    def converse(self) -> "AllenRelation":
        return _CONVERSE[self]

    @property
    def predicate(self) -> str:
        return f"aia-{self.value}"


_CONVERSE = {
    AllenRelation.precedes: AllenRelation.precededBy,
    AllenRelation.meets: AllenRelation.metBy,
    AllenRelation.overlaps: AllenRelation.overlappedBy,
    AllenRelation.starts: AllenRelation.startedBy,
    AllenRelation.during: AllenRelation.contains,
    AllenRelation.finishes: AllenRelation.finishedBy,
    AllenRelation.equals: AllenRelation.equals,
}
_CONVERSE.update({v: k for k, v in list(_CONVERSE.items())})


def allen_relation(i1: tuple, i2: tuple) -> AllenRelation:
    """Relation of interval ``i1`` with respect to ``i2``; both ``(start, end)``."""
    s1, e1 = i1
    s2, e2 = i2
    if not s1 < e1:
        raise RecorderError(f"improper interval {i1}")
    if not s2 < e2:
        raise RecorderError(f"improper interval {i2}")
    if e1 < s2:
        return AllenRelation.precedes
    if e2 < s1:
        return AllenRelation.precededBy
    if e1 == s2:
        return AllenRelation.meets
    if e2 == s1:
        return AllenRelation.metBy
    if s1 == s2:
        if e1 == e2:
            return AllenRelation.equals
        return AllenRelation.starts if e1 < e2 else AllenRelation.startedBy
    if e1 == e2:
        return AllenRelation.finishes if s1 > s2 else AllenRelation.finishedBy
    if s1 < s2:
        return AllenRelation.overlaps if e1 < e2 else AllenRelation.contains
    return AllenRelation.during if e1 < e2 else AllenRelation.overlappedBy


def temporally_local(i1: tuple, i2: tuple) -> bool:
    return allen_relation(i1, i2) not in (AllenRelation.precedes, AllenRelation.precededBy)


# ------------------------------------------------------------------ intervals

@dataclass
class QualInterval:
    id: str
    quantity: str
    entity: str
    scheme: str
    value: str
    start: Timepoint
    end: Optional[Timepoint] = None  # None while open

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.quantity, self.entity, self.scheme)

    @property
    def is_open(self) -> bool:
        return self.end is None

    def span(self, now: Optional[Timepoint] = None) -> tuple[Timepoint, Timepoint]:
        """(start, end) with an open end resolved to ``now``."""
        if self.end is not None:
            return (self.start, self.end)
        if now is None:
            raise RecorderError(f"interval {self.id} is open and no 'now' was given")
        return (self.start, now)


@dataclass(frozen=True)
class EncodingChange:
    quantity: str
    entity: str
    scheme: str
    old: Optional[str]
    new: Optional[str]  # None: the entity left the quantity's extension
    time: Timepoint
    closed: Optional[QualInterval]
    opened: Optional[QualInterval]


# ------------------------------------------------------------------ quantities

Selector = Callable[[object, object], Iterable[str]]
ValueFn = Callable[[object, object, str], Term]


@dataclass
class QuantityDef:
    """A declaratively recorded quantity.

    ``selector(state, scene)`` yields the entity extension and
    ``value_fn(state, scene, entity)`` the typed numeric value term.
    ``functor`` names the quantity inside case facts, e.g. ``(Attackers R1)``.
    """

    name: str
    selector: Selector
    value_fn: ValueFn
    encodings: tuple[str, ...]
    functor: Optional[str] = None
    entity_type: str = "Thing"

    def __post_init__(self):
        if not self.encodings:
            raise RecorderError(f"quantity {self.name} needs at least one encoding")
        for e in self.encodings:
            if e not in SCHEMES:
                raise RecorderError(f"unknown encoding scheme {e!r}")
        if self.functor is None:
            self.functor = self.name

    def quantity_term(self, entity: str) -> Compound:
        return make(self.functor, entity)


@dataclass
class _EventRecord:
    participants: set = field(default_factory=set)
    open: bool = True


class FluentStore:
    """Fluents, qualitative intervals and event participants.

    ``fluents[(quantity, entity)]`` holds ``(timepoint, value)`` pairs,
    newest first.
    """

    def __init__(self):
        self.quantities: dict[str, QuantityDef] = {}
        self.fluents: dict[tuple[str, str], deque] = {}
        self.intervals: dict[tuple[str, str, str], list[QualInterval]] = {}
        self.events: dict[str, _EventRecord] = {}
        self.last_time: Optional[Timepoint] = None
        self._extension: dict[str, set] = {}
        self._next_interval = 1

    # -- registration
    def register_quantity(self, qdef: QuantityDef) -> None:
        if qdef.name in self.quantities:
            raise RecorderError(f"quantity {qdef.name!r} already registered")
        self.quantities[qdef.name] = qdef
        self._extension[qdef.name] = set()

    # -- sampling
    def sample_all(self, state, t: Timepoint, scene=None) -> list[EncodingChange]:
        if self.last_time is not None and not t > self.last_time:
            raise RecorderError(f"timepoint {t} is not after {self.last_time}")
        self.last_time = t
        changes: list[EncodingChange] = []
        for qdef in self.quantities.values():
            current = set()
            for entity in qdef.selector(state, scene):
                current.add(entity)
                value = qdef.value_fn(state, scene, entity)
                self._record(qdef, entity, value, t, changes)
            for entity in sorted(self._extension[qdef.name] - current):
                self._retire(qdef, entity, t, changes)
            self._extension[qdef.name] = current
        return changes

    def _record(self, qdef, entity, value, t, changes) -> None:
        series = self.fluents.setdefault((qdef.name, entity), deque())
        prev = series[0][1] if series else None
        series.appendleft((t, value))
        x = numeric_value(value)
        for scheme in qdef.encodings:
            key = (qdef.name, entity, scheme)
            timeline = self.intervals.setdefault(key, [])
            current = timeline[-1] if timeline and timeline[-1].is_open else None
            if scheme == MAGNITUDE_SIGN:
                enc = encode_magnitude_sign(x)
            elif current is None or prev is None:
                enc = CONSTANT
            else:
                px = numeric_value(prev)
                # an unchanged value continues the running trend
                enc = current.value if px == x else encode_derivative_sign(px, x)
            if current is not None and current.value == enc:
                continue
            if current is not None:
                current.end = t
            opened = self._open(qdef.name, entity, scheme, enc, t)
            timeline.append(opened)
            if current is not None:
                changes.append(EncodingChange(qdef.name, entity, scheme, current.value, enc, t, current, opened))

    def _retire(self, qdef, entity, t, changes) -> None:
        for scheme in qdef.encodings:
            timeline = self.intervals.get((qdef.name, entity, scheme))
            if timeline and timeline[-1].is_open:
                iv = timeline[-1]
                iv.end = t
                changes.append(EncodingChange(qdef.name, entity, scheme, iv.value, None, t, iv, None))

    def _open(self, quantity, entity, scheme, value, t) -> QualInterval:
        iv = QualInterval(f"I{self._next_interval}", quantity, entity, scheme, value, t)
        self._next_interval += 1
        return iv

    # -- queries
    def value_at(self, quantity: str, entity: str, t: Timepoint) -> Optional[Term]:
        """Latest sampled value at or before ``t``."""
        for when, value in self.fluents.get((quantity, entity), ()):
            if when <= t:
                return value
        return None

    def first_value_between(self, quantity: str, entity: str, start: Timepoint, end: Timepoint) -> Optional[Term]:
        found = None
        for when, value in self.fluents.get((quantity, entity), ()):
            if when < start:
                break
            if when <= end:
                found = value
        return found

    def timeline(self, quantity: str, entity: str, scheme: str) -> list[QualInterval]:
        return self.intervals.get((quantity, entity, scheme), [])

    def open_interval(self, quantity: str, entity: str, scheme: str) -> Optional[QualInterval]:
        tl = self.intervals.get((quantity, entity, scheme))
        if tl and tl[-1].is_open:
            return tl[-1]
        return None

    def quantities_for(self, entity: str) -> list[QuantityDef]:
        """Registered quantities that have ever been sampled for ``entity``."""
        return [q for q in self.quantities.values() if (q.name, entity) in self.fluents]

    # -- events
    def open_event(self, event_id: str) -> None:
        self.events[event_id] = _EventRecord()

    def close_event(self, event_id: str) -> None:
        self._event(event_id).open = False

    def record_participant(self, event_id: str, participant: str) -> None:
        rec = self._event(event_id)
        if not rec.open:
            raise RecorderError(f"event {event_id} is closed")
        rec.participants.add(participant)

    def participants(self, event_id: str) -> set:
        return set(self._event(event_id).participants)

    def participant_facts(self, event_id: str) -> list[Compound]:
        return [make("eventParticipant", event_id, p) for p in sorted(self._event(event_id).participants)]

    def _event(self, event_id: str) -> _EventRecord:
        try:
            return self.events[event_id]
        except KeyError:
            raise RecorderError(f"unknown event {event_id!r}") from None


# ------------------------------------------------------------------ definitions file

def load_quantity_definitions(text: str, registry: dict[str, tuple[Selector, ValueFn]]) -> list[QuantityDef]:
    """Build definitions from s-expressions of the form::

        (quantityName BattleOpposingUnitCardinality (Attackers CityFootprint))
        (quantityEncodingSchemeFor BattleOpposingUnitCardinality DerivativeSign)

    ``registry`` maps each quantity name to its (selector, value function)
    implementation.
    """
    names: dict[str, tuple[str, str]] = {}
    schemes: dict[str, list[str]] = {}
    for t in parse_terms(text):
        if not isinstance(t, Compound):
            raise RecorderError(f"unexpected atom {t!r} in quantity definitions")
        if t.functor == "quantityName":
            qname, spec = t.args
            if not isinstance(spec, Compound) or len(spec.args) != 1:
                raise RecorderError(f"bad quantity spec in {t}")
            names[qname] = (spec.functor, spec.args[0])
        elif t.functor == "quantityEncodingSchemeFor":
            qname, scheme = t.args
            schemes.setdefault(qname, []).append(scheme.removesuffix("Encoding"))
        elif t.functor == "quantityEncodingForRegion":
            continue
        else:
            raise RecorderError(f"unknown definition form {t.functor}")
    out = []
    for qname, (functor, etype) in names.items():
        if qname not in registry:
            raise RecorderError(f"no implementation registered for quantity {qname}")
        sel, fn = registry[qname]
        out.append(QuantityDef(qname, sel, fn, tuple(schemes.get(qname, ())), functor, etype))
    return out


def load_region_encodings(text: str) -> dict[str, tuple[tuple[str, str], ...]]:
    """Collect ``(quantityEncodingForRegion Q Scheme FootprintKind)`` statements."""
    out: dict[str, list] = {}
    for t in parse_terms(text):
        if isinstance(t, Compound) and t.functor == "quantityEncodingForRegion":
            qname, scheme, kind = t.args
            out.setdefault(kind, []).append((qname, scheme.removesuffix("Encoding")))
    return {k: tuple(v) for k, v in out.items()}
