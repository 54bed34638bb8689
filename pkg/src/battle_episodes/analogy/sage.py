"""Incremental analogical generalization.

A gpool holds generalizations and outlier cases for one outcome label.  A new
case is matched against the pool; when the best match is close enough the
case is merged into it, otherwise it waits as an outlier.  Merging replaces
corresponding entities and value numbers by generalized entities
``(GEFn i)``; every numeric GenEnt keeps the history of values it absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..terms import CaseFacts, Compound, is_number, make, parse_terms, print_term, substitute
from .macfac import Retrieval, content_vector, retrieve
from .sme import VALUE_MARK, VALUE_SLOT, Mapping, analyze_fact, genent, is_genent, value_leaf

SUCCESS_POOL = "DefenseSuccess"
FAILURE_POOL = "DefenseFailure"
POOL_FOR_OUTCOME = {"Success": SUCCESS_POOL, "Failure": FAILURE_POOL}


class SageError(Exception):
    pass


# ------------------------------------------------------------------ statistics

@dataclass
class GenEntStats:
    """Running statistics of one numeric GenEnt (Welford updates)."""

    values: list = field(default_factory=list)
    cardinality: int = 0
    minimum: float = math.inf
    maximum: float = -math.inf
    mean: float = 0.0
    sse: float = 0.0

    def add(self, x) -> None:
        if not is_number(x):
            raise SageError(f"GenEnt values must be numbers, got {x!r}")
        self.values.append(x)
        self.cardinality += 1
        delta = x - self.mean
        self.mean += delta / self.cardinality
        self.sse += delta * (x - self.mean)
        self.minimum = min(self.minimum, x)
        self.maximum = max(self.maximum, x)

    @classmethod
    def from_values(cls, values) -> "GenEntStats":
        st = cls()
        for v in values:
            st.add(v)
        return st

    @property
    def variance(self) -> float:
        return self.sse / self.cardinality if self.cardinality else 0.0


# ------------------------------------------------------------------ value slots

def map_values(t, fn):
    """Rewrite every value-slot number of ``t`` through ``fn``, in traversal order."""
    if not isinstance(t, Compound):
        return t
    slot = VALUE_SLOT.get(t.functor)
    args = []
    for i, a in enumerate(t.args):
        leaf = value_leaf(a) if i == slot else None
        if leaf is None:
            args.append(map_values(a, fn))
        elif leaf[0] is None:
            args.append(fn(leaf[1]))
        else:
            args.append(make(leaf[0], fn(leaf[1])))
    return Compound(t.functor, tuple(args))


def skeleton(t):
    return map_values(t, lambda _v: VALUE_MARK)


# ------------------------------------------------------------------ generalizations

class Generalization:
    def __init__(self, gid: str):
        self.id = gid
        self.case_count = 0
        self.facts: dict[Compound, int] = {}
        self.stats: dict[int, GenEntStats] = {}
        self.entity_genents: set[int] = set()
        self.next_index = 0
        self._skeletons: dict[Compound, list[Compound]] = {}
        self._views: dict[float, CaseFacts] = {}

    def fresh(self) -> int:
        i = self.next_index
        self.next_index += 1
        return i

    def frequency(self, fact) -> float:
        return self.facts.get(fact, 0) / self.case_count if self.case_count else 0.0

    def _add_fact(self, fact: Compound, count: int = 1) -> None:
        self.facts[fact] = count
        self._skeletons.setdefault(skeleton(fact), []).append(fact)

    def view(self, cutoff: float) -> CaseFacts:
        """Facts at or above the probability cutoff, as a matchable case."""
        v = self._views.get(cutoff)
        if v is None:
            kept = [f for f, c in self.facts.items() if c / self.case_count >= cutoff]
            v = CaseFacts(kept, entities=(genent(i) for i in self.entity_genents))
            self._views[cutoff] = v
        return v

    def _touch(self) -> None:
        self._views.clear()

    def value_genents(self, fact) -> list[int]:
        info = analyze_fact(fact, ())
        return [v.args[0] for v in info.values if is_genent(v)]

    def __repr__(self) -> str:
        return f"Generalization({self.id}, {self.case_count} cases, {len(self.facts)} facts)"


def genent_stats(g: Generalization, index: int) -> GenEntStats:
    if index in g.entity_genents:
        raise SageError(f"(GEFn {index}) of {g.id} stands for an entity, not a number")
    st = g.stats.get(index)
    if st is None:
        raise SageError(f"{g.id} has no numeric GenEnt {index}")
    return st


def _numbers(fact, entities) -> tuple:
    return analyze_fact(fact, entities).values


def lift_case(gid: str, case: CaseFacts) -> tuple[Generalization, dict, dict]:
    """A one-case generalization; returns it with the fact and entity liftings."""
    g = Generalization(gid)
    g.case_count = 1
    ents = {}
    for e in sorted(case.entities, key=print_term):
        i = g.fresh()
        g.entity_genents.add(i)
        ents[e] = genent(i)
    fact_map = {}
    for f in case.sorted():
        lifted = map_values(substitute(f, ents), lambda v: _new_value(g, v))
        g._add_fact(lifted)
        fact_map[f] = lifted
    return g, fact_map, ents


def _new_value(g: Generalization, v) -> Compound:
    i = g.fresh()
    g.stats[i] = GenEntStats.from_values([v])
    return genent(i)


def merge_into_generalization(m: Mapping, g: Generalization, case: CaseFacts) -> Generalization:
    """Fold ``case`` into ``g`` along mapping ``m`` (base ``g``'s view, target ``case``)."""
    g.case_count += 1
    seen = set()
    for gf, cf in m.pairs:
        if gf not in g.facts:
            raise SageError(f"mapped fact {print_term(gf)} is not in {g.id}")
        g.facts[gf] += 1
        seen.add(gf)
        for i, v in zip(g.value_genents(gf), _numbers(cf, case.entities)):
            g.stats[i].add(v)
    back = {t: b for b, t in m.entities.items()}
    matched = {t for _, t in m.pairs}
    for cf in case.sorted():
        if cf in matched:
            continue
        for e in sorted(_entities_of(cf, case.entities) - back.keys(), key=print_term):
            i = g.fresh()
            g.entity_genents.add(i)
            back[e] = genent(i)
        translated = substitute(cf, back)
        twin = next((f for f in g._skeletons.get(skeleton(translated), ()) if f not in seen), None)
        if twin is not None:
            g.facts[twin] += 1
            seen.add(twin)
            for i, v in zip(g.value_genents(twin), _numbers(cf, case.entities)):
                g.stats[i].add(v)
        else:
            lifted = map_values(translated, lambda v: _new_value(g, v))
            g._add_fact(lifted)
            seen.add(lifted)
    g._touch()
    return g


def _entities_of(fact, entities) -> set:
    return set(analyze_fact(fact, entities).ents)


# ------------------------------------------------------------------ pools

@dataclass
class PoolItem:
    name: str
    facts: CaseFacts
    outcome: Optional[str] = None


class Gpool:
    def __init__(self, label: str, assimilation_threshold: float = 0.8, probability_cutoff: float = 0.2):
        if label not in (SUCCESS_POOL, FAILURE_POOL):
            raise SageError(f"unknown gpool label {label!r}")
        for name, x in (("assimilation threshold", assimilation_threshold),
                        ("probability cutoff", probability_cutoff)):
            if not 0.0 <= x <= 1.0:
                raise SageError(f"{name} {x} outside [0, 1]")
        self.label = label
        self.assimilation_threshold = assimilation_threshold
        self.probability_cutoff = probability_cutoff
        self.generalizations: list[Generalization] = []
        self.outliers: list[PoolItem] = []
        self._next_gen = 1
        self._vectors: dict[str, dict] = {}
        self.version = 0  # bumped on every change

    def library(self) -> list[tuple[str, CaseFacts, dict]]:
        out = []
        for g in self.generalizations:
            out.append((g.id, g.view(self.probability_cutoff), self._vector(g.id, g)))
        for o in self.outliers:
            out.append((o.name, o.facts, self._vector(o.name, o)))
        return out

    def _vector(self, key, item) -> dict:
        v = self._vectors.get(key)
        if v is None:
            facts = item.view(self.probability_cutoff) if isinstance(item, Generalization) else item.facts
            v = self._vectors[key] = content_vector(facts)
        return v

    def new_generalization_id(self) -> str:
        gid = f"G{self._next_gen}"
        self._next_gen += 1
        return gid

    def find(self, item_id: str) -> Union[Generalization, PoolItem, None]:
        for g in self.generalizations:
            if g.id == item_id:
                return g
        for o in self.outliers:
            if o.name == item_id:
                return o
        return None

    @property
    def case_count(self) -> int:
        return sum(g.case_count for g in self.generalizations) + len(self.outliers)

    def __repr__(self) -> str:
        return f"Gpool({self.label}, {len(self.generalizations)} generalizations, {len(self.outliers)} outliers)"


def sage_add(pool: Gpool, case, name: Optional[str] = None, outcome: Optional[str] = None) -> Optional[Retrieval]:
    """Add a labelled case to ``pool``; returns the retrieval that decided its fate.

    ``case`` is an episode case (with ``name``, ``facts`` and ``outcome``) or
    bare :class:`CaseFacts` with an explicit name.
    """
    if isinstance(case, CaseFacts):
        item = PoolItem(name or f"case{pool.case_count + 1}", case, outcome)
    else:
        item = PoolItem(name or case.name, case.facts, case.outcome)
    if item.outcome is not None and POOL_FOR_OUTCOME.get(item.outcome) != pool.label:
        raise SageError(f"a {item.outcome} case cannot join the {pool.label} pool")
    r = retrieve(item.facts, pool)
    pool.version += 1
    if r is None or r.score < pool.assimilation_threshold:
        pool.outliers.append(item)
        return r
    target = pool.find(r.item_id)
    if isinstance(target, Generalization):
        merge_into_generalization(r.mapping, target, item.facts)
        pool._vectors.pop(target.id, None)
        return r
    g, fact_map, ents = lift_case(pool.new_generalization_id(), target.facts)
    lifted = Mapping(
        g.view(0.0), r.mapping.target,
        [(fact_map[b], t) for b, t in r.mapping.pairs],
        {ents[e]: f for e, f in r.mapping.entities.items()},
        {}, r.mapping.raw_score, r.mapping.normalized_score,
    )
    merge_into_generalization(lifted, g, item.facts)
    pool.outliers.remove(target)
    pool._vectors.pop(target.name, None)
    pool.generalizations.append(g)
    return r


# ------------------------------------------------------------------ serialization

POOL_FILE = "pool.facts"


def _num(x) -> str:
    return print_term(x)


def save_gpool(pool: Gpool, directory: Union[str, Path]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = [
        f"(gpoolLabel {pool.label})",
        f"(assimilationThreshold {_num(pool.assimilation_threshold)})",
        f"(probabilityCutoff {_num(pool.probability_cutoff)})",
        f"(nextGeneralization {pool._next_gen})",
    ]
    for g in pool.generalizations:
        fname = f"{g.id}.gen"
        _save_generalization(g, d / fname)
        lines.append(f'(generalizationFile "{fname}")')
    for o in pool.outliers:
        fname = f"{o.name}.case"
        (d / fname).write_text("".join(print_term(f) + "\n" for f in o.facts.sorted()), encoding="utf-8")
        outcome = o.outcome or "Unknown"
        lines.append(f'(outlierFile "{fname}" "{o.name}" {outcome})')
    (d / POOL_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _save_generalization(g: Generalization, path: Path) -> None:
    lines = [f"; generalization {g.id}", f"(caseCount {g.case_count})", f"(nextGenEnt {g.next_index})"]
    for i in sorted(g.entity_genents):
        lines.append(f"(entityGenEnt {i})")
    for fact in sorted(g.facts, key=print_term):
        lines.append(f"(factCount {g.facts[fact]} {print_term(fact)})")
    for i in sorted(g.stats):
        st = g.stats[i]
        lines.append(
            f"; GEFn {i}: n={st.cardinality} min={_num(st.minimum)} max={_num(st.maximum)} "
            f"mean={_num(st.mean)} sse={_num(st.sse)}"
        )
        lines.append(f"(genEntHistory {i} {' '.join(_num(v) for v in st.values)})")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_generalization(gid: str, path: Path) -> Generalization:
    g = Generalization(gid)
    for t in parse_terms(path.read_text(encoding="utf-8")):
        kind, args = t.functor, t.args
        if kind == "caseCount":
            g.case_count = args[0]
        elif kind == "nextGenEnt":
            g.next_index = args[0]
        elif kind == "entityGenEnt":
            g.entity_genents.add(args[0])
        elif kind == "factCount":
            g._add_fact(args[1], args[0])
        elif kind == "genEntHistory":
            g.stats[args[0]] = GenEntStats.from_values(args[1:])
        else:
            raise SageError(f"unknown statement {kind} in {path}")
    return g


def load_gpool(directory: Union[str, Path]) -> Gpool:
    d = Path(directory)
    stmts = parse_terms((d / POOL_FILE).read_text(encoding="utf-8"))
    head = {t.functor: t.args for t in stmts if t.functor not in ("generalizationFile", "outlierFile")}
    pool = Gpool(head["gpoolLabel"][0], head["assimilationThreshold"][0], head["probabilityCutoff"][0])
    pool._next_gen = head["nextGeneralization"][0]
    for t in stmts:
        if t.functor == "generalizationFile":
            fname = t.args[0].value
            pool.generalizations.append(_load_generalization(fname.removesuffix(".gen"), d / fname))
        elif t.functor == "outlierFile":
            fname, name, outcome = t.args
            facts = parse_terms((d / fname.value).read_text(encoding="utf-8"))
            pool.outliers.append(PoolItem(name.value, CaseFacts(facts), None if outcome == "Unknown" else outcome))
    return pool
