"""Structure mapping between two cases.

Facts align when they have the same *shape*: identical functors and
constants, entities in the same argument positions, and numeric values in
the same value slots.  An aligned pair commits its entity correspondences;
a mapping is a set of aligned pairs whose commitments are one-to-one.  Pairs
are merged greedily by structural score, restarting from a few strong seeds
and keeping the best result.

Numbers sitting in the value slot of ``(valueOf Q v)``, bare or inside a
one-argument wrapper such as ``(UnitCount 3)``, are attribute values: they
may differ between aligned facts and never constrain the mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

from ..terms import CaseFacts, Compound, Term, is_number, make, print_term, substitute

ORDER_WEIGHT = 1.25
GENENT = "GEFn"
VALUE_SLOT = {"valueOf": 1}  # functor -> index of its value argument
VALUE_MARK = "?value"

_ENTITY = "\x00E"


def genent(i: int) -> Compound:
    return make(GENENT, i)


def is_genent(t) -> bool:
    return isinstance(t, Compound) and t.functor == GENENT and len(t.args) == 1


def _is_value_atom(t) -> bool:
    return is_number(t) or is_genent(t)


def value_leaf(t) -> Optional[tuple[Optional[str], Term]]:
    """(wrapper functor or None, number) when ``t`` can fill a value slot."""
    if _is_value_atom(t):
        return (None, t)
    if isinstance(t, Compound) and len(t.args) == 1 and _is_value_atom(t.args[0]):
        return (t.functor, t.args[0])
    return None


@dataclass(frozen=True)
class FactInfo:
    fact: Compound
    index: int                       # position in the case's sorted fact order
    shape: tuple
    ents: tuple                      # entity leaves, in traversal order
    values: tuple                    # value atoms, in traversal order
    exprs: tuple                     # value-abstracted compound subterms
    weight: float


@dataclass(frozen=True)
class Analysis:
    infos: tuple
    by_shape: dict
    self_score: float


def _walk(t, entities, depth, ents, values, exprs):
    """Returns (shape, skeleton) of ``t`` and fills the leaf/expression lists."""
    if t in entities:
        ents.append(t)
        return _ENTITY, t
    if not isinstance(t, Compound):
        return ("C", type(t).__name__, t), t
    slot = VALUE_SLOT.get(t.functor)
    shapes = [t.functor]
    skel = []
    for i, a in enumerate(t.args):
        leaf = value_leaf(a) if i == slot else None
        if leaf is not None:
            values.append(leaf[1])
            shapes.append(("V", leaf[0]))
            skel.append(VALUE_MARK if leaf[0] is None else make(leaf[0], VALUE_MARK))
        else:
            s, k = _walk(a, entities, depth + 1, ents, values, exprs)
            shapes.append(s)
            skel.append(k)
    sk = Compound(t.functor, tuple(skel))
    exprs.append((sk, depth))
    return tuple(shapes), sk


def analyze_fact(fact: Compound, entities, index: int = 0) -> FactInfo:
    ents, values, exprs = [], [], []
    shape, _ = _walk(fact, entities, 0, ents, values, exprs)
    weight = sum(ORDER_WEIGHT ** d for _, d in exprs)
    return FactInfo(fact, index, shape, tuple(ents), tuple(values), tuple(e for e, _ in exprs), weight)


@lru_cache(maxsize=8192)
def analyze(case: CaseFacts) -> Analysis:
    infos = tuple(analyze_fact(f, case.entities, i) for i, f in enumerate(case.sorted()))
    by_shape: dict[tuple, list] = {}
    for info in infos:
        by_shape.setdefault(info.shape, []).append(info)
    return Analysis(infos, by_shape, sum(i.weight for i in infos))


def self_score(case: CaseFacts) -> float:
    return analyze(case).self_score


# ------------------------------------------------------------------ match hypotheses

@dataclass(frozen=True)
class _Hyp:
    base: FactInfo
    target: FactInfo
    pairs: tuple        # distinct (base entity, target entity) commitments
    identical: bool


def _hypotheses(a: Analysis, b: Analysis) -> list[_Hyp]:
    out = []
    for shape, base_infos in a.by_shape.items():
        targets = b.by_shape.get(shape)
        if not targets:
            continue
        for bi in base_infos:
            for ti in targets:
                fwd, bwd = {}, {}
                ok = True
                for e, f in zip(bi.ents, ti.ents):
                    if fwd.setdefault(e, f) != f or bwd.setdefault(f, e) != e:
                        ok = False
                        break
                if ok:
                    out.append(_Hyp(bi, ti, tuple(fwd.items()), bi.fact == ti.fact))
    return out


def _rank(hyps: list[_Hyp]) -> list[int]:
    """Order hypotheses by their own weight plus support for their commitments.

    A commitment backed by many facts that have few alternative partners is
    more likely to belong to the best global mapping.
    """
    fanout: dict[int, int] = {}
    for h in hyps:
        fanout[h.base.index] = fanout.get(h.base.index, 0) + 1
    support: dict[tuple, float] = {}
    for h in hyps:
        share = h.base.weight / fanout[h.base.index]
        for p in h.pairs:
            support[p] = support.get(p, 0.0) + share
    keyed = []
    for k, h in enumerate(hyps):
        s = h.base.weight + sum(support[p] for p in h.pairs)
        keyed.append((-s, not h.identical, h.base.index, h.target.index, k))
    keyed.sort()
    return [k for *_, k in keyed]


def _greedy(hyps: list[_Hyp], order: list[int]) -> tuple[float, list[int], dict]:
    fwd: dict = {}
    bwd: dict = {}
    used_b: set = set()
    used_t: set = set()
    chosen = []
    score = 0.0
    for k in order:
        h = hyps[k]
        if h.base.index in used_b or h.target.index in used_t:
            continue
        if any(fwd.get(e, f) != f or bwd.get(f, e) != e for e, f in h.pairs):
            continue
        for e, f in h.pairs:
            fwd[e] = f
            bwd[f] = e
        used_b.add(h.base.index)
        used_t.add(h.target.index)
        chosen.append(k)
        score += h.base.weight
    return score, chosen, fwd


def _seed_count(n: int) -> int:
    if n <= 300:
        return 12
    if n <= 3000:
        return 4
    return 1


# ------------------------------------------------------------------ mappings

@dataclass
class Mapping:
    base: CaseFacts
    target: CaseFacts
    pairs: list                         # aligned (base fact, target fact)
    entities: dict                      # base entity -> target entity
    expressions: dict                   # base expression -> target expression
    raw_score: float
    normalized_score: float
    candidate_inferences: frozenset = field(default_factory=frozenset)

    def target_fact(self, base_fact) -> Optional[Compound]:
        return self._forward.get(base_fact)

    def base_fact(self, target_fact) -> Optional[Compound]:
        return self._backward.get(target_fact)

    @cached_property
    def _forward(self) -> dict:
        return dict(self.pairs)

    @cached_property
    def _backward(self) -> dict:
        return {t: b for b, t in self.pairs}

    def __repr__(self) -> str:
        return (f"Mapping({len(self.pairs)} pairs, {len(self.entities)} entities, "
                f"score={self.normalized_score:.3f}, {len(self.candidate_inferences)} inferences)")


def sme_map(base: CaseFacts, target: CaseFacts, seeds: Optional[int] = None) -> Mapping:
    a, b = analyze(base), analyze(target)
    hyps = _hypotheses(a, b)
    best = (0.0, [], {})
    if hyps:
        order = _rank(hyps)
        best = _greedy(hyps, order)
        n_seeds = _seed_count(len(hyps)) if seeds is None else seeds
        tried = {order[0]}
        for k in order:
            if len(tried) > n_seeds:
                break
            if k in tried:
                continue
            tried.add(k)
            result = _greedy(hyps, [k] + order)
            if result[0] > best[0] + 1e-12:
                best = result
    raw, chosen, ents = best
    return _build(base, target, a, [hyps[k] for k in chosen], ents, raw)


def _build(base, target, a: Analysis, chosen: list[_Hyp], ents: dict, raw: float) -> Mapping:
    pairs = sorted(((h.base.fact, h.target.fact) for h in chosen), key=lambda p: print_term(p[0]))
    exprs = {}
    for h in chosen:
        for x, y in zip(h.base.exprs, h.target.exprs):
            exprs[x] = y
    denom = max(a.self_score, analyze(target).self_score)
    norm = raw / denom if denom > 0 else 0.0
    matched = {h.base.index for h in chosen}
    inferences = frozenset(
        substitute(info.fact, ents) for info in a.infos
        if info.index not in matched and all(e in ents for e in info.ents)
    )
    return Mapping(base, target, pairs, ents, exprs, raw, min(norm, 1.0), inferences)


def mapping_score(base: CaseFacts, target: CaseFacts, pairs) -> float:
    """Raw structural score of an explicit set of aligned fact pairs."""
    ent = base.entities
    return sum(analyze_fact(b, ent).weight for b, _ in pairs)
