"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import itertools
import random
from math import fsum

from battle_episodes.terms import Compound, Text, make

# ------------------------------------------------------------------ Allen relations

# each relation written straight from its endpoint definition
ALLEN_DEFINITIONS = {
    "precedes": lambda s1, e1, s2, e2: e1 < s2,
    "precededBy": lambda s1, e1, s2, e2: e2 < s1,
    "meets": lambda s1, e1, s2, e2: e1 == s2,
    "metBy": lambda s1, e1, s2, e2: e2 == s1,
    "overlaps": lambda s1, e1, s2, e2: s1 < s2 < e1 < e2,
    "overlappedBy": lambda s1, e1, s2, e2: s2 < s1 < e2 < e1,
    "starts": lambda s1, e1, s2, e2: s1 == s2 and e1 < e2,
    "startedBy": lambda s1, e1, s2, e2: s1 == s2 and e2 < e1,
    "during": lambda s1, e1, s2, e2: s2 < s1 and e1 < e2,
    "contains": lambda s1, e1, s2, e2: s1 < s2 and e2 < e1,
    "finishes": lambda s1, e1, s2, e2: e1 == e2 and s2 < s1,
    "finishedBy": lambda s1, e1, s2, e2: e1 == e2 and s1 < s2,
    "equals": lambda s1, e1, s2, e2: s1 == s2 and e1 == e2,
}


def allen_oracle(i1, i2) -> list[str]:
    """Every relation whose definition holds; a correct algebra yields exactly one."""
    (s1, e1), (s2, e2) = i1, i2
    return [name for name, holds in ALLEN_DEFINITIONS.items() if holds(s1, e1, s2, e2)]


def proper_intervals(lo: int = 0, hi: int = 5):
    return [(s, e) for s in range(lo, hi + 1) for e in range(s + 1, hi + 1)]


# ------------------------------------------------------------------ geometry

def hull_oracle(tiles) -> frozenset:
    """Tiles inside or on the hull, via every supporting line through two input points."""
    pts = sorted(set(tiles))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    box = [(x, y) for x in range(min(xs), max(xs) + 1) for y in range(min(ys), max(ys) + 1)]
    if len(pts) == 1:
        return frozenset(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    collinear = all(cross(pts[0], pts[1], p) == 0 for p in pts)
    if collinear:
        a, b = pts[0], pts[-1]
        return frozenset(
            p for p in box
            if cross(a, b, p) == 0 and min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
        )
    halfplanes = []
    for a, b in itertools.permutations(pts, 2):
        if all(cross(a, b, p) >= 0 for p in pts):
            halfplanes.append((a, b))
    return frozenset(p for p in box if all(cross(a, b, p) >= 0 for a, b in halfplanes))


def components_oracle(n: int, connected) -> list[set]:
    """Connected components by breadth-first search over an explicit adjacency test."""
    seen, out = set(), []
    for i in range(n):
        if i in seen:
            continue
        comp, frontier = {i}, [i]
        while frontier:
            j = frontier.pop()
            for k in range(n):
                if k not in comp and connected(j, k):
                    comp.add(k)
                    frontier.append(k)
        seen |= comp
        out.append(comp)
    return out


# ------------------------------------------------------------------ statistics

def stats_oracle(values):
    n = len(values)
    mean = fsum(values) / n
    return n, min(values), max(values), mean, fsum((v - mean) ** 2 for v in values)


# ------------------------------------------------------------------ structure mapping

WEIGHT = 1.25


def _is_value(t) -> bool:
    if isinstance(t, (int, float)) and not isinstance(t, bool):
        return True
    return isinstance(t, Compound) and t.functor == "GEFn"


def _value_like(t) -> bool:
    return _is_value(t) or (isinstance(t, Compound) and len(t.args) == 1 and _is_value(t.args[0]))


def align(b, t, eb, et, depth=0):
    """(entity pairs, score) if ``b`` and ``t`` align structurally, else None."""
    if b in eb or t in et:
        if b in eb and t in et:
            return [(b, t)], 0.0
        return None
    if not isinstance(b, Compound) or not isinstance(t, Compound):
        return ([], 0.0) if (type(b) is type(t) and b == t) else None
    if b.functor != t.functor or len(b.args) != len(t.args):
        return None
    pairs, score = [], WEIGHT ** depth
    for i, (x, y) in enumerate(zip(b.args, t.args)):
        if b.functor == "valueOf" and i == 1 and _value_like(x) and _value_like(y):
            wx = x.functor if isinstance(x, Compound) and x.functor != "GEFn" else None
            wy = y.functor if isinstance(y, Compound) and y.functor != "GEFn" else None
            if wx != wy:
                return None
            continue
        if b.functor == "valueOf" and i == 1 and (_value_like(x) != _value_like(y)):
            return None
        sub = align(x, y, eb, et, depth + 1)
        if sub is None:
            return None
        pairs += sub[0]
        score += sub[1]
    return pairs, score


def _consistent(pairs) -> dict | None:
    fwd, bwd = {}, {}
    for e, f in pairs:
        if fwd.setdefault(e, f) != f or bwd.setdefault(f, e) != e:
            return None
    return fwd


def exhaustive_best(base, target) -> float:
    """Best raw score over all one-to-one, entity-consistent sets of aligned fact pairs."""
    bf = base.sorted()
    tf = target.sorted()
    options = []
    for b in bf:
        opts = []
        for j, t in enumerate(tf):
            r = align(b, t, base.entities, target.entities)
            if r is not None and _consistent(r[0]) is not None:
                opts.append((j, r[0], r[1]))
        options.append(opts)
    remaining = [sum(max((o[2] for o in opts), default=0.0) for opts in options[i:]) for i in range(len(bf) + 1)]
    best = [0.0]

    def search(i, used, fwd, bwd, score):
        if score + remaining[i] <= best[0] + 1e-12:
            return
        if i == len(bf):
            best[0] = score
            return
        for j, pairs, w in options[i]:
            if j in used:
                continue
            if any(fwd.get(e, f) != f or bwd.get(f, e) != e for e, f in pairs):
                continue
            nf, nb = dict(fwd), dict(bwd)
            for e, f in pairs:
                nf[e] = f
                nb[f] = e
            search(i + 1, used | {j}, nf, nb, score + w)
        search(i + 1, used, fwd, bwd, score)

    search(0, frozenset(), {}, {}, 0.0)
    return best[0]


# ------------------------------------------------------------------ random terms and cases

SYMBOLS = ["a", "b", "Foo", "bar-baz", "x1", "Y_2", "aia-meets", "?v", "R:1"]


def random_term(rng: random.Random, depth: int = 0):
    r = rng.random()
    if depth >= 3 or r < 0.45:
        kind = rng.randrange(4)
        if kind == 0:
            return rng.choice(SYMBOLS)
        if kind == 1:
            return rng.randint(-50, 50)
        if kind == 2:
            return rng.choice([0.5, -2.25, 3.0, 1e-3, 12345.678])
        return Text(rng.choice(["", "hi there", 'q"uote', "back\\slash", "semi;colon"]))
    functor = rng.choice([s for s in SYMBOLS if s != "?v"])
    return Compound(functor, tuple(random_term(rng, depth + 1) for _ in range(rng.randint(1, 3))))


ENTITY_TYPES = ["CityFootprint", "UnitGroupFootprint", "QualitativeTimeInterval"]
RELATIONS = [("near", 2), ("presentIn", 2), ("aia-meets", 2), ("aia-starts", 2), ("hasCityWalls", 1)]


def random_case(rng: random.Random, n_entities: int, n_facts: int):
    """A small typed case with relations, one higher-order level and value facts."""
    from battle_episodes.terms import CaseFacts

    ents = [f"e{i}" for i in range(n_entities)]
    facts = {make("isa", e, rng.choice(ENTITY_TYPES[:2])) for e in ents}
    attempts = 0
    while len(facts) < n_facts and attempts < 200:
        attempts += 1
        k = rng.random()
        if k < 0.5:
            name, arity = rng.choice(RELATIONS)
            facts.add(make(name, *rng.sample(ents, arity)))
        elif k < 0.7:
            name, arity = rng.choice(RELATIONS[:2])
            inner = make(name, *rng.sample(ents, arity))
            facts.add(make("causes", inner, make("hasCityWalls", rng.choice(ents))))
        else:
            q = rng.choice(["Attackers", "milUnits"])
            v = rng.randint(0, 3)
            value = v if q == "Attackers" else make("UnitCount", v)
            when = rng.choice(["StartFn", "EndFn"])
            facts.add(make("holdsIn", make(when, "ev"), make("valueOf", make(q, rng.choice(ents)), value)))
    return CaseFacts(facts)
