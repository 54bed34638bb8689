import random
from collections import Counter

from battle_episodes.analogy.macfac import content_vector, dot, mac_stage, retrieve
from battle_episodes.analogy.sage import SUCCESS_POOL, Gpool, sage_add
from battle_episodes.terms import CaseFacts, Compound, parse_term, parse_terms, substitute

from oracles import random_case


def case(text):
    return CaseFacts(parse_terms(text))


class Library:
    """Minimal pool stand-in over fixed named cases."""

    def __init__(self, **items):
        self.items = items

    def library(self):
        return [(k, v, content_vector(v)) for k, v in sorted(self.items.items())]


def naive_vector(c):
    counts = Counter()

    def walk(t):
        if isinstance(t, Compound):
            counts[t.functor] += 1
            for a in t.args:
                walk(a)

    for f in c.facts:
        walk(f)
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def test_single_fact_vector():
    assert content_vector(case("(isa A B)")) == {"isa": 1.0}
    assert content_vector(CaseFacts([])) == {}


def test_vector_matches_naive_counter_and_ignores_entities():
    rng = random.Random(5)
    for _ in range(100):
        c = random_case(rng, 4, 10)
        v = content_vector(c)
        assert v.keys() == naive_vector(c).keys()
        assert all(abs(v[k] - naive_vector(c)[k]) < 1e-12 for k in v)
        renamed = CaseFacts(substitute(f, {"e0": "e3", "e3": "e0"}) for f in c.facts)
        assert content_vector(renamed) == v


def test_identical_cases_score_highest():
    a = case("(isa a T) (p a) (q a)")
    b = case("(isa b U) (r b) (r b)")
    va = content_vector(a)
    assert dot(va, va) >= dot(va, content_vector(b))
    assert mac_stage(va, [("other", content_vector(b)), ("self", va)])[0] == "self"


def test_mac_tie_break_and_near_ties():
    v = {"a": 1.0}
    assert mac_stage(v, [("z", v), ("m", v), ("b", v), ("a", v)]) == ["a", "b", "m"]
    lib = [("x", {"a": 1.0}), ("y", {"a": 0.95, "b": 0.05}), ("z", {"a": 0.92, "c": 0.08}), ("w", {"a": 0.5})]
    assert mac_stage(v, lib) == ["x", "y", "z"]
    assert mac_stage(v, [("x", {"a": 1.0}), ("w", {"a": 0.5})]) == ["x"]
    assert mac_stage(v, []) == []


def test_empty_pool_retrieves_nothing():
    assert retrieve(case("(isa a T)"), Gpool(SUCCESS_POOL)) is None


def test_outlier_copy_is_retrieved_exactly():
    c = case("(isa a T) (isa b T) (near a b) (p a)")
    pool = Gpool(SUCCESS_POOL)
    sage_add(pool, c, name="seen")
    r = retrieve(c, pool)
    assert r.item_id == "seen" and r.score == 1.0


def test_fac_overrules_mac():
    probe = case("(isa a T) (isa b T) (r a b) (s b a) (causes (r a b) (s b a)) (q a) (q b) (q a b)")
    # same functor histogram as the probe, scrambled structure
    mac_favourite = case("(isa c U) (isa d U) (r d d) (s c c) (causes (s c d) (r d c)) (q d) (q c) (q d c)")
    # the probe's structure plus one extra fact
    structural = case("(isa x T) (isa y T) (r x y) (s y x) (causes (r x y) (s y x)) (q x) (q y) (q x y) (w x)")
    r = retrieve(probe, Library(O=mac_favourite, G=structural))
    assert r.mac_candidates[0] == "O"
    assert r.item_id == "G"
    assert r.mapping.base is structural
    assert r.mapping.candidate_inferences == {parse_term("(w a)")}


def test_no_structural_overlap_returns_none():
    r = retrieve(case("(isa a T) (p a)"), Library(only=case("(kind b U) (q b)")))
    assert r is None
