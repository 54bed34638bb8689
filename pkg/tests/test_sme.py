import random
import time

import pytest

from battle_episodes.analogy.sme import analyze_fact, genent, mapping_score, self_score, sme_map, value_leaf
from battle_episodes.harness import run_scenario
from battle_episodes.terms import CaseFacts, make, parse_term, parse_terms

from oracles import exhaustive_best, random_case


def case(text, entities=None):
    return CaseFacts(parse_terms(text), entities)


def test_self_map_is_perfect():
    c = run_scenario("three-attacker", "histories").cases[0].facts
    m = sme_map(c, c)
    assert m.normalized_score == 1.0
    assert len(m.pairs) == len(c)
    assert not m.candidate_inferences
    assert all(k == v for k, v in m.entities.items())


def test_disjoint_functors_score_zero():
    m = sme_map(case("(isa a T) (p a)"), case("(kind b U) (q b)"))
    assert m.pairs == [] and m.raw_score == 0.0 and m.normalized_score == 0.0


def test_candidate_inference_from_extra_causal_fact():
    base = case("(isa a Obj) (isa b Obj) (p a) (q b) (causes (p a) (q b))")
    target = case("(isa x Obj) (isa y Obj) (p x) (q y)")
    m = sme_map(base, target)
    assert m.entities == {"a": "x", "b": "y"}
    assert m.candidate_inferences == {parse_term("(causes (p x) (q y))")}
    assert m.raw_score == pytest.approx(exhaustive_best(base, target))


def test_unmapped_entities_block_inference():
    base = case("(isa a Obj) (isa b Obj) (p a) (near a b)")
    target = case("(isa x Obj) (p x)")
    m = sme_map(base, target)
    assert m.entities == {"a": "x"}
    assert not m.candidate_inferences


def test_values_do_not_constrain_alignment():
    base = case("(isa r R) (holdsIn (StartFn e) (valueOf (Attackers r) 3))")
    target = case("(isa s R) (holdsIn (StartFn e) (valueOf (Attackers s) 1))")
    m = sme_map(base, target)
    assert len(m.pairs) == 2 and m.normalized_score == 1.0


def test_value_wrappers_must_agree():
    base = case("(isa r R) (holdsIn (StartFn e) (valueOf (milUnits r) (UnitCount 3)))")
    target = case("(isa s R) (holdsIn (StartFn e) (valueOf (milUnits s) (TileCount 3)))")
    assert len(sme_map(base, target).pairs) == 1


def test_value_leaf():
    assert value_leaf(3) == (None, 3)
    assert value_leaf(make("UnitCount", 2)) == ("UnitCount", 2)
    assert value_leaf(make("UnitCount", genent(4))) == ("UnitCount", genent(4))
    assert value_leaf(make("pair", 1, 2)) is None
    assert value_leaf("x") is None


def test_weights_grow_with_depth():
    flat = analyze_fact(parse_term("(p a)"), {"a"})
    nested = analyze_fact(parse_term("(causes (p a) (q a))"), {"a"})
    assert flat.weight == 1.0
    assert nested.weight == pytest.approx(1 + 2 * 1.25)
    assert self_score(case("(isa a T) (p a)")) == 2.0


def test_mapping_is_one_to_one():
    rng = random.Random(11)
    for _ in range(100):
        b = random_case(rng, 4, 10)
        t = random_case(rng, 4, 10)
        m = sme_map(b, t)
        assert len(set(m.entities.values())) == len(m.entities)
        assert len({x for x, _ in m.pairs}) == len({y for _, y in m.pairs}) == len(m.pairs)
        assert m.raw_score == pytest.approx(mapping_score(b, t, m.pairs))
        assert 0.0 <= m.normalized_score <= 1.0


def test_greedy_tracks_exhaustive():
    rng = random.Random(12)
    for _ in range(100):
        b = random_case(rng, 3, 8)
        t = random_case(rng, 3, 8)
        assert sme_map(b, t).raw_score >= 0.9 * exhaustive_best(b, t) - 1e-9


def test_expression_correspondences_are_recorded():
    base = case("(isa a T) (causes (p a) (q a))")
    target = case("(isa b T) (causes (p b) (q b))")
    m = sme_map(base, target)
    assert m.expressions[parse_term("(p a)")] == parse_term("(p b)")


def test_lookup_helpers():
    base = case("(isa a T) (p a)")
    target = case("(isa b T) (p b)")
    m = sme_map(base, target)
    assert m.target_fact(parse_term("(p a)")) == parse_term("(p b)")
    assert m.base_fact(parse_term("(p b)")) == parse_term("(p a)")
    assert m.base_fact(parse_term("(p z)")) is None


def test_case_sized_map_is_fast():
    c = run_scenario("three-attacker", "histories").cases[0].facts
    d = run_scenario("three-attacker", "baseline").cases[2].facts
    t0 = time.perf_counter()
    for _ in range(10):
        sme_map(c, d)
    assert (time.perf_counter() - t0) / 10 < 0.5
