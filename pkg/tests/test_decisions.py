import random

import pytest

from battle_episodes.analogy.sage import FAILURE_POOL, SUCCESS_POOL, GenEntStats, Gpool, sage_add
from battle_episodes.analogy.sme import sme_map
from battle_episodes.config import ExperimentConfig
from battle_episodes.decisions import (
    CITY_WALLS, CONQUEST, GROWTH, LOSE, MAX_DEFENDERS, MIN_ATTACKERS, WIN_OR_UNKNOWN, DecisionError,
    Direction, GoalNetwork, RetrievalCache, assess_city, decide, default_goal_network, default_policy,
    game_phase, limit_point_failure, propose_action, unsatisfied_goals,
)
from battle_episodes.episodes import construct_probe_case
from battle_episodes.harness import Agent
from battle_episodes.quantities import new_store
from battle_episodes.sim import ActionSpec, legal_city_actions, scenario_state, step_turn
from battle_episodes.terms import CaseFacts, parse_term

CFG = ExperimentConfig()


def setup(attackers=((11, 10), (9, 10)), defenders=1, walls=False, economy=True):
    s = scenario_state(CFG, (10, 10), defenders, attackers, walls=walls, economy=economy)
    agent = Agent("histories", CFG)
    agent.start(s)
    return s, agent


def probe_facts(s, agent):
    return construct_probe_case(s, "c1", agent.perception).facts


def pools_from(success=(), failure=()):
    pools = {SUCCESS_POOL: Gpool(SUCCESS_POOL), FAILURE_POOL: Gpool(FAILURE_POOL)}
    for label, cases in ((SUCCESS_POOL, success), (FAILURE_POOL, failure)):
        for k, c in enumerate(cases):
            sage_add(pools[label], c, name=f"{label}{k}")
    return pools


def with_defenders(facts: CaseFacts, n: int) -> CaseFacts:
    old = parse_term("(holdsIn (StartFn SkolemEvent) (valueOf (milUnits CityRegion-c1) (UnitCount 1)))")
    new = parse_term(f"(holdsIn (StartFn SkolemEvent) (valueOf (milUnits CityRegion-c1) (UnitCount {n})))")
    return CaseFacts((facts.facts - {old}) | {new})


# ------------------------------------------------------------------ phase

def test_phase_is_sticky():
    s, agent = setup(attackers=())
    assert game_phase(s, agent.perception.store) == GROWTH
    s2, agent2 = setup(attackers=((11, 10),))
    assert game_phase(s2, agent2.perception.store) == CONQUEST
    s2.combat_script = ["defender"]
    step_turn(s2, {}, agent2.observe)
    assert not s2.invaders()
    assert game_phase(s2, agent2.perception.store) == CONQUEST


def test_phase_needs_invader_quantity():
    s, _ = setup(attackers=())
    with pytest.raises(DecisionError):
        game_phase(s, type("Empty", (), {"quantities": {}})())


# ------------------------------------------------------------------ assessment

def test_empty_pools_fall_back():
    s, agent = setup()
    a = assess_city("c1", pools_from(), s, agent.perception)
    assert a.predicted == WIN_OR_UNKNOWN and a.mapping is None


def test_identical_failure_predicts_loss():
    s, agent = setup()
    probe = probe_facts(s, agent)
    a = assess_city("c1", pools_from(failure=[probe]), s, agent.perception)
    assert a.predicted == LOSE and a.scores[FAILURE_POOL] == 1.0 and a.matched_pool == FAILURE_POOL


def test_ties_favour_success():
    s, agent = setup()
    probe = probe_facts(s, agent)
    a = assess_city("c1", pools_from(success=[probe], failure=[probe]), s, agent.perception)
    assert a.scores[SUCCESS_POOL] == a.scores[FAILURE_POOL]
    assert a.predicted == WIN_OR_UNKNOWN


def test_cache_reuses_and_invalidates():
    s, agent = setup()
    probe = probe_facts(s, agent)
    pools = pools_from(failure=[probe])
    cache = RetrievalCache()
    first = cache.retrieve(probe, pools[FAILURE_POOL])
    assert cache.retrieve(probe, pools[FAILURE_POOL]) is first
    sage_add(pools[FAILURE_POOL], probe, name="again")
    assert cache.retrieve(probe, pools[FAILURE_POOL]) is not first


# ------------------------------------------------------------------ limit points

def test_limit_points():
    hist = GenEntStats.from_values([1, 0, 1])
    assert limit_point_failure(Direction.Maximize, 1, hist)
    assert not limit_point_failure(Direction.Maximize, 2, hist)
    assert limit_point_failure("Minimize", 3, GenEntStats.from_values([3, 5]))
    assert not limit_point_failure("Minimize", 2, GenEntStats.from_values([3, 5]))
    with pytest.raises(DecisionError):
        limit_point_failure(Direction.Maximize, 1, GenEntStats())


# ------------------------------------------------------------------ goals

def failure_generalization(defender_history, s, agent):
    """A failure pool whose one generalization saw the given defender counts."""
    probe = probe_facts(s, agent)
    pool = Gpool(FAILURE_POOL)
    for k, n in enumerate(defender_history):
        sage_add(pool, with_defenders(probe, n), name=f"f{k}")
    (g,) = pool.generalizations
    return g, sme_map(g.view(pool.probability_cutoff), probe)


def test_defender_goal_unsatisfied_at_the_limit():
    s, agent = setup()
    g, m = failure_generalization([1, 0, 1], s, agent)
    failed = unsatisfied_goals(default_goal_network(), s.cities["c1"], m, g, s, agent.perception.store)
    assert MAX_DEFENDERS in failed
    assert CITY_WALLS in failed


def test_more_defenders_than_ever_lost_with():
    s, agent = setup(defenders=2)
    g, m = failure_generalization([1, 0, 1], s, agent)
    failed = unsatisfied_goals(default_goal_network(), s.cities["c1"], m, g, s, agent.perception.store)
    assert MAX_DEFENDERS not in failed


def test_walls_satisfy_their_goal():
    s, agent = setup(walls=True)
    g, m = failure_generalization([1, 1], s, agent)
    failed = unsatisfied_goals(default_goal_network(), s.cities["c1"], m, g, s, agent.perception.store)
    assert CITY_WALLS not in failed


def test_goal_without_correspondence_is_skipped():
    s, agent = setup()
    probe = probe_facts(s, agent)
    stripped = CaseFacts(f for f in probe.facts if not (f.functor == "holdsIn" and "milUnits" in str(f)))
    pool = Gpool(FAILURE_POOL)
    sage_add(pool, stripped, name="a")
    sage_add(pool, stripped, name="b")
    (g,) = pool.generalizations
    m = sme_map(g.view(0.2), probe)
    failed = unsatisfied_goals(default_goal_network(), s.cities["c1"], m, g, s, agent.perception.store)
    assert MAX_DEFENDERS not in failed
    assert MIN_ATTACKERS in failed


def test_outlier_value_is_its_own_history():
    s, agent = setup()
    probe = probe_facts(s, agent)
    pools = pools_from(failure=[probe])
    a = assess_city("c1", pools, s, agent.perception)
    failed = unsatisfied_goals(default_goal_network(), s.cities["c1"], a.mapping, a.item, s, agent.perception.store)
    assert {MAX_DEFENDERS, MIN_ATTACKERS} <= set(failed)


def test_network_validation():
    net = default_goal_network()
    net.validate(new_store())
    bad = GoalNetwork(net.root, net.goals, {**net.influences, MAX_DEFENDERS.name: frozenset()})
    with pytest.raises(DecisionError):
        bad.validate(new_store())


# ------------------------------------------------------------------ actions

def test_default_policy_order():
    s, _ = setup(attackers=(), defenders=0, economy=False)
    city = s.cities["c1"]
    assert default_policy(city, s) is ActionSpec.BuildEconomy
    city.economy = True
    assert default_policy(city, s) is ActionSpec.BuildDefender
    s2, _ = setup(attackers=(), defenders=1)
    assert default_policy(s2.cities["c1"], s2) is ActionSpec.NoOp


def test_single_option_is_taken():
    s, _ = setup()
    city = s.cities["c1"]
    net = default_goal_network()
    legal = {ActionSpec.NoOp, ActionSpec.BuildDefender, ActionSpec.BuildWalls}
    assert propose_action(net, [MAX_DEFENDERS], legal, random.Random(0), city, s) is ActionSpec.BuildDefender


def test_random_choice_is_uniform_over_options():
    s, _ = setup()
    city = s.cities["c1"]
    net = default_goal_network()
    legal = legal_city_actions(s, "c1")
    rng = random.Random(1)
    picks = [propose_action(net, [CITY_WALLS, MAX_DEFENDERS], legal, rng, city, s) for _ in range(2000)]
    assert set(picks) == {ActionSpec.BuildWalls, ActionSpec.BuildDefender}
    assert 0.45 < picks.count(ActionSpec.BuildWalls) / len(picks) < 0.55


def test_busy_city_falls_back_to_default():
    s, _ = setup(attackers=())
    step_turn(s, {"c1": ActionSpec.BuildWalls})
    legal = legal_city_actions(s, "c1")
    action = propose_action(default_goal_network(), [MAX_DEFENDERS], legal, random.Random(0), s.cities["c1"], s)
    assert action is ActionSpec.NoOp


def test_decide_end_to_end():
    s, agent = setup()
    pools = pools_from(failure=[probe_facts(s, agent)] * 2)
    d = decide("c1", s, agent.perception, pools, default_goal_network())
    assert d.phase == CONQUEST and d.predicted == LOSE
    assert d.action in {ActionSpec.BuildWalls, ActionSpec.BuildDefender, ActionSpec.BuildAttacker}
    row = d.as_row()
    assert row["chosen-action"] == d.action.value and "Max Defenders" in row["failed-goals"]
