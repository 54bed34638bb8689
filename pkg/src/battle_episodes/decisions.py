"""Per-city defensive decisions from analogical predictions.

During the conquest phase each city's present situation is cast as the start
of a hypothetical battle and compared with both outcome pools.  When the
failure pool answers best, the mapping aligns the city's current quantities
with the generalized values of past failures; a quantity still inside the
failing region of its quantity space marks its goal as unsatisfied, and an
action that pushes the quantity the right way is drawn at random.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .analogy.macfac import Retrieval, retrieve
from .analogy.sage import FAILURE_POOL, SUCCESS_POOL, GenEntStats, Generalization, Gpool, PoolItem, genent_stats
from .analogy.sme import analyze_fact, is_genent
from .episodes import EpisodeCase, Perception, construct_probe_case
from .fluents import FluentStore, numeric_value
from .footprints import city_footprint_id
from .sim import ActionSpec, City, GameState, legal_city_actions
from .terms import Compound

GROWTH = "Growth"
CONQUEST = "Conquest"
WIN_OR_UNKNOWN = "WinOrUnknown"
LOSE = "Lose"

ROOT_GOAL = "MaximizeCityMilitarySystem"


class DecisionError(Exception):
    pass


class Direction(str, Enum):
    Maximize = "Maximize"
    Minimize = "Minimize"


@dataclass(frozen=True)
class Goal:
    name: str
    quantity: Optional[str] = None          # quantity goals only
    direction: Optional[Direction] = None
    condition: Optional[str] = None         # achievement goals only

    @property
    def is_quantity_goal(self) -> bool:
        return self.quantity is not None


CITY_WALLS = Goal("Achieve(CityWalls)", condition="CityWalls")
MAX_DEFENDERS = Goal("Max Defenders", quantity="milUnits", direction=Direction.Maximize)
MIN_ATTACKERS = Goal("Min Attackers", quantity="BattleOpposingUnitCardinality", direction=Direction.Minimize)


@dataclass
class GoalNetwork:
    root: str
    goals: tuple
    influences: dict                        # goal name -> frozenset of ActionSpec

    def validate(self, store: FluentStore) -> None:
        for g in self.goals:
            if g.is_quantity_goal and g.quantity not in store.quantities:
                raise DecisionError(f"goal {g.name} refers to unregistered quantity {g.quantity}")
            if not self.influences.get(g.name):
                raise DecisionError(f"goal {g.name} has no influencing action")


def default_goal_network() -> GoalNetwork:
    return GoalNetwork(
        ROOT_GOAL,
        (CITY_WALLS, MAX_DEFENDERS, MIN_ATTACKERS),
        {
            CITY_WALLS.name: frozenset({ActionSpec.BuildWalls}),
            MAX_DEFENDERS.name: frozenset({ActionSpec.BuildDefender, ActionSpec.BuildEliteDefender}),
            MIN_ATTACKERS.name: frozenset({ActionSpec.BuildAttacker}),
        },
    )


# ------------------------------------------------------------------ phase

def game_phase(s: GameState, store: FluentStore) -> str:
    """Conquest from the first sample with invaders on the map, for good."""
    if "invaderCount" not in store.quantities:
        raise DecisionError("invaderCount is not a registered quantity")
    series = store.fluents.get(("invaderCount", "World"), ())
    return CONQUEST if any(numeric_value(v) > 0 for _, v in series) else GROWTH


# ------------------------------------------------------------------ assessment

@dataclass
class Assessment:
    predicted: str
    mapping: object = None                  # Mapping when Lose
    matched_pool: Optional[str] = None
    item: Union[Generalization, PoolItem, None] = None
    probe: Optional[EpisodeCase] = None
    scores: dict = field(default_factory=dict)


class RetrievalCache:
    """Memoizes retrievals while neither the probe nor the pool has changed."""

    def __init__(self, size: int = 4096):
        self.size = size
        self._memo: dict = {}

    def retrieve(self, probe, pool: Gpool) -> Optional[Retrieval]:
        key = (probe, id(pool), pool.version)
        if key not in self._memo:
            if len(self._memo) >= self.size:
                self._memo.clear()
            self._memo[key] = retrieve(probe, pool)
        return self._memo[key]


def assess_city(city_id: str, pools: dict, state: GameState, perception: Perception,
                cache: Optional[RetrievalCache] = None) -> Assessment:
    probe = construct_probe_case(state, city_id, perception)
    find = cache.retrieve if cache is not None else retrieve
    rs = find(probe.facts, pools[SUCCESS_POOL])
    rf = find(probe.facts, pools[FAILURE_POOL])
    s_score = rs.score if rs else 0.0
    f_score = rf.score if rf else 0.0
    scores = {SUCCESS_POOL: s_score, FAILURE_POOL: f_score}
    if rf is not None and f_score > s_score:
        item = pools[FAILURE_POOL].find(rf.item_id)
        return Assessment(LOSE, rf.mapping, FAILURE_POOL, item, probe, scores)
    matched = SUCCESS_POOL if rs is not None else None
    return Assessment(WIN_OR_UNKNOWN, None, matched, None, probe, scores)


def limit_point_failure(direction: Union[Direction, str], current, stats: GenEntStats) -> bool:
    if stats.cardinality < 1:
        raise DecisionError("limit point needs at least one prior value")
    direction = Direction(direction)
    if direction is Direction.Maximize:
        return current <= stats.maximum
    return current >= stats.minimum


def _probe_value_fact(probe_facts, functor: str, entity: str) -> Optional[Compound]:
    for f in probe_facts:
        if f.functor != "holdsIn" or len(f.args) != 2:
            continue
        when, what = f.args
        if not (isinstance(when, Compound) and when.functor == "StartFn"):
            continue
        if isinstance(what, Compound) and what.functor == "valueOf":
            q = what.args[0]
            if isinstance(q, Compound) and q.functor == functor and q.args == (entity,):
                return f
    return None


def _prior_stats(item, base_fact) -> Optional[GenEntStats]:
    info = analyze_fact(base_fact, ())
    if not info.values:
        return None
    v = info.values[0]
    if is_genent(v):
        if not isinstance(item, Generalization):
            raise DecisionError(f"lifted value {v} outside a generalization")
        return genent_stats(item, v.args[0])
    # an outlier: its single ground value is the whole prior history
    return GenEntStats.from_values([v])


def unsatisfied_goals(net: GoalNetwork, city: City, m, item, state: GameState, store: FluentStore) -> list[Goal]:
    """Goals the retrieved failure says the city is not yet meeting."""
    failed = []
    cfp = city_footprint_id(city.id)
    for goal in net.goals:
        if not goal.is_quantity_goal:
            if goal.condition == "CityWalls" and not city.walls:
                failed.append(goal)
            continue
        functor = store.quantities[goal.quantity].functor
        probe_fact = _probe_value_fact(m.target.facts, functor, cfp)
        if probe_fact is None:
            continue
        base_fact = m.base_fact(probe_fact)
        if base_fact is None:
            continue
        stats = _prior_stats(item, base_fact)
        if stats is None:
            continue
        current = numeric_value(probe_fact.args[1].args[1])
        if limit_point_failure(goal.direction, current, stats):
            failed.append(goal)
    return failed


# ------------------------------------------------------------------ actions

def default_policy(city: City, state: GameState) -> ActionSpec:
    """Economy first, then a single defender; identical in both conditions."""
    if city.producing is not None:
        return ActionSpec.NoOp
    if not city.economy:
        return ActionSpec.BuildEconomy
    if len(state.defenders_of(city)) < 1:
        return ActionSpec.BuildDefender
    return ActionSpec.NoOp


def propose_action(net: GoalNetwork, failed: list[Goal], legal: set, rng: random.Random,
                   city: City, state: GameState) -> ActionSpec:
    options = set()
    for goal in failed:
        options |= net.influences[goal.name]
    options &= legal
    if not options:
        return default_policy(city, state)
    return rng.choice(sorted(options, key=lambda a: a.value))


@dataclass
class Decision:
    turn: int
    city: str
    phase: str
    predicted: str
    failed_goals: tuple
    action: ActionSpec

    def as_row(self) -> dict:
        return {
            "turn": self.turn, "city": self.city, "phase": self.phase,
            "predicted": self.predicted, "failed-goals": ";".join(self.failed_goals),
            "chosen-action": self.action.value,
        }


DECISION_FIELDS = ("turn", "city", "phase", "predicted", "failed-goals", "chosen-action")


def decide(city_id: str, state: GameState, perception: Perception, pools: dict,
           net: GoalNetwork, cache: Optional[RetrievalCache] = None) -> Decision:
    """One city's action for the coming turn."""
    city = state.cities[city_id]
    phase = game_phase(state, perception.store)
    legal = legal_city_actions(state, city_id)
    if phase == GROWTH:
        return Decision(state.turn, city_id, phase, "", (), default_policy(city, state))
    a = assess_city(city_id, pools, state, perception, cache)
    if a.predicted != LOSE:
        return Decision(state.turn, city_id, phase, a.predicted, (), default_policy(city, state))
    failed = unsatisfied_goals(net, city, a.mapping, a.item, state, perception.store)
    action = propose_action(net, failed, legal, state.rng["decisions"], city, state)
    return Decision(state.turn, city_id, phase, a.predicted, tuple(g.name for g in failed), action)
