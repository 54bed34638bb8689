"""A deterministic turn-based micro strategy world.

One learning player (``P1``) grows an empire of cities during a scripted
growth phase; a scripted invader (``P2``) then sends escalating waves of
attackers at those cities.  Every random draw comes from a named stream
(``map``, ``combat``, ``waves``, ``decisions``) seeded from the game seed, so
the same seed, config and action stream always reproduce the same trajectory.

:func:`step_turn` emits an ordered event log.  An optional observer callback
sees the live state right after each event, which is how the perception side
samples fluents at every significant event.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional, Union

from .config import ExperimentConfig
from .fluents import Timepoint

LEARNER = "P1"
INVADER = "P2"

MILITARY_KINDS = ("Defender", "Attacker", "EliteDefender")
ELITE_TECH = "rocketry-analog"

TERRAIN_DEFENSE = {"Plains": 1.0, "Desert": 1.0, "Hill": 1.5}

Coord = tuple[int, int]


class SimError(Exception):
    pass


class IllegalActionError(SimError):
    pass


class ActionSpec(str, Enum):
    NoOp = "NoOp"
    BuildDefender = "BuildDefender"
    BuildWalls = "BuildWalls"
    BuildEconomy = "BuildEconomy"
    BuildEliteDefender = "BuildEliteDefender"
    BuildAttacker = "BuildAttacker"

    def __str__(self) -> str:
        return self.value


# item produced by each build action
_PRODUCT = {
    ActionSpec.BuildDefender: "Defender",
    ActionSpec.BuildWalls: "Walls",
    ActionSpec.BuildEconomy: "Economy",
    ActionSpec.BuildEliteDefender: "EliteDefender",
    ActionSpec.BuildAttacker: "Attacker",
}


@dataclass(frozen=True)
class Tile:
    coord: Coord
    terrain: str
    defense_multiplier: float


@dataclass
class GameMap:
    width: int
    height: int
    terrain: list[list[str]]  # [y][x]
    hill_defense: float = 1.5

    def on_map(self, c: Coord) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def tile(self, c: Coord) -> Tile:
        t = self.terrain[c[1]][c[0]]
        mult = self.hill_defense if t == "Hill" else 1.0
        return Tile(c, t, mult)

    def __len__(self) -> int:
        return self.width * self.height


@dataclass
class City:
    id: str
    owner: str
    center: Coord
    walls: bool = False
    economy: bool = False
    hp: int = 1
    producing: Optional[str] = None
    progress: int = 0
    gold_yield: int = 1


@dataclass
class Unit:
    id: str
    owner: str
    kind: str
    attack: int
    defense: int
    hp: int
    movement: int
    pos: Coord
    home: Optional[str] = None      # learner units: home city id
    target: Optional[str] = None    # invaders: city id under attack
    dest: Optional[Coord] = None    # settlers: founding site


@dataclass
class Player:
    id: str
    gold: int = 0
    techs: set = field(default_factory=set)


@dataclass(frozen=True)
class SimEvent:
    kind: str
    time: Timepoint
    unit: Optional[str] = None
    target: Optional[str] = None
    city: Optional[str] = None
    result: Optional[str] = None
    pos: Optional[Coord] = None

    def as_row(self) -> dict:
        return {
            "turn": self.time.turn, "seq": self.time.seq, "kind": self.kind,
            "unit": self.unit or "", "target": self.target or "",
            "city": self.city or "", "result": self.result or "",
            "pos": "" if self.pos is None else f"{self.pos[0]}:{self.pos[1]}",
        }


@dataclass(frozen=True)
class CombatOutcome:
    attacker: str
    target: str
    p_attacker_wins: float
    attacker_won: bool
    loser: Optional[str]       # destroyed unit id, None when a defenderless city falls
    conquered: Optional[str]   # city id conquered by this attack
    defender: Optional[str]

    @property
    def result(self) -> str:
        if self.conquered:
            return "Conquered"
        return "AttackerWon" if self.attacker_won else "DefenderWon"


@dataclass(frozen=True)
class WaveSpec:
    turn: int
    size: int
    target_city: Optional[str]
    index: int = 0


@dataclass
class GameState:
    config: ExperimentConfig
    seed: int
    turn: int
    map: GameMap
    cities: dict[str, City]
    units: dict[str, Unit]
    players: dict[str, Player]
    rng: dict[str, random.Random]
    events: list[SimEvent] = field(default_factory=list)
    next_unit: int = 1
    next_city: int = 1
    wave_count: int = 0
    # scripted combat results consumed before the rng ("attacker"/"defender")
    combat_script: list[str] = field(default_factory=list)
    waves_enabled: bool = True

    def learner_cities(self) -> list[City]:
        return [c for c in self.cities.values() if c.owner == LEARNER]

    def units_at(self, c: Coord) -> list[Unit]:
        return [u for u in self.units.values() if u.pos == c]

    def defenders_of(self, city: City) -> list[Unit]:
        return sorted(
            (u for u in self.units.values()
             if u.owner == city.owner and u.pos == city.center and u.kind in MILITARY_KINDS),
            key=lambda u: u.id,
        )

    def invaders(self) -> list[Unit]:
        return [u for u in self.units.values() if u.owner == INVADER]

    def city_at(self, c: Coord) -> Optional[City]:
        for city in self.cities.values():
            if city.center == c:
                return city
        return None


# ------------------------------------------------------------------ helpers

def chebyshev(a: Coord, b: Coord) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def manhattan(a: Coord, b: Coord) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _stream(seed: int, name: str) -> random.Random:
    return random.Random(f"{seed}:{name}")


def _step_toward(pos: Coord, goal: Coord) -> Coord:
    """One orthogonal step, along the axis with the larger gap (x on ties)."""
    dx = goal[0] - pos[0]
    dy = goal[1] - pos[1]
    if dx == 0 and dy == 0:
        return pos
    if abs(dx) >= abs(dy):
        return (pos[0] + (1 if dx > 0 else -1), pos[1])
    return (pos[0], pos[1] + (1 if dy > 0 else -1))


class _Emitter:
    def __init__(self, s: GameState, observer):
        self.s = s
        self.observer = observer
        self.seq = 0

    def __call__(self, kind, **kw) -> SimEvent:
        ev = SimEvent(kind, Timepoint(self.s.turn, self.seq), **kw)
        self.seq += 1
        self.s.events.append(ev)
        if self.observer is not None:
            self.observer(self.s, ev)
        return ev


# ------------------------------------------------------------------ setup

def _make_map(cfg: ExperimentConfig, rng: random.Random) -> GameMap:
    terrain = []
    for _y in range(cfg.map_height):
        row = []
        for _x in range(cfg.map_width):
            r = rng.random()
            if r < cfg.hill_fraction:
                row.append("Hill")
            elif r < cfg.hill_fraction + cfg.desert_fraction:
                row.append("Desert")
            else:
                row.append("Plains")
        terrain.append(row)
    return GameMap(cfg.map_width, cfg.map_height, terrain, cfg.hill_defense)


def _city_sites(cfg: ExperimentConfig, rng: random.Random) -> list[Coord]:
    m = cfg.edge_margin
    candidates = [
        (x, y)
        for y in range(m, cfg.map_height - m)
        for x in range(m, cfg.map_width - m)
    ]
    if not candidates:
        raise SimError("map too small for the edge margin")
    rng.shuffle(candidates)
    sites = [candidates[0]]
    for c in candidates[1:]:
        if len(sites) == cfg.max_cities:
            break
        if all(chebyshev(c, s) >= cfg.city_spacing for s in sites) and \
                manhattan(c, sites[0]) <= cfg.growth_end_turn // 2:
            sites.append(c)
    return sites


def _new_unit(s: GameState, kind: str, owner: str, pos: Coord, **kw) -> Unit:
    st = s.config.units[kind]
    u = Unit(
        id=f"u{s.next_unit}", owner=owner, kind=kind, attack=st.attack,
        defense=st.defense, hp=1, movement=st.movement, pos=pos, **kw,
    )
    s.next_unit += 1
    s.units[u.id] = u
    return u


def _found_city(s: GameState, pos: Coord) -> City:
    city = City(id=f"c{s.next_city}", owner=LEARNER, center=pos, gold_yield=s.config.gold_per_city)
    s.next_city += 1
    s.cities[city.id] = city
    return city


def new_game(config: ExperimentConfig, seed: int) -> GameState:
    """Fresh reproducible world: starting cities plus settlers for the rest."""
    config.validate()
    rngs = {name: _stream(seed, name) for name in ("map", "combat", "waves", "decisions")}
    gmap = _make_map(config, rngs["map"])
    sites = _city_sites(config, rngs["map"])
    s = GameState(
        config=config, seed=seed, turn=0, map=gmap, cities={}, units={},
        players={LEARNER: Player(LEARNER), INVADER: Player(INVADER)}, rng=rngs,
    )
    for site in sites[: config.starting_cities]:
        _found_city(s, site)
    capital = sites[0]
    for site in sites[config.starting_cities:]:
        _new_unit(s, "Settler", LEARNER, capital, dest=site)
    return s


def scenario_state(
    config: ExperimentConfig,
    city_pos: Coord,
    defenders: int,
    attackers: Iterable[Coord],
    terrain: str = "Plains",
    walls: bool = False,
    economy: bool = True,
    combat_script: Iterable[str] = (),
    seed: int = 0,
) -> GameState:
    """Hand-built fixture: one learner city, fixed defenders, placed invaders, no waves."""
    rngs = {name: _stream(seed, name) for name in ("map", "combat", "waves", "decisions")}
    gmap = GameMap(
        config.map_width, config.map_height,
        [[terrain] * config.map_width for _ in range(config.map_height)], config.hill_defense,
    )
    s = GameState(
        config=config, seed=seed, turn=0, map=gmap, cities={}, units={},
        players={LEARNER: Player(LEARNER), INVADER: Player(INVADER)}, rng=rngs,
        combat_script=list(combat_script), waves_enabled=False,
    )
    city = _found_city(s, city_pos)
    city.walls = walls
    city.economy = economy
    for _ in range(defenders):
        _new_unit(s, "Defender", LEARNER, city_pos, home=city.id)
    for pos in attackers:
        if not gmap.on_map(pos):
            raise SimError(f"attacker position {pos} off map")
        _new_unit(s, "Attacker", INVADER, pos, target=city.id)
    return s


# ------------------------------------------------------------------ rules

def legal_city_actions(s: GameState, city_id: str) -> set[ActionSpec]:
    city = s.cities.get(city_id)
    if city is None:
        raise SimError(f"unknown city {city_id!r}")
    if city.owner != LEARNER:
        raise SimError(f"city {city_id} is not owned by the learning player")
    legal = {ActionSpec.NoOp}
    if city.producing is not None:
        return legal
    legal |= {ActionSpec.BuildDefender, ActionSpec.BuildAttacker}
    if not city.walls:
        legal.add(ActionSpec.BuildWalls)
    if not city.economy:
        legal.add(ActionSpec.BuildEconomy)
    if ELITE_TECH in s.players[LEARNER].techs:
        legal.add(ActionSpec.BuildEliteDefender)
    return legal


def _item_cost(cfg: ExperimentConfig, item: str) -> int:
    if item == "Walls":
        return cfg.walls_cost
    if item == "Economy":
        return cfg.economy_cost
    return cfg.units[item].cost


def combat_probability(attack: float, defense: float, terrain_mult: float, wall_bonus: float) -> float:
    """Chance the attacker wins one engagement."""
    return attack / (attack + defense * terrain_mult * wall_bonus)


def resolve_attack(attacker: Unit, target: Union[Unit, City], s: GameState) -> CombatOutcome:
    """Decide one engagement; does not mutate units or cities (only consumes a draw)."""
    if attacker.kind not in MILITARY_KINDS:
        raise SimError(f"{attacker.id} ({attacker.kind}) cannot attack")
    tpos = target.center if isinstance(target, City) else target.pos
    if chebyshev(attacker.pos, tpos) != 1:
        raise SimError(f"{attacker.id} at {attacker.pos} is not adjacent to {target.id} at {tpos}")
    tile = s.map.tile(tpos)
    if isinstance(target, City):
        defenders = s.defenders_of(target)
        if not defenders:
            return CombatOutcome(attacker.id, target.id, 1.0, True, None, target.id, None)
        # strongest defender; first in id order on ties
        defender = max(defenders, key=lambda u: u.defense)
        walls = s.config.wall_bonus if target.walls else 1.0
    else:
        defender = target
        walls = 1.0
    p = combat_probability(attacker.attack, defender.defense, tile.defense_multiplier, walls)
    if s.combat_script:
        won = s.combat_script.pop(0) == "attacker"
    else:
        won = s.rng["combat"].random() < p
    conquered = None
    if won and isinstance(target, City) and len(s.defenders_of(target)) == 1:
        conquered = target.id
    loser = defender.id if won else attacker.id
    return CombatOutcome(attacker.id, target.id, p, won, loser, conquered, defender.id)


def wave_schedule(cfg: ExperimentConfig, turns: Optional[int] = None) -> list[tuple[int, int]]:
    """(turn, size) for every scheduled wave; wave k has size min(1 + k//2, max)."""
    last = min(turns if turns is not None else cfg.turns, cfg.wave_last_turn)
    out = []
    k = 0
    t = cfg.wave_first_turn
    while t <= last:
        out.append((t, min(1 + k // 2, cfg.wave_max_size)))
        k += 1
        t += cfg.wave_period
    return out


def _edge_spawn(s: GameState, target: Coord, size: int) -> list[Coord]:
    w, h = s.map.width, s.map.height
    x, y = target
    dists = [(x, "W"), (w - 1 - x, "E"), (y, "N"), (h - 1 - y, "S")]
    _, side = min(dists)
    offsets = [0, 1, -1, 2, -2, 3, -3]
    out = []
    for i in range(size):
        off = offsets[i % len(offsets)]
        if side in ("W", "E"):
            ex = 0 if side == "W" else w - 1
            out.append((ex, min(max(y + off, 0), h - 1)))
        else:
            ey = 0 if side == "N" else h - 1
            out.append((min(max(x + off, 0), w - 1), ey))
    return out


def spawn_wave(s: GameState, wave: WaveSpec, emit=None) -> GameState:
    """Place ``wave.size`` invaders on the map edge nearest the target city."""
    if wave.turn != s.turn:
        raise SimError(f"wave for turn {wave.turn} spawned at turn {s.turn}")
    city = s.cities.get(wave.target_city) if wave.target_city else None
    if city is None:
        return s
    for pos in _edge_spawn(s, city.center, wave.size):
        u = _new_unit(s, "Attacker", INVADER, pos, target=city.id)
        if emit is not None:
            emit("UnitCreated", unit=u.id, city=city.id, pos=pos, result=f"wave{wave.index}")
    s.wave_count += 1
    return s


def _choose_wave(s: GameState, size: int) -> WaveSpec:
    cities = sorted(c.id for c in s.learner_cities())
    target = s.rng["waves"].choice(cities) if cities else None
    return WaveSpec(s.turn, size, target, s.wave_count)


def _nearest_learner_city(s: GameState, pos: Coord) -> Optional[City]:
    cities = s.learner_cities()
    if not cities:
        return None
    return min(cities, key=lambda c: (chebyshev(pos, c.center), manhattan(pos, c.center), c.id))


def _apply_attack(s: GameState, out: CombatOutcome, emit) -> None:
    emit("AttackResolved", unit=out.attacker, target=out.target, result=out.result,
         city=out.target if out.target in s.cities else None)
    if out.loser is not None:
        s.units.pop(out.loser)
        emit("UnitDestroyed", unit=out.loser, result="combat")
    if out.conquered is not None:
        city = s.cities[out.conquered]
        attacker = s.units[out.attacker]
        city.owner = attacker.owner
        city.producing = None
        city.progress = 0
        attacker.pos = city.center
        emit("CityConquered", city=city.id, unit=attacker.id, pos=city.center)


# ------------------------------------------------------------------ turn

Observer = Callable[[GameState, SimEvent], None]


def step_turn(
    s: GameState,
    actions: Mapping[str, ActionSpec],
    observer: Optional[Observer] = None,
) -> tuple[GameState, list[SimEvent]]:
    """Advance one turn in place and return the state with this turn's events."""
    for cid, act in actions.items():
        act = ActionSpec(act)
        if act not in legal_city_actions(s, cid):
            raise IllegalActionError(f"{act} is not legal for {cid} at turn {s.turn}")

    cfg = s.config
    s.turn += 1
    s.events = []
    emit = _Emitter(s, observer)
    emit("TurnStart")

    learner = s.players[LEARNER]
    for cid, act in sorted(actions.items()):
        act = ActionSpec(act)
        if act is not ActionSpec.NoOp:
            city = s.cities[cid]
            city.producing = _PRODUCT[act]
            city.progress = 0

    # production and income
    for city in sorted(s.learner_cities(), key=lambda c: c.id):
        learner.gold += city.gold_yield + (cfg.economy_gold_bonus if city.economy else 0)
        if city.producing is None:
            continue
        city.progress += cfg.production_per_turn
        if city.progress < _item_cost(cfg, city.producing):
            continue
        item = city.producing
        city.producing = None
        city.progress = 0
        if item == "Walls":
            city.walls = True
        elif item == "Economy":
            city.economy = True
        else:
            u = _new_unit(s, item, LEARNER, city.center, home=city.id)
            emit("UnitCreated", unit=u.id, city=city.id, pos=u.pos)
    if s.turn >= cfg.tech_turn:
        learner.techs.add(ELITE_TECH)

    # scripted growth: settlers walk to their site and found a city
    for u in sorted((u for u in s.units.values() if u.kind == "Settler"), key=lambda u: u.id):
        if s.turn >= cfg.growth_end_turn or len(s.learner_cities()) >= cfg.max_cities:
            s.units.pop(u.id)
            emit("UnitDestroyed", unit=u.id, result="disbanded")
            continue
        if u.pos != u.dest:
            u.pos = _step_toward(u.pos, u.dest)
            emit("UnitMoved", unit=u.id, pos=u.pos)
        if u.pos == u.dest and s.city_at(u.pos) is None:
            s.units.pop(u.id)
            city = _found_city(s, u.pos)
            emit("CityFounded", city=city.id, unit=u.id, pos=city.center)

    # invasion waves
    if s.waves_enabled:
        for turn, size in wave_schedule(cfg):
            if turn == s.turn:
                spawn_wave(s, _choose_wave(s, size), emit)

    # learner attackers strike adjacent invaders
    for u in sorted((u for u in s.units.values() if u.owner == LEARNER and u.kind == "Attacker"),
                    key=lambda u: u.id):
        if u.id not in s.units:
            continue
        foes = sorted((e for e in s.invaders() if chebyshev(e.pos, u.pos) == 1), key=lambda e: e.id)
        if foes:
            _apply_attack(s, resolve_attack(u, foes[0], s), emit)

    # invaders: attack the target city when adjacent, otherwise close in
    for uid in sorted(u.id for u in s.invaders()):
        u = s.units.get(uid)
        if u is None or u.kind not in MILITARY_KINDS:
            continue
        target = s.cities.get(u.target) if u.target else None
        if target is None or target.owner != LEARNER:
            target = _nearest_learner_city(s, u.pos)
            u.target = target.id if target else None
        if target is None:
            continue
        if chebyshev(u.pos, target.center) == 1:
            _apply_attack(s, resolve_attack(u, target, s), emit)
        else:
            u.pos = _step_toward(u.pos, target.center)
            emit("UnitMoved", unit=u.id, pos=u.pos)

    return s, s.events


# ------------------------------------------------------------------ digest

def state_dict(s: GameState) -> dict:
    """JSON-ready snapshot, used for determinism checks."""
    return {
        "seed": s.seed,
        "turn": s.turn,
        "terrain": ["".join(t[0] for t in row) for row in s.map.terrain],
        "cities": {k: vars(c) for k, c in sorted(s.cities.items())},
        "units": {k: vars(u) for k, u in sorted(s.units.items())},
        "players": {k: {"gold": p.gold, "techs": sorted(p.techs)} for k, p in sorted(s.players.items())},
        "rng": {k: list(r.getstate()[1]) for k, r in sorted(s.rng.items())},
        "events": [e.as_row() for e in s.events],
    }


def state_digest(s: GameState) -> str:
    blob = json.dumps(state_dict(s), sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()
