"""Experiment configuration and its plain-text key/value file format.

A config file is INI-style text read with :mod:`configparser`::

    [experiment]
    games = 10
    turns = 120
    seeds = 1 2 3 4 5 6 7 8 9 10

    [waves]
    first_turn = 60

Every key is optional; omitted keys keep the defaults below.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

CONDITIONS = ("baseline", "histories")


class ConfigError(ValueError):
    pass


@dataclass
class UnitStats:
    attack: int
    defense: int
    movement: int
    cost: int


@dataclass
class ExperimentConfig:
    # experiment
    conditions: tuple[str, ...] = CONDITIONS
    games: int = 10
    turns: int = 120
    seeds: tuple[int, ...] = tuple(range(1, 11))
    output_dir: str = "out"

    # world
    map_width: int = 24
    map_height: int = 24
    starting_cities: int = 1
    max_cities: int = 6
    growth_end_turn: int = 40
    city_spacing: int = 5
    edge_margin: int = 4
    hill_fraction: float = 0.3
    desert_fraction: float = 0.2
    tech_turn: int = 100

    # economy
    production_per_turn: int = 2
    gold_per_city: int = 1
    economy_gold_bonus: int = 2
    walls_cost: int = 10
    economy_cost: int = 8

    # waves
    wave_first_turn: int = 60
    wave_period: int = 6
    wave_max_size: int = 5
    wave_last_turn: int = 10_000

    # combat
    wall_bonus: float = 2.0
    hill_defense: float = 1.5
    units: dict[str, UnitStats] = field(default_factory=lambda: {
        "Defender": UnitStats(attack=1, defense=2, movement=1, cost=6),
        "Attacker": UnitStats(attack=3, defense=1, movement=1, cost=6),
        "EliteDefender": UnitStats(attack=1, defense=5, movement=1, cost=12),
        "Settler": UnitStats(attack=0, defense=1, movement=1, cost=10),
    })

    # analogy
    assimilation_threshold: float = 0.8
    probability_cutoff: float = 0.2

    def validate(self) -> None:
        if self.map_width < 20 or self.map_height < 20:
            raise ConfigError(f"map must be at least 20x20, got {self.map_width}x{self.map_height}")
        if self.starting_cities < 1:
            raise ConfigError("need at least one starting city")
        if self.max_cities < self.starting_cities:
            raise ConfigError("max_cities below starting_cities")
        if self.turns < 1:
            raise ConfigError("turns must be positive")
        if self.games < 1:
            raise ConfigError("games must be positive")
        if len(self.seeds) < self.games:
            raise ConfigError(f"{self.games} games need at least {self.games} seeds, got {len(self.seeds)}")
        for c in self.conditions:
            if c not in CONDITIONS:
                raise ConfigError(f"unknown condition {c!r}")
        for name in ("assimilation_threshold", "probability_cutoff"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.wave_period < 1:
            raise ConfigError("wave_period must be positive")
        for kind, st in self.units.items():
            if kind != "Settler" and st.movement < 1:
                raise ConfigError(f"{kind} needs movement >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# section -> key -> (attribute, parser)
def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(",", " ").split())


def _words(s: str) -> tuple[str, ...]:
    return tuple(x for x in s.replace(",", " ").split())


_SCHEMA = {
    "experiment": {
        "conditions": ("conditions", _words),
        "games": ("games", int),
        "turns": ("turns", int),
        "seeds": ("seeds", _ints),
        "output_dir": ("output_dir", str),
    },
    "world": {
        "map_width": ("map_width", int),
        "map_height": ("map_height", int),
        "starting_cities": ("starting_cities", int),
        "max_cities": ("max_cities", int),
        "growth_end_turn": ("growth_end_turn", int),
        "city_spacing": ("city_spacing", int),
        "edge_margin": ("edge_margin", int),
        "hill_fraction": ("hill_fraction", float),
        "desert_fraction": ("desert_fraction", float),
        "tech_turn": ("tech_turn", int),
    },
    "economy": {
        "production_per_turn": ("production_per_turn", int),
        "gold_per_city": ("gold_per_city", int),
        "economy_gold_bonus": ("economy_gold_bonus", int),
        "walls_cost": ("walls_cost", int),
        "economy_cost": ("economy_cost", int),
    },
    "waves": {
        "first_turn": ("wave_first_turn", int),
        "period": ("wave_period", int),
        "max_size": ("wave_max_size", int),
        "last_turn": ("wave_last_turn", int),
    },
    "combat": {
        "wall_bonus": ("wall_bonus", float),
        "hill_defense": ("hill_defense", float),
    },
    "analogy": {
        "assimilation_threshold": ("assimilation_threshold", float),
        "probability_cutoff": ("probability_cutoff", float),
    },
}


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return config_from_parser(parser)


def config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    cfg = ExperimentConfig()
    units = {k: dataclasses.replace(v) for k, v in cfg.units.items()}
    changes = {}
    for section in parser.sections():
        if section.startswith("unit."):
            kind = section[5:]
            if kind not in units:
                raise ConfigError(f"unknown unit kind {kind!r}")
            for key, raw in parser.items(section):
                if key not in ("attack", "defense", "movement", "cost"):
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                setattr(units[kind], key, int(raw))
            continue
        schema = _SCHEMA.get(section)
        if schema is None:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            attr, conv = schema[key]
            try:
                changes[attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from None
    cfg = dataclasses.replace(cfg, units=units, **changes)
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` in the file format accepted by :func:`load_config`."""
    lines = []
    for section, schema in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (attr, _) in schema.items():
            v = getattr(cfg, attr)
            if isinstance(v, tuple):
                v = " ".join(str(x) for x in v)
            lines.append(f"{key} = {v}")
        lines.append("")
    for kind, st in cfg.units.items():
        lines.append(f"[unit.{kind}]")
        for key in ("attack", "defense", "movement", "cost"):
            lines.append(f"{key} = {getattr(st, key)}")
        lines.append("")
    return "\n".join(lines)
