"""Seeded two-condition experiments, scripted scenarios and their CSV outputs.

Output layout under ``out``::

    metrics_<condition>_<game>.csv     turn, cities, gold (turns + 1 rows)
    decisions_<condition>_<game>.csv   one row per city per turn
    cases/<condition>_<game>_<episode>.case
    cases/manifest.csv
    gpools/<condition>_<game>/{DefenseSuccess,DefenseFailure}/
    summary.csv
    errors.csv                         only when a run failed
"""

from __future__ import annotations

import csv
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Optional, Union

from .analogy.sage import FAILURE_POOL, POOL_FOR_OUTCOME, SUCCESS_POOL, Gpool, sage_add, save_gpool
from .config import CONDITIONS, ConfigError, ExperimentConfig
from .decisions import DECISION_FIELDS, Decision, RetrievalCache, decide, default_goal_network
from .episodes import (
    Episode, EpisodeCase, Perception, construct_case, write_case, write_manifest,
)
from .fluents import Timepoint
from .sim import LEARNER, GameState, new_game, scenario_state, step_turn

log = logging.getLogger(__name__)

METRIC_FIELDS = ("turn", "cities", "gold")
SUMMARY_FIELDS = (
    "condition", "games", "episodes", "mean-facts", "mean-cities", "mean-gold",
    "final-cities", "final-gold",
)


class Agent:
    """The learning player of one condition: perception, memory and decisions."""

    def __init__(self, condition: str, cfg: ExperimentConfig):
        if condition not in CONDITIONS:
            raise ConfigError(f"unknown condition {condition!r}")
        self.condition = condition
        self.perception = Perception(condition)
        self.pools = {
            label: Gpool(label, cfg.assimilation_threshold, cfg.probability_cutoff)
            for label in (SUCCESS_POOL, FAILURE_POOL)
        }
        self.net = default_goal_network()
        self.net.validate(self.perception.store)
        self.cache = RetrievalCache()
        self.closed: list[Episode] = []
        self.cases: list[EpisodeCase] = []

    def start(self, state: GameState) -> None:
        self.perception.sample(state, Timepoint(state.turn, 0))

    def observe(self, state: GameState, ev) -> None:
        self.closed.extend(self.perception.observe(state, ev))

    def choose(self, state: GameState) -> tuple[dict, list[Decision]]:
        actions, log_rows = {}, []
        for city in sorted(state.learner_cities(), key=lambda c: c.id):
            d = decide(city.id, state, self.perception, self.pools, self.net, self.cache)
            actions[city.id] = d.action
            log_rows.append(d)
        return actions, log_rows

    def learn(self) -> list[EpisodeCase]:
        """Turn newly closed episodes into cases and add them to their outcome pool."""
        new = []
        for ep in self.closed:
            case = construct_case(ep, self.perception.store, self.perception.kinds)
            case.metadata["condition"] = self.condition
            sage_add(self.pools[POOL_FOR_OUTCOME[case.outcome]], case)
            new.append(case)
        self.closed = []
        self.cases.extend(new)
        return new

    def finish(self) -> list[EpisodeCase]:
        self.closed.extend(self.perception.segmenter.flush(self.perception.now))
        return self.learn()


@dataclass
class RunResult:
    condition: str
    game: int
    seed: int
    metrics: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    cases: list = field(default_factory=list)
    pools: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def episode_count(self) -> int:
        return len(self.cases)

    @property
    def mean_facts(self) -> float:
        return fmean(c.fact_count for c in self.cases) if self.cases else 0.0


def _metric_row(state: GameState) -> dict:
    return {
        "turn": state.turn,
        "cities": len(state.learner_cities()),
        "gold": state.players[LEARNER].gold,
    }


def run_game(cfg: ExperimentConfig, condition: str, game: int, seed: int) -> RunResult:
    state = new_game(cfg, seed)
    agent = Agent(condition, cfg)
    agent.start(state)
    result = RunResult(condition, game, seed, metrics=[_metric_row(state)])
    for _ in range(cfg.turns):
        actions, decisions = agent.choose(state)
        result.decisions.extend(decisions)
        step_turn(state, actions, agent.observe)
        agent.learn()
        result.metrics.append(_metric_row(state))
    agent.finish()
    result.cases = agent.cases
    result.pools = agent.pools
    return result


# ------------------------------------------------------------------ outputs

def _write_csv(path: Path, fields: Iterable[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_run(result: RunResult, out: Path) -> list[dict]:
    """Per-run files; returns the run's manifest rows."""
    tag = f"{result.condition}_{result.game}"
    _write_csv(out / f"metrics_{tag}.csv", METRIC_FIELDS, result.metrics)
    _write_csv(out / f"decisions_{tag}.csv", DECISION_FIELDS, (d.as_row() for d in result.decisions))
    rows = [write_case(c, out / "cases", result.condition, result.game) for c in result.cases]
    for label, pool in result.pools.items():
        save_gpool(pool, out / "gpools" / tag / label)
    return rows


def run_experiment(cfg: ExperimentConfig, out: Union[str, Path], conditions: Optional[Iterable[str]] = None,
                   seed_offset: int = 0) -> list[RunResult]:
    cfg.validate()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    conditions = tuple(conditions or cfg.conditions)
    results, manifest, errors = [], [], []
    for condition in conditions:
        for game in range(1, cfg.games + 1):
            seed = cfg.seeds[game - 1] + seed_offset
            log.info("running %s game %d (seed %d)", condition, game, seed)
            try:
                r = run_game(cfg, condition, game, seed)
                manifest.extend(write_run(r, out))
            except Exception as exc:  # one failed run must not sink the others
                log.error("%s game %d failed: %s", condition, game, exc)
                r = RunResult(condition, game, seed, error="".join(traceback.format_exception_only(type(exc), exc)).strip())
                errors.append({"condition": condition, "game": game, "seed": seed, "error": r.error})
            results.append(r)
    (out / "cases").mkdir(exist_ok=True)
    write_manifest(manifest, out / "cases" / "manifest.csv")
    if errors:
        _write_csv(out / "errors.csv", ("condition", "game", "seed", "error"), errors)
    summarize(out)
    return results


# ------------------------------------------------------------------ summary

def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def summarize(directory: Union[str, Path]) -> list[dict]:
    """Per-condition table built from the files of a finished run; writes ``summary.csv``."""
    d = Path(directory)
    manifest_path = d / "cases" / "manifest.csv"
    manifest = _read_csv(manifest_path) if manifest_path.exists() else []
    rows = []
    for condition in CONDITIONS:
        files = sorted(d.glob(f"metrics_{condition}_*.csv"))
        if not files:
            continue
        series = [_read_csv(f) for f in files]
        cases = [m for m in manifest if m["case-file"].startswith(f"{condition}_")]
        facts = [int(m["fact-count"]) for m in cases]
        rows.append({
            "condition": condition,
            "games": len(series),
            "episodes": len(cases),
            "mean-facts": _fmt(fmean(facts)) if facts else "",
            "mean-cities": _fmt(fmean(int(r["cities"]) for s in series for r in s)),
            "mean-gold": _fmt(fmean(int(r["gold"]) for s in series for r in s)),
            "final-cities": _fmt(fmean(int(s[-1]["cities"]) for s in series)),
            "final-gold": _fmt(fmean(int(s[-1]["gold"]) for s in series)),
        })
    if not rows:
        raise FileNotFoundError(f"no metrics files under {d}")
    _write_csv(d / "summary.csv", SUMMARY_FIELDS, rows)
    return rows


# ------------------------------------------------------------------ scenarios

@dataclass(frozen=True)
class Scenario:
    name: str
    attackers: tuple
    defenders: int
    combat_script: tuple
    turns: int = 8


CITY = (10, 10)

SCENARIOS = {
    # three separate attackers approach; the first two die, the third takes the city
    "three-attacker": Scenario(
        "three-attacker", ((11, 10), (9, 7), (11, 14)), 1, ("defender", "defender", "attacker"),
    ),
    # two attackers strike at once and both die
    "two-attacker": Scenario("two-attacker", ((11, 10), (9, 10)), 1, ("defender", "defender")),
    "single-attack": Scenario("single-attack", ((11, 10),), 1, ("defender",)),
}


def run_scenario(name: str, condition: str, cfg: Optional[ExperimentConfig] = None) -> RunResult:
    """Replay a scripted siege with no waves and no agent decisions."""
    try:
        sc = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    cfg = cfg or ExperimentConfig()
    state = scenario_state(cfg, CITY, sc.defenders, sc.attackers, combat_script=sc.combat_script)
    agent = Agent(condition, cfg)
    agent.start(state)
    result = RunResult(condition, 1, state.seed, metrics=[_metric_row(state)])
    for _ in range(sc.turns):
        step_turn(state, {}, agent.observe)
        agent.learn()
        result.metrics.append(_metric_row(state))
        if not state.invaders() or not state.learner_cities():
            break
    agent.finish()
    result.cases = agent.cases
    result.pools = agent.pools
    return result


def write_scenario(result: RunResult, out: Union[str, Path]) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [write_case(c, out / "cases", result.condition, result.game) for c in result.cases]
    write_manifest(rows, out / "cases" / "manifest.csv")
