"""Battle segmentation and case construction.

Two segmentations are supported:

``histories``
    A battle opens when an invader attacks a city and stays open while any
    invader unit group remains RCC2-connected to the city footprint.  It closes
    with a failure when the city falls, or with a success once no local
    invader group is left.
``baseline``
    Every attack on a city is its own one-attack episode, closed at the very
    next event; it fails only if that attack took the city.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .fluents import FluentStore, QualInterval, Timepoint, CHANGE_PREDICATE, allen_relation, temporally_local
from .footprints import CITY_FOOTPRINT, GROUP_FOOTPRINT, FootprintTracker, Scene, build_scene, city_footprint_id
from .quantities import QUANTITY_ENCODING_FOR_REGION, new_store
from .sim import INVADER, LEARNER, GameState, SimEvent
from .terms import CaseFacts, Compound, make, write_fact_file

BASELINE = "baseline"
HISTORIES = "histories"
MODES = (BASELINE, HISTORIES)

SUCCESS = "Success"
FAILURE = "Failure"
OUTCOME_TYPE = {SUCCESS: "DefensiveEpisodeSuccess", FAILURE: "DefensiveEpisodeFailure"}

INTERVAL_TYPE = "QualitativeTimeInterval"
PROBE_EVENT = "SkolemEvent"
PROBE_EVENT_TYPE = "HypotheticalEpisode"


class CaseError(Exception):
    pass


@dataclass
class Episode:
    id: str
    city_id: str
    mode: str
    start: Timepoint
    terrain: str = "Plains"
    walls: bool = False
    end: Optional[Timepoint] = None
    participants: set = field(default_factory=set)
    outcome: Optional[str] = None
    attacks: int = 0

    @property
    def city_fp(self) -> str:
        return city_footprint_id(self.city_id)

    @property
    def is_open(self) -> bool:
        return self.end is None


@dataclass
class EpisodeCase:
    name: str
    facts: CaseFacts
    outcome: Optional[str]  # None for probe cases
    metadata: dict = field(default_factory=dict)

    @property
    def fact_count(self) -> int:
        return len(self.facts)

    @property
    def label(self) -> Optional[str]:
        return None if self.outcome is None else OUTCOME_TYPE[self.outcome]


# ------------------------------------------------------------------ segmentation

class Segmenter:
    def __init__(self, mode: str, store: FluentStore):
        if mode not in MODES:
            raise CaseError(f"unknown segmentation mode {mode!r}")
        self.mode = mode
        self.store = store
        self.open: dict[str, Episode] = {}
        self.closed: list[Episode] = []
        self._pending: list[tuple[Episode, str]] = []  # baseline: close at next event
        self._next = 1

    def _new_episode(self, state: GameState, city_id: str, t: Timepoint) -> Episode:
        city = state.cities[city_id]
        ep = Episode(
            f"E{self._next}", city_id, self.mode, t,
            terrain=state.map.tile(city.center).terrain, walls=city.walls,
        )
        self._next += 1
        self.store.open_event(ep.id)
        return ep

    def _close(self, ep: Episode, t: Timepoint, outcome: str) -> Episode:
        ep.end = t
        ep.outcome = outcome
        self.store.close_event(ep.id)
        self.closed.append(ep)
        return ep

    def _add_participants(self, ep: Episode, ids: Iterable[str]) -> None:
        for p in ids:
            ep.participants.add(p)
            self.store.record_participant(ep.id, p)

    def on_sim_events(self, state: GameState, events: Iterable[SimEvent], scene: Scene) -> list[Episode]:
        """Feed events (already sampled); returns the episodes closed by them."""
        done = []
        for ev in events:
            if self.mode == BASELINE:
                done.extend(self._baseline(state, ev, scene))
            else:
                done.extend(self._histories(state, ev, scene))
        return done

    def flush(self, t: Timepoint) -> list[Episode]:
        """Close baseline episodes still waiting for a next event.

        Histories episodes that are still open have no outcome yet and stay open.
        """
        done = [self._close(ep, t, outcome) for ep, outcome in self._pending]
        self._pending = []
        return done

    def _is_city_attack(self, state: GameState, ev: SimEvent) -> bool:
        if ev.kind != "AttackResolved" or ev.city is None:
            return False
        city = state.cities.get(ev.city)
        return city is not None and city.owner == LEARNER

    def _baseline(self, state, ev, scene) -> list[Episode]:
        done = [self._close(ep, ev.time, outcome) for ep, outcome in self._pending]
        self._pending = []
        if self._is_city_attack(state, ev):
            ep = self._new_episode(state, ev.city, ev.time)
            ep.attacks = 1
            group = scene.unit_group.get(ev.unit)
            self._add_participants(ep, [ep.city_fp] + ([group] if group else []))
            self._pending.append((ep, FAILURE if ev.result == "Conquered" else SUCCESS))
        return done

    def _histories(self, state, ev, scene) -> list[Episode]:
        done = []
        opened_now = None
        if self._is_city_attack(state, ev):
            ep = self.open.get(ev.city)
            if ep is None:
                ep = self._new_episode(state, ev.city, ev.time)
                self.open[ev.city] = ep
                opened_now = ev.city
            ep.attacks += 1
        if ev.kind == "CityConquered" and ev.city in self.open:
            ep = self.open.pop(ev.city)
            done.append(self._close(ep, ev.time, FAILURE))
        for cid in sorted(self.open):
            ep = self.open[cid]
            local = scene.local.get(cid, [])
            self._add_participants(ep, [ep.city_fp] + list(local))
            if cid != opened_now and not local:
                del self.open[cid]
                done.append(self._close(ep, ev.time, SUCCESS))
        return done


class Perception:
    """Footprints, fluents and segmentation for one agent, fed event by event."""

    def __init__(self, mode: str):
        self.mode = mode
        self.store = new_store()
        self.tracker = FootprintTracker()
        self.segmenter = Segmenter(mode, self.store)
        self.scene: Optional[Scene] = None
        self.kinds: dict[str, str] = {}

    def sample(self, state: GameState, t: Timepoint) -> Scene:
        scene = build_scene(state, self.tracker, LEARNER, INVADER)
        for fp in scene.cities.values():
            self.kinds[fp.id] = CITY_FOOTPRINT
        for gid in scene.groups:
            self.kinds[gid] = GROUP_FOOTPRINT
        self.store.sample_all(state, t, scene)
        self.scene = scene
        return scene

    def observe(self, state: GameState, ev: SimEvent) -> list[Episode]:
        scene = self.sample(state, ev.time)
        return self.segmenter.on_sim_events(state, [ev], scene)

    __call__ = observe

    @property
    def now(self) -> Timepoint:
        """A virtual tick just after the latest sample, used to resolve open intervals."""
        t = self.store.last_time or Timepoint(0, 0)
        return Timepoint(t.turn, t.seq + 1)


# ------------------------------------------------------------------ case facts

def _interval_facts(iv: QualInterval, store: FluentStore) -> list[Compound]:
    qdef = store.quantities[iv.quantity]
    return [
        make("isa", iv.id, INTERVAL_TYPE),
        make(CHANGE_PREDICATE[iv.value], iv.id, qdef.quantity_term(iv.entity)),
    ]


def _participant_facts(p: str, kinds: dict, city_attrs: dict) -> list[Compound]:
    kind = kinds.get(p)
    if kind is None:
        raise CaseError(f"participant {p} has no known footprint kind")
    out = [make("isa", p, kind)]
    if p in city_attrs:
        terrain, walls = city_attrs[p]
        out.append(make("terrainOf", p, terrain))
        if walls:
            out.append(make("hasCityWalls", p))
    return out


def _histories(participants, store, kinds, keep) -> list[QualInterval]:
    out = []
    for p in sorted(participants):
        for qname, scheme in QUANTITY_ENCODING_FOR_REGION.get(kinds[p], ()):
            for iv in store.timeline(qname, p, scheme):
                if keep(iv):
                    out.append(iv)
    return out


def _allen_facts(items: list[tuple[str, tuple]]) -> list[Compound]:
    out = []
    for i, (a, sa) in enumerate(items):
        for b, sb in items[i + 1:]:
            if temporally_local(sa, sb):
                out.append(make(allen_relation(sa, sb).predicate, a, b))
    return out


def _value_facts(event: str, p: str, store: FluentStore, start: Timepoint, end: Optional[Timepoint]) -> list[Compound]:
    out = []
    for qdef in store.quantities_for(p):
        qterm = qdef.quantity_term(p)
        if end is None:
            v = store.value_at(qdef.name, p, start)
            if v is not None:
                out.append(make("holdsIn", make("StartFn", event), make("valueOf", qterm, v)))
            continue
        v0 = store.value_at(qdef.name, p, start)
        if v0 is None:
            v0 = store.first_value_between(qdef.name, p, start, end)
        v1 = store.value_at(qdef.name, p, end)
        if v0 is not None:
            out.append(make("holdsIn", make("StartFn", event), make("valueOf", qterm, v0)))
        if v1 is not None:
            out.append(make("holdsIn", make("EndFn", event), make("valueOf", qterm, v1)))
    return out


def construct_case(ep: Episode, store: FluentStore, kinds: dict, now: Optional[Timepoint] = None,
                   name: Optional[str] = None) -> EpisodeCase:
    """Structured description of a closed battle."""
    if ep.is_open or ep.outcome is None:
        raise CaseError(f"episode {ep.id} is still open")
    window = (ep.start, ep.end)
    if now is None:
        # any tick after the latest sample gives the same relations
        last = max(ep.end, store.last_time or ep.end)
        now = Timepoint(last.turn, last.seq + 1)
    if now <= ep.end:
        raise CaseError(f"'now' {now} does not follow the end of {ep.id}")
    participants = sorted(store.participants(ep.id)) or [ep.city_fp]
    city_attrs = {ep.city_fp: (ep.terrain, ep.walls)}
    facts: list[Compound] = []

    extent = f"{ep.id}-Extent"
    facts.append(make("isa", ep.id, OUTCOME_TYPE[ep.outcome]))
    facts.append(make("isa", extent, INTERVAL_TYPE))
    facts.append(make("temporalExtentOf", ep.id, extent))
    for p in participants:
        facts.append(make("eventParticipant", ep.id, p))
        facts.extend(_participant_facts(p, kinds, city_attrs))

    ivs = _histories(participants, store, kinds, lambda iv: temporally_local(iv.span(now), window))
    for iv in ivs:
        facts.extend(_interval_facts(iv, store))
    for iv in ivs:
        facts.append(make(allen_relation(window, iv.span(now)).predicate, extent, iv.id))
    facts.extend(_allen_facts([(iv.id, iv.span(now)) for iv in ivs]))

    for p in participants:
        facts.extend(_value_facts(ep.id, p, store, ep.start, ep.end))

    meta = {
        "episode": ep.id, "city": ep.city_id, "mode": ep.mode, "outcome": ep.outcome,
        "start_turn": ep.start.turn, "end_turn": ep.end.turn, "attacks": ep.attacks,
        "participants": len(participants),
    }
    return EpisodeCase(name or ep.id, CaseFacts(facts), ep.outcome, meta)


def construct_probe_case(state: GameState, city_id: str, perception: Perception) -> EpisodeCase:
    """Partial description of the city's present, read as the start of a hypothetical battle."""
    city = state.cities.get(city_id)
    if city is None or city.owner != LEARNER:
        raise CaseError(f"{city_id} is not a city of the learning player")
    scene, store = perception.scene, perception.store
    if scene is None:
        raise CaseError("nothing has been sampled yet")
    now = perception.now
    cfp = city_footprint_id(city_id)
    participants = [cfp] + sorted(scene.local.get(city_id, []))
    city_attrs = {cfp: (state.map.tile(city.center).terrain, city.walls)}
    facts: list[Compound] = [make("isa", PROBE_EVENT, PROBE_EVENT_TYPE)]
    for p in participants:
        facts.append(make("eventParticipant", PROBE_EVENT, p))
        facts.extend(_participant_facts(p, perception.kinds, city_attrs))
    ivs = _histories(participants, store, perception.kinds, lambda iv: iv.is_open)
    for iv in ivs:
        facts.extend(_interval_facts(iv, store))
    facts.extend(_allen_facts([(iv.id, iv.span(now)) for iv in ivs]))
    t = store.last_time
    for p in participants:
        facts.extend(_value_facts(PROBE_EVENT, p, store, t, None))
    meta = {"city": city_id, "turn": state.turn, "participants": len(participants)}
    return EpisodeCase(f"probe-{city_id}-{state.turn}", CaseFacts(facts), None, meta)


# ------------------------------------------------------------------ archive

MANIFEST_FIELDS = ("case-file", "outcome", "fact-count", "turns")


def case_filename(condition: str, game: int, episode: str) -> str:
    return f"{condition}_{game}_{episode}.case"


def write_case(case: EpisodeCase, directory: Path, condition: str, game: int) -> dict:
    directory.mkdir(parents=True, exist_ok=True)
    fname = case_filename(condition, game, case.name)
    meta = case.metadata
    comments = [f"{k}: {meta[k]}" for k in sorted(meta)]
    write_fact_file(directory / fname, case.facts.facts, comments)
    return {
        "case-file": fname,
        "outcome": case.outcome or "",
        "fact-count": case.fact_count,
        "turns": f"{meta.get('start_turn', '')}-{meta.get('end_turn', '')}",
    }


def write_manifest(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
