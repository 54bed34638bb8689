"""Footprints: compound spatial regions on the tile grid.

Tiles are closed unit squares centred on integer coordinates, so two regions
are RCC2-connected when they share a tile or hold tiles that touch along an
edge or at a corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional

Coord = tuple[int, int]
Region = frozenset  # frozenset[Coord]

CITY_FOOTPRINT = "CityFootprint"
UNIT_FOOTPRINT = "UnitFootprint"
GROUP_FOOTPRINT = "UnitGroupFootprint"

REMOVED = "Removed"


class FootprintError(ValueError):
    pass


@dataclass(frozen=True)
class Footprint:
    id: str
    kind: str
    constituents: frozenset
    region: Region

    @property
    def size(self) -> int:
        return len(self.region)


# ------------------------------------------------------------------ geometry

def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull_vertices(points: list[Coord]) -> list[Coord]:
    """Andrew's monotone chain; counter-clockwise, collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[Coord] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Coord] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _on_segment(p, a, b) -> bool:
    return (_cross(a, b, p) == 0
            and min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


@lru_cache(maxsize=65536)
def _hull_cached(tiles: frozenset) -> Region:
    verts = _hull_vertices(list(tiles))
    if len(verts) == 1:
        return frozenset(verts)
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    out = []
    for y in range(min(ys), max(ys) + 1):
        for x in range(min(xs), max(xs) + 1):
            p = (x, y)
            if len(verts) == 2:
                if _on_segment(p, verts[0], verts[1]):
                    out.append(p)
            elif all(_cross(verts[i], verts[(i + 1) % len(verts)], p) >= 0 for i in range(len(verts))):
                out.append(p)
    return frozenset(out)


def convex_hull_tiles(tiles: Iterable[Coord]) -> Region:
    """Every tile whose centre lies inside or on the convex hull of the input centres."""
    tiles = frozenset(tiles)
    if not tiles:
        raise FootprintError("convex hull of an empty tile set")
    return _hull_cached(tiles)


_NEIGHBOURHOOD = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


def rcc2_connected(a: Iterable[Coord], b: Iterable[Coord]) -> bool:
    """True when the closed-square regions share at least one point."""
    a = a if isinstance(a, frozenset) else frozenset(a)
    b = b if isinstance(b, frozenset) else frozenset(b)
    if not a or not b:
        return False
    if len(a) > len(b):
        a, b = b, a
    if not a.isdisjoint(b):
        return True
    for x, y in a:
        for dx, dy in _NEIGHBOURHOOD:
            if (x + dx, y + dy) in b:
                return True
    return False


def _clip(tiles: Iterable[Coord], width: int, height: int) -> frozenset:
    return frozenset((x, y) for x, y in tiles if 0 <= x < width and 0 <= y < height)


# ------------------------------------------------------------------ footprints

def city_region(center: Coord, width: int, height: int) -> Region:
    cx, cy = center
    tiles = [
        (cx + dx, cy + dy)
        for dx in range(-2, 3) for dy in range(-2, 3)
        if not (abs(dx) == 2 and abs(dy) == 2)
    ]
    return convex_hull_tiles(_clip(tiles, width, height))


def city_footprint(city, gmap, fp_id: Optional[str] = None) -> Footprint:
    """The 21-tile city region (5x5 block without its corners), clipped to the map."""
    return Footprint(
        fp_id or city_footprint_id(city.id), CITY_FOOTPRINT, frozenset([city.id]),
        city_region(city.center, gmap.width, gmap.height),
    )


def city_footprint_id(city_id: str) -> str:
    return f"CityRegion-{city_id}"


@lru_cache(maxsize=16384)
def movement_region(pos: Coord, movement: int, width: int, height: int) -> Region:
    x, y = pos
    m = max(movement, 0)
    tiles = [
        (x + dx, y + dy)
        for dx in range(-m, m + 1) for dy in range(-m, m + 1)
        if abs(dx) + abs(dy) <= m
    ]
    return convex_hull_tiles(_clip(tiles, width, height))


def unit_footprint(unit, gmap) -> Footprint:
    """Convex hull of the tiles reachable in one turn of orthogonal moves."""
    return Footprint(
        f"UnitRegion-{unit.id}", UNIT_FOOTPRINT, frozenset([unit.id]),
        movement_region(unit.pos, unit.movement, gmap.width, gmap.height),
    )


def group_unit_footprints(units: Iterable, gmap) -> list[Footprint]:
    """Connected components of unit footprints under RCC2 connectivity.

    Returned groups carry provisional ids (``Group-<first unit id>``);
    :class:`FootprintTracker` assigns persistent ones.
    """
    units = sorted(units, key=lambda u: u.id)
    fps = [unit_footprint(u, gmap) for u in units]
    parent = list(range(len(units)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(fps)):
        for j in range(i + 1, len(fps)):
            if find(i) != find(j) and rcc2_connected(fps[i].region, fps[j].region):
                parent[find(i)] = find(j)
    comps: dict[int, list[int]] = {}
    for i in range(len(units)):
        comps.setdefault(find(i), []).append(i)
    out = []
    for members in comps.values():
        tiles = frozenset().union(*(fps[i].region for i in members))
        ids = frozenset(units[i].id for i in members)
        out.append(Footprint(f"Group-{units[members[0]].id}", GROUP_FOOTPRINT, ids, convex_hull_tiles(tiles)))
    out.sort(key=lambda f: f.id)
    return out


# ------------------------------------------------------------------ persistence

@dataclass
class PersistenceMap:
    successor: dict[str, str] = field(default_factory=dict)  # prev id -> curr id | REMOVED
    appeared: set = field(default_factory=set)

    def persisted(self) -> dict[str, str]:
        return {p: c for p, c in self.successor.items() if c != REMOVED}

    def removed(self) -> set:
        return {p for p, c in self.successor.items() if c == REMOVED}


def persist_compounds(prev: Iterable[Footprint], curr: Iterable[Footprint]) -> PersistenceMap:
    """Match compound entities across two timepoints by constituent overlap.

    A previous footprint persists as the overlapping current footprint with the
    most constituents (smallest id on ties).  When several previous footprints
    claim one successor the largest claimant keeps it and the rest are removed.
    """
    prev = sorted(prev, key=lambda f: f.id)
    curr = sorted(curr, key=lambda f: f.id)
    claims: dict[str, list[Footprint]] = {}
    pm = PersistenceMap()
    for p in prev:
        cands = [c for c in curr if p.constituents & c.constituents]
        if not cands:
            pm.successor[p.id] = REMOVED
            continue
        best = min(cands, key=lambda c: (-len(c.constituents), c.id))
        claims.setdefault(best.id, []).append(p)
    for cid, claimants in claims.items():
        winner = min(claimants, key=lambda p: (-len(p.constituents), p.id))
        for p in claimants:
            pm.successor[p.id] = cid if p is winner else REMOVED
    taken = set(claims)
    pm.appeared = {c.id for c in curr if c.id not in taken}
    return pm


class FootprintTracker:
    """Keeps unit-group identities stable from one timepoint to the next."""

    def __init__(self, prefix: str = "Group"):
        self.prefix = prefix
        self.previous: list[Footprint] = []
        self._next = 1

    def update(self, provisional: list[Footprint]) -> list[Footprint]:
        pm = persist_compounds(self.previous, provisional)
        inherited = {c: p for p, c in pm.persisted().items()}
        out = []
        for fp in provisional:
            if fp.id in inherited:
                fid = inherited[fp.id]
            else:
                fid = f"{self.prefix}{self._next}"
                self._next += 1
            out.append(Footprint(fid, fp.kind, fp.constituents, fp.region))
        out.sort(key=lambda f: f.id)
        self.previous = out
        return out


# ------------------------------------------------------------------ scene

@dataclass
class Scene:
    """Footprints of one timepoint, seen from the learning player."""

    cities: dict[str, Footprint]          # city id -> city footprint
    groups: dict[str, Footprint]          # group id -> invader group footprint
    local: dict[str, list[str]]           # city id -> rcc2-connected group ids
    unit_group: dict[str, str]            # invader unit id -> group id

    def footprint(self, fp_id: str) -> Optional[Footprint]:
        if fp_id in self.groups:
            return self.groups[fp_id]
        for fp in self.cities.values():
            if fp.id == fp_id:
                return fp
        return None

    def local_unit_count(self, city_id: str) -> int:
        return sum(len(self.groups[g].constituents) for g in self.local.get(city_id, ()))


def build_scene(state, tracker: FootprintTracker, learner: str, invader: str) -> Scene:
    gmap = state.map
    cities = {
        c.id: city_footprint(c, gmap)
        for c in sorted(state.cities.values(), key=lambda c: c.id) if c.owner == learner
    }
    enemy = [u for u in state.units.values() if u.owner == invader]
    groups = {g.id: g for g in tracker.update(group_unit_footprints(enemy, gmap))}
    local = {
        cid: [gid for gid, g in groups.items() if rcc2_connected(fp.region, g.region)]
        for cid, fp in cities.items()
    }
    unit_group = {u: gid for gid, g in groups.items() for u in g.constituents}
    return Scene(cities, groups, local, unit_group)
