"""The shipped quantity catalog.

Definitions are written in the same triple form used for case facts and
loaded through :func:`fluents.load_quantity_definitions`; the Python side only
supplies how each extension and value is computed from the game state.
"""

from __future__ import annotations

from .fluents import FluentStore, QuantityDef, load_quantity_definitions, load_region_encodings
from .sim import LEARNER, MILITARY_KINDS
from .terms import make

WORLD = "World"

CATALOG = """
; cardinality of invader units local to each of the player's cities
(quantityName BattleOpposingUnitCardinality (Attackers CityFootprint))
(quantityEncodingSchemeFor BattleOpposingUnitCardinality DerivativeSignEncoding)
(quantityEncodingSchemeFor BattleOpposingUnitCardinality MagnitudeSignEncoding)

; military units stationed in each city
(quantityName milUnits (milUnits CityFootprint))
(quantityEncodingSchemeFor milUnits DerivativeSignEncoding)
(quantityEncodingSchemeFor milUnits MagnitudeSignEncoding)

; tile count of each invader unit-group footprint
(quantityName regionSize (regionSize UnitGroupFootprint))
(quantityEncodingSchemeFor regionSize DerivativeSignEncoding)

; the history a participant of each footprint kind contributes to a case
(quantityEncodingForRegion BattleOpposingUnitCardinality DerivativeSignEncoding CityFootprint)
(quantityEncodingForRegion milUnits MagnitudeSignEncoding CityFootprint)
(quantityEncodingForRegion regionSize DerivativeSignEncoding UnitGroupFootprint)

; global counts used for phase detection
(quantityName invaderCount (invaderCount World))
(quantityEncodingSchemeFor invaderCount MagnitudeSignEncoding)
(quantityName cityCount (cityCount World))
(quantityEncodingSchemeFor cityCount DerivativeSignEncoding)
"""


def _city_fps(state, scene):
    return [fp.id for fp in scene.cities.values()]


def _city_of(scene, fp_id):
    for cid, fp in scene.cities.items():
        if fp.id == fp_id:
            return cid
    raise KeyError(fp_id)


def _attackers(state, scene, fp_id):
    return scene.local_unit_count(_city_of(scene, fp_id))


def _mil_units(state, scene, fp_id):
    city = state.cities[_city_of(scene, fp_id)]
    n = sum(1 for u in state.units.values()
            if u.owner == LEARNER and u.pos == city.center and u.kind in MILITARY_KINDS)
    return make("UnitCount", n)


def _groups(state, scene):
    return list(scene.groups)


def _region_size(state, scene, gid):
    return make("TileCount", scene.groups[gid].size)


def _world(state, scene):
    return [WORLD]


def _invader_count(state, scene, _):
    return make("UnitCount", sum(1 for u in state.units.values() if u.owner != LEARNER))


def _city_count(state, scene, _):
    return make("CityCount", sum(1 for c in state.cities.values() if c.owner == LEARNER))


IMPLEMENTATIONS = {
    "BattleOpposingUnitCardinality": (_city_fps, _attackers),
    "milUnits": (_city_fps, _mil_units),
    "regionSize": (_groups, _region_size),
    "invaderCount": (_world, _invader_count),
    "cityCount": (_world, _city_count),
}


def default_quantities() -> list[QuantityDef]:
    return load_quantity_definitions(CATALOG, IMPLEMENTATIONS)


def new_store() -> FluentStore:
    store = FluentStore()
    for q in default_quantities():
        store.register_quantity(q)
    return store


# footprint kind -> ((quantity, scheme), ...) selecting participant histories
QUANTITY_ENCODING_FOR_REGION = load_region_encodings(CATALOG)
