"""Two-stage similarity-based retrieval.

MAC compares cheap content vectors (how often each functor occurs) and keeps
the best item plus up to two close runners-up; FAC runs structure mapping on
those survivors only and returns the best mapping.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from ..terms import CaseFacts, Compound
from .sme import GENENT, Mapping, sme_map

MAC_KEEP = 3
MAC_RATIO = 0.9


def content_vector(case: CaseFacts) -> dict[str, float]:
    """Relative frequency of every functor occurrence at any depth.

    Generalized-entity placeholders stand for entities, so they are not
    dimensions.
    """
    counts: Counter = Counter()
    stack = list(case.facts)
    while stack:
        t = stack.pop()
        if isinstance(t, Compound):
            if t.functor != GENENT:
                counts[t.functor] += 1
            stack.extend(t.args)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in sorted(counts.items())}


def dot(u: dict, v: dict) -> float:
    if len(u) > len(v):
        u, v = v, u
    return sum(x * v[k] for k, x in u.items() if k in v)


def mac_stage(probe: dict, library: Iterable[tuple[str, dict]],
              keep: int = MAC_KEEP, ratio: float = MAC_RATIO) -> list[str]:
    """Ids of the top item and up to ``keep - 1`` others scoring at least ``ratio`` of it."""
    scored = sorted(((-dot(probe, vec), item_id) for item_id, vec in library))
    if not scored:
        return []
    top = -scored[0][0]
    out = [scored[0][1]]
    for neg, item_id in scored[1:keep]:
        if -neg >= ratio * top:
            out.append(item_id)
    return out


@dataclass
class Retrieval:
    item_id: str
    item: CaseFacts
    mapping: Mapping
    mac_candidates: tuple

    @property
    def score(self) -> float:
        return self.mapping.normalized_score


def retrieve(probe: CaseFacts, pool) -> Optional[Retrieval]:
    """Best structural match for ``probe`` among a pool's generalizations and outliers.

    ``pool`` supplies ``library()``: ``(id, facts, content vector)`` triples.
    The pool item is the base of every mapping, so candidate inferences carry
    prior experience over to the probe.
    """
    lib = pool.library()
    if not lib:
        return None
    items = {item_id: facts for item_id, facts, _ in lib}
    survivors = mac_stage(content_vector(probe), [(i, v) for i, _, v in lib])
    best: Optional[Retrieval] = None
    for item_id in survivors:
        m = sme_map(items[item_id], probe)
        if best is None or m.normalized_score > best.mapping.normalized_score:
            best = Retrieval(item_id, items[item_id], m, tuple(survivors))
    if best is None or best.score <= 0.0:
        return None
    return best
