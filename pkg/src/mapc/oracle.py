"""Exhaustive maximiser of the regularisation objective for small instances."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .inference import BACKGROUND, ObjectiveWeights, objective_value
from .similarity import SimilarityModel

MAX_POINTS = 10


class InstanceTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    best_assignment: np.ndarray
    best_value: float
    enumerated_count: int


def _exemplar_sets(n: int, box_ids: Sequence[int] | None, allow_empty: bool):
    for mask in range(0 if allow_empty else 1, 1 << n):
        ex = [j for j in range(n) if mask >> j & 1]
        if box_ids is not None:
            boxes = [box_ids[j] for j in ex]
            if len(set(boxes)) != len(boxes):
                continue
        yield ex


def enumerate_valid_assignments(
    n: int,
    box_ids: Sequence[int] | None = None,
    allow_background: bool = True,
) -> Iterator[np.ndarray]:
    """Yield every feasible assignment of ``n`` points.

    Order: exemplar sets by increasing bitmask, then member choices in
    lexicographic order with the background first and exemplars ascending.
    ``box_ids=None`` disables the one-exemplar-per-box rule.
    """
    if n > MAX_POINTS:
        raise InstanceTooLarge(f"{n} points exceed the oracle cap of {MAX_POINTS}")
    if box_ids is not None and len(box_ids) != n:
        raise ValueError("box_ids length differs from n")
    for ex in _exemplar_sets(n, box_ids, allow_background):
        others = [i for i in range(n) if i not in ex]
        options = ([BACKGROUND] if allow_background else []) + ex
        for choice in itertools.product(options, repeat=len(others)):
            a = np.full(n, BACKGROUND, dtype=int)
            a[ex] = ex
            a[others] = choice
            yield a


def brute_force_regularize(
    m: SimilarityModel,
    w: ObjectiveWeights,
    box_ids: Sequence[int] | None = None,
    allow_background: bool = True,
) -> OracleResult:
    """Exact optimum of the objective by exhausting every exemplar set.

    For a fixed exemplar set the objective separates over the non-exemplar
    points, so each one independently takes its best option; this visits the
    same optimum (and the same tie-break) as scoring every assignment from
    :func:`enumerate_valid_assignments`, in ``2**n`` outer steps.
    """
    n = m.n
    if n > MAX_POINTS:
        raise InstanceTooLarge(f"{n} points exceed the oracle cap of {MAX_POINTS}")
    boxes = box_ids if w.box_constraint else None
    best_value = -math.inf
    best = None
    count = 0
    for ex in _exemplar_sets(n, boxes, allow_background):
        others = [i for i in range(n) if i not in ex]
        a = np.full(n, BACKGROUND, dtype=int)
        a[ex] = ex
        per_point = 1
        for i in others:
            options = ([BACKGROUND] if allow_background else []) + ex
            per_point *= len(options)
            gains = [w.w_b * (w.background_affinity if j == BACKGROUND else m.pair_sim[i, j])
                     for j in options]
            a[i] = options[int(np.argmax(gains))]
        count += per_point
        v = objective_value(a, m, w, box_ids)
        if v > best_value:
            best_value, best = v, a
    if best is None:
        best = np.full(n, BACKGROUND, dtype=int)
        best_value = objective_value(best, m, w, box_ids) if n else 0.0
    return OracleResult(best, best_value, count)


def brute_force_by_enumeration(
    m: SimilarityModel,
    w: ObjectiveWeights,
    box_ids: Sequence[int] | None = None,
    allow_background: bool = True,
) -> OracleResult:
    """Score every feasible assignment; slow, used to cross-check the fast oracle."""
    boxes = box_ids if w.box_constraint else None
    best_value = -math.inf
    best = None
    count = 0
    for a in enumerate_valid_assignments(m.n, boxes, allow_background):
        count += 1
        v = objective_value(a, m, w, box_ids)
        if v > best_value:
            best_value, best = v, a
    return OracleResult(best, best_value, count)
