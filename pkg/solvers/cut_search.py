"""
title: Parity Cut Search
id: cut_search
description: Finds the violated forbidden-set inequality of each check at a point of the unit cube.
license: MIT
version: 0.3.0
requirements: numpy, loguru
"""

# For a check with neighborhood N and odd V within N the inequality is
#
#     sum_{i in V} x_i - sum_{i in N \ V} x_i <= |V| - 1
#
# At most one such inequality per check can be violated at a given x, and if one
# is, its V is a prefix of odd length of N sorted by decreasing x.

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np
from loguru import logger

from codes.code_model import CheckRow, ParityCheckCode
from solvers.bounded_simplex import LinearConstraint

log = logger.bind(lpdec=True)

EPSILON_CUT = 1e-9
# Coordinates further than this outside [0, 1] are counted and reported.
CLAMP_REPORT_TOLERANCE = 1e-7


class InvalidSubsetError(ValueError):
    def __init__(self, message: str):
        log.error(message)
        super().__init__(message)


class ParityProvenance(NamedTuple):
    """Attached to every parity constraint. `check` is a row index or an RPC row."""

    check: int | CheckRow
    subset_v: tuple[int, ...]


@dataclass
class CutSearchDiagnostics:
    clamped: int = 0
    checks_searched: int = 0


@dataclass(frozen=True)
class Cut:
    check: int | CheckRow
    neighborhood: tuple[int, ...]
    subset_v: tuple[int, ...]
    violation: float = field(compare=False)

    def to_constraint(self) -> LinearConstraint:
        return constraint_from_subset(self.neighborhood, self.subset_v, check=self.check)

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.neighborhood, self.subset_v


def constraint_from_subset(
    neighborhood: Sequence[int], subset_v: Iterable[int], check: int | CheckRow | None = None
) -> LinearConstraint:
    subset = tuple(sorted(subset_v))
    if len(subset) % 2 == 0:
        raise InvalidSubsetError(f"Subset {subset} has even size {len(subset)}.")
    members = set(subset)
    if len(members) != len(subset):
        raise InvalidSubsetError(f"Subset {subset} repeats an index.")
    if not members <= set(neighborhood):
        raise InvalidSubsetError(
            f"Subset {subset} is not contained in neighborhood {tuple(neighborhood)}."
        )
    terms = tuple((i, 1.0 if i in members else -1.0) for i in neighborhood)
    return LinearConstraint(
        terms=terms,
        rhs=float(len(subset) - 1),
        provenance=ParityProvenance(check if check is not None else -1, subset),
    )


def all_parity_constraints(
    neighborhood: Sequence[int], check: int | CheckRow | None = None
) -> list[LinearConstraint]:
    """All 2^(d-1) inequalities of one check, by increasing |V| then lexicographic V."""
    return [
        constraint_from_subset(neighborhood, subset, check=check)
        for size in range(1, len(neighborhood) + 1, 2)
        for subset in combinations(neighborhood, size)
    ]


def _clamped_values(
    x: np.ndarray, neighborhood: Sequence[int], diagnostics: CutSearchDiagnostics | None
) -> np.ndarray:
    values = np.asarray(x, dtype=np.float64)[list(neighborhood)]
    outside = (values < -CLAMP_REPORT_TOLERANCE) | (values > 1 + CLAMP_REPORT_TOLERANCE)
    if (count := int(outside.sum())) > 0:
        log.warning(f"Clamping {count} coordinates outside [0, 1] before cut search.")
        if diagnostics is not None:
            diagnostics.clamped += count
    return np.clip(values, 0.0, 1.0)


def find_cut_for_check(
    x: np.ndarray,
    neighborhood: Sequence[int],
    check: int | CheckRow = -1,
    diagnostics: CutSearchDiagnostics | None = None,
    epsilon_cut: float = EPSILON_CUT,
) -> Cut | None:
    neighborhood = tuple(neighborhood)
    if diagnostics is not None:
        diagnostics.checks_searched += 1
    if not neighborhood:
        return None
    values = _clamped_values(x, neighborhood, diagnostics)
    # Decreasing x, ties by ascending variable index.
    order = np.lexsort((np.asarray(neighborhood), -values))
    ranked = values[order]

    # Grow V two entries at a time while that raises the left-hand side by more
    # than it raises the right-hand side.
    size = 1
    while size + 2 <= ranked.size and ranked[size] + ranked[size + 1] > 1.0:
        size += 2

    inside = float(ranked[:size].sum())
    outside = float(ranked[size:].sum())
    violation = inside - outside - (size - 1)
    if violation <= epsilon_cut:
        return None
    subset_v = tuple(sorted(neighborhood[k] for k in order[:size]))
    return Cut(check=check, neighborhood=neighborhood, subset_v=subset_v, violation=violation)


def find_all_cuts(
    code: ParityCheckCode,
    x: np.ndarray,
    diagnostics: CutSearchDiagnostics | None = None,
    epsilon_cut: float = EPSILON_CUT,
) -> list[Cut]:
    """At most one cut per check, in ascending check order."""
    cuts = [
        cut
        for j in range(code.m)
        if (cut := find_cut_for_check(x, code.rows[j], j, diagnostics, epsilon_cut)) is not None
    ]
    if cuts:
        log.trace(
            f"{len(cuts)} of {code.m} checks are cut.",
            payload={"checks": [c.check for c in cuts], "violations": [c.violation for c in cuts]},
        )
    return cuts
