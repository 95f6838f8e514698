"""Grid optimization of telescoping schedules.

The dynamic program works from the backstop term leftwards. State at stage
``i`` is the tail count ``j_i + ... + j_t`` together with the confidence
budget still to be shared among ``delta_{i+1} .. delta_{t+1}``. Budgets are
integer multiples of ``delta_increment``, so states are matched exactly.

Stage values are accumulated in the same order and with the same float
operations as :func:`gibbs_bounds.bounds.telescoping_epsilon`, so the DP
minimum is bit-identical to the best value an exhaustive search finds.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._validation import DomainError, check_positive_int, check_real
from .bounds import (
    BoundContext,
    BoundResult,
    EnsembleSpec,
    Schedule,
    _eps_hat,
    _telescoping_raw,
    telescoping_epsilon,
)

__all__ = [
    "EnumerationCapError",
    "OptimizerGrid",
    "ValueTable",
    "geometric_j_candidates",
    "build_value_table",
    "optimize_schedule",
    "brute_force_optimize",
]

logger = logging.getLogger(__name__)

# Upper bound on the number of tied optimal schedules inspected for the tie-break.
MAX_TIED_PATHS = 100_000


class EnumerationCapError(DomainError):
    """The exhaustive search would exceed its configured size cap."""


@dataclass(frozen=True)
class OptimizerGrid:
    """Candidate values for the schedule search.

    ``j_candidates=None`` means the integers ``0..s``.
    """

    t: int
    delta_increment: float = 1e-4
    j_candidates: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "t", check_positive_int(self.t, "t"))
        object.__setattr__(
            self,
            "delta_increment",
            check_real(self.delta_increment, "delta_increment", 0.0, low_open=True),
        )
        if self.j_candidates is not None:
            cands = tuple(float(j) for j in self.j_candidates)
            if not cands:
                raise DomainError("j_candidates is empty")
            if len(set(cands)) != len(cands):
                raise DomainError("j_candidates must be distinct")
            object.__setattr__(self, "j_candidates", tuple(sorted(cands)))

    def resolve(self, ctx, ens):
        """Return the sorted j candidates and the budget size in increments."""
        if self.j_candidates is None:
            cands = tuple(float(j) for j in range(ens.s + 1))
        else:
            cands = self.j_candidates
            if cands[0] < 0.0 or cands[-1] > ens.s:
                raise DomainError(f"j_candidates must lie in [0, s={ens.s}]")
        units = math.floor(ctx.delta / self.delta_increment + 1e-9)
        if units < 1:
            raise DomainError(
                f"delta_increment={self.delta_increment} leaves fewer than 2 candidate "
                f"points in [0, {ctx.delta}]"
            )
        return cands, units


def geometric_j_candidates(s, c, t):
    """``{0} U {s / e^{ci} : 1 <= i <= t}``, the j values of the closed-form schedule."""
    c = check_real(c, "c", 0.0, low_open=True)
    return tuple(sorted({0.0} | {s / math.exp(c * i) for i in range(1, t + 1)}))


@dataclass
class ValueTable:
    """``values[i][a, u]`` is the best partial bound at stage ``i`` (1-based).

    Row ``a`` indexes ``states[i][a]`` (the tail count ``j_i + ... + j_t``);
    column ``u`` is the remaining budget in increments.
    """

    t: int
    s: int
    units: int
    increment: float
    j_candidates: Tuple[float, ...]
    states: Dict[int, List[float]]
    values: Dict[int, np.ndarray]
    eps_table: Dict[int, np.ndarray]

    def delta_value(self, units):
        return units * self.increment


def _eps_rows(ctx, tails, deltas):
    return np.array([[_eps_hat(ctx.m, ctx.n, tail, d) for d in deltas] for tail in tails])


def build_value_table(ctx: BoundContext, ens: EnsembleSpec, grid: OptimizerGrid) -> ValueTable:
    ens.check_against(ctx)
    cands, units = grid.resolve(ctx, ens)
    s, t = ens.s, grid.t
    deltas = [k * grid.delta_increment for k in range(units + 1)]

    states = {t + 1: [0.0]}
    for i in range(t, 0, -1):
        states[i] = sorted({j + tail for tail in states[i + 1] for j in cands if j + tail <= s})
    if not states[1]:
        raise DomainError(f"no {t} candidate j values sum to at most s={s}")

    # eps_table[i][a, k] = eps_hat(states[i][a], deltas[k])
    eps_table = {i: _eps_rows(ctx, states[i], deltas) for i in range(1, t + 2)}

    # conv index: column u, row k -> remaining budget u - k (masked when negative)
    idx = np.arange(units + 1)[None, :] - np.arange(units + 1)[:, None]
    invalid = idx < 0
    idx[invalid] = units + 1

    values = {}
    backstop = eps_table[t + 1][0]
    values[t] = np.vstack([(j / s) * backstop for j in states[t]])
    for i in range(t - 1, 0, -1):
        nxt = states[i + 1]
        pos = {tail: a for a, tail in enumerate(states[i])}
        table = np.full((len(states[i]), units + 1), np.inf)
        for b, tail in enumerate(nxt):
            padded = np.append(values[i + 1][b], np.inf)[idx]
            eps_row = eps_table[i + 1][b]
            for j in cands:
                total = j + tail
                if total > s:
                    continue
                term = (j / s) * eps_row
                conv = (term[:, None] + padded).min(axis=0)
                a = pos[total]
                np.minimum(table[a], conv, out=table[a])
        values[i] = table
    return ValueTable(t, s, units, grid.delta_increment, cands, states, values, eps_table)


def _final_candidates(table):
    """Values of every (tail, delta_1) choice in the last step, shape (states, units + 1)."""
    s, units = table.s, table.units
    rows = []
    for a, tail in enumerate(table.states[1]):
        first = (1.0 - tail / s) * table.eps_table[1][a]
        rows.append(first + table.values[1][a][::-1])
    return np.vstack(rows)


def _optimal_paths(table, best):
    """Yield ``(j_values, delta_units)`` for every schedule attaining ``best`` exactly."""
    s, t, units = table.s, table.t, table.units
    final = _final_candidates(table)

    def descend(i, tail, budget, js, ks):
        if i == t:
            yield js + (tail,), ks + (budget,)
            return
        target = table.values[i][table.states[i].index(tail)][budget]
        for b, nxt in enumerate(table.states[i + 1]):
            for j in table.j_candidates:
                if j + nxt != tail:
                    continue
                term = (j / s) * table.eps_table[i + 1][b][: budget + 1]
                vals = term + table.values[i + 1][b][budget::-1]
                for k in np.flatnonzero(vals == target):
                    yield from descend(i + 1, nxt, budget - int(k), js + (j,), ks + (int(k),))

    for a, k1 in zip(*np.nonzero(final == best)):
        tail = table.states[1][a]
        yield from descend(1, tail, units - int(k1), (), (int(k1),))


def _schedule_from_units(js, ks, increment):
    return Schedule(tuple(js), tuple(k * increment for k in ks))


def optimize_schedule(
    ctx: BoundContext, ens: EnsembleSpec, grid: OptimizerGrid
) -> Tuple[Schedule, BoundResult]:
    """Minimize the telescoping width over the grid by dynamic programming.

    Among schedules with exactly the optimal width, the lexicographically
    smallest ``(j_1..j_t, delta_1..delta_{t+1})`` is returned.
    """
    table = build_value_table(ctx, ens, grid)
    best = _final_candidates(table).min()

    chosen = None
    for count, path in enumerate(_optimal_paths(table, best)):
        if chosen is None or path < chosen:
            chosen = path
        if count + 1 >= MAX_TIED_PATHS:
            logger.warning("more than %d tied optimal schedules; tie-break is partial", count + 1)
            break
    sched = _schedule_from_units(chosen[0], chosen[1], table.increment)
    result = telescoping_epsilon(ctx, ens, sched)
    if result.epsilon_raw != best:
        raise AssertionError(f"DP optimum {best!r} not reproduced by its schedule")
    return sched, result


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative ints summing to ``total``, in lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def brute_force_optimize(
    ctx: BoundContext, ens: EnsembleSpec, grid: OptimizerGrid, cap: int = 10**7
) -> Tuple[Schedule, BoundResult]:
    """Exhaustive search over the same grid; the reference for :func:`optimize_schedule`."""
    ens.check_against(ctx)
    cands, units = grid.resolve(ctx, ens)
    t, s = grid.t, ens.s
    size = len(cands) ** t * math.comb(units + t, t)
    if size > cap:
        raise EnumerationCapError(f"grid has {size} schedules, above the cap of {cap}")

    deltas = [k * grid.delta_increment for k in range(units + 1)]
    splits = list(_compositions(units, t + 1))
    best, chosen = math.inf, None
    for js in itertools.product(cands, repeat=t):
        total = 0.0
        for j in reversed(js):
            total = j + total
        if total > s:
            continue
        for ks in splits:
            val = _telescoping_raw(ctx.m, ctx.n, s, js, [deltas[k] for k in ks])
            if val < best:
                best, chosen = val, (js, ks)
    if chosen is None:
        raise DomainError(f"no {t} candidate j values sum to at most s={s}")
    sched = _schedule_from_units(chosen[0], chosen[1], grid.delta_increment)
    return sched, telescoping_epsilon(ctx, ens, sched)
