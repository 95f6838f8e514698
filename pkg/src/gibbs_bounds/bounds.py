"""Out-of-sample error bounds for equally weighted Gibbs ensembles.

Every bound here has the same shape: with probability at least ``1 - delta``
the out-of-sample error (of a classifier, or the average over an ensemble)
is below the validation error plus ``epsilon``. The functions return
:class:`BoundResult` records carrying both the raw width and the width
clamped to 1, since error rates never exceed 1.

Notation follows the usual validation setup: ``m`` hypothesis classifiers,
``n`` validation examples per classifier, ``s`` classifiers selected into
the ensemble, and ``j`` allowed misvalidations.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from ._validation import (
    DomainError,
    check_delta,
    check_positive_int,
    check_rate,
    check_real,
)

__all__ = [
    "BoundKind",
    "BoundContext",
    "EnsembleSpec",
    "Schedule",
    "BoundResult",
    "hoeffding_epsilon",
    "uniform_epsilon",
    "nearly_uniform_epsilon",
    "epsilon_hat",
    "ensemble_uniform_epsilon",
    "ensemble_nearly_uniform_epsilon",
    "ensemble_nearly_uniform_epsilon_observed",
    "telescoping_epsilon",
    "relaxed_telescoping_epsilon",
    "closed_form_schedule",
    "epsilon_star",
    "epsilon_star_analytic_bound",
    "analytic_coefficients",
    "extend_full_classifier_bound",
]

# Relative slack when checking that a schedule stays inside its j and delta budgets.
_BUDGET_RTOL = 1e-12


class BoundKind(str, enum.Enum):
    UNIFORM = "uniform"
    NEARLY_UNIFORM = "nearly_uniform"
    ENSEMBLE_UNIFORM = "ensemble_uniform"
    ENSEMBLE_NEARLY_UNIFORM = "ensemble_nearly_uniform"
    ENSEMBLE_NEARLY_UNIFORM_OBSERVED = "ensemble_nearly_uniform_observed"
    TELESCOPING = "telescoping"
    CLOSED_FORM = "closed_form"
    ANALYTIC_ENVELOPE = "analytic_envelope"
    FULL_CLASSIFIER = "full_classifier"


@dataclass(frozen=True)
class BoundContext:
    """The ``(m, n, delta)`` triple a bound is evaluated against."""

    m: int
    n: int
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "m", check_positive_int(self.m, "m"))
        object.__setattr__(self, "n", check_positive_int(self.n, "n"))
        object.__setattr__(self, "delta", check_delta(self.delta))


@dataclass(frozen=True)
class EnsembleSpec:
    """Size of the selected ensemble and, optionally, its members' validation error rates."""

    s: int
    observed_validation_errors: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "s", check_positive_int(self.s, "s"))
        rates = self.observed_validation_errors
        if rates is not None:
            rates = tuple(check_rate(r, "observed validation error") for r in rates)
            if len(rates) != self.s:
                raise DomainError(
                    f"expected {self.s} observed validation errors, got {len(rates)}"
                )
            object.__setattr__(self, "observed_validation_errors", rates)

    def check_against(self, ctx):
        if self.s > ctx.m:
            raise DomainError(f"ensemble size s={self.s} exceeds m={ctx.m}")
        if self.observed_validation_errors is not None:
            for rate in self.observed_validation_errors:
                count = rate * ctx.n
                if abs(count - round(count)) > 1e-9 * max(1.0, ctx.n):
                    raise DomainError(
                        f"validation error {rate} is not a multiple of 1/n (n={ctx.n})"
                    )


@dataclass(frozen=True)
class Schedule:
    """A telescoping parameterization ``(j_1..j_t, delta_1..delta_{t+1})``.

    ``j_values`` may be fractional. ``delta_values`` has one more entry than
    ``j_values``; the last entry funds the backstop uniform bound and may be 0.
    """

    j_values: Tuple[float, ...]
    delta_values: Tuple[float, ...]

    def __post_init__(self):
        js = tuple(check_real(j, "j", 0.0) for j in self.j_values)
        ds = tuple(check_real(d, "delta_i", 0.0, 1.0) for d in self.delta_values)
        if len(ds) != len(js) + 1:
            raise DomainError(
                f"a schedule with t={len(js)} needs {len(js) + 1} delta values, got {len(ds)}"
            )
        object.__setattr__(self, "j_values", js)
        object.__setattr__(self, "delta_values", ds)

    @property
    def t(self):
        return len(self.j_values)

    @property
    def total_j(self):
        total = 0.0
        for j in reversed(self.j_values):
            total = j + total
        return total

    @property
    def total_delta(self):
        return math.fsum(self.delta_values)

    def check_against(self, ctx, ens):
        if self.total_j > ens.s * (1.0 + _BUDGET_RTOL):
            raise DomainError(f"schedule allows {self.total_j} misvalidations but s={ens.s}")
        spent = self.total_delta
        if spent > ctx.delta * (1.0 + _BUDGET_RTOL):
            raise DomainError(f"schedule spends delta={spent} but only {ctx.delta} is available")
        if spent <= 0.0:
            raise DomainError("schedule spends no confidence budget")


@dataclass(frozen=True)
class BoundResult:
    epsilon: float
    epsilon_raw: float
    delta_spent: float
    kind: BoundKind
    schedule: Optional[Schedule] = field(default=None)

    @classmethod
    def from_raw(cls, raw, delta_spent, kind, schedule=None):
        return cls(min(raw, 1.0), raw, delta_spent, BoundKind(kind), schedule)

    def to_dict(self):
        out = {
            "kind": self.kind.value,
            "epsilon": self.epsilon,
            "epsilon_raw": self.epsilon_raw,
            "delta_spent": self.delta_spent,
        }
        if self.schedule is not None:
            out["j_values"] = list(self.schedule.j_values)
            out["delta_values"] = list(self.schedule.delta_values)
        return out


def hoeffding_epsilon(n, delta):
    """Width of the one-sided Hoeffding bound for a single classifier (unclamped)."""
    n = check_positive_int(n, "n")
    delta = check_delta(delta)
    return math.sqrt(math.log(1.0 / delta) / (2 * n))


def uniform_epsilon(ctx: BoundContext) -> BoundResult:
    """Union bound over all ``m`` classifiers: ``sqrt(ln(m/delta) / 2n)``."""
    raw = math.sqrt(math.log(ctx.m / ctx.delta) / (2 * ctx.n))
    return BoundResult.from_raw(raw, ctx.delta, BoundKind.UNIFORM)


def nearly_uniform_epsilon(ctx: BoundContext, j) -> BoundResult:
    """Bound that may fail for up to ``j`` classifiers; ``j`` may be fractional.

    For ``j < 1`` no misvalidation is allowed and this is the uniform bound.
    """
    j = check_real(j, "j", 0.0, float(ctx.m), low_open=True)
    raw = math.sqrt(math.log(ctx.m / (ctx.delta * max(j, 1.0))) / (2 * ctx.n))
    return BoundResult.from_raw(raw, ctx.delta, BoundKind.NEARLY_UNIFORM)


def _eps_hat(m, n, j, delta_part):
    if delta_part == 0.0:
        return 1.0
    # Fewer than one allowed misvalidation is the uniform case.
    denom = delta_part if j <= 1.0 else delta_part * j
    arg = m / denom
    if arg <= 1.0:
        # ln(arg) <= 0: the allowance covers every classifier
        return 0.0
    log_arg = math.log(arg) if arg != math.inf else math.log(m) - math.log(denom)
    return min(math.sqrt(log_arg / (2 * n)), 1.0)


def epsilon_hat(ctx: BoundContext, j, delta_part):
    """Clamped width allowing ``j`` misvalidations at confidence ``delta_part``.

    ``j <= 1`` gives the uniform (backstop) bound, since allowing less than
    one misvalidation still requires every classifier to validate.
    ``delta_part = 0`` gives the trivial width 1.
    """
    j = check_real(j, "j", 0.0)
    delta_part = check_real(delta_part, "delta_part", 0.0, 1.0)
    return _eps_hat(ctx.m, ctx.n, j, delta_part)


def ensemble_uniform_epsilon(ctx: BoundContext, ens: EnsembleSpec) -> BoundResult:
    """Bound on the ensemble average gap ``E_S p* - E_S p`` from the uniform bound."""
    ens.check_against(ctx)
    raw = uniform_epsilon(ctx).epsilon_raw
    return BoundResult.from_raw(raw, ctx.delta, BoundKind.ENSEMBLE_UNIFORM)


def ensemble_nearly_uniform_epsilon(ctx: BoundContext, ens: EnsembleSpec, j) -> BoundResult:
    """A-priori ensemble bound: misvalidated members are charged the trivial error 1."""
    ens.check_against(ctx)
    j = check_real(j, "j", 0.0, float(ens.s))
    frac = j / ens.s
    raw = (1.0 - frac) * _eps_hat(ctx.m, ctx.n, j, ctx.delta) + frac
    return BoundResult.from_raw(raw, ctx.delta, BoundKind.ENSEMBLE_NEARLY_UNIFORM)


def ensemble_nearly_uniform_epsilon_observed(
    ctx: BoundContext, ens: EnsembleSpec, j: int
) -> BoundResult:
    """Ensemble bound using the observed validation errors of the ``j`` best members.

    The worst case puts the misvalidations on the members with the lowest
    validation error, so only ``1 - p_i`` is added for each of them.
    """
    ens.check_against(ctx)
    if ens.observed_validation_errors is None:
        raise DomainError("observed validation errors are required for this bound")
    j = check_positive_int(j, "j")
    if j > ens.s:
        raise DomainError(f"j={j} exceeds ensemble size s={ens.s}")
    rates = ens.observed_validation_errors
    lowest = sorted(range(len(rates)), key=lambda i: (rates[i], i))[:j]
    mean_lowest = math.fsum(rates[i] for i in lowest) / j
    frac = j / ens.s
    raw = (1.0 - frac) * _eps_hat(ctx.m, ctx.n, j, ctx.delta) + frac * (1.0 - mean_lowest)
    return BoundResult.from_raw(raw, ctx.delta, BoundKind.ENSEMBLE_NEARLY_UNIFORM_OBSERVED)


def _telescoping_raw(m, n, s, j_values, delta_values):
    # Accumulates from the backstop term leftwards; the optimizer relies on this
    # exact association order to reproduce these values bit for bit.
    tail = 0.0
    acc = 0.0
    for h in range(len(j_values) - 1, -1, -1):
        j = j_values[h]
        term = (j / s) * _eps_hat(m, n, tail, delta_values[h + 1])
        acc = term if h == len(j_values) - 1 else term + acc
        tail = j + tail
    first = (1.0 - tail / s) * _eps_hat(m, n, tail, delta_values[0])
    return first + acc if j_values else first


def telescoping_epsilon(ctx: BoundContext, ens: EnsembleSpec, sched: Schedule) -> BoundResult:
    """Chain of nearly uniform bounds, each covering the next one's misvalidations."""
    ens.check_against(ctx)
    sched.check_against(ctx, ens)
    raw = _telescoping_raw(ctx.m, ctx.n, ens.s, sched.j_values, sched.delta_values)
    return BoundResult.from_raw(raw, sched.total_delta, BoundKind.TELESCOPING, sched)


def relaxed_telescoping_epsilon(
    ctx: BoundContext, ens: EnsembleSpec, sched: Schedule
) -> BoundResult:
    """Looser telescoping width where stage ``i`` uses ``j_{i-1}/s`` and ``eps_hat(j_i, delta_i)``.

    Dominates :func:`telescoping_epsilon` for the same schedule (``j_0 = s``),
    and is the form the closed-form schedule is analysed in.
    """
    ens.check_against(ctx)
    sched.check_against(ctx, ens)
    s = ens.s
    coeffs = (float(s),) + sched.j_values
    raw = 0.0
    for i in range(sched.t):
        raw += (coeffs[i] / s) * _eps_hat(ctx.m, ctx.n, sched.j_values[i], sched.delta_values[i])
    raw += (coeffs[sched.t] / s) * _eps_hat(ctx.m, ctx.n, 0.0, sched.delta_values[sched.t])
    return BoundResult.from_raw(raw, sched.total_delta, BoundKind.TELESCOPING, sched)


def _check_c(c):
    return check_real(c, "c", 0.0, low_open=True)


def _stage_count(n, c):
    return max(1, math.ceil(math.log(2 * n) / (2 * c)))


def closed_form_schedule(ctx: BoundContext, ens: EnsembleSpec, c) -> Schedule:
    """Geometric schedule ``j_i = s e^{-ci}``, ``delta_i = (e - 1) delta e^{-i}``, ``delta_{t+1} = 0``.

    ``t`` is the least integer with ``e^{tc} >= sqrt(2n)``.
    """
    c = _check_c(c)
    ens.check_against(ctx)
    t = _stage_count(ctx.n, c)
    js = tuple(ens.s / math.exp(c * i) for i in range(1, t + 1))
    ds = tuple((math.e - 1.0) * ctx.delta / math.exp(i) for i in range(1, t + 1)) + (0.0,)
    return Schedule(js, ds)


def epsilon_star(ctx: BoundContext, ens: EnsembleSpec, c) -> BoundResult:
    """Closed-form ensemble bound built from the geometric schedule.

    For ``c <= ln 2`` the schedule's j values sum past ``s``, so it is not a
    feasible telescoping schedule; the formula is still evaluated.
    """
    c = _check_c(c)
    sched = closed_form_schedule(ctx, ens, c)
    t = sched.t
    raw = 0.0
    for i in range(1, t + 1):
        j = ens.s / math.exp(c * i)
        d = (math.e - 1.0) * ctx.delta / math.exp(i)
        raw += math.exp(-c * (i - 1)) * _eps_hat(ctx.m, ctx.n, j, d)
    raw += math.exp(-c * t) * _eps_hat(ctx.m, ctx.n, 0.0, 0.0)
    return BoundResult.from_raw(raw, sched.total_delta, BoundKind.CLOSED_FORM, sched)


def analytic_coefficients(c):
    """Return ``(K, sqrt(c + 1) K^2 + 1)`` with ``K = e^c / (e^c - 1)``."""
    c = _check_c(c)
    k = math.exp(c) / math.expm1(c)
    return k, math.sqrt(c + 1.0) * k * k + 1.0


def epsilon_star_analytic_bound(ctx: BoundContext, ens: EnsembleSpec, c) -> BoundResult:
    """Envelope ``[K sqrt(ln(m/s) + ln(1/delta)) + sqrt(c+1) K^2 + 1] / sqrt(2n)``.

    Depends on ``m`` and ``s`` only through ``m / s``.
    """
    ens.check_against(ctx)
    k, additive = analytic_coefficients(c)
    ratio = ctx.m / ens.s
    raw = (k * math.sqrt(math.log(ratio) + math.log(1.0 / ctx.delta)) + additive) / math.sqrt(
        2 * ctx.n
    )
    return BoundResult.from_raw(raw, ctx.delta, BoundKind.ANALYTIC_ENVELOPE)


def extend_full_classifier_bound(gibbs_bound: BoundResult, disagreement_rate) -> BoundResult:
    """Carry a Gibbs ensemble bound over to the single classifier trained on all data.

    The full classifier errs at most as often as the Gibbs classifier plus the
    rate at which the two disagree.
    """
    rate = check_rate(disagreement_rate, "disagreement_rate")
    raw = gibbs_bound.epsilon + rate
    return BoundResult.from_raw(
        raw, gibbs_bound.delta_spent, BoundKind.FULL_CLASSIFIER, gibbs_bound.schedule
    )
