"""Monte Carlo check that the bounds hold at their stated confidence.

A synthetic world fixes the true error rate of each of ``m`` classifiers.
Each trial draws every classifier's validation error count from
``Binomial(n, p*)``, selects an ensemble from the validation rates and
records, for each bound under test, whether the ensemble's true average
error reached its validation average plus ``epsilon``.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from ._validation import DomainError, check_positive_int, check_rate, check_real
from .bounds import (
    BoundContext,
    EnsembleSpec,
    ensemble_nearly_uniform_epsilon,
    ensemble_nearly_uniform_epsilon_observed,
    ensemble_uniform_epsilon,
    epsilon_star,
    epsilon_star_analytic_bound,
    nearly_uniform_epsilon,
    telescoping_epsilon,
    uniform_epsilon,
    Schedule,
)
from .telescope import OptimizerGrid, geometric_j_candidates, optimize_schedule

__all__ = [
    "SyntheticWorld",
    "BoundSpec",
    "BoundCoverage",
    "CoverageReport",
    "ExperimentConfig",
    "select_ensemble",
    "run_coverage_experiment",
    "clopper_pearson_upper",
]

RULES = ("lowest_s", "random_s", "threshold")
BOUND_KINDS = (
    "uniform",
    "nearly_uniform",
    "ensemble_uniform",
    "ensemble_nearly_uniform",
    "ensemble_nearly_uniform_observed",
    "telescoping",
    "optimized",
    "closed_form",
    "analytic_envelope",
)


@dataclass(frozen=True)
class SyntheticWorld:
    true_error_rates: np.ndarray
    n: int
    seed: int
    rate_distribution: str = "fixed_list"

    def __post_init__(self):
        rates = np.asarray(self.true_error_rates, dtype=float)
        if rates.ndim != 1 or len(rates) == 0:
            raise DomainError("true_error_rates must be a non-empty 1-D sequence")
        if np.any((rates < 0) | (rates > 1)):
            raise DomainError("true error rates must lie in [0, 1]")
        object.__setattr__(self, "true_error_rates", rates)
        object.__setattr__(self, "n", check_positive_int(self.n, "n"))

    @property
    def m(self):
        return len(self.true_error_rates)

    @classmethod
    def fixed(cls, rates, n, seed=0):
        return cls(np.asarray(rates, dtype=float), n, seed, "fixed_list")

    @classmethod
    def uniform(cls, m, n, low, high, seed=0):
        m = check_positive_int(m, "m")
        low, high = check_rate(low, "low"), check_rate(high, "high")
        if low > high:
            raise DomainError("low must not exceed high")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        return cls(rng.uniform(low, high, size=m), n, seed, f"uniform_on_interval({low}, {high})")

    @classmethod
    def two_point(cls, m, n, p_low, p_high, fraction_low, seed=0):
        m = check_positive_int(m, "m")
        fraction_low = check_rate(fraction_low, "fraction_low")
        n_low = round(m * fraction_low)
        rates = np.full(m, check_rate(p_high, "p_high"))
        rates[:n_low] = check_rate(p_low, "p_low")
        return cls(rates, n, seed, f"two_point({p_low}, {p_high}, {fraction_low})")

    def trial_rng(self, trial):
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(trial,)))

    def draw_validation_rates(self, rng):
        return rng.binomial(self.n, self.true_error_rates) / self.n


def select_ensemble(validation_rates, s=None, rule="lowest_s", tau=None, rng=None):
    """Pick ensemble members from validation error rates.

    ``lowest_s`` takes the ``s`` smallest rates (ties by index), ``random_s``
    takes ``s`` members uniformly at random using ``rng``, and ``threshold``
    takes every member with rate at most ``tau``. Returns sorted indices.
    """
    rates = np.asarray(validation_rates, dtype=float)
    m = len(rates)
    if rule == "threshold":
        if tau is None:
            raise DomainError("threshold selection needs tau")
        chosen = np.flatnonzero(rates <= tau)
        if len(chosen) == 0:
            raise DomainError(f"no classifier has validation error <= {tau}")
        return chosen
    s = check_positive_int(s, "s")
    if s > m:
        raise DomainError(f"s={s} exceeds m={m}")
    if rule == "lowest_s":
        return np.sort(np.argsort(rates, kind="stable")[:s])
    if rule == "random_s":
        if rng is None:
            raise DomainError("random_s selection needs a random generator")
        return np.sort(rng.choice(m, size=s, replace=False))
    raise DomainError(f"unknown selection rule {rule!r}")


@dataclass(frozen=True)
class BoundSpec:
    kind: str
    params: Dict = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise DomainError(f"unknown bound kind {self.kind!r}")
        if self.label is None:
            extra = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
            object.__setattr__(self, "label", f"{self.kind}({extra})" if extra else self.kind)

    @classmethod
    def parse(cls, text):
        """Parse ``kind`` or ``kind:key=value;key=value``."""
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(";")):
            key, _, value = item.partition("=")
            params[key.strip()] = json.loads(value) if value.strip()[:1] in "[{" else _number(value)
        return cls(kind.strip(), params)

    def evaluate(self, ctx, ens):
        """Epsilon for a data-independent kind; the observed kind is handled per trial."""
        p = self.params
        if self.kind == "uniform":
            return uniform_epsilon(ctx).epsilon
        if self.kind == "nearly_uniform":
            return nearly_uniform_epsilon(ctx, p["j"]).epsilon
        if self.kind == "ensemble_uniform":
            return ensemble_uniform_epsilon(ctx, ens).epsilon
        if self.kind == "ensemble_nearly_uniform":
            return ensemble_nearly_uniform_epsilon(ctx, ens, p["j"]).epsilon
        if self.kind == "telescoping":
            sched = Schedule(tuple(p["j_values"]), tuple(p["delta_values"]))
            return telescoping_epsilon(ctx, ens, sched).epsilon
        if self.kind == "optimized":
            t = p.get("t", 2)
            cands = None
            if "c" in p:
                cands = geometric_j_candidates(ens.s, p["c"], t)
            grid = OptimizerGrid(t, p.get("delta_increment", 1e-3), cands)
            return optimize_schedule(ctx, ens, grid)[1].epsilon
        if self.kind == "closed_form":
            return epsilon_star(ctx, ens, p.get("c", 3.0)).epsilon
        if self.kind == "analytic_envelope":
            return epsilon_star_analytic_bound(ctx, ens, p.get("c", 3.0)).epsilon
        raise DomainError(f"{self.kind} depends on observed data")


def _number(text):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text else value


@dataclass
class BoundCoverage:
    label: str
    kind: str
    epsilon: float
    violations: int
    frequency: float
    upper_limit: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class CoverageReport:
    trials: int
    seed: int
    delta: float
    confidence: float
    entries: List[BoundCoverage]

    @property
    def failures(self):
        """Labels whose violation frequency exceeds delta."""
        return [e.label for e in self.entries if e.frequency > self.delta]

    def to_dict(self):
        return {
            "trials": self.trials,
            "seed": self.seed,
            "delta": self.delta,
            "confidence": self.confidence,
            "bounds": [e.to_dict() for e in self.entries],
        }


def clopper_pearson_upper(violations, trials, level=0.999):
    """One-sided exact binomial upper confidence limit on the violation probability."""
    if violations >= trials:
        return 1.0
    return float(stats.beta.ppf(level, violations + 1, trials - violations))


def _check_trial(spec, eps, true, rates, gap):
    # uniform and nearly_uniform guarantee per-classifier gaps, the rest the ensemble average
    if spec.kind == "uniform":
        return bool(np.any(true >= rates + eps))
    if spec.kind == "nearly_uniform":
        return int(np.sum(true >= rates + eps)) > spec.params["j"]
    return gap >= eps


def run_coverage_experiment(
    world: SyntheticWorld,
    s: Optional[int],
    rule: str,
    bounds_under_test: Sequence[BoundSpec],
    trials: int,
    delta: float = 0.05,
    tau: Optional[float] = None,
    confidence: float = 0.999,
) -> CoverageReport:
    """Estimate the violation frequency of each bound over seeded independent trials.

    Trial ``i`` uses a generator derived from ``(world.seed, i)``, so the
    report does not depend on execution order. Data-independent widths are
    computed once per ensemble size; the observed-rate width is recomputed
    every trial and its mean is reported.
    """
    trials = check_positive_int(trials, "trials")
    if rule not in RULES:
        raise DomainError(f"unknown selection rule {rule!r}")
    ctx = BoundContext(world.m, world.n, delta)
    specs = list(bounds_under_test)
    if len({spec.label for spec in specs}) != len(specs):
        raise DomainError("bound labels must be unique")
    fixed_specs = [sp for sp in specs if sp.kind != "ensemble_nearly_uniform_observed"]

    widths = {}  # ensemble size -> {label: epsilon}
    counts = {spec.label: 0 for spec in specs}
    eps_sums = {spec.label: 0.0 for spec in specs}
    true = world.true_error_rates
    for trial in range(trials):
        rng = world.trial_rng(trial)
        rates = world.draw_validation_rates(rng)
        selected = select_ensemble(rates, s, rule, tau, rng)
        size = len(selected)
        if size not in widths:
            ens = EnsembleSpec(size)
            widths[size] = {sp.label: sp.evaluate(ctx, ens) for sp in fixed_specs}
        gap = float(true[selected].mean() - rates[selected].mean())
        for spec in specs:
            if spec.label in widths[size]:
                eps = widths[size][spec.label]
            else:
                ens = EnsembleSpec(size, tuple(rates[selected]))
                eps = ensemble_nearly_uniform_epsilon_observed(ctx, ens, spec.params["j"]).epsilon
                eps_sums[spec.label] += eps
            counts[spec.label] += _check_trial(spec, eps, true, rates, gap)

    entries = []
    for spec in specs:
        if spec.kind == "ensemble_nearly_uniform_observed":
            eps = eps_sums[spec.label] / trials
        elif len(widths) == 1:
            eps = next(iter(widths.values()))[spec.label]
        else:
            eps = math.nan  # threshold selection produced several ensemble sizes
        v = counts[spec.label]
        upper = clopper_pearson_upper(v, trials, confidence)
        entries.append(BoundCoverage(spec.label, spec.kind, eps, v, v / trials, upper))
    return CoverageReport(trials, world.seed, ctx.delta, confidence, entries)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a coverage experiment, loadable from JSON."""

    m: int
    n: int
    s: Optional[int]
    delta: float
    trials: int
    seed: int
    world: Dict
    bounds: List[BoundSpec]
    rule: str = "lowest_s"
    tau: Optional[float] = None

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw)
        bounds = [
            BoundSpec(b["kind"], {k: v for k, v in b.items() if k not in ("kind", "label")}, b.get("label"))
            if isinstance(b, dict)
            else BoundSpec.parse(b)
            for b in raw.pop("bounds")
        ]
        return cls(bounds=bounds, **raw)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def build_world(self):
        w = dict(self.world)
        dist = w.pop("distribution", "uniform")
        if dist == "uniform":
            return SyntheticWorld.uniform(self.m, self.n, w.get("low", 0.0), w.get("high", 0.5), self.seed)
        if dist == "fixed":
            rates = w["rates"]
            if len(rates) != self.m:
                raise DomainError(f"fixed world lists {len(rates)} rates but m={self.m}")
            return SyntheticWorld.fixed(rates, self.n, self.seed)
        if dist == "two_point":
            return SyntheticWorld.two_point(
                self.m, self.n, w["p_low"], w["p_high"], w["fraction_low"], self.seed
            )
        raise DomainError(f"unknown rate distribution {dist!r}")

    def run(self):
        check_real(self.delta, "delta", 0.0, 1.0, low_open=True)
        return run_coverage_experiment(
            self.build_world(), self.s, self.rule, self.bounds, self.trials, self.delta, self.tau
        )
