"""Estimation of conditional functions from episode logs.

An episode log is a sequence of constant-state episodes, each recording how
long it ran, which state it ran in, how often each threat occurred, and the
success/failure outcome of every barrier activation. Logs produced under the
isolation protocol (exactly one threat enabled) additionally name that
threat; prevention barriers may only be estimated from a log isolating the
threat they guard, since otherwise their activations cannot be attributed.

Estimators:

* discrete barrier factors and bases use the rule of succession,
  ``P(success) = 1 - (failures + 1) / (n + 2)``, so unobserved cells stay
  away from the degenerate endpoints;
* continuous barrier factors fit a two-parameter logistic curve by
  penalized maximum likelihood (safeguarded Newton iterations with a
  monotone log-likelihood guarantee);
* threat rates are occurrence counts over exposure time, per state value or
  pooled; a value with no exposure gets NaN and a warning rather than a
  silent zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .conditional import ConditionalFunction, Factor, FactorForm, FunctionKind, FusionMode
from .errors import (
    DegenerateDataError,
    IncompleteStateError,
    IsolationProtocolError,
    VariableKindError,
)
from .errors import ConvergenceWarning, UndefinedRateWarning
from .model import BowTie

L2_PENALTY = 1e-4
GRADIENT_TOL = 1e-8
MAX_NEWTON_ITER = 500


@dataclass(frozen=True)
class Episode:
    """One constant-state run: exposure time, state, and observed counts."""

    scene_id: str
    duration: float  # minutes
    state: Mapping[str, str | float]
    threat_occurrences: Mapping[str, int] = field(default_factory=dict)
    top_event_count: int = 0
    consequence_counts: Mapping[str, int] = field(default_factory=dict)
    barrier_outcomes: tuple[tuple[str, bool], ...] = ()

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"episode {self.scene_id!r} needs a positive duration")
        object.__setattr__(self, "state", dict(self.state))
        object.__setattr__(
            self, "threat_occurrences", dict(self.threat_occurrences)
        )
        object.__setattr__(
            self, "consequence_counts", dict(self.consequence_counts)
        )
        object.__setattr__(
            self,
            "barrier_outcomes",
            tuple((str(b), bool(s)) for b, s in self.barrier_outcomes),
        )

    def state_value(self, variable: str) -> str | float:
        try:
            return self.state[variable]
        except KeyError:
            raise IncompleteStateError(variable) from None


@dataclass(frozen=True)
class EpisodeLog:
    """A batch of episodes, optionally produced under threat isolation."""

    episodes: tuple[Episode, ...]
    isolated_threat: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "episodes", tuple(self.episodes))

    def __len__(self) -> int:
        return len(self.episodes)

    def __iter__(self):
        return iter(self.episodes)


def succession_probability(n: int, failures: int) -> float:
    """Rule-of-succession success probability from n trials with the given
    failure count."""
    if n < 0 or failures < 0 or failures > n:
        raise ValueError(f"inconsistent counts n={n}, failures={failures}")
    return 1.0 - (failures + 1) / (n + 2)


def _chain_position(log: EpisodeLog, model: BowTie, barrier: str) -> str | None:
    """Guard threat id for a prevention barrier, or None for a recovery
    barrier; enforces the isolation protocol for the former.

    Recovery barriers activate only after the top event, which is
    attributable regardless of which threat caused it, so they need no
    isolation run.
    """
    node = model.node(barrier)
    if not node.is_barrier:
        raise VariableKindError(f"{barrier!r} is not a barrier")
    for threat_id, chain in model.prevention_chains.items():
        if barrier in chain:
            if log.isolated_threat != threat_id:
                raise IsolationProtocolError(
                    f"barrier {barrier!r} guards threat {threat_id!r}; estimating it "
                    f"needs a log recorded with that threat isolated "
                    f"(log has isolated_threat={log.isolated_threat!r})"
                )
            return threat_id
    for chain in model.recovery_chains.values():
        if barrier in chain:
            return None
    raise VariableKindError(f"barrier {barrier!r} lies on no chain of this model")


def _episode_counts(ep: Episode, barrier: str, guard: str | None) -> tuple[int, int]:
    # n: encounters that tested the chain (threat occurrences for prevention
    # barriers, top events for recovery barriers). k: propagations past this
    # barrier, i.e. its recorded failures.
    n = ep.threat_occurrences.get(guard, 0) if guard is not None else ep.top_event_count
    k = sum(1 for b, success in ep.barrier_outcomes if b == barrier and not success)
    return n, k


def pooled_success_probability(log: EpisodeLog, model: BowTie, barrier: str) -> float:
    """Rule-of-succession estimate over every encounter of the barrier,
    ignoring state."""
    guard = _chain_position(log, model, barrier)
    n = k = 0
    for ep in log:
        dn, dk = _episode_counts(ep, barrier, guard)
        n += dn
        k += dk
    if n == 0:
        raise DegenerateDataError(
            f"log contains no encounters for barrier {barrier!r}",
            constant=succession_probability(0, 0),
        )
    return succession_probability(n, k)


def estimate_discrete_factor(
    log: EpisodeLog, model: BowTie, barrier: str, variable: str
) -> Factor:
    """Per-value success probabilities of a barrier over one discrete
    variable, as a table factor with encounter counts attached.

    For each value: n is the number of encounters in episodes holding that
    value, k the number that propagated past the barrier; the entry is
    ``1 - (k+1)/(n+2)``. A value with no encounters gets the no-data prior
    0.5.
    """
    var = model.variable(variable)
    if not var.is_discrete:
        raise VariableKindError(f"{variable!r} is continuous; fit a curve instead")
    guard = _chain_position(log, model, barrier)
    counts: dict[str, list[int]] = {v: [0, 0] for v in var.values}  # [n, k]
    for ep in log:
        value = str(ep.state_value(variable))
        var.check_value(value)
        dn, dk = _episode_counts(ep, barrier, guard)
        counts[value][0] += dn
        counts[value][1] += dk
    table = {v: succession_probability(n, k) for v, (n, k) in counts.items()}
    return Factor(
        variable=variable,
        form=FactorForm.TABLE,
        values=table,
        sample_sizes={v: n for v, (n, _) in counts.items()},
    )


@dataclass(frozen=True)
class LogisticFit:
    """Result of a penalized logistic fit: p(x) = 1 / (1 + exp(-(alpha*x + beta)))."""

    alpha: float
    beta: float
    log_likelihood_history: tuple[float, ...]
    converged: bool
    n: int


def fit_logistic(
    x: Sequence[float],
    y: Sequence[bool] | Sequence[int],
    penalty: float = L2_PENALTY,
    tol: float = GRADIENT_TOL,
    max_iter: int = MAX_NEWTON_ITER,
) -> LogisticFit:
    """Fit a two-parameter logistic success curve by penalized maximum
    likelihood.

    The objective is the Bernoulli log-likelihood minus
    ``penalty/2 * (alpha**2 + beta**2)``. Newton steps are halved until the
    objective does not decrease, so the recorded history is monotone
    non-decreasing. Convergence means the gradient max-norm dropped to
    ``tol``; running out of iterations emits a ``ConvergenceWarning`` and
    returns the best iterate with ``converged=False``.

    All-success or all-failure outcomes leave the curve unidentifiable; that
    raises ``DegenerateDataError`` whose ``constant`` attribute carries the
    rule-of-succession pooled estimate to use instead.
    """
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise ValueError("x and y must be one-dimensional and the same length")
    if xv.size == 0:
        raise DegenerateDataError("no observations", constant=succession_probability(0, 0))
    successes = int(yv.sum())
    if successes == 0 or successes == yv.size:
        raise DegenerateDataError(
            f"all {yv.size} outcomes are the same; the curve is unidentifiable",
            constant=succession_probability(yv.size, yv.size - successes),
        )

    design = np.column_stack([xv, np.ones_like(xv)])
    theta = np.array([0.0, _logit(succession_probability(yv.size, yv.size - successes))])

    def objective(t: np.ndarray) -> float:
        z = design @ t
        # log(sigma(z)) and log(1 - sigma(z)) via the softplus identity.
        ll = float(np.sum(yv * -np.logaddexp(0.0, -z) + (1.0 - yv) * -np.logaddexp(0.0, z)))
        return ll - 0.5 * penalty * float(t @ t)

    history = [objective(theta)]
    converged = False
    for _ in range(max_iter):
        z = design @ theta
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        grad = design.T @ (yv - p) - penalty * theta
        if float(np.max(np.abs(grad))) <= tol:
            converged = True
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        hess = design.T @ (design * w[:, None]) + penalty * np.eye(2)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        current = history[-1]
        while scale > 1e-12:
            candidate = theta + scale * step
            value = objective(candidate)
            if value >= current:
                theta = candidate
                history.append(value)
                break
            scale *= 0.5
        else:
            # No step length improves the objective; we are at numerical rest.
            converged = float(np.max(np.abs(grad))) <= 1e-6
            break
        if value == current:
            # The objective change underflowed; further steps cannot help.
            converged = float(np.max(np.abs(grad))) <= 1e-6
            break
    if not converged:
        warnings.warn(
            f"logistic fit did not reach gradient tolerance {tol} "
            f"within {max_iter} iterations",
            ConvergenceWarning,
            stacklevel=2,
        )
    return LogisticFit(
        alpha=float(theta[0]),
        beta=float(theta[1]),
        log_likelihood_history=tuple(history),
        converged=converged,
        n=int(yv.size),
    )


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def fit_sigmoid_factor(
    log: EpisodeLog, model: BowTie, barrier: str, variable: str
) -> Factor:
    """Logistic success curve of a barrier over one continuous variable."""
    var = model.variable(variable)
    if var.is_discrete:
        raise VariableKindError(f"{variable!r} is discrete; estimate a table instead")
    _chain_position(log, model, barrier)
    xs: list[float] = []
    ys: list[bool] = []
    for ep in log:
        x = float(ep.state_value(variable))
        for b, success in ep.barrier_outcomes:
            if b == barrier:
                xs.append(x)
                ys.append(success)
    fit = fit_logistic(xs, ys)
    return Factor(
        variable=variable,
        form=FactorForm.SIGMOID,
        alpha=fit.alpha,
        beta=fit.beta,
        sample_sizes=fit.n,
    )


def estimate_threat_rate(
    log: EpisodeLog,
    model: BowTie,
    threat: str,
    variable: str | None = None,
) -> float | Factor:
    """Occurrence rate of a threat: pooled base rate (``variable=None``) or
    a per-value table factor over one discrete variable.

    Rates are occurrence counts divided by exposure minutes. A value with no
    exposure in the log gets NaN and triggers ``UndefinedRateWarning``; the
    NaN cell raises if it is ever evaluated.
    """
    if not any(t.id == threat for t in model.threats):
        raise VariableKindError(f"{threat!r} is not a threat of this model")
    if log.isolated_threat is not None and log.isolated_threat != threat:
        raise IsolationProtocolError(
            f"log isolates {log.isolated_threat!r}; occurrence counts for "
            f"{threat!r} are not representative"
        )
    if variable is None:
        exposure = sum(ep.duration for ep in log)
        if exposure <= 0:
            raise DegenerateDataError("log has no exposure time")
        count = sum(ep.threat_occurrences.get(threat, 0) for ep in log)
        return count / exposure
    var = model.variable(variable)
    if not var.is_discrete:
        raise VariableKindError(f"{variable!r} is continuous; per-value rates need a discrete variable")
    exposure = {v: 0.0 for v in var.values}
    counts = {v: 0 for v in var.values}
    for ep in log:
        value = str(ep.state_value(variable))
        var.check_value(value)
        exposure[value] += ep.duration
        counts[value] += ep.threat_occurrences.get(threat, 0)
    rates: dict[str, float] = {}
    for v in var.values:
        if exposure[v] == 0.0:
            warnings.warn(
                f"no exposure for {variable}={v}; rate of {threat!r} there is undefined",
                UndefinedRateWarning,
                stacklevel=2,
            )
            rates[v] = math.nan
        else:
            rates[v] = counts[v] / exposure[v]
    return Factor(
        variable=variable,
        form=FactorForm.TABLE,
        values=rates,
        sample_sizes=dict(counts),
    )


def fit_barrier(
    log: EpisodeLog,
    model: BowTie,
    barrier: str,
    variables: Sequence[str] = (),
    base: float | str = "pooled",
    fusion_mode: FusionMode = FusionMode.RAW_CLAMPED,
) -> ConditionalFunction:
    """Assemble a barrier's conditional function from a log: pooled (or
    given) base plus one estimated factor per requested variable."""
    node = model.node(barrier)
    if not node.is_barrier:
        raise VariableKindError(f"{barrier!r} is not a barrier")
    base_value = (
        pooled_success_probability(log, model, barrier) if base == "pooled" else float(base)
    )
    factors = []
    for name in variables:
        if model.variable(name).is_discrete:
            factors.append(estimate_discrete_factor(log, model, barrier, name))
        else:
            factors.append(fit_sigmoid_factor(log, model, barrier, name))
    return ConditionalFunction(
        kind=FunctionKind.BARRIER,
        base=base_value,
        factors=tuple(factors),
        fusion_mode=fusion_mode,
    )


def fit_threat(
    log: EpisodeLog,
    model: BowTie,
    threat: str,
    variables: Sequence[str] = (),
    base: float | str = "pooled",
) -> ConditionalFunction:
    """Assemble a threat's rate function from a log: pooled (or given) base
    rate plus one per-value rate table per requested discrete variable."""
    factors = []
    for name in variables:
        if not model.variable(name).is_discrete:
            raise VariableKindError(
                f"{name!r} is continuous; rate factors support discrete variables only"
            )
        factor = estimate_threat_rate(log, model, threat, name)
        assert isinstance(factor, Factor)
        factors.append(factor)
    base_value = (
        estimate_threat_rate(log, model, threat) if base == "pooled" else float(base)
    )
    assert isinstance(base_value, float)
    return ConditionalFunction(
        kind=FunctionKind.THREAT, base=base_value, factors=tuple(factors)
    )
