"""Runtime risk evaluation: rate propagation, marginalization, smoothing,
and state-trace assessment.

Propagation over a validated bow-tie model works on occurrence rates (per
minute). A threat's conditional rate is attenuated by the failure
probabilities of the barriers on its prevention chain; the top event rate is
the sum over threats; a consequence rate is the top event rate attenuated by
its recovery chain. All of it is evaluated pointwise at a known state, or
averaged over a state prior by exhaustive enumeration or Monte-Carlo
sampling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .conditional import evaluate_barrier, evaluate_threat_rate
from .errors import IncompleteStateError, NodeLookupError, StateDomainError, StreamOrderError
from .errors import UndefinedRateWarning
from .model import BowTie, EventRole, StatePrior, StateVector
from .rngstreams import MARGINAL_STREAM, substream

_MC_CHUNK = 4096


def attenuate(rate: float, barrier_probs: Sequence[float]) -> float:
    """Rate remaining after a chain of barriers, each passing failures only:
    ``rate * prod(1 - p)``."""
    return rate * math.prod(1.0 - p for p in barrier_probs)


def _chain_probs(model: BowTie, chain: Sequence[str], state) -> list[float]:
    probs = []
    for barrier_id in chain:
        fn = model.node(barrier_id).conditional_function
        if fn is None:
            raise ValueError(f"barrier {barrier_id!r} has no conditional function")
        probs.append(evaluate_barrier(fn, state))
    return probs


def top_event_rate(model: BowTie, state: Mapping[str, str | float] | StateVector) -> float:
    """Top event occurrence rate at a known state: the sum over threats of
    each conditional threat rate attenuated by its prevention chain."""
    total = 0.0
    for threat in model.threats:
        fn = threat.conditional_function
        if fn is None:
            raise ValueError(f"threat {threat.id!r} has no conditional function")
        rate = evaluate_threat_rate(fn, state)
        total += attenuate(rate, _chain_probs(model, model.prevention_chains[threat.id], state))
    return total


def consequence_rate(
    model: BowTie, consequence: str, state: Mapping[str, str | float] | StateVector
) -> float:
    """Occurrence rate of one consequence at a known state."""
    chain = _consequence_chain(model, consequence)
    return attenuate(top_event_rate(model, state), _chain_probs(model, chain, state))


def _consequence_chain(model: BowTie, consequence: str) -> tuple[str, ...]:
    if consequence == model.top.id:
        return ()
    try:
        return model.recovery_chains[consequence]
    except KeyError:
        raise NodeLookupError(
            f"{consequence!r} is not a consequence of this model"
        ) from None


def all_consequence_rates(
    model: BowTie, state: Mapping[str, str | float] | StateVector
) -> dict[str, float]:
    """Every consequence rate at a known state, sharing one top-rate pass."""
    top = top_event_rate(model, state)
    return {
        c.id: attenuate(top, _chain_probs(model, model.recovery_chains[c.id], state))
        for c in model.consequences
    }


@dataclass(frozen=True)
class MarginalRate:
    """A rate averaged over a state prior."""

    value: float
    method: str  # "exhaustive" or "monte_carlo"
    samples: int | None = None
    stderr: float | None = None


def marginal_consequence_rate(
    model: BowTie,
    consequence: str,
    prior: StatePrior,
    method: str = "monte_carlo",
    samples: int = 10_000,
    seed: int | None = None,
) -> MarginalRate:
    """Average a consequence rate (or, given the top event's id, the top
    event rate) over a prior on the state.

    ``exhaustive`` enumerates the joint support of the referenced variables
    and is exact but only defined when they are all discrete. ``monte_carlo``
    draws ``samples`` states from the prior and requires an explicit seed so
    runs are reproducible by construction; the result carries the standard
    error of the estimate.
    """
    _consequence_chain(model, consequence)
    missing = prior.covers(model.referenced_variables)
    if missing:
        raise IncompleteStateError(missing[0])

    if method == "exhaustive":
        total = 0.0
        for assignment in prior.support_grid(model.referenced_variables):
            p = prior.joint_probability(assignment)
            if p == 0.0:
                continue
            total += p * consequence_rate(model, consequence, assignment)
        return MarginalRate(value=total, method="exhaustive")

    if method != "monte_carlo":
        raise ValueError(f"unknown marginalization method {method!r}")
    if seed is None:
        raise ValueError("monte_carlo marginalization requires an explicit seed")
    if samples < 1:
        raise ValueError("samples must be >= 1")

    draws = np.empty(samples, dtype=float)
    names = model.referenced_variables
    pos = 0
    for chunk_index in range(0, (samples + _MC_CHUNK - 1) // _MC_CHUNK):
        rng = substream(seed, MARGINAL_STREAM, chunk_index)
        for _ in range(min(_MC_CHUNK, samples - pos)):
            state = prior.draw(rng, names)
            draws[pos] = consequence_rate(model, consequence, state)
            pos += 1
    stderr = float(draws.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return MarginalRate(
        value=float(draws.mean()), method="monte_carlo", samples=samples, stderr=stderr
    )


# -- Poisson machinery ----------------------------------------------------


def poisson_likelihood(rate: float, horizon: float) -> float:
    """Probability of at least one occurrence within ``horizon`` minutes at a
    constant rate: ``1 - exp(-rate * horizon)``."""
    if rate < 0 or horizon < 0:
        raise ValueError("rate and horizon must be >= 0")
    return 1.0 - math.exp(-rate * horizon)


def poisson_log_likelihood(
    counts: Sequence[int], rates: Sequence[float] | float, interval: float = 1.0
) -> float:
    """Log-likelihood of per-interval occurrence counts under Poisson rates.

    ``rates`` is either one rate per count or a single rate shared by all
    intervals. A zero expected count against a positive observed count makes
    the data impossible; that contributes ``-inf`` and emits a warning.
    """
    counts = list(counts)
    if isinstance(rates, (int, float)):
        rates = [float(rates)] * len(counts)
    else:
        rates = [float(r) for r in rates]
    if len(rates) != len(counts):
        raise ValueError("need one rate per count")
    if interval <= 0:
        raise ValueError("interval must be > 0")
    total = 0.0
    for k, lam in zip(counts, rates):
        if k < 0 or lam < 0 or math.isnan(lam):
            raise ValueError(f"invalid pair count={k}, rate={lam}")
        mean = lam * interval
        if mean == 0.0:
            if k > 0:
                warnings.warn(
                    f"count {k} observed where the model predicts rate 0; "
                    "log-likelihood is -inf",
                    UndefinedRateWarning,
                    stacklevel=2,
                )
                return -math.inf
            continue  # 0 * log(0) term vanishes
        total += k * math.log(mean) - mean - math.lgamma(k + 1)
    return total


@dataclass(frozen=True)
class LikelihoodComparison:
    dynamic: float
    static: float
    static_rate: float

    @property
    def advantage(self) -> float:
        """How many nats the state-conditional model gains over the constant
        rate."""
        return self.dynamic - self.static


def compare_log_likelihood(
    counts: Sequence[int],
    dynamic_rates: Sequence[float],
    static_rate: float | None = None,
    interval: float = 1.0,
) -> LikelihoodComparison:
    """Score state-conditional rates against the best constant rate on the
    same counts. ``static_rate=None`` uses the maximum-likelihood constant,
    the mean count per interval."""
    counts = list(counts)
    if static_rate is None:
        if not counts:
            raise ValueError("cannot infer a static rate from no counts")
        static_rate = sum(counts) / (len(counts) * interval)
    return LikelihoodComparison(
        dynamic=poisson_log_likelihood(counts, dynamic_rates, interval),
        static=poisson_log_likelihood(counts, static_rate, interval),
        static_rate=float(static_rate),
    )


# -- smoothing and trace assessment ---------------------------------------


def moving_average(values: Sequence[float], window: int) -> list[float]:
    """Trailing moving average; before the window fills, the prefix mean.

    Each output is computed from its own window only, so a window of one
    reproduces the input exactly and no rounding error carries across
    samples.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    values = list(values)
    return [
        math.fsum(values[max(0, i - window + 1) : i + 1]) / min(i + 1, window)
        for i in range(len(values))
    ]


def average_signal(
    times: Sequence[float], values: Sequence[float], start: float, end: float
) -> float:
    """Time-average of a piecewise-linear signal over [start, end], via the
    trapezoid rule with interpolated endpoints."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or t.size < 2:
        raise ValueError("need two or more (time, value) samples")
    if np.any(np.diff(t) <= 0):
        raise StreamOrderError("times must be strictly increasing")
    if not start < end:
        raise ValueError("need start < end")
    if start < t[0] or end > t[-1]:
        raise ValueError("requested range extends beyond the sampled signal")
    inside = (t > start) & (t < end)
    tt = np.concatenate(([start], t[inside], [end]))
    vv = np.concatenate(([np.interp(start, t, v)], v[inside], [np.interp(end, t, v)]))
    return float(np.trapezoid(vv, tt) / (end - start))


@dataclass(frozen=True)
class ConsequencePoint:
    raw_rate: float
    smoothed_rate: float
    likelihood: float
    threshold: float
    violated: bool


@dataclass(frozen=True)
class TracePoint:
    time: float
    consequences: Mapping[str, ConsequencePoint] | None = None
    top_rate: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class RiskTrace:
    consequence_ids: tuple[str, ...]
    points: tuple[TracePoint, ...]
    window: int
    horizon: float

    @property
    def violations(self) -> list[tuple[float, str]]:
        """(time, consequence) pairs where the smoothed rate exceeded the
        acceptable rate."""
        out = []
        for p in self.points:
            if p.consequences:
                out.extend(
                    (p.time, cid) for cid, c in p.consequences.items() if c.violated
                )
        return out

    @property
    def errors(self) -> list[tuple[float, str]]:
        return [(p.time, p.error) for p in self.points if p.error is not None]


def average_rate(trace: RiskTrace, start: float, end: float, consequence: str) -> float:
    """Time-averaged raw occurrence rate of one consequence over
    ``[start, end]`` of an assessed trace, trapezoid rule over the evaluable
    samples (error samples carry no rate and are skipped)."""
    if consequence not in trace.consequence_ids:
        raise NodeLookupError(f"trace has no consequence {consequence!r}")
    times: list[float] = []
    values: list[float] = []
    for p in trace.points:
        if p.consequences is not None:
            times.append(p.time)
            values.append(p.consequences[consequence].raw_rate)
    return average_signal(times, values, start, end)


def _acceptable_rate(model: BowTie, consequence_id: str) -> float:
    severity = model.node(consequence_id).severity
    if severity is None:
        return math.inf
    return model.severity_class(severity).max_acceptable_rate


def assess_stream(
    model: BowTie,
    stream: Iterable[tuple[float, Mapping[str, str | float]]],
    window: int = 20,
    horizon: float = 1.0,
) -> RiskTrace:
    """Assess a timestamped state stream against the model's acceptable
    rates.

    Per sample and consequence this computes the instantaneous rate, a
    trailing moving average over the last ``window`` evaluable samples, the
    probability of at least one occurrence within ``horizon`` minutes at the
    smoothed rate, and a verdict: violated when the smoothed rate is
    strictly above the consequence's acceptable rate.

    Samples whose state is incomplete, out of domain, or lands on an
    undefined conditional are recorded as errors and excluded from the
    smoothing windows. Timestamps must be strictly increasing.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    cons_ids = tuple(c.id for c in model.consequences)
    thresholds = {cid: _acceptable_rate(model, cid) for cid in cons_ids}
    recent: dict[str, list[float]] = {cid: [] for cid in cons_ids}
    points: list[TracePoint] = []
    last_time: float | None = None
    for time, state in stream:
        time = float(time)
        if last_time is not None and time <= last_time:
            raise StreamOrderError(
                f"timestamps must be strictly increasing ({time} after {last_time})"
            )
        last_time = time
        try:
            model.check_state(StateVector(state) if not isinstance(state, StateVector) else state)
            rates = all_consequence_rates(model, state)
        except (IncompleteStateError, StateDomainError, ValueError) as exc:
            points.append(TracePoint(time=time, error=str(exc)))
            continue
        top = top_event_rate(model, state)
        row: dict[str, ConsequencePoint] = {}
        for cid in cons_ids:
            hist = recent[cid]
            hist.append(rates[cid])
            if len(hist) > window:
                del hist[0]
            smoothed = sum(hist) / len(hist)
            row[cid] = ConsequencePoint(
                raw_rate=rates[cid],
                smoothed_rate=smoothed,
                likelihood=poisson_likelihood(smoothed, horizon),
                threshold=thresholds[cid],
                violated=smoothed > thresholds[cid],
            )
        points.append(TracePoint(time=time, consequences=row, top_rate=top))
    return RiskTrace(
        consequence_ids=cons_ids, points=tuple(points), window=window, horizon=horizon
    )
