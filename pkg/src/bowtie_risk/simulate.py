"""Scenario simulator: generates episode logs from a configurable ground
truth, independently of the rate-propagation engine.

The simulator draws concrete event sequences: it samples a state per
episode, draws threat occurrences (Poisson counts over the episode duration,
or exactly one per episode), pushes each occurrence through the prevention
chain by flipping one Bernoulli per barrier, and pushes each resulting top
event through every recovery chain the same way. Counting outcomes over
many episodes gives empirical rates that the engine's closed-form
predictions can be checked against.

Ground-truth behavior can be specified either by conditional functions (the
same objects the engine evaluates) or by explicit joint tables over discrete
state variables. Joint tables bypass the factor-fusion machinery entirely,
which keeps the simulator usable as an independent check of that machinery.

Episode ``i`` of a run draws from its own random stream keyed by
``(seed, EPISODE_STREAM, i)``; see :mod:`bowtie_risk.rngstreams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .conditional import ConditionalFunction, FunctionKind
from .errors import IncompleteStateError, NodeLookupError, StateDomainError
from .estimation import Episode, EpisodeLog
from .model import BowTie, DiscretePmf, StatePrior, StateVariable, UniformDensity
from .rngstreams import EPISODE_STREAM, substream


@dataclass(frozen=True)
class JointTable:
    """Explicit value over the joint cells of some discrete variables.

    ``cells`` maps a tuple of values (aligned with ``variables``) to a
    probability or rate. Every addressed cell must be present; there is no
    fallback.
    """

    variables: tuple[str, ...]
    cells: Mapping[tuple[str, ...], float]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(
            self,
            "cells",
            {tuple(str(v) for v in key): float(p) for key, p in self.cells.items()},
        )
        for key in self.cells:
            if len(key) != len(self.variables):
                raise ValueError(
                    f"cell key {key} does not match variables {self.variables}"
                )

    def evaluate(self, state: Mapping[str, str | float]) -> float:
        key = []
        for name in self.variables:
            if name not in state:
                raise IncompleteStateError(name)
            key.append(str(state[name]))
        try:
            return self.cells[tuple(key)]
        except KeyError:
            raise StateDomainError(
                f"no cell for {dict(zip(self.variables, key))}"
            ) from None


Source = ConditionalFunction | JointTable


@dataclass(frozen=True)
class GroundTruth:
    """Behavioral specification the simulator executes.

    ``occurrence_model`` is ``"poisson"`` (counts drawn from the conditional
    rate over the episode duration) or ``"once_per_scene"`` (every active
    threat occurs exactly once per episode, as in staged isolation runs).
    """

    schema: tuple[StateVariable, ...]
    prior: StatePrior
    threat_rates: Mapping[str, Source]
    barrier_probs: Mapping[str, Source]
    duration: float = 1.0  # minutes per episode
    occurrence_model: str = "poisson"

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "threat_rates", dict(self.threat_rates))
        object.__setattr__(self, "barrier_probs", dict(self.barrier_probs))
        if self.duration <= 0:
            raise ValueError("duration must be > 0 minutes")
        if self.occurrence_model not in ("poisson", "once_per_scene"):
            raise ValueError(
                f"occurrence_model must be poisson or once_per_scene, "
                f"got {self.occurrence_model!r}"
            )
        for name, source in list(self.threat_rates.items()):
            if isinstance(source, ConditionalFunction) and source.kind is not FunctionKind.THREAT:
                raise ValueError(f"threat {name!r} needs a rate function")
        for name, source in list(self.barrier_probs.items()):
            if isinstance(source, ConditionalFunction) and source.kind is not FunctionKind.BARRIER:
                raise ValueError(f"barrier {name!r} needs a probability function")


class _FastPrior:
    """Per-variable samplers with precomputed cumulative weights; equivalent
    to ``StatePrior.draw`` draw-for-draw but without its per-call setup."""

    def __init__(self, prior: StatePrior):
        self.columns: list[tuple[str, list[str] | None, np.ndarray | None, float, float]] = []
        for name in sorted(prior.marginals):
            marginal = prior.marginals[name]
            if isinstance(marginal, DiscretePmf):
                labels = list(marginal.probs)
                weights = np.array([marginal.probs[v] for v in labels], dtype=float)
                cum = np.cumsum(weights / weights.sum())
                self.columns.append((name, labels, cum, 0.0, 0.0))
            else:
                assert isinstance(marginal, UniformDensity)
                self.columns.append((name, None, None, marginal.low, marginal.high))

    def draw(self, rng: np.random.Generator) -> dict[str, str | float]:
        state: dict[str, str | float] = {}
        for name, labels, cum, low, high in self.columns:
            if labels is None:
                state[name] = float(rng.uniform(low, high))
            else:
                state[name] = labels[int(np.searchsorted(cum, rng.random(), side="right"))]
        return state


def _evaluate(source: Source, state: Mapping[str, str | float]) -> float:
    if isinstance(source, JointTable):
        return source.evaluate(state)
    return source.evaluate(state)


class _Memo:
    """Caches source evaluations per discrete state cell. Only engaged when
    every variable a source reads is discrete, so a cell key is exact."""

    def __init__(self, truth: GroundTruth):
        discrete = {v.name for v in truth.schema if v.is_discrete}
        self.cacheable: dict[str, tuple[str, ...]] = {}
        for name, source in {**truth.threat_rates, **truth.barrier_probs}.items():
            used = (
                source.variables
                if isinstance(source, JointTable)
                else tuple(f.variable for f in source.factors)
            )
            if all(u in discrete for u in used):
                self.cacheable[name] = tuple(sorted(used))
        self.cache: dict[tuple[str, tuple[str, ...]], float] = {}

    def value(self, name: str, source: Source, state: Mapping[str, str | float]) -> float:
        used = self.cacheable.get(name)
        if used is None:
            return _evaluate(source, state)
        key = (name, tuple(str(state[u]) for u in used))
        hit = self.cache.get(key)
        if hit is None:
            hit = _evaluate(source, state)
            self.cache[key] = hit
        return hit


def run_episodes(
    truth: GroundTruth,
    model: BowTie,
    count: int,
    seed: int,
    isolate: str | None = None,
    states: Sequence[Mapping[str, str | float]] | None = None,
    scene_prefix: str = "ep",
) -> EpisodeLog:
    """Simulate ``count`` episodes and return their log.

    ``model`` supplies only the chain structure (which barriers guard which
    threat, and which serve each consequence); all probabilities and rates
    come from ``truth``. ``isolate`` enables a single threat and marks the
    log accordingly. ``states`` overrides the per-episode state draw with a
    fixed cycle of states.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    active = list(truth.threat_rates) if isolate is None else [isolate]
    if isolate is not None and isolate not in truth.threat_rates:
        raise NodeLookupError(f"isolate target {isolate!r} has no ground-truth rate")
    chains = {t: model.prevention_chains[t] for t in active}
    recovery = model.recovery_chains
    for chain in list(chains.values()) + list(recovery.values()):
        for b in chain:
            if b not in truth.barrier_probs:
                raise ValueError(f"barrier {b!r} has no ground-truth probability")
    fast_prior = _FastPrior(truth.prior)
    memo = _Memo(truth)
    once = truth.occurrence_model == "once_per_scene"
    episodes: list[Episode] = []
    for i in range(count):
        rng = substream(seed, EPISODE_STREAM, i)
        state = dict(states[i % len(states)]) if states else fast_prior.draw(rng)
        occurrences: dict[str, int] = {}
        outcomes: list[tuple[str, bool]] = []
        top_count = 0
        consequence_counts: dict[str, int] = {}
        for threat in active:
            if once:
                n_occ = 1
            else:
                rate = memo.value(threat, truth.threat_rates[threat], state)
                n_occ = int(rng.poisson(rate * truth.duration))
            occurrences[threat] = n_occ
            chain = chains[threat]
            for _ in range(n_occ):
                reached_top = True
                for barrier in chain:
                    p = memo.value(barrier, truth.barrier_probs[barrier], state)
                    success = rng.random() < p
                    outcomes.append((barrier, success))
                    if success:
                        reached_top = False
                        break
                if reached_top:
                    top_count += 1
                    for cons_id, rec_chain in recovery.items():
                        reached = True
                        for barrier in rec_chain:
                            p = memo.value(barrier, truth.barrier_probs[barrier], state)
                            success = rng.random() < p
                            outcomes.append((barrier, success))
                            if success:
                                reached = False
                                break
                        if reached:
                            consequence_counts[cons_id] = consequence_counts.get(cons_id, 0) + 1
        episodes.append(
            Episode(
                scene_id=f"{scene_prefix}{i:06d}",
                duration=truth.duration,
                state=state,
                threat_occurrences=occurrences,
                top_event_count=top_count,
                consequence_counts=consequence_counts,
                barrier_outcomes=tuple(outcomes),
            )
        )
    return EpisodeLog(episodes=tuple(episodes), isolated_threat=isolate)


@dataclass(frozen=True)
class RateEstimate:
    """Empirical occurrence rate with its Poisson-count standard error."""

    count: int
    exposure: float  # minutes

    @property
    def rate(self) -> float:
        return self.count / self.exposure

    @property
    def stderr(self) -> float:
        return math.sqrt(self.count) / self.exposure

    @property
    def upper95(self) -> float:
        """95% upper bound; for a zero count, the rule-of-three bound."""
        if self.count == 0:
            return 3.0 / self.exposure
        return self.rate + 1.96 * self.stderr


@dataclass(frozen=True)
class EmpiricalRates:
    exposure: float
    top: RateEstimate
    consequences: dict[str, RateEstimate]
    threats: dict[str, RateEstimate] = field(default_factory=dict)


def empirical_rates(log: EpisodeLog) -> EmpiricalRates:
    """Occurrence rates observed in a log, per minute of exposure."""
    exposure = sum(ep.duration for ep in log)
    if exposure <= 0:
        raise ValueError("log has no exposure time")
    top = sum(ep.top_event_count for ep in log)
    cons: dict[str, int] = {}
    threats: dict[str, int] = {}
    for ep in log:
        for cid, k in ep.consequence_counts.items():
            cons[cid] = cons.get(cid, 0) + k
        for tid, k in ep.threat_occurrences.items():
            threats[tid] = threats.get(tid, 0) + k
    return EmpiricalRates(
        exposure=exposure,
        top=RateEstimate(top, exposure),
        consequences={c: RateEstimate(k, exposure) for c, k in cons.items()},
        threats={t: RateEstimate(k, exposure) for t, k in threats.items()},
    )
