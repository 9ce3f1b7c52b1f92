"""Conditional barrier probabilities and threat rates.

A conditional function attaches to a threat or barrier node and maps a state
vector to that node's rate or success probability. It consists of a base
value (the marginal, state-independent estimate) and per-variable factors;
factor outputs are fused under an independence assumption: the product of
the per-factor conditionals divided by ``base`` once per factor beyond the
first.

With a single factor the fusion reduces to that factor's value exactly; the
implementation special-cases this so no rounding is introduced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import DegenerateBaseError, IncompleteStateError, StateDomainError


class FactorForm(str, Enum):
    TABLE = "table"
    SIGMOID = "sigmoid"
    CLAMPED_LINEAR = "clamped_linear"


class FunctionKind(str, Enum):
    BARRIER = "barrier_probability"  # success probability in [0, 1]
    THREAT = "threat_rate"  # occurrence rate, >= 0, per minute


class FusionMode(str, Enum):
    RAW_CLAMPED = "raw_clamped"
    NORMALIZED = "normalized"


def _logistic(z: float) -> float:
    # Split on sign so neither branch exponentiates a large positive value.
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class Factor:
    """One per-variable conditional: a lookup table over a discrete domain,
    or a sigmoid / clamped-linear curve over a continuous variable.

    ``sample_sizes`` is optional provenance from estimation (observation
    counts per discrete value, or a single pooled count); it never affects
    evaluation.
    """

    variable: str
    form: FactorForm
    values: Mapping[str, float] | None = None
    alpha: float | None = None
    beta: float | None = None
    slope: float | None = None
    intercept: float | None = None
    sample_sizes: Mapping[str, int] | int | None = None

    def __post_init__(self):
        object.__setattr__(self, "form", FactorForm(self.form))
        if self.form is FactorForm.TABLE:
            if self.values is None:
                raise ValueError(f"table factor on {self.variable!r} needs values")
            object.__setattr__(
                self, "values", {str(k): float(v) for k, v in self.values.items()}
            )
        elif self.form is FactorForm.SIGMOID:
            if self.alpha is None or self.beta is None:
                raise ValueError(f"sigmoid factor on {self.variable!r} needs alpha and beta")
        elif self.form is FactorForm.CLAMPED_LINEAR:
            if self.slope is None or self.intercept is None:
                raise ValueError(
                    f"clamped-linear factor on {self.variable!r} needs slope and intercept"
                )
        if isinstance(self.sample_sizes, Mapping):
            object.__setattr__(
                self,
                "sample_sizes",
                {str(k): int(v) for k, v in self.sample_sizes.items()},
            )

    def evaluate(self, value: str | float, kind: FunctionKind) -> float:
        """This factor's conditional at one variable value.

        Raises ``StateDomainError`` for a table miss and ``ValueError`` when
        the looked-up cell is the undefined-rate marker (NaN).
        """
        if self.form is FactorForm.TABLE:
            label = str(value)
            table = self.values
            assert table is not None
            if label not in table:
                raise StateDomainError(
                    f"value {value!r} is not covered by the table on {self.variable!r}"
                )
            out = table[label]
            if math.isnan(out):
                raise ValueError(
                    f"conditional for {self.variable!r}={label} is undefined "
                    "(no observations at estimation time)"
                )
            return out
        x = float(value)
        if self.form is FactorForm.SIGMOID:
            return _logistic(self.alpha * x + self.beta)  # type: ignore[operator]
        y = self.slope * x + self.intercept  # type: ignore[operator]
        if kind is FunctionKind.BARRIER:
            return min(1.0, max(0.0, y))
        return max(0.0, y)


@dataclass(frozen=True)
class ConditionalFunction:
    """Base value plus fused per-variable factors for one threat or barrier."""

    kind: FunctionKind
    base: float
    factors: tuple[Factor, ...] = ()
    fusion_mode: FusionMode = FusionMode.RAW_CLAMPED

    def __post_init__(self):
        object.__setattr__(self, "kind", FunctionKind(self.kind))
        object.__setattr__(self, "fusion_mode", FusionMode(self.fusion_mode))
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.kind is FunctionKind.BARRIER:
            if not 0.0 <= self.base <= 1.0:
                raise ValueError(f"barrier base must be in [0, 1], got {self.base}")
            for f in self.factors:
                if f.form is FactorForm.TABLE:
                    bad = {
                        k: v
                        for k, v in f.values.items()  # type: ignore[union-attr]
                        if not math.isnan(v) and not 0.0 <= v <= 1.0
                    }
                    if bad:
                        raise ValueError(
                            f"barrier table on {f.variable!r} has values outside [0, 1]: {bad}"
                        )
        else:
            if not self.base >= 0.0:
                raise ValueError(f"threat base rate must be >= 0, got {self.base}")
            if self.fusion_mode is not FusionMode.RAW_CLAMPED:
                raise ValueError("rate fusion supports only the raw_clamped mode")
            for f in self.factors:
                if f.form is FactorForm.TABLE:
                    bad = {
                        k: v
                        for k, v in f.values.items()  # type: ignore[union-attr]
                        if not math.isnan(v) and v < 0.0
                    }
                    if bad:
                        raise ValueError(
                            f"rate table on {f.variable!r} has negative values: {bad}"
                        )
        seen = [f.variable for f in self.factors]
        if len(set(seen)) != len(seen):
            raise ValueError("at most one factor per variable")

    def evaluate(self, state: Mapping[str, str | float]) -> float:
        if self.kind is FunctionKind.BARRIER:
            return evaluate_barrier(self, state)
        return evaluate_threat_rate(self, state)


def _factor_values(fn: ConditionalFunction, state: Mapping[str, str | float]) -> list[float]:
    out = []
    for f in fn.factors:
        if f.variable not in state:
            raise IncompleteStateError(f.variable)
        out.append(f.evaluate(state[f.variable], fn.kind))
    return out


def fuse_probabilities(
    base: float, probs: Sequence[float], mode: FusionMode = FusionMode.RAW_CLAMPED
) -> float:
    """Fuse per-factor conditional probabilities against a shared base.

    With ``m`` factors the fused odds-product is ``prod(p_j) / base**(m-1)``.
    ``raw_clamped`` clips that into [0, 1]; ``normalized`` divides by the sum
    of the success and failure products, which keeps the result a proper
    probability without clipping. ``m == 1`` returns the factor unchanged and
    ``m == 0`` returns the base.
    """
    m = len(probs)
    if m == 0:
        return base
    if m == 1:
        return float(probs[0])
    if base <= 0.0 or base >= 1.0:
        raise DegenerateBaseError(
            f"fusing {m} factors requires a base strictly inside (0, 1), got {base}"
        )
    q1 = math.prod(probs) / base ** (m - 1)
    if mode is FusionMode.RAW_CLAMPED:
        return min(1.0, max(0.0, q1))
    q0 = math.prod(1.0 - p for p in probs) / (1.0 - base) ** (m - 1)
    if q1 + q0 == 0.0:
        raise ValueError(
            "factors give contradictory certainties (some 0 and some 1); "
            "normalized fusion is undefined"
        )
    return q1 / (q1 + q0)


def fuse_rates(base: float, rates: Sequence[float]) -> float:
    """Fuse per-factor conditional rates; same shape as probability fusion
    but floored at zero instead of clipped to [0, 1]."""
    m = len(rates)
    if m == 0:
        return base
    if m == 1:
        return float(rates[0])
    if base <= 0.0:
        raise DegenerateBaseError(
            f"fusing {m} rate factors requires a base rate > 0, got {base}"
        )
    return max(0.0, math.prod(rates) / base ** (m - 1))


def evaluate_barrier(fn: ConditionalFunction, state: Mapping[str, str | float]) -> float:
    """Success probability of a barrier in the given state."""
    if fn.kind is not FunctionKind.BARRIER:
        raise ValueError("expected a barrier function")
    return fuse_probabilities(fn.base, _factor_values(fn, state), fn.fusion_mode)


def evaluate_threat_rate(fn: ConditionalFunction, state: Mapping[str, str | float]) -> float:
    """Occurrence rate (per minute) of a threat in the given state."""
    if fn.kind is not FunctionKind.THREAT:
        raise ValueError("expected a threat rate function")
    return fuse_rates(fn.base, _factor_values(fn, state))
