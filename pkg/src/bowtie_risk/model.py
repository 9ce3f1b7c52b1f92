"""Bow-tie hazard model: node/connection data model, state schema, and the
structural validator.

A bow-tie model is a DAG of event and barrier nodes around a single top
event: threat events feed the top event through prevention barriers, and the
top event feeds consequence events through recovery barriers. Threat and
barrier nodes carry conditional functions (see :mod:`bowtie_risk.conditional`)
that make their rates and success probabilities depend on the declared state
schema.

Models are immutable after construction and safe to share across threads;
``validate`` is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping

import numpy as np

from .errors import IncompleteStateError, NodeLookupError, StateDomainError

if TYPE_CHECKING:
    from .conditional import ConditionalFunction


class NodeType(str, Enum):
    EVENT = "event"
    BARRIER = "barrier"


class EventRole(str, Enum):
    THREAT = "threat"
    TOP = "top"
    CONSEQUENCE = "consequence"


class VariableCategory(str, Enum):
    FAULT = "fault"
    ENVIRONMENT = "environment"
    MONITOR = "monitor"


@dataclass(frozen=True)
class SeverityClass:
    """A named severity level with its maximum acceptable occurrence rate.

    ``max_acceptable_rate`` is in occurrences per minute; ``math.inf`` marks a
    class with no rate ceiling (conventionally named "None").
    """

    name: str
    max_acceptable_rate: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("severity class name must be non-empty")
        if math.isnan(self.max_acceptable_rate) or self.max_acceptable_rate < 0:
            raise ValueError(
                f"max_acceptable_rate for {self.name!r} must be >= 0, "
                f"got {self.max_acceptable_rate}"
            )


@dataclass(frozen=True)
class StateVariable:
    """One declared state variable: a fault flag, environment parameter, or
    runtime monitor output.

    Discrete variables enumerate their values as strings; continuous variables
    carry finite ``lower < upper`` bounds.
    """

    name: str
    category: VariableCategory
    values: tuple[str, ...] | None = None
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "category", VariableCategory(self.category))
        if self.values is not None:
            object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        if (self.values is None) == (self.lower is None and self.upper is None):
            raise ValueError(
                f"variable {self.name!r} must be either discrete (values) "
                "or continuous (lower/upper), not both or neither"
            )
        if self.values is not None:
            if not self.values:
                raise ValueError(f"discrete variable {self.name!r} has an empty domain")
            if len(set(self.values)) != len(self.values):
                raise ValueError(f"discrete variable {self.name!r} has duplicate values")
        else:
            if self.lower is None or self.upper is None:
                raise ValueError(f"continuous variable {self.name!r} needs both bounds")
            if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
                raise ValueError(f"bounds of {self.name!r} must be finite")
            if not self.lower < self.upper:
                raise ValueError(f"variable {self.name!r} needs lower < upper")

    @property
    def is_discrete(self) -> bool:
        return self.values is not None

    def check_value(self, value: str | float) -> str | float:
        """Validate one assignment against this variable's domain.

        Returns the normalized value (str for discrete, float for continuous);
        raises ``StateDomainError`` otherwise.
        """
        if self.is_discrete:
            label = str(value)
            if label not in self.values:  # type: ignore[operator]
                raise StateDomainError(
                    f"value {value!r} is not in the domain of {self.name!r} "
                    f"(allowed: {', '.join(self.values)})"  # type: ignore[arg-type]
                )
            return label
        try:
            x = float(value)
        except (TypeError, ValueError):
            raise StateDomainError(
                f"value {value!r} for continuous variable {self.name!r} is not numeric"
            ) from None
        if not self.lower <= x <= self.upper:  # type: ignore[operator]
            raise StateDomainError(
                f"value {x} for {self.name!r} is outside [{self.lower}, {self.upper}]"
            )
        return x


@dataclass(frozen=True)
class StateVector:
    """A concrete snapshot assignment of state variables.

    Discrete assignments are string labels, continuous ones floats. Domain
    and completeness checks happen against a model via
    :meth:`BowTie.check_state`.
    """

    values: Mapping[str, str | float]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def __getitem__(self, name: str) -> str | float:
        try:
            return self.values[name]
        except KeyError:
            raise IncompleteStateError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def get(self, name: str, default=None):
        return self.values.get(name, default)


@dataclass(frozen=True)
class DiscretePmf:
    """Probability mass over a discrete variable's values; sums to 1 (+-1e-9)."""

    probs: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "probs", {str(k): float(v) for k, v in self.probs.items()})
        if any(p < 0 for p in self.probs.values()):
            raise ValueError("probability mass values must be >= 0")
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probability mass must sum to 1, got {total}")


@dataclass(frozen=True)
class UniformDensity:
    """Uniform density over [low, high) for a continuous variable."""

    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ValueError("uniform density bounds must be finite")
        if not self.low < self.high:
            raise ValueError("uniform density needs low < high")


Marginal = DiscretePmf | UniformDensity


@dataclass(frozen=True)
class StatePrior:
    """Independent per-variable marginal distributions over the state schema.

    The joint probability of an assignment is the product of its marginals;
    draws sample each variable independently, in sorted name order so that a
    fixed generator state always yields the same assignment.
    """

    marginals: Mapping[str, Marginal]

    def __post_init__(self):
        object.__setattr__(self, "marginals", dict(self.marginals))

    def covers(self, names: Iterable[str]) -> list[str]:
        """Names from ``names`` that have no marginal (empty list = covered)."""
        return [n for n in names if n not in self.marginals]

    def joint_probability(self, assignment: Mapping[str, str]) -> float:
        """Product of discrete marginal masses for the given assignment."""
        p = 1.0
        for name, value in assignment.items():
            marginal = self.marginals[name]
            if not isinstance(marginal, DiscretePmf):
                raise ValueError(f"variable {name!r} is not discrete in this prior")
            p *= marginal.probs.get(str(value), 0.0)
        return p

    def support_grid(self, names: Iterable[str]) -> Iterator[dict[str, str]]:
        """Iterate every joint assignment of the named discrete variables."""
        names = sorted(names)
        for name in names:
            if not isinstance(self.marginals[name], DiscretePmf):
                raise ValueError(
                    f"exhaustive enumeration needs discrete variables; {name!r} is continuous"
                )

        def recurse(i: int, acc: dict[str, str]) -> Iterator[dict[str, str]]:
            if i == len(names):
                yield dict(acc)
                return
            marginal = self.marginals[names[i]]
            assert isinstance(marginal, DiscretePmf)
            for value in marginal.probs:
                acc[names[i]] = value
                yield from recurse(i + 1, acc)
            del acc[names[i]]

        yield from recurse(0, {})

    def draw(self, rng: np.random.Generator, names: Iterable[str] | None = None) -> StateVector:
        """Sample one state vector; variables are drawn in sorted name order."""
        names = sorted(self.marginals if names is None else names)
        values: dict[str, str | float] = {}
        for name in names:
            marginal = self.marginals[name]
            if isinstance(marginal, DiscretePmf):
                labels = list(marginal.probs)
                weights = np.array([marginal.probs[v] for v in labels])
                values[name] = labels[rng.choice(len(labels), p=weights / weights.sum())]
            else:
                values[name] = float(rng.uniform(marginal.low, marginal.high))
        return StateVector(values)


@dataclass(frozen=True)
class Node:
    """One bow-tie node: an event (threat / top / consequence) or a barrier.

    Threats and barriers carry a conditional function; top and consequence
    events do not (their rates are derived). ``event_role=None`` on an event
    is permitted at construction and flagged by the validator.
    """

    id: str
    node_type: NodeType
    description: str = ""
    event_role: EventRole | None = None
    severity: str | None = None
    conditional_function: "ConditionalFunction | None" = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("node id must be non-empty")
        object.__setattr__(self, "node_type", NodeType(self.node_type))
        if self.event_role is not None:
            object.__setattr__(self, "event_role", EventRole(self.event_role))
        if self.node_type is NodeType.BARRIER and self.event_role is not None:
            raise ValueError(f"barrier {self.id!r} must not declare an event role")

    @property
    def is_event(self) -> bool:
        return self.node_type is NodeType.EVENT

    @property
    def is_barrier(self) -> bool:
        return self.node_type is NodeType.BARRIER


class ViolationCode(str, Enum):
    """Structural restriction identifiers reported by ``validate``."""

    CYCLE = "CYCLE"
    TOP_COUNT = "TOP_COUNT"
    NO_THREAT = "NO_THREAT"
    NO_CONSEQUENCE = "NO_CONSEQUENCE"
    INTERMEDIATE_EVENT = "INTERMEDIATE_EVENT"
    MISPLACED_BARRIER = "MISPLACED_BARRIER"
    BRANCHING = "BRANCHING"
    DANGLING_REF = "DANGLING_REF"
    MISSING_FUNCTION = "MISSING_FUNCTION"
    UNDECLARED_VARIABLE = "UNDECLARED_VARIABLE"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    message: str
    nodes: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.code.value}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> tuple[ViolationCode, ...]:
        """Distinct violation codes, in first-seen order."""
        seen: dict[ViolationCode, None] = {}
        for v in self.violations:
            seen.setdefault(v.code, None)
        return tuple(seen)


@dataclass(frozen=True)
class BowTie:
    """A validated-or-validatable bow-tie model.

    Construction enforces only local well-formedness (unique ids and names);
    all structural restrictions are the validator's job so that a malformed
    model can still be loaded, inspected, and reported on.
    """

    hazard: str
    severity_classes: tuple[SeverityClass, ...] = ()
    state_schema: tuple[StateVariable, ...] = ()
    nodes: tuple[Node, ...] = ()
    connections: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "severity_classes", tuple(self.severity_classes))
        object.__setattr__(self, "state_schema", tuple(self.state_schema))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(
            self, "connections", tuple((str(s), str(d)) for s, d in self.connections)
        )
        for label, names in (
            ("node id", [n.id for n in self.nodes]),
            ("severity class", [c.name for c in self.severity_classes]),
            ("state variable", [v.name for v in self.state_schema]),
        ):
            dupes = {n for n in names if names.count(n) > 1}
            if dupes:
                raise ValueError(f"duplicate {label}: {', '.join(sorted(dupes))}")

    # -- lookups ---------------------------------------------------------

    @cached_property
    def _node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _variable_map(self) -> dict[str, StateVariable]:
        return {v.name: v for v in self.state_schema}

    @cached_property
    def _severity_map(self) -> dict[str, SeverityClass]:
        return {c.name: c for c in self.severity_classes}

    def node(self, node_id: str) -> Node:
        try:
            return self._node_map[node_id]
        except KeyError:
            raise NodeLookupError(f"no node with id {node_id!r}") from None

    def variable(self, name: str) -> StateVariable:
        try:
            return self._variable_map[name]
        except KeyError:
            raise NodeLookupError(f"no state variable named {name!r}") from None

    def severity_class(self, name: str) -> SeverityClass:
        try:
            return self._severity_map[name]
        except KeyError:
            raise NodeLookupError(f"no severity class named {name!r}") from None

    @cached_property
    def threats(self) -> tuple[Node, ...]:
        return tuple(
            n for n in self.nodes if n.is_event and n.event_role is EventRole.THREAT
        )

    @cached_property
    def consequences(self) -> tuple[Node, ...]:
        return tuple(
            n for n in self.nodes if n.is_event and n.event_role is EventRole.CONSEQUENCE
        )

    @cached_property
    def barriers(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.is_barrier)

    @cached_property
    def top(self) -> Node:
        tops = [n for n in self.nodes if n.is_event and n.event_role is EventRole.TOP]
        if len(tops) != 1:
            raise NodeLookupError(f"model has {len(tops)} top events, expected exactly 1")
        return tops[0]

    @cached_property
    def _successors(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for src, dst in self.connections:
            if src in out and dst in self._node_map:
                out[src].append(dst)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def _predecessors(self) -> dict[str, tuple[str, ...]]:
        inc: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for src, dst in self.connections:
            if dst in inc and src in self._node_map:
                inc[dst].append(src)
        return {k: tuple(v) for k, v in inc.items()}

    @cached_property
    def referenced_variables(self) -> tuple[str, ...]:
        """Sorted names of every variable used by any conditional function."""
        names: set[str] = set()
        for n in self.nodes:
            if n.conditional_function is not None:
                names.update(f.variable for f in n.conditional_function.factors)
        return tuple(sorted(names))

    # -- chain extraction ------------------------------------------------

    def prevention_chain(self, threat: str) -> list[str]:
        """Barrier ids on the path from ``threat`` to the top event, in path
        order. Empty if the threat connects directly.
        """
        node = self.node(threat)
        if not node.is_event or node.event_role is not EventRole.THREAT:
            raise NodeLookupError(f"{threat!r} is not a threat event")
        return self._walk_chain(threat, forward=True)

    def recovery_chain(self, consequence: str) -> list[str]:
        """Barrier ids on the path from the top event to ``consequence``, in
        path order. Empty if the consequence attaches directly.
        """
        node = self.node(consequence)
        if not node.is_event or node.event_role is not EventRole.CONSEQUENCE:
            raise NodeLookupError(f"{consequence!r} is not a consequence event")
        return list(reversed(self._walk_chain(consequence, forward=False)))

    def _walk_chain(self, start: str, forward: bool) -> list[str]:
        # Valid models guarantee a unique barrier-only path terminating at
        # the top; the step cap keeps this finite on malformed input.
        step = self._successors if forward else self._predecessors
        barriers: list[str] = []
        current = start
        for _ in range(len(self.nodes) + 1):
            nxt = step.get(current, ())
            if len(nxt) != 1:
                raise ValueError(
                    f"chain from {start!r} does not reach the top event; "
                    "run validate() first"
                )
            current = nxt[0]
            node = self.node(current)
            if node.is_event:
                if node.event_role is EventRole.TOP:
                    return barriers
                raise ValueError(
                    f"chain from {start!r} passes through event {current!r}; "
                    "run validate() first"
                )
            barriers.append(current)
        raise ValueError(f"chain from {start!r} does not terminate; run validate() first")

    @cached_property
    def prevention_chains(self) -> dict[str, tuple[str, ...]]:
        """Prevention chain per threat id (valid models only)."""
        return {t.id: tuple(self.prevention_chain(t.id)) for t in self.threats}

    @cached_property
    def recovery_chains(self) -> dict[str, tuple[str, ...]]:
        """Recovery chain per consequence id (valid models only)."""
        return {c.id: tuple(self.recovery_chain(c.id)) for c in self.consequences}

    # -- state checking --------------------------------------------------

    def check_state(self, state: StateVector, variables: Iterable[str] | None = None) -> None:
        """Check that ``state`` assigns every required variable a value inside
        its declared domain.

        ``variables`` defaults to every variable referenced by a conditional
        function (the completeness requirement for risk evaluation).
        """
        required = self.referenced_variables if variables is None else variables
        for name in required:
            if name not in state:
                raise IncompleteStateError(name)
            self.variable(name).check_value(state[name])


def validate(model: BowTie) -> ValidationReport:
    """Check every structural restriction and return the broken ones.

    Restriction catalogue (one code each):

    * DANGLING_REF -- a connection endpoint or severity reference names
      nothing declared.
    * CYCLE -- the connection graph is not acyclic.
    * TOP_COUNT -- not exactly one top event.
    * NO_THREAT / NO_CONSEQUENCE -- missing root / terminal events.
    * INTERMEDIATE_EVENT -- an event that is none of threat, top event, or
      consequence: either its role is undeclared, or it is disconnected from
      the top event so no role fits its position.
    * BRANCHING -- paths split or join away from the top event: a non-top
      node with more than one incoming or outgoing edge, an edge into a
      threat, or an edge out of a consequence.
    * MISPLACED_BARRIER -- a barrier not on a threat-to-top or
      top-to-consequence path.
    * MISSING_FUNCTION -- a threat or barrier without a conditional
      function, or a derived event carrying one.
    * UNDECLARED_VARIABLE -- a conditional function factor that does not
      match the declared state schema.

    Path-shape checks (MISPLACED_BARRIER and the positional half of
    INTERMEDIATE_EVENT) are skipped when the graph is cyclic or the top
    event is not unique, since paths are ill-defined there.
    """
    found: list[Violation] = []

    def add(code: ViolationCode, message: str, *nodes: str) -> None:
        found.append(Violation(code, message, tuple(nodes)))

    node_ids = set(model._node_map)

    for src, dst in model.connections:
        for endpoint in (src, dst):
            if endpoint not in node_ids:
                add(
                    ViolationCode.DANGLING_REF,
                    f"connection ({src} -> {dst}) references undeclared node {endpoint!r}",
                    endpoint,
                )
    severity_names = {c.name for c in model.severity_classes}
    for n in model.nodes:
        if n.severity is not None and n.severity not in severity_names:
            add(
                ViolationCode.DANGLING_REF,
                f"node {n.id!r} references undeclared severity class {n.severity!r}",
                n.id,
            )

    edges = [(s, d) for s, d in model.connections if s in node_ids and d in node_ids]
    acyclic = _is_acyclic(node_ids, edges)
    if not acyclic:
        add(ViolationCode.CYCLE, "connection graph contains a directed cycle")

    tops = [n for n in model.nodes if n.is_event and n.event_role is EventRole.TOP]
    if len(tops) != 1:
        add(
            ViolationCode.TOP_COUNT,
            f"exactly one top event required, found {len(tops)}",
            *(n.id for n in tops),
        )
    if not model.threats:
        add(ViolationCode.NO_THREAT, "model declares no threat event")
    if not model.consequences:
        add(ViolationCode.NO_CONSEQUENCE, "model declares no consequence event")

    for n in model.nodes:
        if n.is_event and n.event_role is None:
            add(
                ViolationCode.INTERMEDIATE_EVENT,
                f"event {n.id!r} is neither threat, top event, nor consequence",
                n.id,
            )

    indeg = {i: len(model._predecessors.get(i, ())) for i in node_ids}
    outdeg = {i: len(model._successors.get(i, ())) for i in node_ids}
    for n in model.nodes:
        if n.is_event and n.event_role is EventRole.TOP:
            continue
        if indeg[n.id] > 1 or outdeg[n.id] > 1:
            add(
                ViolationCode.BRANCHING,
                f"node {n.id!r} branches or joins (in={indeg[n.id]}, out={outdeg[n.id]})",
                n.id,
            )
        elif n.is_event and n.event_role is EventRole.THREAT and indeg[n.id] > 0:
            add(
                ViolationCode.BRANCHING,
                f"threat {n.id!r} has an incoming connection",
                n.id,
            )
        elif n.is_event and n.event_role is EventRole.CONSEQUENCE and outdeg[n.id] > 0:
            add(
                ViolationCode.BRANCHING,
                f"consequence {n.id!r} has an outgoing connection",
                n.id,
            )

    for n in model.nodes:
        needs_fn = n.is_barrier or (n.is_event and n.event_role is EventRole.THREAT)
        if needs_fn and n.conditional_function is None:
            add(
                ViolationCode.MISSING_FUNCTION,
                f"{'barrier' if n.is_barrier else 'threat'} {n.id!r} has no conditional function",
                n.id,
            )
        derived = n.is_event and n.event_role in (EventRole.TOP, EventRole.CONSEQUENCE)
        if derived and n.conditional_function is not None:
            add(
                ViolationCode.MISSING_FUNCTION,
                f"derived event {n.id!r} must not carry a conditional function",
                n.id,
            )

    found.extend(_check_function_schema(model))

    if acyclic and len(tops) == 1:
        found.extend(_check_paths(model, tops[0]))

    return ValidationReport(tuple(found))


def _is_acyclic(node_ids: set[str], edges: list[tuple[str, str]]) -> bool:
    # Kahn's algorithm; leftover nodes mean a cycle.
    indeg = {i: 0 for i in node_ids}
    succ: dict[str, list[str]] = {i: [] for i in node_ids}
    for s, d in edges:
        succ[s].append(d)
        indeg[d] += 1
    queue = [i for i, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        cur = queue.pop()
        seen += 1
        for nxt in succ[cur]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return seen == len(node_ids)


def _check_function_schema(model: BowTie) -> list[Violation]:
    """UNDECLARED_VARIABLE: factor variables must be declared and each factor
    form must fit the declared variable kind (tables exactly covering discrete
    domains; curves only on continuous variables)."""
    from .conditional import FactorForm

    found: list[Violation] = []
    for n in model.nodes:
        fn = n.conditional_function
        if fn is None:
            continue
        for factor in fn.factors:
            var = model._variable_map.get(factor.variable)
            if var is None:
                found.append(
                    Violation(
                        ViolationCode.UNDECLARED_VARIABLE,
                        f"function of {n.id!r} references undeclared variable "
                        f"{factor.variable!r}",
                        (n.id,),
                    )
                )
                continue
            if factor.form is FactorForm.TABLE:
                if not var.is_discrete:
                    found.append(
                        Violation(
                            ViolationCode.UNDECLARED_VARIABLE,
                            f"function of {n.id!r} attaches a table to continuous "
                            f"variable {factor.variable!r}",
                            (n.id,),
                        )
                    )
                elif set(factor.values) != set(var.values):  # type: ignore[arg-type]
                    found.append(
                        Violation(
                            ViolationCode.UNDECLARED_VARIABLE,
                            f"table for {factor.variable!r} on {n.id!r} does not "
                            f"cover the declared domain exactly",
                            (n.id,),
                        )
                    )
            elif var.is_discrete:
                found.append(
                    Violation(
                        ViolationCode.UNDECLARED_VARIABLE,
                        f"function of {n.id!r} attaches a {factor.form.value} curve "
                        f"to discrete variable {factor.variable!r}",
                        (n.id,),
                    )
                )
    return found


def _check_paths(model: BowTie, top: Node) -> list[Violation]:
    """Path-shape checks, assuming an acyclic graph with a unique top."""
    found: list[Violation] = []

    def events_reached(start: str, forward: bool) -> set[str]:
        # BFS that expands through barriers but stops at event nodes.
        step = model._successors if forward else model._predecessors
        reached: set[str] = set()
        frontier = list(step.get(start, ()))
        visited: set[str] = set()
        while frontier:
            cur = frontier.pop()
            if cur in visited:
                continue
            visited.add(cur)
            node = model.node(cur)
            if node.is_event:
                reached.add(cur)
            else:
                frontier.extend(step.get(cur, ()))
        return reached

    def reaches_top(start: str, forward: bool) -> bool:
        step = model._successors if forward else model._predecessors
        frontier = [start]
        visited: set[str] = set()
        while frontier:
            cur = frontier.pop()
            if cur == top.id:
                return True
            if cur in visited:
                continue
            visited.add(cur)
            frontier.extend(step.get(cur, ()))
        return False

    role = {n.id: n.event_role for n in model.nodes if n.is_event}
    for b in model.barriers:
        upstream = events_reached(b.id, forward=False)
        downstream = events_reached(b.id, forward=True)
        prevention = (
            bool(upstream)
            and all(role.get(e) is EventRole.THREAT for e in upstream)
            and downstream == {top.id}
        )
        recovery = (
            upstream == {top.id}
            and bool(downstream)
            and all(role.get(e) is EventRole.CONSEQUENCE for e in downstream)
        )
        if not (prevention or recovery):
            found.append(
                Violation(
                    ViolationCode.MISPLACED_BARRIER,
                    f"barrier {b.id!r} is not on a threat-to-top or "
                    f"top-to-consequence path",
                    (b.id,),
                )
            )

    for n in model.nodes:
        if not n.is_event:
            continue
        # Degree problems are already BRANCHING; only cleanly-shaped but
        # disconnected roots/leaves end up here.
        if (
            n.event_role is EventRole.THREAT
            and not model._predecessors.get(n.id, ())
            and not reaches_top(n.id, forward=True)
        ):
            found.append(
                Violation(
                    ViolationCode.INTERMEDIATE_EVENT,
                    f"event {n.id!r} is declared a threat but has no path to the top event",
                    (n.id,),
                )
            )
        if (
            n.event_role is EventRole.CONSEQUENCE
            and not model._successors.get(n.id, ())
            and not reaches_top(n.id, forward=False)
        ):
            found.append(
                Violation(
                    ViolationCode.INTERMEDIATE_EVENT,
                    f"event {n.id!r} is declared a consequence but is not reachable "
                    f"from the top event",
                    (n.id,),
                )
            )
    return found
