"""Shared fixtures: a small two-threat reference model, one mutant per
structural restriction, and a matching ground truth for simulator tests."""

from __future__ import annotations

import math

import pytest

from bowtie_risk import (
    BowTie,
    ConditionalFunction,
    DiscretePmf,
    EventRole,
    Factor,
    FactorForm,
    FunctionKind,
    GroundTruth,
    Node,
    NodeType,
    SeverityClass,
    StatePrior,
    StateVariable,
    UniformDensity,
    ViolationCode,
)

LN9 = math.log(9.0)

# Sigmoid through (0, 0.9) and (1, 0.1): alpha = -2 ln 9, beta = ln 9.
LEC_ALPHA = -2.0 * LN9
LEC_BETA = LN9


def threat_fn(rate: float = 1.0) -> ConditionalFunction:
    return ConditionalFunction(kind=FunctionKind.THREAT, base=rate)


def prevention_fn() -> ConditionalFunction:
    return ConditionalFunction(
        kind=FunctionKind.BARRIER,
        base=0.9,
        factors=(
            Factor(
                variable="fault.camera_blur",
                form=FactorForm.TABLE,
                values={"0": 0.9, "1": 0.4},
            ),
            Factor(
                variable="monitor.lec",
                form=FactorForm.SIGMOID,
                alpha=LEC_ALPHA,
                beta=LEC_BETA,
            ),
        ),
    )


def recovery_fn() -> ConditionalFunction:
    return ConditionalFunction(
        kind=FunctionKind.BARRIER,
        base=0.75,
        factors=(
            Factor(
                variable="fault.radar",
                form=FactorForm.TABLE,
                values={"0": 0.75, "1": 0.0},
            ),
            Factor(
                variable="env.precipitation",
                form=FactorForm.CLAMPED_LINEAR,
                slope=-0.005,
                intercept=0.75,
            ),
        ),
    )


def build_model(**overrides) -> BowTie:
    """Two prevention chains and one recovery chain:
    T1->B1->TOP, T2->B2->TOP, TOP->B3->C1."""
    parts = dict(
        hazard="roadway_obstruction",
        severity_classes=(
            SeverityClass(name="None", max_acceptable_rate=math.inf),
            SeverityClass(name="Minor", max_acceptable_rate=2.0),
            SeverityClass(name="Catastrophic", max_acceptable_rate=0.1),
        ),
        state_schema=(
            StateVariable(name="fault.radar", category="fault", values=("0", "1")),
            StateVariable(name="fault.camera_blur", category="fault", values=("0", "1")),
            StateVariable(
                name="env.precipitation", category="environment", lower=0.0, upper=100.0
            ),
            StateVariable(name="monitor.lec", category="monitor", lower=0.0, upper=1.0),
        ),
        nodes=(
            Node(
                id="T1",
                node_type=NodeType.EVENT,
                event_role=EventRole.THREAT,
                severity="None",
                conditional_function=threat_fn(),
            ),
            Node(
                id="T2",
                node_type=NodeType.EVENT,
                event_role=EventRole.THREAT,
                severity="None",
                conditional_function=threat_fn(),
            ),
            Node(id="B1", node_type=NodeType.BARRIER, conditional_function=prevention_fn()),
            Node(id="B2", node_type=NodeType.BARRIER, conditional_function=prevention_fn()),
            Node(
                id="TOP",
                node_type=NodeType.EVENT,
                event_role=EventRole.TOP,
                severity="Minor",
            ),
            Node(id="B3", node_type=NodeType.BARRIER, conditional_function=recovery_fn()),
            Node(
                id="C1",
                node_type=NodeType.EVENT,
                event_role=EventRole.CONSEQUENCE,
                severity="Catastrophic",
            ),
        ),
        connections=(
            ("T1", "B1"),
            ("B1", "TOP"),
            ("T2", "B2"),
            ("B2", "TOP"),
            ("TOP", "B3"),
            ("B3", "C1"),
        ),
    )
    parts.update(overrides)
    return BowTie(**parts)


def nominal_state() -> dict[str, str | float]:
    """All barriers at their strongest: B1 = B2 = 0.9, B3 = 0.75, so the
    top rate is 0.2/min and the consequence rate 0.05/min."""
    return {
        "fault.radar": "0",
        "fault.camera_blur": "0",
        "env.precipitation": 0.0,
        "monitor.lec": 0.0,
    }


def _replace_node(model: BowTie, node_id: str, replacement: Node | None) -> tuple[Node, ...]:
    out = []
    for n in model.nodes:
        if n.id == node_id:
            if replacement is not None:
                out.append(replacement)
        else:
            out.append(n)
    return tuple(out)


def invalid_model_cases() -> dict[str, tuple[BowTie, set[ViolationCode]]]:
    """One mutant per structural restriction, mapped to the exact violation
    code set it must produce."""
    base = build_model()
    cases: dict[str, tuple[BowTie, set[ViolationCode]]] = {}

    cases["second_top"] = (
        build_model(
            nodes=base.nodes
            + (Node(id="TOP2", node_type=NodeType.EVENT, event_role=EventRole.TOP),)
        ),
        {ViolationCode.TOP_COUNT},
    )

    cases["cycle_back_edge"] = (
        build_model(connections=base.connections + (("C1", "T1"),)),
        {ViolationCode.CYCLE, ViolationCode.BRANCHING},
    )

    cases["no_threat"] = (
        build_model(
            nodes=tuple(n for n in base.nodes if n.id in ("TOP", "B3", "C1")),
            connections=(("TOP", "B3"), ("B3", "C1")),
        ),
        {ViolationCode.NO_THREAT},
    )

    cases["no_consequence"] = (
        build_model(
            nodes=tuple(n for n in base.nodes if n.id in ("T1", "B1", "TOP")),
            connections=(("T1", "B1"), ("B1", "TOP")),
        ),
        {ViolationCode.NO_CONSEQUENCE},
    )

    # Replace T1's chain with T1 -> E -> TOP where E has no declared role.
    cases["unlabeled_event"] = (
        build_model(
            nodes=_replace_node(base, "B1", Node(id="E", node_type=NodeType.EVENT)),
            connections=(
                ("T1", "E"),
                ("E", "TOP"),
                ("T2", "B2"),
                ("B2", "TOP"),
                ("TOP", "B3"),
                ("B3", "C1"),
            ),
        ),
        {ViolationCode.INTERMEDIATE_EVENT},
    )

    cases["disconnected_barrier"] = (
        build_model(
            nodes=base.nodes
            + (
                Node(
                    id="B4",
                    node_type=NodeType.BARRIER,
                    conditional_function=recovery_fn(),
                ),
            )
        ),
        {ViolationCode.MISPLACED_BARRIER},
    )

    cases["dangling_connection"] = (
        build_model(connections=base.connections + (("TOP", "B9"),)),
        {ViolationCode.DANGLING_REF},
    )

    cases["threat_without_function"] = (
        build_model(
            nodes=_replace_node(
                base,
                "T1",
                Node(
                    id="T1",
                    node_type=NodeType.EVENT,
                    event_role=EventRole.THREAT,
                    severity="None",
                ),
            )
        ),
        {ViolationCode.MISSING_FUNCTION},
    )

    ghost_fn = ConditionalFunction(
        kind=FunctionKind.BARRIER,
        base=0.9,
        factors=(
            Factor(variable="ghost", form=FactorForm.TABLE, values={"0": 0.5, "1": 0.5}),
        ),
    )
    cases["undeclared_variable"] = (
        build_model(
            nodes=_replace_node(
                base,
                "B1",
                Node(id="B1", node_type=NodeType.BARRIER, conditional_function=ghost_fn),
            )
        ),
        {ViolationCode.UNDECLARED_VARIABLE},
    )

    return cases


def build_truth(**overrides) -> GroundTruth:
    """Ground truth whose rates and probabilities mirror build_model()."""
    parts = dict(
        schema=build_model().state_schema,
        prior=StatePrior(
            {
                "fault.radar": DiscretePmf({"0": 0.8, "1": 0.2}),
                "fault.camera_blur": DiscretePmf({"0": 0.7, "1": 0.3}),
                "env.precipitation": UniformDensity(low=0.0, high=100.0),
                "monitor.lec": UniformDensity(low=0.0, high=1.0),
            }
        ),
        threat_rates={"T1": threat_fn(), "T2": threat_fn()},
        barrier_probs={"B1": prevention_fn(), "B2": prevention_fn(), "B3": recovery_fn()},
        duration=1.0,
        occurrence_model="poisson",
    )
    parts.update(overrides)
    return GroundTruth(**parts)


@pytest.fixture
def model() -> BowTie:
    return build_model()


@pytest.fixture
def truth() -> GroundTruth:
    return build_truth()
