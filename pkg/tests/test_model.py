"""Model construction, lookups, chain extraction, and the validator."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from bowtie_risk import (
    BowTie,
    DiscretePmf,
    IncompleteStateError,
    Node,
    NodeLookupError,
    NodeType,
    SeverityClass,
    StateDomainError,
    StatePrior,
    StateVariable,
    StateVector,
    UniformDensity,
    ViolationCode,
    validate,
)
from conftest import build_model, invalid_model_cases, nominal_state


class TestStateVariable:
    def test_discrete_accepts_declared_values(self):
        v = StateVariable(name="flag", category="fault", values=("0", "1"))
        assert v.check_value("1") == "1"

    def test_discrete_rejects_unknown_value(self):
        v = StateVariable(name="flag", category="fault", values=("0", "1"))
        with pytest.raises(StateDomainError):
            v.check_value("2")

    def test_continuous_bounds(self):
        v = StateVariable(name="x", category="environment", lower=0.0, upper=10.0)
        assert v.check_value(10.0) == 10.0
        with pytest.raises(StateDomainError):
            v.check_value(10.5)

    def test_needs_domain_or_bounds(self):
        with pytest.raises(ValueError):
            StateVariable(name="x", category="monitor")

    def test_rejects_mixed_declaration(self):
        with pytest.raises(ValueError):
            StateVariable(
                name="x", category="monitor", values=("a",), lower=0.0, upper=1.0
            )


class TestSeverity:
    def test_unlimited_rate(self):
        c = SeverityClass(name="None", max_acceptable_rate=math.inf)
        assert math.isinf(c.max_acceptable_rate)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            SeverityClass(name="bad", max_acceptable_rate=-0.1)


class TestStateVector:
    def test_missing_variable_names_it(self):
        s = StateVector({"a": "1"})
        with pytest.raises(IncompleteStateError) as err:
            s["b"]
        assert "b" in str(err.value)

    def test_lookup_and_membership(self):
        s = StateVector({"a": "1", "b": 2.0})
        assert s["b"] == 2.0
        assert "a" in s
        assert s.get("c") is None


class TestStatePrior:
    def test_pmf_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DiscretePmf({"0": 0.5, "1": 0.6})

    def test_joint_probability_is_product(self):
        prior = StatePrior(
            {
                "a": DiscretePmf({"0": 0.25, "1": 0.75}),
                "b": DiscretePmf({"x": 0.5, "y": 0.5}),
            }
        )
        assert prior.joint_probability({"a": "1", "b": "x"}) == pytest.approx(0.375)

    def test_support_grid_enumerates_all_cells(self):
        prior = StatePrior(
            {
                "a": DiscretePmf({"0": 0.5, "1": 0.5}),
                "b": DiscretePmf({"x": 0.5, "y": 0.5}),
            }
        )
        grid = list(prior.support_grid(["a", "b"]))
        assert len(grid) == 4
        total = sum(prior.joint_probability(cell) for cell in grid)
        assert total == pytest.approx(1.0)

    def test_continuous_marginal_blocks_enumeration(self):
        prior = StatePrior({"u": UniformDensity(low=0.0, high=1.0)})
        with pytest.raises(ValueError):
            list(prior.support_grid(["u"]))

    def test_covers_reports_missing(self):
        prior = StatePrior({"a": DiscretePmf({"0": 1.0})})
        assert prior.covers(["a", "b"]) == ["b"]


class TestConstruction:
    def test_duplicate_node_ids_rejected(self):
        n = Node(id="X", node_type=NodeType.EVENT)
        with pytest.raises(ValueError):
            BowTie(hazard="h", nodes=(n, n))

    def test_barrier_with_role_rejected(self):
        with pytest.raises(ValueError):
            Node(id="B", node_type=NodeType.BARRIER, event_role="top")

    def test_node_lookup_error(self):
        m = build_model()
        with pytest.raises(NodeLookupError):
            m.node("nope")
        with pytest.raises(NodeLookupError):
            m.variable("nope")
        with pytest.raises(NodeLookupError):
            m.severity_class("nope")


class TestChains:
    def test_prevention_chain_order(self, model):
        assert model.prevention_chain("T1") == ["B1"]
        assert model.prevention_chain("T2") == ["B2"]

    def test_recovery_chain_order(self, model):
        assert model.recovery_chain("C1") == ["B3"]

    def test_two_barrier_chain(self):
        m = build_model()
        from conftest import prevention_fn

        extra = Node(id="B1b", node_type=NodeType.BARRIER, conditional_function=prevention_fn())
        conns = tuple(c for c in m.connections if c != ("B1", "TOP")) + (
            ("B1", "B1b"),
            ("B1b", "TOP"),
        )
        m2 = build_model(nodes=m.nodes + (extra,), connections=conns)
        assert validate(m2).ok
        assert m2.prevention_chain("T1") == ["B1", "B1b"]

    def test_zero_barrier_chain_allowed(self):
        from conftest import threat_fn

        m = build_model()
        extra = Node(
            id="T3",
            node_type=NodeType.EVENT,
            event_role="threat",
            conditional_function=threat_fn(0.1),
        )
        m2 = build_model(nodes=m.nodes + (extra,), connections=m.connections + (("T3", "TOP"),))
        assert validate(m2).ok
        assert m2.prevention_chain("T3") == []

    def test_chain_of_non_threat_rejected(self, model):
        with pytest.raises(NodeLookupError):
            model.prevention_chain("TOP")
        with pytest.raises(NodeLookupError):
            model.recovery_chain("T1")

    def test_chains_cover_all_barriers_once(self, model):
        # The union over all chains must hit each barrier exactly once.
        seen: list[str] = []
        for chain in model.prevention_chains.values():
            seen.extend(chain)
        for chain in model.recovery_chains.values():
            seen.extend(chain)
        assert sorted(seen) == sorted(b.id for b in model.barriers)


class TestValidate:
    def test_reference_model_is_clean(self, model):
        report = validate(model)
        assert report.ok
        assert report.codes == ()

    @pytest.mark.parametrize("name", sorted(invalid_model_cases()))
    def test_mutant_produces_exact_codes(self, name):
        mutant, expected = invalid_model_cases()[name]
        report = validate(mutant)
        assert set(report.codes) == expected

    def test_validate_is_pure(self, model):
        first = validate(model)
        second = validate(model)
        assert first == second

    def test_cycle_example_codes_in_order(self):
        mutant, _ = invalid_model_cases()["cycle_back_edge"]
        report = validate(mutant)
        assert ViolationCode.CYCLE in report.codes
        assert ViolationCode.BRANCHING in report.codes

    def test_severity_reference_checked(self):
        m = build_model()
        bad = tuple(
            n if n.id != "C1" else Node(
                id="C1",
                node_type=NodeType.EVENT,
                event_role="consequence",
                severity="Ludicrous",
            )
            for n in m.nodes
        )
        report = validate(build_model(nodes=bad))
        assert set(report.codes) == {ViolationCode.DANGLING_REF}

    def test_table_domain_mismatch_flagged(self):
        from bowtie_risk import ConditionalFunction, Factor, FactorForm, FunctionKind

        fn = ConditionalFunction(
            kind=FunctionKind.BARRIER,
            base=0.9,
            factors=(
                Factor(variable="fault.radar", form=FactorForm.TABLE, values={"0": 0.9}),
            ),
        )
        m = build_model()
        nodes = tuple(
            n if n.id != "B1" else Node(id="B1", node_type=NodeType.BARRIER, conditional_function=fn)
            for n in m.nodes
        )
        report = validate(build_model(nodes=nodes))
        assert set(report.codes) == {ViolationCode.UNDECLARED_VARIABLE}


class TestCheckState:
    def test_nominal_state_passes(self, model):
        model.check_state(StateVector(nominal_state()))

    def test_missing_referenced_variable(self, model):
        state = nominal_state()
        del state["monitor.lec"]
        with pytest.raises(IncompleteStateError) as err:
            model.check_state(StateVector(state))
        assert "monitor.lec" in str(err.value)

    def test_out_of_domain_value(self, model):
        state = nominal_state()
        state["env.precipitation"] = 250.0
        with pytest.raises(StateDomainError):
            model.check_state(StateVector(state))


@given(
    probs=st.lists(
        st.floats(min_value=0.01, max_value=1.0, allow_nan=False), min_size=2, max_size=6
    ),
    data=st.data(),
)
def test_prior_draw_stays_in_support(probs, data):
    total = sum(probs)
    pmf = DiscretePmf({str(i): p / total for i, p in enumerate(probs)})
    prior = StatePrior({"v": pmf, "u": UniformDensity(low=-1.0, high=3.0)})
    seed = data.draw(st.integers(min_value=0, max_value=2**31 - 1))
    import numpy as np

    rng = np.random.default_rng(seed)
    drawn = prior.draw(rng)
    assert drawn["v"] in pmf.probs
    assert -1.0 <= drawn["u"] < 3.0
