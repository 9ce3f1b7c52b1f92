"""File formats: model JSON, episode-log JSONL, ground-truth JSON, state and
risk trace CSV, and sampled scene configurations JSONL.

Conventions shared by all formats: rates are per minute and durations in
minutes; discrete state values are strings, with booleans written as
``"0"``/``"1"``; an unlimited acceptable rate is JSON ``null`` (mapped to
infinity); an undefined rate cell is JSON ``null`` (mapped to NaN). Writers
replace files atomically. See ``docs/FORMATS.md`` for the full reference.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Any, Iterable, Mapping, Sequence

from .conditional import ConditionalFunction, Factor, FactorForm, FunctionKind, FusionMode
from .engine import RiskTrace
from .errors import IncompleteStateError, ModelFormatError
from .estimation import Episode, EpisodeLog
from .model import (
    BowTie,
    DiscretePmf,
    EventRole,
    Node,
    NodeType,
    SeverityClass,
    StatePrior,
    StateVariable,
    UniformDensity,
)
from .sdl import SceneConfig
from .simulate import GroundTruth, JointTable

MODEL_FORMAT = "bowtie-model"
LOG_FORMAT = "episode-log"
TRUTH_FORMAT = "ground-truth"
FORMAT_VERSION = 1


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def _fail(where: str, problem: str) -> ModelFormatError:
    return ModelFormatError(problem, location=where)


def _need(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise _fail(where, f"missing required key {key!r}")
    return obj[key]


def _check_header(doc: Mapping[str, Any], expected: str, where: str) -> None:
    if not isinstance(doc, Mapping):
        raise _fail(where, "expected a JSON object")
    fmt = doc.get("format")
    if fmt != expected:
        raise _fail(where, f"format marker is {fmt!r}, expected {expected!r}")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise _fail(where, f"unsupported format version {version!r}")


# -- conditional functions -------------------------------------------------


def factor_to_dict(factor: Factor) -> dict[str, Any]:
    out: dict[str, Any] = {"variable": factor.variable, "form": factor.form.value}
    if factor.form is FactorForm.TABLE:
        out["values"] = {
            k: (None if math.isnan(v) else v) for k, v in factor.values.items()  # type: ignore[union-attr]
        }
    elif factor.form is FactorForm.SIGMOID:
        out["alpha"] = factor.alpha
        out["beta"] = factor.beta
    else:
        out["slope"] = factor.slope
        out["intercept"] = factor.intercept
    if factor.sample_sizes is not None:
        out["sample_sizes"] = factor.sample_sizes
    return out


def factor_from_dict(obj: Mapping[str, Any], where: str) -> Factor:
    form = FactorForm(_need(obj, "form", where))
    kwargs: dict[str, Any] = {
        "variable": _need(obj, "variable", where),
        "form": form,
        "sample_sizes": obj.get("sample_sizes"),
    }
    try:
        if form is FactorForm.TABLE:
            raw = _need(obj, "values", where)
            kwargs["values"] = {
                str(k): (math.nan if v is None else float(v)) for k, v in raw.items()
            }
        elif form is FactorForm.SIGMOID:
            kwargs["alpha"] = float(_need(obj, "alpha", where))
            kwargs["beta"] = float(_need(obj, "beta", where))
        else:
            kwargs["slope"] = float(_need(obj, "slope", where))
            kwargs["intercept"] = float(_need(obj, "intercept", where))
        return Factor(**kwargs)
    except (TypeError, ValueError, AttributeError) as exc:
        raise _fail(where, str(exc)) from exc


def function_to_dict(fn: ConditionalFunction) -> dict[str, Any]:
    return {
        "kind": fn.kind.value,
        "base": fn.base,
        "fusion_mode": fn.fusion_mode.value,
        "factors": [factor_to_dict(f) for f in fn.factors],
    }


def function_from_dict(obj: Mapping[str, Any], where: str) -> ConditionalFunction:
    try:
        return ConditionalFunction(
            kind=FunctionKind(_need(obj, "kind", where)),
            base=float(_need(obj, "base", where)),
            factors=tuple(
                factor_from_dict(f, f"{where}.factors[{i}]")
                for i, f in enumerate(obj.get("factors", []))
            ),
            fusion_mode=FusionMode(obj.get("fusion_mode", FusionMode.RAW_CLAMPED)),
        )
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise _fail(where, str(exc)) from exc


# -- bow-tie models --------------------------------------------------------


def _variable_to_dict(var: StateVariable) -> dict[str, Any]:
    out: dict[str, Any] = {"name": var.name, "category": var.category.value}
    if var.is_discrete:
        out["values"] = list(var.values)  # type: ignore[arg-type]
    else:
        out["lower"] = var.lower
        out["upper"] = var.upper
    return out


def _variable_from_dict(obj: Mapping[str, Any], where: str) -> StateVariable:
    try:
        return StateVariable(
            name=_need(obj, "name", where),
            category=_need(obj, "category", where),
            values=tuple(obj["values"]) if "values" in obj else None,
            lower=obj.get("lower"),
            upper=obj.get("upper"),
        )
    except (TypeError, ValueError) as exc:
        raise _fail(where, str(exc)) from exc


def model_to_dict(model: BowTie) -> dict[str, Any]:
    nodes = []
    functions: dict[str, Any] = {}
    for n in model.nodes:
        entry: dict[str, Any] = {"id": n.id, "type": n.node_type.value}
        if n.event_role is not None:
            entry["role"] = n.event_role.value
        if n.description:
            entry["description"] = n.description
        if n.severity is not None:
            entry["severity"] = n.severity
        if n.conditional_function is not None:
            functions[n.id] = function_to_dict(n.conditional_function)
        nodes.append(entry)
    return {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "hazard": model.hazard,
        "severity_classes": [
            {
                "name": c.name,
                "max_acceptable_rate": (
                    None if math.isinf(c.max_acceptable_rate) else c.max_acceptable_rate
                ),
            }
            for c in model.severity_classes
        ],
        "state_schema": [_variable_to_dict(v) for v in model.state_schema],
        "nodes": nodes,
        "connections": [list(c) for c in model.connections],
        "functions": functions,
    }


def model_from_dict(doc: Mapping[str, Any]) -> BowTie:
    _check_header(doc, MODEL_FORMAT, "model")
    severities = []
    for i, entry in enumerate(doc.get("severity_classes", [])):
        where = f"severity_classes[{i}]"
        rate = _need(entry, "max_acceptable_rate", where)
        try:
            severities.append(
                SeverityClass(
                    name=_need(entry, "name", where),
                    max_acceptable_rate=math.inf if rate is None else float(rate),
                )
            )
        except (TypeError, ValueError) as exc:
            raise _fail(where, str(exc)) from exc
    schema = [
        _variable_from_dict(entry, f"state_schema[{i}]")
        for i, entry in enumerate(doc.get("state_schema", []))
    ]
    raw_functions = doc.get("functions", {})
    if not isinstance(raw_functions, Mapping):
        raise _fail("functions", "expected an object keyed by node id")
    functions = {
        str(node_id): function_from_dict(fn, f"functions.{node_id}")
        for node_id, fn in raw_functions.items()
    }
    nodes = []
    for i, entry in enumerate(_need(doc, "nodes", "model")):
        where = f"nodes[{i}]"
        try:
            node_id = str(_need(entry, "id", where))
            nodes.append(
                Node(
                    id=node_id,
                    node_type=NodeType(_need(entry, "type", where)),
                    description=entry.get("description", ""),
                    event_role=EventRole(entry["role"]) if "role" in entry else None,
                    severity=entry.get("severity"),
                    conditional_function=functions.pop(node_id, None),
                )
            )
        except ModelFormatError:
            raise
        except (TypeError, ValueError) as exc:
            raise _fail(where, str(exc)) from exc
    if functions:
        orphan = next(iter(functions))
        raise _fail("functions", f"function attached to unknown node {orphan!r}")
    connections = []
    for i, pair in enumerate(doc.get("connections", [])):
        if not isinstance(pair, Sequence) or len(pair) != 2:
            raise _fail(f"connections[{i}]", "each connection is a [source, target] pair")
        connections.append((str(pair[0]), str(pair[1])))
    try:
        return BowTie(
            hazard=str(_need(doc, "hazard", "model")),
            severity_classes=tuple(severities),
            state_schema=tuple(schema),
            nodes=tuple(nodes),
            connections=tuple(connections),
        )
    except ValueError as exc:
        raise _fail("model", str(exc)) from exc


def save_model(model: BowTie, path: str) -> None:
    _atomic_write_text(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path: str) -> BowTie:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"not valid JSON: {exc}", location=path) from exc
    return model_from_dict(doc)


# -- episode logs ----------------------------------------------------------


def _episode_to_dict(ep: Episode) -> dict[str, Any]:
    return {
        "scene": ep.scene_id,
        "duration": ep.duration,
        "state": dict(ep.state),
        "threats": dict(ep.threat_occurrences),
        "top_events": ep.top_event_count,
        "consequences": dict(ep.consequence_counts),
        "barriers": [[b, s] for b, s in ep.barrier_outcomes],
    }


def _episode_from_dict(obj: Mapping[str, Any], where: str) -> Episode:
    try:
        return Episode(
            scene_id=str(_need(obj, "scene", where)),
            duration=float(_need(obj, "duration", where)),
            state=_need(obj, "state", where),
            threat_occurrences={str(k): int(v) for k, v in obj.get("threats", {}).items()},
            top_event_count=int(obj.get("top_events", 0)),
            consequence_counts={
                str(k): int(v) for k, v in obj.get("consequences", {}).items()
            },
            barrier_outcomes=tuple(
                (str(b), bool(s)) for b, s in obj.get("barriers", [])
            ),
        )
    except (TypeError, ValueError) as exc:
        raise _fail(where, str(exc)) from exc


def save_log(log: EpisodeLog, path: str) -> None:
    buf = io.StringIO()
    header = {
        "format": LOG_FORMAT,
        "version": FORMAT_VERSION,
        "isolated_threat": log.isolated_threat,
    }
    buf.write(json.dumps(header) + "\n")
    for ep in log:
        buf.write(json.dumps(_episode_to_dict(ep)) + "\n")
    _atomic_write_text(path, buf.getvalue())


def load_log(path: str) -> EpisodeLog:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ModelFormatError("empty episode log", location=path)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"bad header line: {exc}", location=path) from exc
    _check_header(header, LOG_FORMAT, f"{path}:1")
    episodes = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"bad episode record: {exc}", location=f"{path}:{lineno}") from exc
        episodes.append(_episode_from_dict(obj, f"{path}:{lineno}"))
    return EpisodeLog(
        episodes=tuple(episodes), isolated_threat=header.get("isolated_threat")
    )


# -- ground truth ----------------------------------------------------------


def _source_to_dict(source: ConditionalFunction | JointTable) -> dict[str, Any]:
    if isinstance(source, JointTable):
        return {
            "form": "joint_table",
            "variables": list(source.variables),
            "cells": [
                {"values": list(key), "value": (None if math.isnan(v) else v)}
                for key, v in source.cells.items()
            ],
        }
    return function_to_dict(source)


def _source_from_dict(obj: Mapping[str, Any], where: str) -> ConditionalFunction | JointTable:
    if obj.get("form") == "joint_table":
        try:
            return JointTable(
                variables=tuple(_need(obj, "variables", where)),
                cells={
                    tuple(str(v) for v in cell["values"]): (
                        math.nan if cell["value"] is None else float(cell["value"])
                    )
                    for cell in _need(obj, "cells", where)
                },
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise _fail(where, str(exc)) from exc
    return function_from_dict(obj, where)


def truth_to_dict(truth: GroundTruth) -> dict[str, Any]:
    schema = []
    for var in truth.schema:
        entry = _variable_to_dict(var)
        marginal = truth.prior.marginals.get(var.name)
        if isinstance(marginal, DiscretePmf):
            entry["prior"] = {"probs": dict(marginal.probs)}
        elif isinstance(marginal, UniformDensity):
            entry["prior"] = {"low": marginal.low, "high": marginal.high}
        schema.append(entry)
    return {
        "format": TRUTH_FORMAT,
        "version": FORMAT_VERSION,
        "duration": truth.duration,
        "occurrence_model": truth.occurrence_model,
        "schema": schema,
        "threats": {t: _source_to_dict(s) for t, s in truth.threat_rates.items()},
        "barriers": {b: _source_to_dict(s) for b, s in truth.barrier_probs.items()},
    }


def truth_from_dict(doc: Mapping[str, Any]) -> GroundTruth:
    _check_header(doc, TRUTH_FORMAT, "ground truth")
    schema = []
    marginals: dict[str, DiscretePmf | UniformDensity] = {}
    for i, entry in enumerate(_need(doc, "schema", "ground truth")):
        where = f"schema[{i}]"
        var = _variable_from_dict(entry, where)
        schema.append(var)
        prior = entry.get("prior")
        if prior is None:
            continue
        try:
            if "probs" in prior:
                marginals[var.name] = DiscretePmf(prior["probs"])
            else:
                marginals[var.name] = UniformDensity(
                    low=float(_need(prior, "low", where)),
                    high=float(_need(prior, "high", where)),
                )
        except (TypeError, ValueError) as exc:
            raise _fail(f"{where}.prior", str(exc)) from exc
    try:
        return GroundTruth(
            schema=tuple(schema),
            prior=StatePrior(marginals),
            threat_rates={
                str(t): _source_from_dict(s, f"threats.{t}")
                for t, s in _need(doc, "threats", "ground truth").items()
            },
            barrier_probs={
                str(b): _source_from_dict(s, f"barriers.{b}")
                for b, s in _need(doc, "barriers", "ground truth").items()
            },
            duration=float(doc.get("duration", 1.0)),
            occurrence_model=doc.get("occurrence_model", "poisson"),
        )
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise _fail("ground truth", str(exc)) from exc


def save_truth(truth: GroundTruth, path: str) -> None:
    _atomic_write_text(path, json.dumps(truth_to_dict(truth), indent=2) + "\n")


def load_truth(path: str) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"not valid JSON: {exc}", location=path) from exc
    return truth_from_dict(doc)


# -- state traces ----------------------------------------------------------


def load_state_trace(path: str, model: BowTie) -> list[tuple[float, dict[str, str | float]]]:
    """Read a timestamped state trace CSV: a ``timestamp`` column plus one
    column per declared state variable. A declared variable without a column
    raises ``IncompleteStateError`` naming it; empty cells leave that
    variable unset for the row; extra columns are ignored.
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ModelFormatError("state trace has no header row", location=path)
        if "timestamp" not in reader.fieldnames:
            raise ModelFormatError(
                "state trace needs a 'timestamp' column", location=path
            )
        for var in model.state_schema:
            if var.name not in reader.fieldnames:
                raise IncompleteStateError(var.name)
        rows: list[tuple[float, dict[str, str | float]]] = []
        for lineno, row in enumerate(reader, start=2):
            try:
                t = float(row["timestamp"])
            except (TypeError, ValueError):
                raise ModelFormatError(
                    f"bad timestamp value {row.get('timestamp')!r}",
                    location=f"{path}:{lineno}",
                ) from None
            state: dict[str, str | float] = {}
            for var in model.state_schema:
                raw = row.get(var.name)
                if raw is None or raw == "":
                    continue
                if var.is_discrete:
                    state[var.name] = raw
                else:
                    try:
                        state[var.name] = float(raw)
                    except ValueError:
                        raise ModelFormatError(
                            f"bad numeric value {raw!r} for {var.name}",
                            location=f"{path}:{lineno}",
                        ) from None
            rows.append((t, state))
    return rows


def save_state_trace(
    rows: Iterable[tuple[float, Mapping[str, str | float]]],
    variables: Sequence[str],
    path: str,
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([*variables, "timestamp"])
    for t, state in rows:
        writer.writerow([state.get(v, "") for v in variables] + [t])
    _atomic_write_text(path, buf.getvalue())


def save_risk_trace(trace: RiskTrace, path: str) -> None:
    """Write an assessment result as CSV, one row per sample and
    consequence. A sample that could not be evaluated produces a single row
    with verdict ``error`` and the value columns empty."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["timestamp", "consequence", "raw_rate", "smoothed_rate", "likelihood", "verdict"]
    )
    for point in trace.points:
        if point.error is not None:
            writer.writerow([point.time, "", "", "", "", "error"])
            continue
        assert point.consequences is not None
        for cid, c in point.consequences.items():
            writer.writerow(
                [
                    point.time,
                    cid,
                    repr(c.raw_rate),
                    repr(c.smoothed_rate),
                    repr(c.likelihood),
                    ("violated" if c.violated else "ok"),
                ]
            )
    _atomic_write_text(path, buf.getvalue())


# -- scene configurations --------------------------------------------------


def save_scene_configs(configs: Iterable[SceneConfig], path: str) -> None:
    buf = io.StringIO()
    for cfg in configs:
        buf.write(
            json.dumps(
                {
                    "scene": cfg.scene,
                    "seed": cfg.seed,
                    "index": cfg.index,
                    "values": dict(cfg.values),
                }
            )
            + "\n"
        )
    _atomic_write_text(path, buf.getvalue())


def load_scene_configs(path: str) -> list[SceneConfig]:
    configs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                configs.append(
                    SceneConfig(
                        scene=str(obj["scene"]),
                        seed=int(obj["seed"]),
                        index=int(obj["index"]),
                        values=obj["values"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ModelFormatError(
                    f"bad scene configuration record: {exc}", location=f"{path}:{lineno}"
                ) from exc
    return configs
