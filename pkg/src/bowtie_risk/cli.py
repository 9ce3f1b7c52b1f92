"""Command-line interface.

Commands: ``validate`` (structural check of a model file), ``sample``
(draw scene configurations from a scene description), ``simulate`` (run the
scenario simulator against a ground-truth file), ``fit`` (estimate missing
conditional functions from an episode log), ``assess`` (evaluate a state
trace against a model's acceptable rates), and ``evaluate`` (compare
per-scene predictions with observed counts).

Exit codes: 0 success, 1 usage error, 2 validation or domain error in
otherwise well-formed inputs, 3 unreadable or unparseable input. Relative
``--out`` paths are resolved inside ``$BOWTIE_RISK_OUT_DIR`` when that is
set.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from . import engine, estimation, evaluation, fileio, sdl
from .errors import (
    BowtieError,
    DegenerateBaseError,
    DegenerateDataError,
    IncompleteStateError,
    IsolationProtocolError,
    ModelFormatError,
    SdlParseError,
    StateDomainError,
    StreamOrderError,
    VariableKindError,
)
from .model import BowTie, ViolationCode, validate
from .simulate import empirical_rates, run_episodes

OUT_DIR_ENV = "BOWTIE_RISK_OUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_INPUT = 3

_DOMAIN_ERRORS = (
    StateDomainError,
    IncompleteStateError,
    IsolationProtocolError,
    DegenerateDataError,
    DegenerateBaseError,
    StreamOrderError,
    VariableKindError,
    ValueError,
)


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; route that through our
    # own usage status instead.
    def error(self, message: str):
        raise _UsageError(f"{self.prog}: {message}")


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _resolve_out(path: str | None) -> str | None:
    if path is None:
        return None
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _load_valid_model(path: str) -> BowTie:
    model = fileio.load_model(path)
    report = validate(model)
    if not report.ok:
        for v in report.violations:
            _err(str(v))
        raise _InvalidModel()
    return model


class _InvalidModel(Exception):
    pass


# -- commands --------------------------------------------------------------


def _cmd_validate(args) -> int:
    model = fileio.load_model(args.model)
    report = validate(model)
    # One line per violation and nothing else, so line count equals
    # violation count.
    if args.format == "delimited":
        for v in report.violations:
            print("\t".join([v.code.value, ",".join(v.nodes), v.message]))
    else:
        for v in report.violations:
            print(str(v))
    if report.ok:
        print(f"OK: {args.model} satisfies all structural restrictions")
        return EXIT_OK
    return EXIT_DOMAIN


def _cmd_sample(args) -> int:
    with open(args.scene, "r", encoding="utf-8") as f:
        text = f.read()
    scene = sdl.parse_scene(text)
    try:
        configs = sdl.sample_scene(
            scene, seed=args.seed, count=args.count, start_index=args.start_index
        )
    except ModelFormatError as exc:
        _err(str(exc))
        return EXIT_DOMAIN
    out = _resolve_out(args.out)
    if out:
        fileio.save_scene_configs(configs, out)
        print(f"wrote {len(configs)} configuration(s) to {out}")
    else:
        import json

        for cfg in configs:
            print(
                json.dumps(
                    {
                        "scene": cfg.scene,
                        "seed": cfg.seed,
                        "index": cfg.index,
                        "values": dict(cfg.values),
                    }
                )
            )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    truth = fileio.load_truth(args.truth)
    try:
        model = _load_valid_model(args.btd)
    except _InvalidModel:
        _err(f"{args.btd} fails validation; simulation needs a valid chain structure")
        return EXIT_DOMAIN
    log = run_episodes(
        truth,
        model,
        count=args.episodes,
        seed=args.seed,
        isolate=args.isolate,
    )
    out = _resolve_out(args.out)
    fileio.save_log(log, out)
    rates = empirical_rates(log)
    print(f"wrote {len(log)} episode(s) to {out}")
    print(f"exposure: {rates.exposure:g} min")
    print(f"top events: {rates.top.count} ({rates.top.rate:.6g}/min)")
    for cid, est in sorted(rates.consequences.items()):
        print(f"{cid}: {est.count} ({est.rate:.6g}/min)")
    return EXIT_OK


def _parse_factor_specs(specs: list[str]) -> dict[str, list[str]]:
    factors: dict[str, list[str]] = {}
    for spec in specs:
        node, sep, names = spec.partition("=")
        if not sep or not node:
            raise _UsageError(f"--factors expects NODE=var1,var2 and got {spec!r}")
        factors[node] = [n for n in names.split(",") if n]
    return factors


def _cmd_fit(args) -> int:
    model = fileio.load_model(args.model)
    report = validate(model)
    blocking = [v for v in report.violations if v.code is not ViolationCode.MISSING_FUNCTION]
    if blocking:
        for v in blocking:
            _err(str(v))
        _err("fit requires a model whose only defect is missing conditional functions")
        return EXIT_DOMAIN
    log = fileio.load_log(args.log)
    factor_specs = _parse_factor_specs(args.factors)

    fitted: dict[str, object] = {}
    skipped: list[str] = []
    degenerate: list[str] = []
    for barrier in model.barriers:
        if barrier.conditional_function is not None:
            continue
        guard = next(
            (t for t, chain in model.prevention_chains.items() if barrier.id in chain),
            None,
        )
        if guard is not None and log.isolated_threat != guard:
            skipped.append(
                f"{barrier.id} (guards {guard}; needs a log isolating that threat)"
            )
            continue
        try:
            fitted[barrier.id] = estimation.fit_barrier(
                log,
                model,
                barrier.id,
                variables=factor_specs.get(barrier.id, ()),
                fusion_mode=args.fusion_mode,
            )
        except DegenerateDataError as exc:
            degenerate.append(f"{barrier.id}: {exc}")
    for threat in model.threats:
        if threat.conditional_function is not None:
            continue
        if log.isolated_threat is not None and threat.id != log.isolated_threat:
            skipped.append(f"{threat.id} (log isolates {log.isolated_threat})")
            continue
        try:
            fitted[threat.id] = estimation.fit_threat(
                log, model, threat.id, variables=factor_specs.get(threat.id, ())
            )
        except DegenerateDataError as exc:
            degenerate.append(f"{threat.id}: {exc}")

    unused = set(factor_specs) - set(fitted) - {d.split(":", 1)[0] for d in degenerate}
    if unused:
        raise _UsageError(
            "--factors given for nodes that were not fitted: " + ", ".join(sorted(unused))
        )
    if degenerate:
        for line in degenerate:
            _err(line)
        return EXIT_DOMAIN
    new_nodes = tuple(
        n if n.id not in fitted else _with_function(n, fitted[n.id]) for n in model.nodes
    )
    out_model = BowTie(
        hazard=model.hazard,
        severity_classes=model.severity_classes,
        state_schema=model.state_schema,
        nodes=new_nodes,
        connections=model.connections,
    )
    out = _resolve_out(args.out)
    fileio.save_model(out_model, out)
    for node_id in sorted(fitted):
        fn = fitted[node_id]
        print(f"fitted {node_id}: kind={fn.kind.value} base={fn.base:.6g} "
              f"factors={len(fn.factors)}")
    for reason in skipped:
        print(f"skipped {reason}")
    print(f"wrote {out}")
    return EXIT_OK


def _with_function(node, fn):
    from .model import Node

    return Node(
        id=node.id,
        node_type=node.node_type,
        description=node.description,
        event_role=node.event_role,
        severity=node.severity,
        conditional_function=fn,
    )


def _cmd_assess(args) -> int:
    try:
        model = _load_valid_model(args.model)
    except _InvalidModel:
        return EXIT_DOMAIN
    rows = fileio.load_state_trace(args.trace, model)
    trace = engine.assess_stream(
        model, rows, window=args.window, horizon=args.horizon
    )
    out = _resolve_out(args.out)
    if out:
        fileio.save_risk_trace(trace, out)
        print(f"wrote {out}")
    evaluated = sum(1 for p in trace.points if p.error is None)
    print(f"samples: {len(trace.points)} evaluated: {evaluated} "
          f"errors: {len(trace.errors)}")
    if args.format == "delimited":
        for t, cid in trace.violations:
            print(f"violation\t{t}\t{cid}")
    else:
        for t, cid in trace.violations:
            print(f"violation at t={t:g}: {cid} above its acceptable rate")
    if not trace.violations:
        print("no violations")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    points = evaluation.load_scene_points(args.points)
    summary = evaluation.evaluate_predictions(
        points,
        exposure=args.exposure_minutes,
        bin_width=args.bin_width,
        subset_max=args.subset_max,
        static_rate=args.static_rate,
    )
    lines: list[str] = []
    if args.format == "delimited":
        lines.append(f"scenes\t{len(summary.points)}")
        lines.append(f"static_rate\t{summary.likelihood.static_rate!r}")
        lines.append(f"loglik_dynamic\t{summary.likelihood.dynamic!r}")
        lines.append(f"loglik_static\t{summary.likelihood.static!r}")
        lines.append(f"loglik_advantage\t{summary.likelihood.advantage!r}")
        for label, fit in (("fit_all", summary.fit_all), ("fit_subset", summary.fit_subset)):
            if fit is not None:
                lines.append(f"{label}\t{fit.slope!r}\t{fit.intercept!r}\t{fit.n}")
        for b in summary.bins:
            lines.append(
                f"bin\t{b.low!r}\t{b.high!r}\t{b.count}\t{b.mean_expected!r}\t{b.mean_observed!r}"
            )
    else:
        lines.append(f"scenes: {len(summary.points)}")
        lines.append(f"static rate: {summary.likelihood.static_rate:.6g}/min")
        lines.append(
            f"log-likelihood: dynamic {summary.likelihood.dynamic:.6g}, "
            f"static {summary.likelihood.static:.6g} "
            f"(advantage {summary.likelihood.advantage:.6g})"
        )
        if summary.fit_all is not None:
            lines.append(
                f"fit (all {summary.fit_all.n}): slope {summary.fit_all.slope:.4g}, "
                f"intercept {summary.fit_all.intercept:.4g}"
            )
        if summary.fit_subset is not None:
            lines.append(
                f"fit (expected <= {summary.subset_max:g}, n={summary.fit_subset.n}): "
                f"slope {summary.fit_subset.slope:.4g}, "
                f"intercept {summary.fit_subset.intercept:.4g}"
            )
        for b in summary.bins:
            lines.append(
                f"bin [{b.low:g}, {b.high:g}): n={b.count} "
                f"expected {b.mean_expected:.4g} observed {b.mean_observed:.4g}"
            )
    text = "\n".join(lines)
    out = _resolve_out(args.out)
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        print(f"wrote {out}")
    else:
        print(text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="bowtie-risk",
        description="Dynamic risk assessment over bow-tie hazard models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("validate", help="check a model file against the structural restrictions")
    p.add_argument("model", help="model JSON file")
    p.add_argument("--format", choices=("text", "delimited"), default="text")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sample", help="draw scene configurations from a scene description")
    p.add_argument("scene", help="scene description file")
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--count", type=int, default=1, help="number of configurations")
    p.add_argument("--start-index", type=int, default=0, dest="start_index")
    p.add_argument("--out", help="write JSONL here instead of stdout")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("simulate", help="run the scenario simulator")
    p.add_argument("truth", help="ground-truth JSON file")
    p.add_argument("btd", help="model JSON file (chain structure)")
    p.add_argument("--episodes", type=int, required=True, help="number of episodes")
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--isolate", help="enable only this threat")
    p.add_argument("--out", required=True, help="episode log JSONL output")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="estimate missing conditional functions from a log")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--log", required=True, help="episode log JSONL")
    p.add_argument("--out", required=True, help="fitted model JSON output")
    p.add_argument(
        "--factors",
        action="append",
        default=[],
        metavar="NODE=VAR[,VAR...]",
        help="state variables to condition a fitted node on (repeatable)",
    )
    p.add_argument(
        "--fusion-mode",
        choices=("raw_clamped", "normalized"),
        default="raw_clamped",
        dest="fusion_mode",
    )
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("assess", help="assess a state trace against acceptable rates")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--trace", required=True, help="state trace CSV")
    p.add_argument("--window", type=int, default=20, help="smoothing window, samples")
    p.add_argument("--horizon", type=float, default=1.0, help="likelihood horizon, minutes")
    p.add_argument("--out", help="risk trace CSV output")
    p.add_argument("--format", choices=("text", "delimited"), default="text")
    p.set_defaults(func=_cmd_assess)

    p = sub.add_parser("evaluate", help="compare per-scene predictions with observations")
    p.add_argument("--points", required=True, help="CSV: scene_id, estimated_rate, observed_count")
    p.add_argument("--exposure-minutes", type=float, default=1.0, dest="exposure_minutes")
    p.add_argument("--bin-width", type=float, default=0.25, dest="bin_width")
    p.add_argument("--subset-max", type=float, default=1.0, dest="subset_max")
    p.add_argument("--static-rate", type=float, default=None, dest="static_rate")
    p.add_argument("--format", choices=("text", "delimited"), default="text")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version print and stop
        return int(exc.code or 0)
    if getattr(args, "command", None) is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (SdlParseError,) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except ModelFormatError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except _DOMAIN_ERRORS as exc:
        _err(str(exc))
        return EXIT_DOMAIN
    except BowtieError as exc:
        _err(str(exc))
        return EXIT_DOMAIN


if __name__ == "__main__":
    raise SystemExit(main())
