"""Command-line interface: one subcommand per workflow, reports on stdout.

Exit codes: 0 success, 1 model or validation failure, 2 usage error.
All results go through emit_report; machine-json output is byte-stable
for identical inputs, so repeated runs diff clean.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Mapping, Sequence, Union

from . import canonical, composition, dynamics, modelfile, scenario, statespace
from .errors import StatedevError
from .reports import Report, emit_report, make_provenance


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statedev",
        description="State-development modeling: scales, diagrams, scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--format", choices=("json", "text"), default="json",
            help="report serialization (default: json)",
        )
        return p

    p = add("validate", "check a model file end to end")
    p.add_argument("model")
    p.add_argument("--samples", type=int, default=1000, help="sampling checks per scale")
    p.add_argument("--seed", type=int, default=0, help="seed for the sampling checks")

    p = add("classify", "classify one object through a classificator")
    p.add_argument("model")
    p.add_argument("--object", required=True, help="comma-separated name=value pairs")
    p.add_argument("--classificator", help="classificator id (default: the only one)")

    p = add("profile", "dynamics profile of a series file over an interval")
    p.add_argument("model")
    p.add_argument("--series", required=True, help="CSV with a tick column and one column per parameter")
    p.add_argument("--interval", required=True, help="a:b tick window")
    p.add_argument("--epsilon", type=float, default=0.0)

    p = add("replay", "replay a transition script against a canonical diagram")
    p.add_argument("model")
    p.add_argument("--diagram", required=True)
    p.add_argument("--events", required=True, help="CSV with tick,object,from,to,arc_kind")
    p.add_argument("--window", help="a:b tick window (default: the full horizon)")

    p = add("consist", "run a composition or consistency request")
    p.add_argument("model")
    p.add_argument("--request", required=True)

    p = add("simulate", "run a scenario and report its trajectory")
    p.add_argument("model")
    p.add_argument("--scenario", required=True)
    p.add_argument("--horizon", type=int, help="override the scenario's horizon")
    p.add_argument("--seed", type=int, help="recorded in provenance; simulation is deterministic")
    p.add_argument("--scores", help="score table id for the efficiency series")
    p.add_argument("--out", help="write a self-contained trajectory file")
    p.add_argument("--events-out", help="write the event log as CSV")

    p = add("analyze", "re-analyze a stored trajectory file")
    p.add_argument("trajectory")

    p = add("compare", "rank two or more trajectory reports")
    p.add_argument("reports", nargs="+")

    return parser


class _Usage(Exception):
    pass


def _parse_interval(text: str) -> tuple[int, int]:
    a, sep, b = text.partition(":")
    if not sep:
        raise _Usage(f"interval must look like a:b, got {text!r}")
    try:
        return int(a), int(b)
    except ValueError:
        raise _Usage(f"interval bounds must be integers, got {text!r}") from None


def _parse_object(text: str, parameters) -> dict:
    assignment: dict[str, object] = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        name = name.strip()
        if not sep or not name:
            raise _Usage(f"object entries must look like name=value, got {part!r}")
        value = value.strip()
        decl = parameters.get(name)
        if decl is not None and decl.kind == "ordinal":
            assignment[name] = value
        else:
            try:
                assignment[name] = float(value)
            except ValueError:
                assignment[name] = value
    return assignment


def _dyn_state_dict(state: dynamics.DynamicsState) -> dict:
    return {"kind": state.kind.value, "streak": state.streak}


def _arc_key(arc: canonical.Arc) -> str:
    return f"{arc.src}->{arc.dst} {arc.kind.value} d{arc.delta}"


def _error_report(target: str, messages: Sequence[str], args, warnings: Sequence[str] = ()) -> Report:
    return Report(
        kind="validation",
        body={
            "target": target,
            "passed": False,
            "violations": list(messages),
            "warnings": list(warnings),
        },
        provenance=_provenance(args, inputs=[target]),
    )


def _provenance(args, inputs: Sequence[str]) -> dict:
    existing = []
    for path in inputs:
        try:
            with open(path, "rb"):
                existing.append(path)
        except OSError:
            pass
    return make_provenance(
        inputs=existing,
        seed=getattr(args, "seed", None),
        argv=getattr(args, "_argv", None),
    )


def _cmd_validate(args) -> tuple[Report, int]:
    try:
        model = modelfile.parse_model(args.model)
    except modelfile.ModelFileError as exc:
        return _error_report(args.model, [str(i) for i in exc.issues], args), 1
    violations: list[str] = []
    warnings: list[str] = []
    spec = statespace.SampleSpec(samples=args.samples, seed=args.seed)
    for sid, scale in sorted(model.scales.items()):
        try:
            report = statespace.validate_scale_disjointness(scale, spec, model.parameters)
        except statespace.MissingParameterRangeError as exc:
            warnings.append(f"scale {sid!r}: disjointness not sampled ({exc})")
            continue
        for assignment, positions in report.overlaps[:5]:
            violations.append(
                f"scale {sid!r}: predicates {list(positions)} overlap at {assignment}"
            )
        if len(report.overlaps) > 5:
            violations.append(f"scale {sid!r}: {len(report.overlaps) - 5} further overlaps")
    for cid, cl in sorted(model.classificators.items()):
        try:
            report = statespace.validate_classificator(cl, spec, model.parameters)
        except statespace.MissingParameterRangeError as exc:
            warnings.append(f"classificator {cid!r}: refinement not sampled ({exc})")
            continue
        for sid, pos, child_pos, assignment in report.violations[:5]:
            violations.append(
                f"classificator {cid!r}: child predicate {child_pos} of ({sid!r}, {pos}) "
                f"escapes its parent at {assignment}"
            )
        if len(report.violations) > 5:
            violations.append(f"classificator {cid!r}: {len(report.violations) - 5} further escapes")
    for did, entry in sorted(model.canonical.items()):
        report = canonical.validate_canonical(entry.diagram)
        for arc in report.order_violations:
            violations.append(f"diagram {did!r}: arc {_arc_key(arc)} breaks the order discipline")
        for arc in report.delta_violations:
            violations.append(f"diagram {did!r}: arc {_arc_key(arc)} has delta outside the horizon")
        for state in report.unreachable:
            violations.append(f"diagram {did!r}: state {state!r} unreachable on development arcs")
        if not report.final_reachable:
            violations.append(f"diagram {did!r}: final state unreachable on development arcs")
    for sid, sc in sorted(model.scenarios.items()):
        report = scenario.validate_scenario(sc)
        violations.extend(f"scenario {sid!r}: {v}" for v in report.violations)
        warnings.extend(f"scenario {sid!r}: {w}" for w in report.warnings)
    passed = not violations
    report = Report(
        kind="validation",
        body={
            "target": args.model,
            "passed": passed,
            "violations": violations,
            "warnings": warnings,
        },
        provenance=_provenance(args, inputs=[args.model]),
    )
    return report, 0 if passed else 1


def _cmd_classify(args) -> tuple[Report, int]:
    model = modelfile.parse_model(args.model)
    cid = args.classificator
    if cid is None:
        if len(model.classificators) != 1:
            raise StatedevError(
                "model declares "
                f"{len(model.classificators)} classificators; pick one with --classificator"
            )
        cid = next(iter(model.classificators))
    if cid not in model.classificators:
        raise StatedevError(f"classificator {cid!r} is not declared")
    assignment = _parse_object(args.object, model.parameters)
    outcome = "classified"
    path: list[dict] = []
    try:
        states = statespace.classify_hierarchical(
            model.classificators[cid], assignment, model.parameters
        )
        path = [{"state": s.id, "position": s.scale_position, "label": s.label} for s in states]
    except statespace.NoMatchError as exc:
        outcome = f"no-match in scale {exc.scale_id!r}"
    except statespace.MultipleMatchError as exc:
        outcome = f"multiple-match in scale {exc.scale_id!r} at positions {list(exc.positions)}"
    except statespace.MissingParameterError as exc:
        outcome = f"missing parameters: {', '.join(exc.names)}"
    report = Report(
        kind="classification",
        body={
            "classificator": cid,
            "object": {k: assignment[k] for k in sorted(assignment)},
            "outcome": outcome,
            "path": path,
        },
        provenance=_provenance(args, inputs=[args.model]),
    )
    return report, 0 if outcome == "classified" else 1


def _read_series_csv(path: str, model: modelfile.ModelFile) -> list[dynamics.ParameterSeries]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise StatedevError(f"series file {path!r} is empty")
    header = [cell.strip() for cell in rows[0]]
    if not header or header[0] != "tick":
        raise StatedevError("series CSV must start with a 'tick' column")
    names = header[1:]
    if not names:
        raise StatedevError("series CSV has no parameter columns")
    ticks: dict[str, list[int]] = {name: [] for name in names}
    values: dict[str, list] = {name: [] for name in names}
    for line_no, row in enumerate(rows[1:], start=2):
        try:
            tick = int(row[0])
        except (ValueError, IndexError):
            raise StatedevError(f"{path}:{line_no}: bad tick {row[0]!r}") from None
        for name, cell in zip(names, row[1:]):
            cell = cell.strip()
            if not cell:
                continue
            ticks[name].append(tick)
            values[name].append(cell)
    out = []
    for name in names:
        if not ticks[name]:
            raise StatedevError(f"series column {name!r} holds no observations")
        decl = model.parameters.get(name)
        if decl is not None and decl.kind == "ordinal":
            out.append(dynamics.ParameterSeries.from_ordinal(name, ticks[name], values[name], decl.levels))
        else:
            try:
                numeric = [float(v) for v in values[name]]
            except ValueError as exc:
                raise StatedevError(f"series column {name!r}: {exc}") from None
            out.append(dynamics.ParameterSeries(name, tuple(ticks[name]), tuple(numeric)))
    return out


def _cmd_profile(args) -> tuple[Report, int]:
    model = modelfile.parse_model(args.model)
    interval = _parse_interval(args.interval)
    series_set = _read_series_csv(args.series, model)
    profile = dynamics.parallel_profile(series_set, interval, args.epsilon)
    rows = [
        {
            "tick": t,
            "cells": {
                name: _dyn_state_dict(profile.rows[name][t - profile.start])
                for name in profile.parameters
            },
        }
        for t in range(profile.start, profile.end + 1)
    ]
    trends: dict[str, Union[dict, None]] = {}
    for s in series_set:
        try:
            trend = dynamics.classify_series(s, args.epsilon)
            trends[s.parameter] = {
                "monotone": trend.monotone,
                "critical_points": list(trend.critical_points),
                "inflexions": list(trend.inflexions),
                "bounds": list(trend.bounds),
                "cyclic_period": trend.cyclic_period,
                "forecast": trend.forecast.value,
                "current_symbol": dynamics.current_symbol(s, args.epsilon).value,
            }
        except dynamics.SeriesTooShortError:
            trends[s.parameter] = None
    report = Report(
        kind="profile",
        body={
            "parameters": list(profile.parameters),
            "start": profile.start,
            "end": profile.end,
            "rows": rows,
            "trends": trends,
        },
        provenance=_provenance(args, inputs=[args.model, args.series]),
    )
    return report, 0


def _read_event_csv(path: str, d: canonical.CanonicalDiagram) -> list[tuple[str, canonical.Arc, int]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows or [c.strip() for c in rows[0]] != ["tick", "object", "from", "to", "arc_kind"]:
        raise StatedevError("event CSV must have the header tick,object,from,to,arc_kind")
    script = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != 5:
            raise StatedevError(f"{path}:{line_no}: expected 5 columns")
        tick_text, obj, src, dst, kind_text = (c.strip() for c in row)
        try:
            tick = int(tick_text)
        except ValueError:
            raise StatedevError(f"{path}:{line_no}: bad tick {tick_text!r}") from None
        matches = [
            arc for arc in d.arcs
            if arc.src == src and arc.dst == dst and arc.kind.value == kind_text
        ]
        if not matches:
            raise canonical.UnknownArcError(
                f"{path}:{line_no}: no {kind_text} arc {src}->{dst} in diagram {d.id!r}"
            )
        if len(matches) > 1:
            raise StatedevError(
                f"{path}:{line_no}: {kind_text} arc {src}->{dst} is ambiguous "
                "(several deltas); split the diagram arcs"
            )
        script.append((obj, matches[0], tick))
    return script


def _cmd_replay(args) -> tuple[Report, int]:
    model = modelfile.parse_model(args.model)
    if args.diagram not in model.canonical:
        raise StatedevError(f"diagram {args.diagram!r} is not declared")
    entry = model.canonical[args.diagram]
    if not entry.initial_distribution:
        raise StatedevError(f"diagram {args.diagram!r} declares no initial_distribution")
    d = entry.diagram
    window = _parse_interval(args.window) if args.window else (0, d.horizon)
    script = _read_event_csv(args.events, d)
    initial = canonical.ObjectDistribution.initial(entry.initial_distribution)
    _, counters, history = canonical.replay_script(d, initial, script)
    report_data = canonical.intensity_report(
        history, d, window, initial, target=entry.target_distribution
    )
    body = {
        "diagram": d.id,
        "window": list(report_data.window),
        "occupancy": {state: list(series) for state, series in sorted(report_data.occupancy.items())},
        "arc_cumulative": {
            _arc_key(arc): list(series)
            for arc, series in sorted(report_data.arc_cumulative.items(), key=lambda kv: kv[0].sort_index)
        },
        "development": report_data.development,
        "degradation": report_data.degradation,
        "ratio": report_data.ratio,
        "reached": dict(sorted(report_data.reached.items())),
        "target_delta": dict(sorted(report_data.target_delta.items()))
        if report_data.target_delta is not None
        else None,
    }
    report = Report(
        kind="intensity",
        body=body,
        provenance=_provenance(args, inputs=[args.model, args.events]),
    )
    return report, 0


def _diagram_summary(d: canonical.CanonicalDiagram) -> dict:
    return {
        "diagram": d.id,
        "states": list(d.states),
        "initial": d.initial,
        "final": d.final,
        "horizon": d.horizon,
        "dev_arcs": [_arc_key(a) for a in d.dev_arcs],
        "back_arcs": [_arc_key(a) for a in d.back_arcs],
    }


def _cmd_consist(args) -> tuple[Report, int]:
    model = modelfile.parse_model(args.model)
    if args.request not in model.composition_requests:
        raise StatedevError(f"request {args.request!r} is not declared")
    req = model.composition_requests[args.request]
    dset = composition.TimedDiagramSet(
        diagrams=tuple(model.canonical[d].diagram for d in req.diagram_ids),
        intervals=req.intervals,
    )
    outcome = "composed"
    detail: dict
    code = 0
    if req.kind == "consistency":
        verdict = composition.check_consistency(dset, req.sequence or composition.PrescribedSequence(()))
        outcome = "consistent" if verdict.consistent else "inconsistent"
        detail = {
            "witness": [
                {"tick": f.tick, "diagram": f.diagram, "arc": _arc_key(f.arc)}
                for f in verdict.witness
            ]
            if verdict.witness is not None
            else None,
            "satisfied_at": list(verdict.satisfied_at) if verdict.satisfied_at is not None else None,
            "failed_prefix": verdict.failed_prefix,
        }
    else:
        try:
            if req.kind == "sequential":
                detail = _diagram_summary(composition.compose_sequential(dset))
            elif req.kind == "parallel":
                detail = _diagram_summary(composition.compose_parallel(dset).diagram)
            else:
                spec = composition.OrderRelationSpec(req.order_pairs)
                detail = _diagram_summary(
                    composition.generalize(dset, req.selection, spec).diagram
                )
        except StatedevError as exc:
            outcome = "rejected"
            detail = {"error": type(exc).__name__, "message": str(exc)}
            code = 1
    report = Report(
        kind="consistency",
        body={"request": req.id, "outcome": outcome, "detail": detail},
        provenance=_provenance(args, inputs=[args.model]),
    )
    return report, code


def _scenario_report_body(rep: scenario.ScenarioReport) -> dict:
    return {
        "scenario": rep.scenario_id,
        "horizon": rep.horizon,
        "subsystems": list(rep.subsystems),
        "complete": rep.complete,
        "non_final": list(rep.non_final),
        "redundancy_incidents": [
            {"subsystem": sub, "ticks": list(ticks)} for sub, ticks in rep.redundancy_incidents
        ],
        "omitted_possibilities": {
            "per_subsystem": dict(sorted(rep.backstep_counts.items())),
            "total": rep.backstep_total,
            "frequency": rep.backstep_frequency,
        },
        "complexness": {
            "per_subsystem": dict(sorted(rep.coupled_counts.items())),
            "total": rep.coupled_total,
            "frequency": rep.coupled_frequency,
        },
        "propagation": {"per_subsystem": dict(sorted(rep.propagation_counts.items()))},
        "efficiency": {
            "per_subsystem": {
                sub: list(series) for sub, series in sorted(rep.efficiency.per_subsystem.items())
            },
            "aggregate": list(rep.efficiency.aggregate),
        }
        if rep.efficiency is not None
        else None,
    }


def _write_events_csv(path: str, tr: scenario.Trajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seq", "tick", "kind", "subsystem", "symbol", "src", "dst", "cause", "effective"])
        for seq, event in enumerate(tr.events):
            kind, sub, symbol, src, dst, cause, effective = scenario.event_row(event)
            writer.writerow([seq, event.tick, kind, sub, symbol, src, dst, cause, effective])


def _cmd_simulate(args) -> tuple[Report, int]:
    model = modelfile.parse_model(args.model)
    if args.scenario not in model.scenarios:
        raise StatedevError(f"scenario {args.scenario!r} is not declared")
    sc = model.scenarios[args.scenario]
    crit = None
    scores = None
    if args.scores is not None:
        if args.scores not in model.score_tables:
            raise StatedevError(f"score table {args.scores!r} is not declared")
        scores = model.score_tables[args.scores]
        crit = modelfile.criterion_from_table(scores)
    tr = scenario.run_scenario(sc, args.horizon)
    rep = scenario.analyze_trajectory(tr, sc, crit)
    if args.out:
        payload = modelfile.trajectory_file_to_dict(tr, sc, scores)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    if args.events_out:
        _write_events_csv(args.events_out, tr)
    report = Report(
        kind="trajectory",
        body=_scenario_report_body(rep),
        provenance=_provenance(args, inputs=[args.model]),
    )
    return report, 0


def _cmd_analyze(args) -> tuple[Report, int]:
    sc, tr, scores = modelfile.load_trajectory_file(args.trajectory)
    crit = modelfile.criterion_from_table(scores) if scores else None
    rep = scenario.analyze_trajectory(tr, sc, crit)
    report = Report(
        kind="trajectory",
        body=_scenario_report_body(rep),
        provenance=_provenance(args, inputs=[args.trajectory]),
    )
    return report, 0


def _report_from_body(body: Mapping) -> scenario.ScenarioReport:
    efficiency = None
    if body.get("efficiency") is not None:
        eff = body["efficiency"]
        per = {sub: tuple(series) for sub, series in eff["per_subsystem"].items()}
        efficiency = scenario.EfficiencySeries(
            subsystems=tuple(sorted(per)),
            per_subsystem=per,
            aggregate=tuple(eff["aggregate"]),
        )
    return scenario.ScenarioReport(
        scenario_id=body["scenario"],
        horizon=int(body["horizon"]),
        subsystems=tuple(body["subsystems"]),
        complete=bool(body["complete"]),
        non_final=tuple(body["non_final"]),
        redundancy_incidents=tuple(
            (item["subsystem"], tuple(item["ticks"])) for item in body["redundancy_incidents"]
        ),
        backstep_counts=dict(body["omitted_possibilities"]["per_subsystem"]),
        backstep_total=int(body["omitted_possibilities"]["total"]),
        backstep_frequency=float(body["omitted_possibilities"]["frequency"]),
        coupled_counts=dict(body["complexness"]["per_subsystem"]),
        coupled_total=int(body["complexness"]["total"]),
        coupled_frequency=float(body["complexness"]["frequency"]),
        propagation_counts=dict(body["propagation"]["per_subsystem"]),
        efficiency=efficiency,
    )


def _cmd_compare(args) -> tuple[Report, int]:
    if len(args.reports) < 2:
        raise _Usage("compare needs at least two report files")
    loaded = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or data.get("kind") != "trajectory":
            raise StatedevError(f"{path!r} is not a trajectory report")
        loaded.append(_report_from_body(data["body"]))
    result = scenario.compare_scenarios(loaded)
    report = Report(
        kind="comparison",
        body={
            "compared": [r.scenario_id for r in loaded],
            "ranking": [list(group) for group in result.groups],
        },
        provenance=_provenance(args, inputs=list(args.reports)),
    )
    return report, 0


_COMMANDS = {
    "validate": _cmd_validate,
    "classify": _cmd_classify,
    "profile": _cmd_profile,
    "replay": _cmd_replay,
    "consist": _cmd_consist,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "compare": _cmd_compare,
}


def main(argv: Union[Sequence[str], None] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = argv
    fmt = "machine-json" if args.format == "json" else "human-text"
    try:
        report, code = _COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except modelfile.ModelFileError as exc:
        report = _error_report(
            getattr(args, "model", getattr(args, "trajectory", "input")),
            [str(i) for i in exc.issues],
            args,
        )
        sys.stdout.write(emit_report(report, fmt))
        return 1
    except StatedevError as exc:
        report = _error_report(
            getattr(args, "model", getattr(args, "trajectory", "input")), [str(exc)], args
        )
        sys.stdout.write(emit_report(report, fmt))
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(emit_report(report, fmt))
    return code


if __name__ == "__main__":
    sys.exit(main())
