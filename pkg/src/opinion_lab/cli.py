"""Command-line interface.

Subcommands: simulate, classify, fvct, check, analyze, experiment.
Exit codes: 0 success, 1 input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from opinion_lab.dynamics import Trajectory, pseudo_stable_check, simulate
from opinion_lab.experiment import ExperimentConfig, emit_results, run_campaign
from opinion_lab.graph import build_digraph, classify
from opinion_lab.leader import (
    analyze_final_topology,
    verify_direction_prediction,
    verify_rate_prediction,
)
from opinion_lab.matrix import fvct
from opinion_lab.state import Model, OpinionState
from opinion_lab.stability import stability_report

log = logging.getLogger(__name__)


class InputError(Exception):
    """Malformed user input (file contents, flags)."""


def load_state(path, model) -> OpinionState:
    """Read a state file: JSON {"opinions": [...], "bounds": [...]} or a
    two-column CSV (opinion, bound)."""
    try:
        text = open(path).read()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if path.endswith(".csv"):
        opinions, bounds = [], []
        for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
            if not row or row[0].strip().lower() in ("opinion", "x", "y"):
                continue
            if len(row) != 2:
                raise InputError(
                    f"{path}:{lineno}: expected 2 columns, got {len(row)}"
                )
            try:
                opinions.append(float(row[0]))
                bounds.append(float(row[1]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict) or "opinions" not in raw or "bounds" not in raw:
            raise InputError(
                f'{path}: expected fields "opinions" and "bounds"'
            )
        opinions, bounds = raw["opinions"], raw["bounds"]
    try:
        return OpinionState(opinions, bounds, Model(model))
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_trajectory_csv(path, state: OpinionState) -> Trajectory:
    """Rehydrate a trajectory from the CSV written by `simulate`."""
    traj = Trajectory(bounds=state.bounds, kind=state.kind)
    try:
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[0] != "t":
                raise InputError(f"{path}: missing trajectory header")
            for lineno, row in enumerate(reader, start=2):
                try:
                    traj.times.append(int(row[0]))
                    traj.states.append(np.array([float(v) for v in row[1:]]))
                except (ValueError, IndexError) as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not traj.states:
        raise InputError(f"{path}: empty trajectory")
    if any(len(x) != state.n for x in traj.states):
        raise InputError(f"{path}: row width does not match state size")
    # Rebuild topology epochs from the recorded states.
    from opinion_lab.dynamics import digraph_hash

    prev = None
    for t, x in zip(traj.times, traj.states):
        h = digraph_hash(build_digraph(state.with_opinions(x)))
        if h != prev:
            traj.topology_epochs.append((t, h))
            prev = h
    return traj


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_simulate(args) -> int:
    state = load_state(args.state, args.model)
    traj = simulate(
        state,
        max_steps=args.max_steps,
        fixed_tol=args.fixed_tol,
        record_every=args.record_every,
        limit_tol=args.limit_tol,
    )
    if args.out_prefix:
        traj.to_csv(args.out_prefix + "_trajectory.csv")
        traj.events_to_json_file(args.out_prefix + "_events.json")
    _emit(
        {
            "steps": traj.times[-1],
            "termination": str(traj.termination),
            "final": [float(v) for v in traj.states[-1]],
            **traj.events_json(),
        }
    )
    return 0


def cmd_classify(args) -> int:
    state = load_state(args.state, args.model)
    g = build_digraph(state)
    c = classify(g)
    _emit({"digraph": g.to_json(), "classification": c.to_json()})
    return 0


def cmd_fvct(args) -> int:
    state = load_state(args.state, args.model)
    _emit([float(v) for v in fvct(state)])
    return 0


def cmd_check(args) -> int:
    state = load_state(args.state, args.model)
    _emit(stability_report(state).to_json())
    return 0


def cmd_analyze(args) -> int:
    state = load_state(args.state, args.model)
    if args.trajectory:
        traj = load_trajectory_csv(args.trajectory, state)
    else:
        traj = simulate(state, max_steps=args.max_steps)
    _, c, _, f, la = analyze_final_topology(traj)
    report = {"leaders": la.to_json(c)}
    window = min(args.window, len(traj.times))
    if window >= 10:
        report["rates"] = [
            {
                "agent": v.agent,
                "scc_id": v.scc_id,
                "leader_id": v.leader_id,
                "leader_radius": v.leader_radius,
                "factor": v.factor,
                "deviation": v.deviation,
                "excluded": v.excluded,
            }
            for v in verify_rate_prediction(traj, la, window=window)
        ]
    report["directions"] = [
        {
            "follower_id": v.follower_id,
            "leader_id": v.leader_id,
            "applicable": v.applicable,
            "matches_from": v.matches_from,
        }
        for v in verify_direction_prediction(traj, la)
    ]
    if len(traj.times) >= 2 and traj.is_dense():
        verdict = pseudo_stable_check(traj, f)
        report["pseudo_stable"] = {
            "holds_from": verdict.holds_from,
            "fixed_set": sorted(verdict.fixed_set),
            "converging_set": sorted(verdict.converging_set),
        }
    _emit(report)
    return 0


def cmd_experiment(args) -> int:
    try:
        cfg = ExperimentConfig.from_json_file(args.config)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"{args.config}: {exc}") from exc
    records = run_campaign(cfg)
    results_path, aggregate_path = emit_results(records, args.out)
    _emit({"runs": len(records), "results": results_path, "aggregate": aggregate_path})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opinion-lab",
        description="Bounded-confidence/influence opinion dynamics toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_state_flags(p):
        p.add_argument("--state", required=True, help="state file (JSON or CSV)")
        p.add_argument(
            "--model", default="sbc", choices=[m.value for m in Model]
        )

    p = sub.add_parser("simulate", help="run the dynamics from a state file")
    add_state_flags(p)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=100_000)
    p.add_argument("--fixed-tol", dest="fixed_tol", type=float, default=0.0)
    p.add_argument("--record-every", dest="record_every", type=int, default=1)
    p.add_argument("--limit-tol", dest="limit_tol", type=float, default=1e-12)
    p.add_argument("--out-prefix", dest="out_prefix", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("classify", help="digraph and agent classification")
    add_state_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fvct", help="final value at constant topology")
    add_state_flags(p)
    p.set_defaults(func=cmd_fvct)

    p = sub.add_parser("check", help="stability report for a state")
    add_state_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("analyze", help="leader/rate/direction analysis")
    add_state_flags(p)
    p.add_argument("--trajectory", default=None, help="trajectory CSV (optional)")
    p.add_argument("--max-steps", dest="max_steps", type=int, default=10_000)
    p.add_argument("--window", type=int, default=50)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("experiment", help="seeded Monte Carlo campaign")
    p.add_argument("--config", required=True, help="campaign config JSON")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("runtime failure")
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
