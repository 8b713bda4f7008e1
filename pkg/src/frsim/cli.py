"""Command-line driver.

Exit codes: 0 success (an UNSAT report is a success), 1 domain error,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import itertools
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .correlations import DichotomicObservable, correlation, chsh_value, optimal_singlet_settings
from .dsl import load_scenario
from .errors import FrsimError, ImpossibleEventError, ParseError, StructureError
from .frames import (
    consistency_report,
    fr_contradiction_report,
    frame_from_observables,
    intertwinement,
    possibilistic_constraints,
)
from .measurement import (
    ZERO_TOL,
    Distribution,
    NoSignalingReport,
    Observable,
    condition_on_outcomes,
    joint_distribution,
    no_signaling_audit,
)
from .render import ChshResult, EventResult, FramesResult, render
from .scenario import (
    BUILTIN_SCENARIOS,
    Scenario,
    ensemble_distribution,
    event_probability,
    run_deterministic,
    sample_runs,
)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Outcome:
    code: int
    stdout: str
    stderr: str


def load(ref: str) -> Scenario:
    if ref in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[ref]()
    path = Path(ref)
    if path.suffix != ".scn":
        raise UsageError(f"unknown scenario {ref!r}: not a built-in ({', '.join(BUILTIN_SCENARIOS)}) or a .scn file")
    if not path.is_file():
        raise UsageError(f"{ref}: scenario file not found")
    try:
        return load_scenario(path)
    except ParseError as err:
        raise UsageError("\n".join(f"{ref}:{d}" for d in err.diagnostics)) from None


def _lookup(fn, name):
    # unknown names in flag values are usage errors, not domain errors
    try:
        return fn(name)
    except StructureError as err:
        raise UsageError(str(err)) from None


def _perspective(s: Scenario, name: str | None):
    return _lookup(s.perspective, name) if name else s.perspectives[0]


def _unmeasured(s: Scenario, name: str | None):
    """The named perspective, else the first one that collapses nothing."""
    if name:
        return _lookup(s.perspective, name)
    for p in s.perspectives:
        if not p.collapsing_steps:
            return p
    return s.perspectives[0]


def _observables(s: Scenario, spec: str | None) -> list[Observable]:
    if not spec:
        return list(s.observables.values())
    return [_lookup(s.observable, name.strip()) for name in spec.split(",") if name.strip()]


def _event(s: Scenario, spec: str) -> list[tuple[Observable, str]]:
    out = []
    for item in spec.split(","):
        if "=" not in item:
            raise UsageError(f"bad event term {item!r}; expected NAME=LABEL")
        name, label = (x.strip() for x in item.split("=", 1))
        obs = _lookup(s.observable, name)
        if label not in obs.labels:
            raise UsageError(f"{label!r} is not an outcome of {name!r}")
        out.append((obs, label))
    return out


def _disjoint_pairs(obs: list[Observable]) -> list[tuple[Observable, Observable]]:
    return [
        (a, b)
        for a, b in itertools.combinations(obs, 2)
        if not set(a.subsystem_names) & set(b.subsystem_names)
    ]


def _single_state(s: Scenario, perspective):
    ensemble = run_deterministic(s, perspective)
    if len(ensemble) != 1:
        raise StructureError(
            f"perspective {ensemble.perspective!r} yields {len(ensemble)} branches; "
            "this analysis needs a single pure state"
        )
    return ensemble.branches[0].state


# ---------------------------------------------------------------------------
# commands


def cmd_run(args, s: Scenario):
    p = _perspective(s, args.perspective)
    if args.samples is not None:
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        if args.event:
            event = _event(s, args.event)
            obs = [o for o, _ in event]
        else:
            event, obs = None, _observables(s, args.observables)
        table = sample_runs(s, p, args.samples, args.seed, obs)
        out = render(table, args.format, args.tolerance)
        if event is not None and args.format == "text":
            labels = tuple(lab for _, lab in event)
            exact = event_probability(s, p, event)
            out += f"freq({', '.join(f'{o.name}={lab}' for o, lab in event)}) = {table.frequency(labels):.6g}"
            out += f"  (exact {exact:.6g})\n"
        return out
    if args.event:
        event = _event(s, args.event)
        prob = event_probability(s, p, event)
        result = EventResult(p.name, tuple((o.name, lab) for o, lab in event), prob)
        return render(result, args.format, args.tolerance)
    return render(run_deterministic(s, p), args.format, args.tolerance)


def cmd_distribution(args, s: Scenario):
    p = _perspective(s, args.perspective)
    obs = _observables(s, args.observables)
    if not args.event:
        return render(ensemble_distribution(s, p, obs), args.format, args.tolerance)
    # condition every branch on the event, then mix with the surviving weights
    event = _event(s, args.event)
    ev_obs = [o for o, _ in event]
    labels = tuple(lab for _, lab in event)
    weights, dists = [], []
    for b in run_deterministic(s, p):
        w = b.probability * joint_distribution(b.state, ev_obs)[labels]
        if w > 1e-12:
            weights.append(w)
            dists.append(joint_distribution(condition_on_outcomes(b.state, ev_obs, labels), obs))
    if not weights:
        raise ImpossibleEventError(f"conditioning on impossible event ({args.event})")
    total = sum(weights)
    support: dict = {}
    for w, d in zip(weights, dists):
        for k, q in d.items():
            support[k] = support.get(k, 0.0) + w / total * q
    return render(Distribution(tuple(o.name for o in obs), support), args.format, args.tolerance)


def cmd_consistency(args, s: Scenario):
    if args.scenario == "fr" and not args.observables and not args.event and not args.perspective:
        return render(fr_contradiction_report(args.tolerance), args.format, args.tolerance)
    state = _single_state(s, _unmeasured(s, args.perspective))
    groups = _disjoint_pairs(_observables(s, args.observables))
    required = [(o.name, lab) for o, lab in _event(s, args.event)] if args.event else []
    report = consistency_report(state, groups, required, args.tolerance)
    return render(report, args.format, args.tolerance)


def cmd_frames(args, s: Scenario):
    state = _single_state(s, _unmeasured(s, args.perspective))
    frames = [frame_from_observables(g, state.systems) for g in _disjoint_pairs(_observables(s, args.observables))]
    probs = {
        (c.frame, next(iter(c.atoms))): c.probability
        for c in possibilistic_constraints(state, frames, args.tolerance)
    }
    shared = tuple(
        (f1.name, f2.name, tuple(intertwinement(f1, f2))) for f1, f2 in itertools.combinations(frames, 2)
    )
    return render(FramesResult(tuple(frames), shared, probs), args.format, args.tolerance)


def cmd_chsh(args, s: Scenario):
    p = _perspective(s, args.perspective)
    if args.observables:
        names = [n.strip() for n in args.observables.split(",")]
        if len(names) != 4:
            raise UsageError("chsh needs exactly four observables: a,a',b,b'")
        settings = [DichotomicObservable(_lookup(s.observable, n)) for n in names]
    else:
        if len(s.systems) < 2 or any(x.dimension != 2 for x in s.systems[:2]):
            raise UsageError("default CHSH settings need two qubit systems; pass --observables")
        settings = list(optimal_singlet_settings(s.systems[0], s.systems[1]))
    a, ap, b, bp = settings
    ensemble = run_deterministic(s, p)
    pairs = [(a, b), (a, bp), (ap, b), (ap, bp)]
    corr = tuple(sum(br.probability * correlation(br.state, x, y) for br in ensemble) for x, y in pairs)
    result = ChshResult(tuple(o.name for o in settings), corr, chsh_value(*corr))
    return render(result, args.format, args.tolerance)


def cmd_nosignal(args, s: Scenario):
    obs = _observables(s, args.observables)
    groups: dict[tuple[str, ...], list[Observable]] = {}
    for o in obs:
        groups.setdefault(o.subsystem_names, []).append(o)
    if len(groups) != 2:
        raise UsageError(
            f"no-signaling audit needs observables on exactly two sides, got {len(groups)}"
        )
    side1, side2 = groups.values()
    if set(side1[0].subsystem_names) & set(side2[0].subsystem_names):
        raise UsageError("the two sides share a system")
    checks = []
    for b in run_deterministic(s, _unmeasured(s, args.perspective)):
        checks.extend(no_signaling_audit(b.state, side1, side2, args.tolerance).checks)
        checks.extend(no_signaling_audit(b.state, side2, side1, args.tolerance).checks)
    return render(NoSignalingReport(tuple(checks), args.tolerance), args.format, args.tolerance)


def cmd_parse(args, s: Scenario):
    measures = sum(1 for st in s.steps if type(st.action).__name__ == "Measure")
    return (
        f"ok: {len(s.systems)} systems, {len(s.observables)} observables, "
        f"{len(s.steps)} steps ({measures} measurements), {len(s.perspectives)} perspectives\n"
    )


COMMANDS = {
    "run": (cmd_run, "event probability, branch ensemble, or sampled frequencies"),
    "distribution": (cmd_distribution, "joint table for --observables on the final ensemble"),
    "consistency": (cmd_consistency, "possibilistic constraints and single-world valuation search"),
    "frames": (cmd_frames, "Boolean frames of commuting observable pairs and their intertwinement"),
    "chsh": (cmd_chsh, "CHSH value of the final state"),
    "nosignal": (cmd_nosignal, "no-signaling audit between the two sides"),
    "parse": (cmd_parse, "validate a scenario"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frsim", description="Extended Wigner's-friend scenario simulator.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--scenario", default="singlet" if name == "chsh" else None, required=name != "chsh")
        p.add_argument("--perspective")
        p.add_argument("--event", help="comma list NAME=LABEL")
        p.add_argument("--observables", help="comma list of observable names")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--tolerance", type=float, default=ZERO_TOL)
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        scenario = load(args.scenario)
        handler, _ = COMMANDS[args.command]
        stdout.write(handler(args, scenario))
        return 0
    except UsageError as err:
        stderr.write(f"{err}\n")
        return 2
    except FrsimError as err:
        stderr.write(f"error: {err}\n")
        return 1


def execute(argv: Sequence[str]) -> Outcome:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main(list(argv), out, err)
        except SystemExit as exc:  # --help
            code = int(exc.code or 0)
    return Outcome(code, out.getvalue(), err.getvalue())


if __name__ == "__main__":
    sys.exit(main())
