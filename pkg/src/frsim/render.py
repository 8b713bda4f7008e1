"""Text and JSON rendering of results.

Text output prints probabilities to 6 significant digits and anything
below the zero tolerance as a bare ``0``; JSON keeps full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Sequence

from .correlations import TSIRELSON
from .frames import ContradictionReport, Deduction, Frame, ValuationResult
from .linalg import PureState
from .measurement import ZERO_TOL, Distribution, NoSignalingReport
from .scenario import BranchEnsemble, FrequencyTable


@dataclass(frozen=True)
class EventResult:
    perspective: str
    event: tuple[tuple[str, str], ...]
    probability: float


@dataclass(frozen=True)
class ChshResult:
    settings: tuple[str, str, str, str]
    correlators: tuple[float, float, float, float]
    value: float


@dataclass(frozen=True)
class FramesResult:
    frames: tuple[Frame, ...]
    shared: tuple[tuple[str, str, tuple], ...]  # (frame1, frame2, [(subset1, subset2)])
    probabilities: dict | None = None


def fmt_prob(p: float, tol: float = ZERO_TOL) -> str:
    return "0" if abs(p) < tol else f"{p:.6g}"


def _fmt_amp(a: complex) -> str:
    if abs(a.imag) < 1e-12:
        return f"{a.real:.6g}"
    if abs(a.real) < 1e-12:
        return f"{a.imag:.6g}i"
    return f"({a.real:.6g}{a.imag:+.6g}i)"


def fmt_state(s: PureState, tol: float = 1e-12) -> str:
    terms = [
        ("" if abs(a - 1) < 1e-12 else _fmt_amp(a)) + f"|{','.join(k)}>"
        for k, a in s.as_dict(tol).items()
    ]
    return " + ".join(terms).replace("+ -", "- ") or "0"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for r in [header, *rows]:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def _event(event) -> str:
    return ", ".join(f"{v}={lab}" for v, lab in event)


# ---------------------------------------------------------------------------
# text


def _text_distribution(d: Distribution, tol: float) -> str:
    rows = [[*key, fmt_prob(p, tol)] for key, p in d.items()]
    return _table([*d.variables, "P"], rows)


def _text_ensemble(e: BranchEnsemble, tol: float) -> str:
    steps = list(e.branches[0].record) if e.branches else []
    rows = [[*b.record.values(), fmt_prob(b.probability, tol), fmt_state(b.state)] for b in e]
    head = f"perspective {e.perspective}: {len(e)} branch{'es' if len(e) != 1 else ''}"
    return head + "\n" + _table([*steps, "P", "state"], rows)


def _text_valuation(r: ValuationResult) -> str:
    lines = [f"status: {r.status}"]
    if r.assumptions:
        lines.append(f"assumed: {_event(r.assumptions)}")
    if r.sat:
        lines.append(f"witness: {_event(r.witness.items())}")
    else:
        lines.append("deduction:")
        lines.extend(f"  {i}. {d}" for i, d in enumerate(r.trace, start=1))
    lines.append(f"assignments searched: {r.searched}")
    return "\n".join(lines)


def _text_contradiction(r: ContradictionReport, tol: float) -> str:
    blocks = []
    impossible = {(c.frame, next(iter(c.atoms))) for c in r.impossible}
    for d in r.distributions:
        name = ",".join(d.variables)
        rows = [
            [*key, fmt_prob(p, tol), "impossible" if (name, key) in impossible else ""]
            for key, p in d.items()
        ]
        blocks.append(f"frame ({name})\n" + _table([*d.variables, "P", ""], rows))
    blocks.append(f"impossible atoms: {len(r.impossible)}")
    blocks.append(_text_valuation(r.result))
    return "\n\n".join(blocks)


def _text_frequencies(f: FrequencyTable, tol: float) -> str:
    rows = [[*o, str(c), fmt_prob(c / f.n, tol)] for o, c in zip(f.outcomes, f.counts)]
    head = f"perspective {f.perspective}: {f.n} runs, seed {f.seed}"
    return head + "\n" + _table([*f.variables, "count", "freq"], rows)


def _text_nosignal(r: NoSignalingReport, tol: float) -> str:
    rows = [
        [c.observable, c.remote or "(none)", "  ".join(f"{k[0]}:{fmt_prob(p, tol)}" for k, p in c.marginal.items()), f"{c.deviation:.3g}"]
        for c in r.checks
    ]
    verdict = "PASS" if r.passed else "FAIL"
    return _table(["local", "remote", "marginal", "deviation"], rows) + (
        f"\nmax deviation {r.max_deviation:.3g}: {verdict}"
    )


def _text_frames(r: FramesResult, tol: float) -> str:
    blocks = []
    for f in r.frames:
        rows = []
        for lab, _ in f.atoms:
            p = r.probabilities.get((f.name, lab)) if r.probabilities else None
            rows.append([",".join(lab), "" if p is None else fmt_prob(p, tol)])
        blocks.append(f"frame ({f.name}): {len(f.atoms)} atoms\n" + _table(["atom", "P"], rows))
    lines = ["intertwinement:"]
    for a, b, pairs in r.shared:
        if not pairs:
            lines.append(f"  ({a}) ~ ({b}): only 0 and 1")
        for s1, s2 in pairs:
            left = " | ".join(",".join(x) for x in sorted(s1))
            right = " | ".join(",".join(x) for x in sorted(s2))
            lines.append(f"  ({a}) ~ ({b}): {{{left}}} = {{{right}}}")
    blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _text_chsh(r: ChshResult) -> str:
    a, ap, b, bp = r.settings
    rows = [
        [f"E({a},{b})", f"{r.correlators[0]:.6g}"],
        [f"E({a},{bp})", f"{r.correlators[1]:.6g}"],
        [f"E({ap},{b})", f"{r.correlators[2]:.6g}"],
        [f"E({ap},{bp})", f"{r.correlators[3]:.6g}"],
        ["S", f"{r.value:.8g}"],
        ["2*sqrt(2)", f"{TSIRELSON:.8g}"],
    ]
    return _table(["quantity", "value"], rows)


# ---------------------------------------------------------------------------
# json


def to_jsonable(report: Any) -> Any:
    if isinstance(report, Distribution):
        return {
            "type": "distribution",
            "variables": list(report.variables),
            "outcomes": [{"labels": list(k), "probability": p} for k, p in report.items()],
        }
    if isinstance(report, BranchEnsemble):
        return {
            "type": "ensemble",
            "perspective": report.perspective,
            "branches": [
                {
                    "record": dict(b.record),
                    "probability": b.probability,
                    "state": {
                        "systems": list(b.state.system_names),
                        "amplitudes": [[a.real, a.imag] for a in b.state.amplitudes.tolist()],
                    },
                }
                for b in report
            ],
        }
    if isinstance(report, ValuationResult):
        return {
            "type": "valuation",
            "status": report.status,
            "witness": dict(report.witness) if report.witness else None,
            "assumptions": [list(x) for x in report.assumptions],
            "trace": [_deduction(d) for d in report.trace],
            "searched": report.searched,
        }
    if isinstance(report, ContradictionReport):
        return {
            "type": "consistency",
            "distributions": [to_jsonable(d) for d in report.distributions],
            "impossible": [
                {"frame": c.frame, "atom": list(next(iter(c.atoms))), "probability": c.probability}
                for c in report.impossible
            ],
            "valuation": to_jsonable(report.result),
        }
    if isinstance(report, FrequencyTable):
        return {
            "type": "frequencies",
            "perspective": report.perspective,
            "n": report.n,
            "seed": report.seed,
            "variables": list(report.variables),
            "outcomes": [
                {"labels": list(o), "count": c, "frequency": c / report.n}
                for o, c in zip(report.outcomes, report.counts)
            ],
        }
    if isinstance(report, NoSignalingReport):
        return {
            "type": "nosignal",
            "passed": report.passed,
            "max_deviation": report.max_deviation,
            "checks": [
                {
                    "local": c.observable,
                    "remote": c.remote,
                    "marginal": {k[0]: p for k, p in c.marginal.items()},
                    "deviation": c.deviation,
                }
                for c in report.checks
            ],
        }
    if isinstance(report, EventResult):
        return {
            "type": "event",
            "perspective": report.perspective,
            "event": [list(x) for x in report.event],
            "probability": report.probability,
        }
    if isinstance(report, ChshResult):
        return {
            "type": "chsh",
            "settings": list(report.settings),
            "correlators": list(report.correlators),
            "S": report.value,
            "tsirelson": TSIRELSON,
        }
    if isinstance(report, FramesResult):
        probs = report.probabilities or {}
        return {
            "type": "frames",
            "frames": [
                {
                    "name": f.name,
                    "atoms": [
                        {"labels": list(lab), "probability": probs.get((f.name, lab))}
                        for lab, _ in f.atoms
                    ],
                }
                for f in report.frames
            ],
            "intertwinement": [
                {
                    "frames": [a, b],
                    "shared": [[sorted(map(list, s1)), sorted(map(list, s2))] for s1, s2 in pairs],
                }
                for a, b, pairs in report.shared
            ],
        }
    if isinstance(report, (list, tuple)):
        return [to_jsonable(x) for x in report]
    raise TypeError(f"cannot render {type(report).__name__}")


def _deduction(d: Deduction) -> dict:
    return {
        "kind": d.kind,
        "premises": [list(x) for x in d.premises],
        "conclusion": list(d.conclusion) if d.conclusion else None,
        "constraint": [list(x) for x in d.constraint] if d.constraint else None,
        "text": str(d),
    }


def render(report: Any, format: str = "text", tolerance: float = ZERO_TOL) -> str:
    if format == "json":
        return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"
    if format != "text":
        raise ValueError(f"unknown format {format!r}")
    if isinstance(report, Distribution):
        out = _text_distribution(report, tolerance)
    elif isinstance(report, BranchEnsemble):
        out = _text_ensemble(report, tolerance)
    elif isinstance(report, ValuationResult):
        out = _text_valuation(report)
    elif isinstance(report, ContradictionReport):
        out = _text_contradiction(report, tolerance)
    elif isinstance(report, FrequencyTable):
        out = _text_frequencies(report, tolerance)
    elif isinstance(report, NoSignalingReport):
        out = _text_nosignal(report, tolerance)
    elif isinstance(report, EventResult):
        out = f"P({_event(report.event)}) [{report.perspective}] = {fmt_prob(report.probability, tolerance)}"
    elif isinstance(report, ChshResult):
        out = _text_chsh(report)
    elif isinstance(report, FramesResult):
        out = _text_frames(report, tolerance)
    else:
        raise TypeError(f"cannot render {type(report).__name__}")
    return out + "\n"
