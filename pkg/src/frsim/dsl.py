"""Reader and writer for ``.scn`` scenario files.

Statements are newline-terminated; a line that starts with whitespace
continues the previous statement. ``#`` starts a comment. The initial state
is the state declared under the name ``initial``.

    system coin dim 2 labels h, t
    state initial on coin = sqrt(1/3)*|h> + sqrt(2/3)*|t>
    observable X on coin
        outcome ok = sqrt(1/2)*|h> - sqrt(1/2)*|t>
        outcome fail = sqrt(1/2)*|h> + sqrt(1/2)*|t>
    step look measure X by Alice
    perspective observer collapse look
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import FrsimError, ParseError
from .linalg import ATOL, OperatorMatrix, PureState, SystemSpec, projector_onto, range_basis
from .measurement import Observable
from .scenario import (
    ControlledPrepare,
    Measure,
    Perspective,
    Prepare,
    Scenario,
    Step,
    Unitary,
)

KEYWORDS = ("system", "state", "observable", "unitary", "step", "perspective")


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: Literal["error", "warning"] = "error"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, NUMBER, or the punctuation character itself
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<NUMBER>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<NAME>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>[|>,=+\-*/()\[\];])
    """,
    re.VERBOSE,
)


class _Abort(Exception):
    """Stop parsing the current statement."""

    def __init__(self, diag: ParseDiagnostic):
        self.diag = diag


def _tokenize_line(text: str, lineno: int) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise _Abort(ParseDiagnostic(lineno, pos + 1, f"unexpected character {text[pos]!r}"))
        kind = m.lastgroup
        if kind != "ws":
            tok_kind = m.group() if kind == "punct" else kind
            tokens.append(Token(tok_kind, m.group(), lineno, pos + 1))
        pos = m.end()
    return tokens


def _statements(source: str):
    """Yield (tokens, diagnostic) per logical statement."""
    current: list[Token] | None = None
    broken: ParseDiagnostic | None = None
    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0].rstrip()
        if not text.strip():
            continue
        continuation = text[0] in " \t" and current is not None
        try:
            toks = _tokenize_line(text, lineno)
        except _Abort as err:
            toks, diag = [], err.diag
        else:
            diag = None
        if continuation:
            current.extend(toks)
            broken = broken or diag
        else:
            if current is not None:
                yield current, broken
            current, broken = toks, diag
    if current is not None:
        yield current, broken


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t is not None and t.kind == kind and (text is None or t.text == text)

    def _end(self) -> tuple[int, int]:
        last = self.toks[-1]
        return last.line, last.column + len(last.text)

    def fail(self, message: str, tok: Token | None = None) -> _Abort:
        tok = tok or self.peek()
        if tok is None:
            line, col = self._end()
        else:
            line, col = tok.line, tok.column
        return _Abort(ParseDiagnostic(line, col, message))

    def next(self, what: str) -> Token:
        t = self.peek()
        if t is None:
            raise self.fail(f"expected {what}, found end of statement")
        self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        what = what or repr(text or kind)
        t = self.peek()
        if t is None or t.kind != kind or (text is not None and t.text != text):
            found = "end of statement" if t is None else repr(t.text)
            raise self.fail(f"expected {what}, found {found}")
        self.i += 1
        return t

    def keyword(self, word: str) -> Token:
        return self.expect("NAME", word, f"'{word}'")

    def ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t is None or t.kind not in ("NAME", "NUMBER"):
            found = "end of statement" if t is None else repr(t.text)
            raise self.fail(f"expected {what}, found {found}")
        self.i += 1
        return t

    def ident_list(self, what: str) -> list[Token]:
        out = [self.ident(what)]
        while self.at(","):
            self.i += 1
            out.append(self.ident(what))
        return out

    def done(self) -> None:
        if self.peek() is not None:
            raise self.fail(f"unexpected {self.peek().text!r}")


class _Parser:
    def __init__(self) -> None:
        self.diags: list[ParseDiagnostic] = []
        self.systems: dict[str, SystemSpec] = {}
        self.states: dict[str, tuple[PureState, Token]] = {}
        self.observables: dict[str, Observable] = {}
        self.unitaries: dict[str, object] = {}
        self.steps: list[Step] = []
        self.measure_ids: set[str] = set()
        self.step_ids: set[str] = set()
        self.perspectives: list[Perspective] = []
        self.poisoned: set[str] = set()  # names whose declaration failed

    # -- expressions ---------------------------------------------------------

    def number(self, cur: _Cursor) -> Fraction | float:
        t = cur.expect("NUMBER", what="number")
        value: Fraction | float = Fraction(t.text) if re.fullmatch(r"\d+", t.text) else float(t.text)
        if cur.at("/"):
            cur.i += 1
            d = cur.expect("NUMBER", what="denominator")
            if not re.fullmatch(r"\d+", d.text) or not isinstance(value, Fraction):
                raise cur.fail("fractions need integer numerator and denominator", d)
            if int(d.text) == 0:
                raise cur.fail("division by zero", d)
            value = value / int(d.text)
        return value

    def factor(self, cur: _Cursor) -> complex:
        t = cur.peek()
        if t is None:
            raise cur.fail("expected coefficient")
        if t.kind == "NAME" and t.text == "i":
            cur.i += 1
            return 1j
        if t.kind == "NAME" and t.text == "sqrt":
            cur.i += 1
            cur.expect("(")
            inner = self.number(cur)
            cur.expect(")")
            return complex(math.sqrt(inner))
        if t.kind == "NUMBER":
            return complex(float(self.number(cur)))
        raise cur.fail(f"bad coefficient {t.text!r}")

    def term(self, cur: _Cursor, systems: list[SystemSpec], terms: dict, sign: float) -> None:
        coeff: complex = 1.0
        if not cur.at("|"):
            coeff = self.factor(cur)
            cur.expect("*")
            while not cur.at("|"):
                coeff *= self.factor(cur)
                cur.expect("*")
        bar = cur.expect("|", what="'|'")
        labels = cur.ident_list("basis label")
        cur.expect(">", what="'>'")
        if len(labels) != len(systems):
            raise cur.fail(f"ket has {len(labels)} labels for {len(systems)} systems", bar)
        for sys, lab in zip(systems, labels):
            if lab.text not in sys.basis_labels:
                raise cur.fail(f"{lab.text!r} is not a basis label of system {sys.name!r}", lab)
        key = tuple(lab.text for lab in labels)
        terms[key] = terms.get(key, 0.0) + sign * coeff

    def ketexpr(self, cur: _Cursor, systems: list[SystemSpec]) -> PureState:
        terms: dict = {}
        sign = 1.0
        if cur.at("-"):
            cur.i += 1
            sign = -1.0
        self.term(cur, systems, terms, sign)
        while cur.at("+") or cur.at("-"):
            sign = 1.0 if cur.next("sign").kind == "+" else -1.0
            self.term(cur, systems, terms, sign)
        return PureState.from_terms(systems, terms)

    def system_refs(self, cur: _Cursor) -> list[SystemSpec]:
        out = []
        for t in cur.ident_list("system name"):
            self._known(cur, t, self.systems, "system")
            if any(s.name == t.text for s in out):
                raise cur.fail(f"system {t.text!r} listed twice", t)
            out.append(self.systems[t.text])
        return out

    def rowspec(self, cur: _Cursor, systems: list[SystemSpec], head: Token) -> OperatorMatrix:
        open_ = cur.expect("[", what="'['")
        images = [self.ketexpr(cur, systems)]
        while cur.at(";"):
            cur.i += 1
            images.append(self.ketexpr(cur, systems))
        cur.expect("]", what="']'")
        d = math.prod(s.dimension for s in systems)
        if len(images) != d:
            raise cur.fail(f"matrix lists {len(images)} images, need {d}", open_)
        op = OperatorMatrix.from_columns(systems, images)
        if not op.is_unitary():
            raise cur.fail("matrix is not unitary", open_)
        return op

    # -- statements ----------------------------------------------------------

    def statement(self, toks: list[Token]) -> None:
        cur = _Cursor(toks)
        head = cur.peek()
        if head.kind != "NAME" or head.text not in KEYWORDS:
            raise cur.fail(f"unknown statement {head.text!r}; expected one of {', '.join(KEYWORDS)}")
        cur.i += 1
        getattr(self, f"st_{head.text}")(cur, head)
        cur.done()

    def _declare_name(self, cur, tok, table, kind) -> None:
        if tok.text in table:
            raise cur.fail(f"{kind} {tok.text!r} already declared", tok)

    def st_system(self, cur: _Cursor, head: Token) -> None:
        name = cur.ident("system name")
        self._guard(name)
        self._declare_name(cur, name, self.systems, "system")
        cur.keyword("dim")
        dim_tok = cur.expect("NUMBER", what="dimension")
        if not re.fullmatch(r"\d+", dim_tok.text):
            raise cur.fail("dimension must be an integer", dim_tok)
        dim = int(dim_tok.text)
        cur.keyword("labels")
        labels = cur.ident_list("basis label")
        if dim < 2:
            raise cur.fail("systems need dimension >= 2", dim_tok)
        if len(labels) != dim:
            raise cur.fail(f"dim {dim} but {len(labels)} labels", dim_tok)
        seen = set()
        for lab in labels:
            if lab.text in seen:
                raise cur.fail(f"duplicate label {lab.text!r}", lab)
            seen.add(lab.text)
        self.systems[name.text] = SystemSpec(name.text, dim, tuple(lab.text for lab in labels))

    def st_state(self, cur: _Cursor, head: Token) -> None:
        name = cur.ident("state name")
        self._guard(name)
        self._declare_name(cur, name, self.states, "state")
        cur.keyword("on")
        systems = self.system_refs(cur)
        cur.expect("=", what="'='")
        state = self.ketexpr(cur, systems)
        if abs(state.norm() - 1.0) > ATOL:
            raise cur.fail(
                f"state not normalized (norm^2 = {state.norm() ** 2:.6g})", head
            )
        self.states[name.text] = (state, head)

    def st_observable(self, cur: _Cursor, head: Token) -> None:
        name = cur.ident("observable name")
        self._guard(name)
        self._declare_name(cur, name, self.observables, "observable")
        cur.keyword("on")
        systems = self.system_refs(cur)
        vectors: dict[str, list[PureState]] = {}
        seen: list[PureState] = []
        while cur.at("NAME", "outcome"):
            kw = cur.next("outcome")
            label = cur.ident("outcome label")
            cur.expect("=", what="'='")
            v = self.ketexpr(cur, systems)
            if abs(v.norm() - 1.0) > ATOL:
                raise cur.fail(f"eigenstate for {label.text!r} not normalized", kw)
            for w in seen:
                if abs(w.inner(v)) > ATOL:
                    raise cur.fail(f"eigenstate for {label.text!r} not orthogonal to earlier ones", kw)
            seen.append(v)
            vectors.setdefault(label.text, []).append(v)
        if not vectors:
            raise cur.fail("observable needs at least one outcome")
        d = math.prod(s.dimension for s in systems)
        if len(seen) != d:
            raise cur.fail(f"{len(seen)} eigenstates do not span dimension {d}", head)
        self.observables[name.text] = Observable(
            name.text, tuple(systems), tuple((lab, projector_onto(vs)) for lab, vs in vectors.items())
        )

    def st_unitary(self, cur: _Cursor, head: Token) -> None:
        name = cur.ident("unitary name")
        self._guard(name)
        self._declare_name(cur, name, self.unitaries, "unitary")
        cur.keyword("on")
        systems = self.system_refs(cur)
        if cur.at("NAME", "apply"):
            cur.i += 1
            self.unitaries[name.text] = Unitary(self.rowspec(cur, systems, head), name.text)
            return
        cur.keyword("controlled")
        cur.keyword("by")
        ctl_tok = cur.ident("control system")
        self._known(cur, ctl_tok, self.systems, "system")
        if any(s.name == ctl_tok.text for s in systems):
            raise cur.fail("control system is also a target", ctl_tok)
        control = self.systems[ctl_tok.text]
        branches: dict[str, OperatorMatrix] = {}
        while cur.at("NAME", "when"):
            cur.i += 1
            lab = cur.ident("control label")
            if lab.text not in control.basis_labels:
                raise cur.fail(f"{lab.text!r} is not a basis label of {control.name!r}", lab)
            if lab.text in branches:
                raise cur.fail(f"duplicate branch {lab.text!r}", lab)
            cur.keyword("apply")
            branches[lab.text] = self.rowspec(cur, systems, head)
        missing = [lab for lab in control.basis_labels if lab not in branches]
        if missing:
            raise cur.fail(f"no branch for control label {missing[0]!r}")
        ordered = {lab: branches[lab] for lab in control.basis_labels}
        self.unitaries[name.text] = ControlledPrepare(control.name, ordered, name.text)

    def st_step(self, cur: _Cursor, head: Token) -> None:
        sid = cur.ident("step id")
        self._guard(sid)
        if sid.text in self.step_ids:
            raise cur.fail(f"step {sid.text!r} already declared", sid)
        kind = cur.expect("NAME", what="'measure', 'apply' or 'prepare'")
        if kind.text == "measure":
            obs = cur.ident("observable name")
            cur.keyword("by")
            agent = cur.ident("agent name")
            self._known(cur, obs, self.observables, "observable")
            action = Measure(agent.text, self.observables[obs.text])
            self.measure_ids.add(sid.text)
        elif kind.text == "apply":
            u = cur.ident("unitary name")
            self._known(cur, u, self.unitaries, "unitary")
            action = self.unitaries[u.text]
        elif kind.text == "prepare":
            sys_tok = cur.ident("system name")
            cur.keyword("as")
            st = cur.ident("state name")
            self._known(cur, sys_tok, self.systems, "system")
            self._known(cur, st, self.states, "state")
            state, _ = self.states[st.text]
            if state.system_names != (sys_tok.text,):
                raise cur.fail(f"state {st.text!r} is not declared on {sys_tok.text!r} alone", st)
            action = Prepare(sys_tok.text, state, st.text)
        else:
            raise cur.fail(f"expected 'measure', 'apply' or 'prepare', found {kind.text!r}", kind)
        self.step_ids.add(sid.text)
        self.steps.append(Step(sid.text, action))

    def st_perspective(self, cur: _Cursor, head: Token) -> None:
        name = cur.ident("perspective name")
        self._guard(name)
        if any(p.name == name.text for p in self.perspectives):
            raise cur.fail(f"perspective {name.text!r} already declared", name)
        cur.keyword("collapse")
        if cur.at("NAME", "none"):
            cur.i += 1
            self.perspectives.append(Perspective(name.text, frozenset()))
            return
        ids = cur.ident_list("step id")
        for t in ids:
            if t.text in self.poisoned:
                raise _Silent()
            if t.text not in self.step_ids:
                raise cur.fail(f"unknown step {t.text!r}", t)
            if t.text not in self.measure_ids:
                raise cur.fail(f"step {t.text!r} is not a measurement", t)
        self.perspectives.append(Perspective(name.text, frozenset(t.text for t in ids)))

    def _known(self, cur, tok, table, kind) -> None:
        if tok.text in table:
            return
        if tok.text in self.poisoned:
            raise _Silent()
        raise cur.fail(f"unknown {kind} {tok.text!r}", tok)

    def _guard(self, tok: Token) -> None:
        self._current_name = tok.text

    # -- driver --------------------------------------------------------------

    def run(self, source: str) -> Scenario:
        last_line = 1
        any_statement = False
        for toks, lex_diag in _statements(source):
            any_statement = True
            self._current_name = None
            if lex_diag is not None:
                self.diags.append(lex_diag)
                self._poison(toks)
                continue
            last_line = toks[-1].line
            try:
                self.statement(toks)
            except _Abort as err:
                self.diags.append(err.diag)
                self._poison(toks)
            except _Silent:
                self._poison(toks)
            except FrsimError as err:
                self.diags.append(ParseDiagnostic(toks[0].line, toks[0].column, str(err)))
                self._poison(toks)
        if not any_statement:
            raise ParseError([ParseDiagnostic(1, 1, "empty scenario: no statements")])
        if self.diags:
            raise ParseError(self.diags)
        return self.finish(last_line)

    def _poison(self, toks: list[Token]) -> None:
        if self._current_name:
            self.poisoned.add(self._current_name)

    def finish(self, last_line: int) -> Scenario:
        if "initial" not in self.states:
            raise ParseError([ParseDiagnostic(1, 1, "no initial state: declare 'state initial on ...'")])
        initial, tok = self.states["initial"]
        declared = tuple(self.systems.values())
        if initial.systems != declared:
            raise ParseError(
                [ParseDiagnostic(tok.line, tok.column, "initial state must cover every system in declaration order")]
            )
        if not self.perspectives:
            raise ParseError([ParseDiagnostic(last_line, 1, "no perspective declared")])
        try:
            return Scenario(declared, initial, tuple(self.steps), tuple(self.perspectives), self.observables)
        except FrsimError as err:
            raise ParseError([ParseDiagnostic(1, 1, str(err))]) from err


class _Silent(Exception):
    """Reference to a declaration that already failed; no new diagnostic."""


def parse_scenario(text: str) -> Scenario:
    """Parse scenario source; raises :class:`ParseError` carrying diagnostics."""
    return _Parser().run(text)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# ---------------------------------------------------------------------------
# writer


def _fmt(x: float) -> str:
    return repr(float(x))


def _ket(labels) -> str:
    return "|" + ",".join(labels) + ">"


def format_ket(state: PureState, atol: float = 0.0) -> str:
    parts: list[str] = []
    for labels, amp in state.as_dict(atol).items():
        for value, unit in ((amp.real, ""), (amp.imag, "i*")):
            if value == 0.0:
                continue
            sign = "-" if value < 0 else "+"
            mag = abs(value)
            body = _ket(labels) if (mag == 1.0 and not unit) else f"{unit}{_fmt(mag)}*{_ket(labels)}"
            parts.append(f"{sign} {body}")
    if not parts:
        raise ValueError("cannot write the zero vector")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def _rowspec(op: OperatorMatrix) -> str:
    cols = [PureState(op.systems, op.entries[:, k]) for k in range(op.dimension)]
    return "[ " + " ; ".join(format_ket(c) for c in cols) + " ]"


def serialize_scenario(s: Scenario) -> str:
    lines = []
    for sys in s.systems:
        lines.append(f"system {sys.name} dim {sys.dimension} labels {', '.join(sys.basis_labels)}")
    lines.append(f"state initial on {', '.join(s.initial.system_names)} = {format_ket(s.initial)}")
    observables = dict(s.observables)
    for st in s.steps:
        if isinstance(st.action, Measure):
            o = st.action.observable
            if o.name not in observables:
                observables[o.name] = o
    for name, obs in observables.items():
        lines.append(f"observable {name} on {', '.join(obs.subsystem_names)}")
        for lab, p in obs.outcomes:
            for v in range_basis(p):
                lines.append(f"    outcome {lab} = {format_ket(v)}")
    unitary_names: dict[str, str] = {}
    state_names: set[str] = {"initial"}
    for st in s.steps:
        act = st.action
        if isinstance(act, Prepare):
            nm = act.name or f"{st.id}_state"
            if nm not in state_names:
                state_names.add(nm)
                lines.append(f"state {nm} on {act.system} = {format_ket(act.state)}")
        elif isinstance(act, Unitary):
            nm = act.name or f"{st.id}_op"
            unitary_names[st.id] = nm
            lines.append(f"unitary {nm} on {', '.join(act.operator.system_names)} apply {_rowspec(act.operator)}")
        elif isinstance(act, ControlledPrepare):
            nm = act.name or f"{st.id}_op"
            unitary_names[st.id] = nm
            lines.append(f"unitary {nm} on {', '.join(act.target_names())} controlled by {act.control}")
            for lab, u in act.branches.items():
                lines.append(f"    when {lab} apply {_rowspec(u)}")
    for st in s.steps:
        act = st.action
        if isinstance(act, Measure):
            lines.append(f"step {st.id} measure {act.observable.name} by {act.agent}")
        elif isinstance(act, Prepare):
            lines.append(f"step {st.id} prepare {act.system} as {act.name or st.id + '_state'}")
        else:
            lines.append(f"step {st.id} apply {unitary_names[st.id]}")
    order = [st.id for st in s.steps]
    for p in s.perspectives:
        ids = sorted(p.collapsing_steps, key=order.index)
        lines.append(f"perspective {p.name} collapse {', '.join(ids) if ids else 'none'}")
    return "\n".join(lines) + "\n"


def resources_dir() -> Path:
    return Path(__file__).parent / "scenarios"
