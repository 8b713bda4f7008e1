"""Scenario execution under a chosen cut between observer and observed.

A perspective lists the measurement steps that produce actual outcomes.
Those steps branch the ensemble with Born weights and Lüders post-states;
every other measurement step is left out of the description entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import StructureError, SystemMismatchError
from .linalg import (
    ATOL,
    OperatorMatrix,
    PureState,
    SystemSpec,
    apply,
    close,
    controlled,
    tensor,
)
from .measurement import (
    PRUNE_TOL,
    Distribution,
    Observable,
    born_distribution,
    conditionalize,
    inverse_cdf,
    joint_distribution,
)


@dataclass(frozen=True, eq=False)
class Prepare:
    system: str
    state: PureState
    name: str = ""


@dataclass(frozen=True, eq=False)
class Unitary:
    operator: OperatorMatrix
    name: str = ""


@dataclass(frozen=True, eq=False)
class ControlledPrepare:
    control: str
    branches: Mapping[str, OperatorMatrix]
    name: str = ""

    @property
    def target(self) -> tuple[SystemSpec, ...]:
        return next(iter(self.branches.values())).systems

    def target_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.target)


@dataclass(frozen=True, eq=False)
class Measure:
    agent: str
    observable: Observable


Action = Union[Prepare, Unitary, ControlledPrepare, Measure]


@dataclass(frozen=True, eq=False)
class Step:
    id: str
    action: Action


@dataclass(frozen=True)
class Perspective:
    name: str
    collapsing_steps: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "collapsing_steps", frozenset(self.collapsing_steps))


@dataclass(frozen=True, eq=False)
class Scenario:
    systems: tuple[SystemSpec, ...]
    initial: PureState
    steps: tuple[Step, ...]
    perspectives: tuple[Perspective, ...]
    observables: Mapping[str, Observable] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "systems", tuple(self.systems))
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "perspectives", tuple(self.perspectives))
        object.__setattr__(self, "observables", dict(self.observables))
        self.validate()

    def validate(self) -> None:
        if not self.perspectives:
            raise StructureError("scenario needs at least one perspective")
        for s in self.systems:
            if s.dimension < 2:
                raise StructureError(f"system {s.name!r} must have dimension >= 2")
        if self.initial.systems != self.systems:
            raise StructureError("initial state must be declared on the scenario systems in order")
        if abs(self.initial.norm() - 1.0) > ATOL:
            raise StructureError("initial state is not normalized")
        names = {s.name: s for s in self.systems}

        def known(spec: SystemSpec, where: str) -> None:
            if names.get(spec.name) != spec:
                raise StructureError(f"{where} refers to unknown system {spec.name!r}")

        for obs in self.observables.values():
            for spec in obs.subsystems:
                known(spec, f"observable {obs.name!r}")
        ids = [st.id for st in self.steps]
        if len(set(ids)) != len(ids):
            raise StructureError("duplicate step ids")
        for st in self.steps:
            act = st.action
            where = f"step {st.id!r}"
            if isinstance(act, Measure):
                for spec in act.observable.subsystems:
                    known(spec, where)
            elif isinstance(act, Unitary):
                for spec in act.operator.systems:
                    known(spec, where)
                if not act.operator.is_unitary():
                    raise StructureError(f"{where}: operator is not unitary")
            elif isinstance(act, Prepare):
                if act.system not in names:
                    raise StructureError(f"{where} refers to unknown system {act.system!r}")
                if act.state.systems != (names[act.system],):
                    raise StructureError(f"{where}: prepared state is not on {act.system!r}")
                if abs(act.state.norm() - 1.0) > ATOL:
                    raise StructureError(f"{where}: prepared state is not normalized")
            elif isinstance(act, ControlledPrepare):
                if act.control not in names:
                    raise StructureError(f"{where} refers to unknown system {act.control!r}")
                control = names[act.control]
                if set(act.branches) != set(control.basis_labels):
                    raise StructureError(
                        f"{where}: branches must be keyed by every label of {act.control!r}"
                    )
                for lab, u in act.branches.items():
                    for spec in u.systems:
                        known(spec, where)
                    if act.control in u.system_names:
                        raise StructureError(f"{where}: target overlaps the control system")
                    if not u.is_unitary():
                        raise StructureError(f"{where}: branch {lab!r} is not unitary")
                if len({u.systems for u in act.branches.values()}) != 1:
                    raise StructureError(f"{where}: branches act on different systems")
            else:
                raise StructureError(f"{where}: unknown action {act!r}")
        measures = {st.id for st in self.steps if isinstance(st.action, Measure)}
        for p in self.perspectives:
            extra = set(p.collapsing_steps) - measures
            if extra:
                raise StructureError(
                    f"perspective {p.name!r} collapses non-measurement step {sorted(extra)[0]!r}"
                )

    def perspective(self, name: str) -> Perspective:
        for p in self.perspectives:
            if p.name == name:
                return p
        raise StructureError(f"scenario has no perspective {name!r}")

    def observable(self, name: str) -> Observable:
        try:
            return self.observables[name]
        except KeyError:
            raise StructureError(f"scenario has no observable {name!r}") from None

    def step(self, step_id: str) -> Step:
        for st in self.steps:
            if st.id == step_id:
                return st
        raise StructureError(f"scenario has no step {step_id!r}")


@dataclass(frozen=True, eq=False)
class Branch:
    record: Mapping[str, str]
    probability: float
    state: PureState


@dataclass(frozen=True, eq=False)
class BranchEnsemble:
    perspective: str
    branches: tuple[Branch, ...]

    def __post_init__(self) -> None:
        total = sum(b.probability for b in self.branches)
        if abs(total - 1.0) > ATOL:
            raise StructureError(f"branch weights sum to {total}")

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def weights(self) -> dict[tuple[str, ...], float]:
        return {tuple(b.record.values()): b.probability for b in self.branches}


# ---------------------------------------------------------------------------
# built-in scenarios

_S = 1 / math.sqrt(2)


def fr_systems() -> tuple[SystemSpec, SystemSpec]:
    return SystemSpec("coin", 2, ("h", "t")), SystemSpec("qubit", 2, ("0", "1"))


def fr_scenario() -> Scenario:
    coin, qubit = fr_systems()
    toss = PureState.from_terms((coin,), {("h",): math.sqrt(1 / 3), ("t",): math.sqrt(2 / 3)})
    initial = tensor(toss, PureState.basis((qubit,), ("0",)))

    def ket(system: SystemSpec, terms: dict[str, float]) -> PureState:
        return PureState.from_terms((system,), {(k,): v for k, v in terms.items()})

    observables = {
        "A": Observable.computational("A", coin),
        "B": Observable.computational("B", qubit),
        "X": Observable.from_eigenstates(
            "X", {"ok": ket(coin, {"h": _S, "t": -_S}), "fail": ket(coin, {"h": _S, "t": _S})}
        ),
        "Y": Observable.from_eigenstates(
            "Y", {"ok": ket(qubit, {"0": _S, "1": -_S}), "fail": ket(qubit, {"0": _S, "1": _S})}
        ),
    }
    hadamard = OperatorMatrix((qubit,), np.array([[_S, _S], [_S, -_S]]))
    steps = (
        Step("alice_measures", Measure("Alice", observables["A"])),
        Step(
            "alice_prepares",
            ControlledPrepare(
                "coin", {"h": OperatorMatrix.identity((qubit,)), "t": hadamard}, name="U"
            ),
        ),
        Step("bob_measures", Measure("Bob", observables["B"])),
    )
    perspectives = (
        Perspective("observer", frozenset({"alice_measures", "bob_measures"})),
        Perspective("superobserver", frozenset()),
    )
    return Scenario((coin, qubit), initial, steps, perspectives, observables)


def singlet_scenario() -> Scenario:
    """Two qubits in the singlet, with Z and X settings on each side."""
    left, right = SystemSpec("left", 2, ("0", "1")), SystemSpec("right", 2, ("0", "1"))
    initial = PureState.from_terms((left, right), {("0", "1"): _S, ("1", "0"): -_S})

    def pm_observable(name: str, system: SystemSpec, plus: dict, minus: dict) -> Observable:
        return Observable.from_eigenstates(
            name,
            {
                "plus": PureState.from_terms((system,), {(k,): v for k, v in plus.items()}),
                "minus": PureState.from_terms((system,), {(k,): v for k, v in minus.items()}),
            },
        )

    observables = {}
    for side, system in (("L", left), ("R", right)):
        observables[f"Z{side}"] = pm_observable(f"Z{side}", system, {"0": 1.0}, {"1": 1.0})
        observables[f"X{side}"] = pm_observable(
            f"X{side}", system, {"0": _S, "1": _S}, {"0": _S, "1": -_S}
        )
    steps = (
        Step("left_measures", Measure("Alice", observables["ZL"])),
        Step("right_measures", Measure("Bob", observables["ZR"])),
    )
    perspectives = (
        Perspective("unmeasured", frozenset()),
        Perspective("observer", frozenset({"left_measures", "right_measures"})),
    )
    return Scenario((left, right), initial, steps, perspectives, observables)


BUILTIN_SCENARIOS = {"fr": fr_scenario, "singlet": singlet_scenario}


# ---------------------------------------------------------------------------
# execution


def _resolve(s: Scenario, p: Union[Perspective, str]) -> Perspective:
    if isinstance(p, str):
        return s.perspective(p)
    if p not in s.perspectives:
        raise StructureError(f"perspective {p.name!r} does not belong to this scenario")
    return p


def _basis_label_map(obs: Observable, control: SystemSpec) -> dict[str, str] | None:
    """Outcome label -> control basis label, if ``obs`` measures the control basis."""
    if obs.subsystems != (control,):
        return None
    mapping = {}
    for lab, p in obs.outcomes:
        if p.rank() != 1:
            return None
        k = int(np.argmax(np.abs(np.diag(p.entries))))
        expected = np.zeros_like(p.entries)
        expected[k, k] = 1.0
        if not close(p.entries, expected):
            return None
        mapping[lab] = control.basis_labels[k]
    return mapping


def _prepare(state: PureState, system: str, fresh: PureState) -> PureState:
    """Replace ``system`` by ``fresh``; the system must be unentangled."""
    names = state.system_names
    axis = names.index(system)
    psi = np.moveaxis(state.amplitudes.reshape(state.dims), axis, 0)
    rest_shape = psi.shape[1:]
    mat = psi.reshape(state.dims[axis], -1)
    u, sv, vh = np.linalg.svd(mat, full_matrices=False)
    if sv.size > 1 and sv[1] > 1e-9:
        raise StructureError(f"cannot prepare {system!r}: it is entangled with other systems")
    rest = sv[0] * vh[0]
    out = np.tensordot(fresh.amplitudes, rest, axes=0).reshape((fresh.dimension,) + rest_shape)
    out = np.moveaxis(out, 0, axis)
    return PureState(state.systems, out.reshape(-1))


class _Runner:
    """Step interpreter shared by deterministic and sampled execution."""

    def __init__(self, scenario: Scenario, perspective: Perspective):
        self.s = scenario
        self.p = perspective
        self.controlled_ops: dict[str, OperatorMatrix] = {}
        for st in scenario.steps:
            if isinstance(st.action, ControlledPrepare):
                act = st.action
                self.controlled_ops[st.id] = controlled(scenario.initial.system(act.control), act.branches)

    def collapses(self, st: Step) -> bool:
        return isinstance(st.action, Measure) and st.id in self.p.collapsing_steps

    def evolve(self, k: int, state: PureState, record: Mapping[str, str]) -> PureState:
        """Apply a non-branching step."""
        st = self.s.steps[k]
        act = st.action
        if isinstance(act, Measure):
            return state  # not collapsing: leaves no trace in the description
        if isinstance(act, Unitary):
            return apply(act.operator, state)
        if isinstance(act, Prepare):
            return _prepare(state, act.system, act.state)
        if isinstance(act, ControlledPrepare):
            label = self._control_record(k, act, record)
            if label is None:
                return apply(self.controlled_ops[st.id], state)
            return apply(act.branches[label], state)
        raise StructureError(f"unknown action in step {st.id!r}")

    def _control_record(self, k: int, act: ControlledPrepare, record: Mapping[str, str]) -> str | None:
        control = self.s.initial.system(act.control)
        for prev in reversed(self.s.steps[:k]):
            a = prev.action
            if isinstance(a, Prepare) and a.system == act.control:
                return None
            if isinstance(a, Unitary) and act.control in a.operator.system_names:
                return None
            if isinstance(a, ControlledPrepare) and act.control in a.target_names():
                return None
            if isinstance(a, Measure) and act.control in a.observable.subsystem_names:
                if prev.id not in record:
                    continue
                mapping = _basis_label_map(a.observable, control)
                if mapping is None:
                    raise StructureError(
                        f"control {act.control!r} was last collapsed by {prev.id!r}, "
                        "which does not record a control-basis outcome"
                    )
                return mapping[record[prev.id]]
        return None


def run_deterministic(s: Scenario, p: Union[Perspective, str]) -> BranchEnsemble:
    persp = _resolve(s, p)
    runner = _Runner(s, persp)
    branches: list[tuple[dict[str, str], float, PureState]] = [({}, 1.0, s.initial)]
    for k, st in enumerate(s.steps):
        if runner.collapses(st):
            obs = st.action.observable
            nxt = []
            for record, w, state in branches:
                dist = born_distribution(state, obs)
                for (lab,), q in dist.items():
                    if w * q < PRUNE_TOL:
                        continue
                    post = conditionalize(state, obs.projector(lab))
                    nxt.append(({**record, st.id: lab}, w * q, post))
            branches = nxt
        else:
            branches = [(r, w, runner.evolve(k, state, r)) for r, w, state in branches]
    total = sum(w for _, w, _ in branches)
    return BranchEnsemble(
        persp.name, tuple(Branch(r, w / total, state) for r, w, state in branches)
    )


Event = Sequence[tuple[Observable, str]]


def _event_observables(s: Scenario, event) -> tuple[list[Observable], tuple[str, ...]]:
    obs, labels = [], []
    for o, lab in event:
        obs.append(s.observable(o) if isinstance(o, str) else o)
        labels.append(lab)
    return obs, tuple(labels)


def event_probability(s: Scenario, p: Union[Perspective, str], event: Event) -> float:
    obs, labels = _event_observables(s, event)
    ensemble = run_deterministic(s, p)
    return sum(b.probability * joint_distribution(b.state, obs)[labels] for b in ensemble)


def ensemble_distribution(
    s: Scenario, p: Union[Perspective, str], obs_list: Sequence[Observable]
) -> Distribution:
    """Joint distribution of ``obs_list`` on the perspective's final ensemble."""
    obs, _ = _event_observables(s, [(o, "") for o in obs_list])
    ensemble = run_deterministic(s, p)
    support: dict[tuple[str, ...], float] = {}
    for b in ensemble:
        for key, q in joint_distribution(b.state, obs).items():
            support[key] = support.get(key, 0.0) + b.probability * q
    return Distribution(tuple(o.name for o in obs), support)


# ---------------------------------------------------------------------------
# Monte Carlo


def run_uniforms(seed: int, draw: int, start: int, stop: int) -> np.ndarray:
    """Uniforms for runs ``start..stop-1`` at draw position ``draw``.

    The value for (seed, run, draw) is the run-th double of a Philox stream
    keyed by (seed, draw), so it does not depend on how runs are chunked.
    """
    gen = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), draw]))
    block, offset = divmod(start, 4)
    gen.bit_generator.advance(block)
    return gen.random(offset + (stop - start))[offset:]


@dataclass(frozen=True)
class FrequencyTable:
    variables: tuple[str, ...]
    outcomes: tuple[tuple[str, ...], ...]
    counts: tuple[int, ...]
    n: int
    seed: int
    perspective: str

    def count(self, labels: Sequence[str]) -> int:
        return self.counts[self.outcomes.index(tuple(labels))]

    def frequency(self, labels: Sequence[str]) -> float:
        return self.count(labels) / self.n

    def as_distribution(self) -> Distribution:
        return Distribution(self.variables, {o: c / self.n for o, c in zip(self.outcomes, self.counts)})


def sample_runs(
    s: Scenario,
    p: Union[Perspective, str],
    n: int,
    seed: int,
    final_event_obs: Sequence[Observable],
    chunk_size: int = 1 << 18,
) -> FrequencyTable:
    """End-to-end sampled runs; each collapsing step consumes one draw per run.

    Runs sharing a history share their state, so each distinct history is
    evaluated once and its runs are routed by inverse-CDF in bulk.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    persp = _resolve(s, p)
    runner = _Runner(s, persp)
    final_obs, _ = _event_observables(s, [(o, "") for o in final_event_obs])
    n_collapse = sum(runner.collapses(st) for st in s.steps)
    outcomes: list[tuple[str, ...]] | None = None
    counts = None

    def descend(k, state, record, runs, draws, acc):
        while k < len(s.steps) and not runner.collapses(s.steps[k]):
            state = runner.evolve(k, state, record)
            k += 1
        if k == len(s.steps):
            dist = joint_distribution(state, final_obs)
            idx = inverse_cdf(list(dist.support.values()), draws[-1][runs])
            acc.append((list(dist.support), idx))
            return
        st = s.steps[k]
        obs = st.action.observable
        j = sum(runner.collapses(x) for x in s.steps[:k])
        dist = born_distribution(state, obs)
        idx = inverse_cdf(list(dist.support.values()), draws[j][runs])
        for m, (lab, _) in enumerate(obs.outcomes):
            chosen = runs[idx == m]
            if chosen.size == 0:
                continue
            post = conditionalize(state, obs.projector(lab))
            descend(k + 1, post, {**record, st.id: lab}, chosen, draws, acc)

    for start in range(0, n, chunk_size):
        stop = min(n, start + chunk_size)
        draws = [run_uniforms(seed, j, start, stop) for j in range(n_collapse + 1)]
        acc: list = []
        descend(0, s.initial, {}, np.arange(stop - start), draws, acc)
        for keys, idx in acc:
            if outcomes is None:
                outcomes = keys
                counts = np.zeros(len(keys), dtype=np.int64)
            counts += np.bincount(idx, minlength=len(keys))
    return FrequencyTable(
        tuple(o.name for o in final_obs),
        tuple(outcomes),
        tuple(int(c) for c in counts),
        n,
        seed,
        persp.name,
    )


def sample_run(
    s: Scenario, p: Union[Perspective, str], seed: int, index: int, final_event_obs: Sequence[Observable]
) -> tuple[dict[str, str], tuple[str, ...]]:
    """One run, step by step, using the same per-run draws as :func:`sample_runs`."""
    persp = _resolve(s, p)
    runner = _Runner(s, persp)
    final_obs, _ = _event_observables(s, [(o, "") for o in final_event_obs])
    state, record, j = s.initial, {}, 0
    for k, st in enumerate(s.steps):
        if runner.collapses(st):
            obs = st.action.observable
            u = run_uniforms(seed, j, index, index + 1)[0]
            j += 1
            dist = born_distribution(state, obs)
            lab = obs.labels[inverse_cdf(list(dist.support.values()), u)]
            state = conditionalize(state, obs.projector(lab))
            record[st.id] = lab
        else:
            state = runner.evolve(k, state, record)
    u = run_uniforms(seed, j, index, index + 1)[0]
    dist = joint_distribution(state, final_obs)
    keys = list(dist.support)
    return record, keys[inverse_cdf(list(dist.support.values()), u)]


# ---------------------------------------------------------------------------
# structural comparison


def _observable_diff(a: Observable, b: Observable, atol: float) -> str | None:
    if a.name != b.name or a.subsystems != b.subsystems or a.labels != b.labels:
        return f"observable {a.name!r} differs in name, systems or labels"
    for (lab, p), (_, q) in zip(a.outcomes, b.outcomes):
        if not close(p.entries, q.entries, atol):
            return f"observable {a.name!r} outcome {lab!r} projector differs"
    return None


def _action_diff(a: Action, b: Action, atol: float) -> str | None:
    if type(a) is not type(b):
        return f"{type(a).__name__} vs {type(b).__name__}"
    if isinstance(a, Measure):
        if a.agent != b.agent:
            return f"agent {a.agent!r} vs {b.agent!r}"
        return _observable_diff(a.observable, b.observable, atol)
    if isinstance(a, Unitary):
        return None if a.operator.allclose(b.operator, atol) else "operator differs"
    if isinstance(a, Prepare):
        if a.system != b.system or not a.state.allclose(b.state, atol):
            return "prepared state differs"
        return None
    if a.control != b.control or list(a.branches) != list(b.branches):
        return "control or branch labels differ"
    for lab in a.branches:
        if not a.branches[lab].allclose(b.branches[lab], atol):
            return f"branch {lab!r} differs"
    return None


def scenario_diff(a: Scenario, b: Scenario, atol: float = 1e-12) -> str | None:
    """First structural difference between two scenarios, or None."""
    if a.systems != b.systems:
        return "systems differ"
    if not a.initial.allclose(b.initial, atol):
        return "initial states differ"
    if list(a.observables) != list(b.observables):
        return f"observable names differ: {list(a.observables)} vs {list(b.observables)}"
    for name in a.observables:
        d = _observable_diff(a.observables[name], b.observables[name], atol)
        if d:
            return d
    if [st.id for st in a.steps] != [st.id for st in b.steps]:
        return "step ids differ"
    for sa, sb in zip(a.steps, b.steps):
        d = _action_diff(sa.action, sb.action, atol)
        if d:
            return f"step {sa.id!r}: {d}"
    if a.perspectives != b.perspectives:
        return "perspectives differ"
    return None


def scenarios_equal(a: Scenario, b: Scenario, atol: float = 1e-12) -> bool:
    return scenario_diff(a, b, atol) is None
