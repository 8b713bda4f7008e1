"""Boolean frames, possibilistic constraints and single-world valuations.

A frame is the Boolean algebra generated by a commuting family of
projectors. After construction its elements are handled as sets of atom
labels, so all Boolean operations on them are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import NonCommutingError, SearchGuardError, SystemMismatchError
from .linalg import ATOL, Projector, PureState, SystemSpec, apply, close, commutator_norm, expand
from .measurement import ZERO_TOL, Distribution, Observable, joint_distribution
from .scenario import fr_scenario, run_deterministic

Label = tuple[str, ...]
Lit = tuple[str, str]  # (variable, outcome)

SEARCH_GUARD = 1 << 20


@dataclass(frozen=True, eq=False)
class Frame:
    name: str
    atoms: tuple[tuple[Label, Projector], ...]
    variables: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        atoms = tuple((tuple(lab), p) for lab, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError(f"frame {self.name!r} has no atoms")
        systems = atoms[0][1].systems
        for lab, p in atoms:
            if p.systems != systems:
                raise SystemMismatchError(f"atom {lab} of {self.name!r} lives on other systems")
        for (la, pa), (lb, pb) in itertools.combinations(atoms, 2):
            if np.max(np.abs(pa.entries @ pb.entries)) > ATOL:
                raise NonCommutingError(f"atoms {la} and {lb} of {self.name!r} overlap")
        total = sum(p.entries for _, p in atoms)
        if not close(total, np.eye(total.shape[0])):
            raise ValueError(f"atoms of {self.name!r} do not resolve the identity")

    @property
    def systems(self) -> tuple[SystemSpec, ...]:
        return self.atoms[0][1].systems

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(lab for lab, _ in self.atoms)

    def atom(self, label: Sequence[str]) -> Projector:
        label = tuple(label)
        for lab, p in self.atoms:
            if lab == label:
                return p
        raise KeyError(f"frame {self.name!r} has no atom {label}")

    def element(self, subset) -> np.ndarray:
        """Projector matrix of the disjunction of the given atoms."""
        d = self.atoms[0][1].dimension
        out = np.zeros((d, d), dtype=complex)
        for lab in subset:
            out += self.atom(lab).entries
        return out

    def elements(self):
        """All 2^n elements as frozensets of atom labels."""
        labels = self.labels
        for r in range(len(labels) + 1):
            for combo in itertools.combinations(labels, r):
                yield frozenset(combo)


def frame_from_commuting(
    projectors: Sequence[Projector],
    names: Sequence[tuple[str, str]] | None = None,
    frame_name: str = "",
) -> Frame:
    """Atoms are the nonzero products of each projector or its complement.

    ``names`` gives (label-if-P, label-if-complement) per projector; the
    default sign pattern is ("+", "-").
    """
    projectors = list(projectors)
    if not projectors:
        raise ValueError("need at least one projector")
    names = list(names) if names is not None else [("+", "-")] * len(projectors)
    if len(names) != len(projectors):
        raise ValueError("one name pair per projector")
    for p in projectors[1:]:
        if p.systems != projectors[0].systems:
            raise SystemMismatchError("projectors must act on the same joint space")
    for i, j in itertools.combinations(range(len(projectors)), 2):
        if commutator_norm(projectors[i], projectors[j]) > ATOL:
            raise NonCommutingError(
                f"projectors {i} and {j} do not commute; they belong to intertwined, "
                "not a single, Boolean frame"
            )
    d = projectors[0].dimension
    eye = np.eye(d)
    atoms = []
    for signs in itertools.product((True, False), repeat=len(projectors)):
        m = eye.astype(complex)
        for p, keep in zip(projectors, signs):
            m = m @ (p.entries if keep else eye - p.entries)
        if np.max(np.abs(m)) > ATOL:
            label = tuple(pos if keep else neg for (pos, neg), keep in zip(names, signs))
            atoms.append((label, Projector(projectors[0].systems, m)))
    return Frame(frame_name or f"frame{len(atoms)}", tuple(atoms))


def frame_from_observables(
    obs_list: Sequence[Observable], systems: Sequence[SystemSpec] | None = None
) -> Frame:
    """Frame whose atoms are the nonzero joint outcomes of commuting observables."""
    obs_list = list(obs_list)
    if systems is None:
        systems = tuple(s for o in obs_list for s in o.subsystems)
    systems = tuple(systems)
    lifted = [[(lab, expand(p, systems)) for lab, p in o.outcomes] for o in obs_list]
    for (i, a), (j, b) in itertools.combinations(enumerate(lifted), 2):
        for la, pa in a:
            for lb, pb in b:
                if commutator_norm(pa, pb) > ATOL:
                    raise NonCommutingError(
                        f"{obs_list[i].name}={la} and {obs_list[j].name}={lb} do not commute"
                    )
    d = math.prod(s.dimension for s in systems)
    atoms = []
    for combo in itertools.product(*lifted):
        m = np.eye(d, dtype=complex)
        for _, p in combo:
            m = m @ p.entries
        if np.max(np.abs(m)) > ATOL:
            atoms.append((tuple(lab for lab, _ in combo), Projector(systems, m)))
    names = tuple(o.name for o in obs_list)
    return Frame(",".join(names), tuple(atoms), variables=names)


def intertwinement(f1: Frame, f2: Frame) -> list[tuple[frozenset, frozenset]]:
    """Nontrivial elements common to both frames, as (f1 subset, f2 subset) pairs.

    For each element E of ``f1`` the only candidate partner in ``f2`` is the
    set of ``f2`` atoms lying under E; it matches iff it sums to E.
    """
    if f1.systems != f2.systems:
        if f1.atoms[0][1].dimension != f2.atoms[0][1].dimension:
            raise SystemMismatchError(
                f"frames {f1.name!r} and {f2.name!r} live on different dimensions"
            )
        raise SystemMismatchError(f"frames {f1.name!r} and {f2.name!r} live on different systems")
    shared = []
    for subset in f1.elements():
        if not subset or len(subset) == len(f1.atoms):
            continue
        e = f1.element(subset)
        below = frozenset(
            lab for lab, p in f2.atoms if close(e @ p.entries, p.entries)
        )
        if not below or len(below) == len(f2.atoms):
            continue
        if close(f2.element(below), e):
            shared.append((subset, below))
    return shared


@dataclass(frozen=True)
class PossibilisticConstraint:
    frame: str
    atoms: frozenset
    modality: Literal["impossible", "possible"]
    probability: float
    variables: tuple[str, ...] = ()

    def literals(self) -> tuple[Lit, ...]:
        """The single atom of this constraint as (variable, outcome) pairs."""
        (label,) = self.atoms
        return tuple(zip(self.variables, label))


def possibilistic_constraints(
    state: PureState, frames: Sequence[Frame], tolerance: float = ZERO_TOL
) -> list[PossibilisticConstraint]:
    out = []
    for f in frames:
        if f.systems != state.systems:
            raise SystemMismatchError(f"frame {f.name!r} is not on the state's systems")
        for lab, p in f.atoms:
            prob = float(np.vdot(state.amplitudes, apply(p, state).amplitudes).real)
            modality = "impossible" if prob < tolerance else "possible"
            out.append(PossibilisticConstraint(f.name, frozenset([lab]), modality, prob, f.variables))
    return out


# ---------------------------------------------------------------------------
# valuation search


@dataclass(frozen=True)
class ValuationProblem:
    variables: tuple[tuple[str, tuple[str, ...]], ...]
    constraints: tuple[tuple[Lit, ...], ...] = ()
    required: tuple[Lit, ...] = ()

    def __post_init__(self) -> None:
        variables = tuple((name, tuple(labels)) for name, labels in self.variables)
        constraints = tuple(tuple(tuple(lit) for lit in c) for c in self.constraints)
        required = tuple(tuple(lit) for lit in self.required)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "required", required)
        domains = dict(variables)
        if len(domains) != len(variables):
            raise ValueError("duplicate variable names")
        for lit in [lit for c in constraints for lit in c] + list(required):
            var, lab = lit
            if var not in domains:
                raise ValueError(f"unknown variable {var!r}")
            if lab not in domains[var]:
                raise ValueError(f"{lab!r} is not an outcome of {var!r}")

    @property
    def domains(self) -> dict[str, tuple[str, ...]]:
        return dict(self.variables)

    def size(self) -> int:
        return math.prod(len(labels) for _, labels in self.variables)

    def violated(self, assignment: Mapping[str, str]) -> list[tuple[Lit, ...]]:
        return [c for c in self.constraints if all(assignment.get(v) == lab for v, lab in c)]

    def satisfies(self, assignment: Mapping[str, str]) -> bool:
        return all(assignment.get(v) == lab for v, lab in self.required) and not self.violated(
            assignment
        )

    def without(self, constraint: tuple[Lit, ...]) -> ValuationProblem:
        rest = list(self.constraints)
        rest.remove(tuple(constraint))
        return ValuationProblem(self.variables, tuple(rest), self.required)


@dataclass(frozen=True)
class Deduction:
    kind: Literal["forced", "conflict", "exhausted"]
    premises: tuple[Lit, ...]
    conclusion: Lit | None
    constraint: tuple[Lit, ...] | None

    def __str__(self) -> str:
        lhs = " & ".join(f"{v}={lab}" for v, lab in self.premises)
        if self.kind == "forced":
            cited = ", ".join(f"{v}={lab}" for v, lab in self.constraint)
            return f"{lhs} => {self.conclusion[0]}={self.conclusion[1]}  [forbidden ({cited})]"
        if self.kind == "conflict":
            return f"{lhs} is forbidden  [contradiction]"
        return "every assignment violates some constraint  [exhaustive search]"


@dataclass(frozen=True)
class ValuationResult:
    status: Literal["SAT", "UNSAT"]
    witness: Mapping[str, str] | None = None
    trace: tuple[Deduction, ...] = ()
    assumptions: tuple[Lit, ...] = ()
    searched: int = 0

    @property
    def sat(self) -> bool:
        return self.status == "SAT"


def _propagate(problem: ValuationProblem) -> tuple[Deduction, ...] | None:
    """Unit propagation from the required literals; a trace if it ends in conflict."""
    domains = {v: list(labels) for v, labels in problem.variables}
    assigned: dict[str, str] = {}
    trace: list[Deduction] = []
    for v, lab in problem.required:
        if v in assigned and assigned[v] != lab:
            return (Deduction("conflict", ((v, assigned[v]), (v, lab)), None, None),)
        assigned[v] = lab
        domains[v] = [lab]
    changed = True
    while changed:
        changed = False
        for c in problem.constraints:
            if any(v in assigned and assigned[v] != lab for v, lab in c):
                continue  # already satisfied
            if any(lab not in domains[v] for v, lab in c):
                continue
            open_lits = [(v, lab) for v, lab in c if v not in assigned]
            if not open_lits:
                return tuple(trace) + (Deduction("conflict", c, None, c),)
            if len(open_lits) > 1:
                continue
            v, lab = open_lits[0]
            domains[v].remove(lab)
            premises = tuple(lit for lit in c if lit != (v, lab))
            if not domains[v]:
                return tuple(trace) + (Deduction("conflict", c, None, c),)
            if len(domains[v]) == 1:
                assigned[v] = domains[v][0]
                trace.append(Deduction("forced", premises, (v, assigned[v]), c))
            changed = True
    return None


def global_valuation(problem: ValuationProblem) -> ValuationResult:
    """Exhaustive one-outcome-per-variable search in declared order."""
    size = problem.size()
    if size > SEARCH_GUARD:
        raise SearchGuardError(f"{size} assignments exceed the search guard {SEARCH_GUARD}")
    names = [v for v, _ in problem.variables]
    count = 0
    for combo in itertools.product(*(labels for _, labels in problem.variables)):
        count += 1
        assignment = dict(zip(names, combo))
        if problem.satisfies(assignment):
            return ValuationResult("SAT", assignment, (), problem.required, count)
    trace = _propagate(problem)
    if trace is None:
        trace = (Deduction("exhausted", (), None, None),)
    return ValuationResult("UNSAT", None, trace, problem.required, count)


def brute_force_sat(problem: ValuationProblem) -> bool:
    """Independent check: does any assignment satisfy the problem?"""
    names = [v for v, _ in problem.variables]
    for combo in itertools.product(*(labels for _, labels in problem.variables)):
        a = dict(zip(names, combo))
        if any(a[v] != lab for v, lab in problem.required):
            continue
        if any(all(a[v] == lab for v, lab in c) for c in problem.constraints):
            continue
        return True
    return False


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ContradictionReport:
    result: ValuationResult
    problem: ValuationProblem
    constraints: tuple[PossibilisticConstraint, ...]
    distributions: tuple[Distribution, ...]

    @property
    def impossible(self) -> tuple[PossibilisticConstraint, ...]:
        return tuple(c for c in self.constraints if c.modality == "impossible")


def consistency_report(
    state: PureState,
    observable_groups: Sequence[Sequence[Observable]],
    required: Sequence[Lit],
    tolerance: float = ZERO_TOL,
) -> ContradictionReport:
    """Possibilistic constraints from each commuting group, then a valuation search."""
    frames = [frame_from_observables(g, state.systems) for g in observable_groups]
    constraints = possibilistic_constraints(state, frames, tolerance)
    variables: dict[str, tuple[str, ...]] = {}
    for g in observable_groups:
        for o in g:
            variables.setdefault(o.name, o.labels)
    forbidden = tuple(c.literals() for c in constraints if c.modality == "impossible")
    problem = ValuationProblem(tuple(variables.items()), forbidden, tuple(required))
    distributions = tuple(joint_distribution(state, g) for g in observable_groups)
    return ContradictionReport(global_valuation(problem), problem, tuple(constraints), distributions)


def fr_contradiction_report(tolerance: float = ZERO_TOL) -> ContradictionReport:
    s = fr_scenario()
    (branch,) = run_deterministic(s, "superobserver")
    o = s.observables
    groups = [(o["X"], o["Y"]), (o["X"], o["B"]), (o["A"], o["Y"]), (o["A"], o["B"])]
    report = consistency_report(branch.state, groups, [("X", "ok"), ("Y", "ok")], tolerance)
    # variables in the conventional order A, B, X, Y
    problem = ValuationProblem(
        tuple((n, o[n].labels) for n in "ABXY"), report.problem.constraints, report.problem.required
    )
    return ContradictionReport(
        global_valuation(problem), problem, report.constraints, report.distributions
    )
