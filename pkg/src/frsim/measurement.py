"""Born-rule statistics, Lüders conditioning and seeded sampling."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DimensionError,
    ImpossibleEventError,
    NotOrthonormalError,
    SystemMismatchError,
)
from .linalg import ATOL, Projector, PureState, SystemSpec, apply, apply_raw, close, projector_onto

ZERO_TOL = 1e-9
PRUNE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Observable:
    name: str
    subsystems: tuple[SystemSpec, ...]
    outcomes: tuple[tuple[str, Projector], ...]

    def __post_init__(self) -> None:
        subsystems = tuple(self.subsystems)
        outcomes = tuple((str(lab), p) for lab, p in self.outcomes)
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "outcomes", outcomes)
        labels = [lab for lab, _ in outcomes]
        if not outcomes:
            raise ValueError(f"observable {self.name!r} has no outcomes")
        if len(set(labels)) != len(labels):
            raise ValueError(f"observable {self.name!r} has duplicate outcome labels")
        for lab, p in outcomes:
            if p.systems != subsystems:
                raise SystemMismatchError(
                    f"outcome {lab!r} of {self.name!r} acts on the wrong systems"
                )
        for (la, pa), (lb, pb) in itertools.combinations(outcomes, 2):
            if np.max(np.abs(pa.entries @ pb.entries)) > ATOL:
                raise NotOrthonormalError(
                    f"outcomes {la!r} and {lb!r} of {self.name!r} are not orthogonal"
                )
        total = sum(p.entries for _, p in outcomes)
        if not close(total, np.eye(total.shape[0])):
            raise NotOrthonormalError(f"outcomes of {self.name!r} do not resolve the identity")

    @classmethod
    def from_eigenstates(
        cls,
        name: str,
        eigenstates: Mapping[str, Union[PureState, Sequence[PureState]]],
    ) -> Observable:
        """One projector per label, spanned by the given orthonormal eigenvectors."""
        vectors = {
            lab: [v] if isinstance(v, PureState) else list(v) for lab, v in eigenstates.items()
        }
        systems = next(iter(vectors.values()))[0].systems
        # cross-label orthogonality is checked by the constructor
        return cls(name, systems, tuple((lab, projector_onto(vs)) for lab, vs in vectors.items()))

    @classmethod
    def computational(cls, name: str, system: SystemSpec) -> Observable:
        return cls.from_eigenstates(
            name, {lab: PureState.basis((system,), (lab,)) for lab in system.basis_labels}
        )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.outcomes)

    @property
    def subsystem_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.subsystems)

    def projector(self, label: str) -> Projector:
        for lab, p in self.outcomes:
            if lab == label:
                return p
        raise KeyError(f"observable {self.name!r} has no outcome {label!r}")

    def __repr__(self) -> str:
        return f"Observable({self.name!r} on {','.join(self.subsystem_names)}: {'/'.join(self.labels)})"


@dataclass(frozen=True)
class Distribution:
    """Probabilities over outcome-label tuples, in declared outcome order."""

    variables: tuple[str, ...]
    support: Mapping[tuple[str, ...], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[tuple[str, ...], float] = {}
        for key, p in self.support.items():
            key = (key,) if isinstance(key, str) else tuple(key)
            if len(key) != len(self.variables):
                raise ValueError(f"outcome {key} does not match variables {self.variables}")
            p = float(p)
            if p < -ZERO_TOL or p > 1.0 + ZERO_TOL:
                raise ValueError(f"probability {p} out of range for {key}")
            clean[key] = min(max(p, 0.0), 1.0)
        total = sum(clean.values())
        if clean and abs(total - 1.0) > ZERO_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "support", clean)

    def __getitem__(self, outcome: Union[str, Sequence[str]]) -> float:
        key = (outcome,) if isinstance(outcome, str) else tuple(outcome)
        return self.support.get(key, 0.0)

    def __iter__(self) -> Iterator[tuple[str, ...]]:
        return iter(self.support)

    def __len__(self) -> int:
        return len(self.support)

    def items(self):
        return self.support.items()

    def total(self) -> float:
        return sum(self.support.values())

    def allclose(self, other: Distribution, atol: float = ZERO_TOL) -> bool:
        if self.variables != other.variables:
            return False
        keys = set(self.support) | set(other.support)
        return all(abs(self[k] - other[k]) <= atol for k in keys)


def _check_on(state: PureState, obs: Observable) -> None:
    names = state.system_names
    for s in obs.subsystems:
        if s.name not in names:
            raise SystemMismatchError(
                f"observable {obs.name!r} acts on system {s.name!r} absent from the state"
            )
        if state.system(s.name) != s:
            raise DimensionError(f"system {s.name!r} differs between observable and state")


def _check_disjoint(obs_list: Sequence[Observable]) -> None:
    seen: dict[str, str] = {}
    for obs in obs_list:
        for name in obs.subsystem_names:
            if name in seen:
                raise SystemMismatchError(
                    f"observables {seen[name]!r} and {obs.name!r} share system {name!r}; "
                    "joint measurement requires disjoint subsystems"
                )
            seen[name] = obs.name


def _weight(state: PureState, projected: PureState) -> float:
    return float(np.vdot(state.amplitudes, projected.amplitudes).real)


def born_distribution(state: PureState, obs: Observable) -> Distribution:
    _check_on(state, obs)
    support = {(lab,): _weight(state, apply(p, state)) for lab, p in obs.outcomes}
    return Distribution((obs.name,), support)


def joint_distribution(state: PureState, obs_list: Sequence[Observable]) -> Distribution:
    obs_list = list(obs_list)
    if not obs_list:
        raise ValueError("no observables given")
    for obs in obs_list:
        _check_on(state, obs)
    _check_disjoint(obs_list)
    support: dict[tuple[str, ...], float] = {}
    dims = state.dims
    names = state.system_names
    plan = [
        ([names.index(n) for n in obs.subsystem_names], obs.outcomes) for obs in obs_list
    ]

    # depth-first over outcome combinations, reusing partial projections
    def walk(k: int, partial: np.ndarray, labels: tuple[str, ...]) -> None:
        if k == len(plan):
            support[labels] = float(np.vdot(partial, partial).real)
            return
        axes, outcomes = plan[k]
        for lab, p in outcomes:
            walk(k + 1, apply_raw(p.entries, axes, dims, partial), labels + (lab,))

    walk(0, state.amplitudes, ())
    return Distribution(tuple(o.name for o in obs_list), support)


def conditionalize(state: PureState, p: Projector) -> PureState:
    projected = apply(p, state)
    weight = float(np.vdot(projected.amplitudes, projected.amplitudes).real)
    if weight <= PRUNE_TOL:
        raise ImpossibleEventError(
            f"conditioning on impossible event (probability {weight:.3g})"
        )
    return PureState(state.systems, projected.amplitudes / np.sqrt(weight))


def joint_projector_apply(state: PureState, obs_list: Sequence[Observable], labels: Sequence[str]) -> PureState:
    out = state
    for obs, lab in zip(obs_list, labels):
        out = apply(obs.projector(lab), out)
    return out


def condition_on_outcomes(
    state: PureState, obs_list: Sequence[Observable], labels: Sequence[str]
) -> PureState:
    """Lüders update for a joint outcome of disjoint observables."""
    _check_disjoint(obs_list)
    projected = joint_projector_apply(state, obs_list, labels)
    weight = float(np.vdot(projected.amplitudes, projected.amplitudes).real)
    if weight <= PRUNE_TOL:
        shown = ", ".join(f"{o.name}={lab}" for o, lab in zip(obs_list, labels))
        raise ImpossibleEventError(f"conditioning on impossible event ({shown})")
    return PureState(state.systems, projected.amplitudes / np.sqrt(weight))


def inverse_cdf(probs: Sequence[float], u: Union[float, np.ndarray]) -> Union[int, np.ndarray]:
    """Index of the first outcome whose cumulative weight exceeds ``u``.

    Draws landing past the accumulated total (roundoff) go to the last
    outcome with positive probability.
    """
    probs = np.asarray(probs, dtype=float)
    cum = np.cumsum(probs)
    positive = np.flatnonzero(probs > 0.0)
    last = int(positive[-1]) if positive.size else len(probs) - 1
    idx = np.searchsorted(cum, u, side="right")
    idx = np.minimum(idx, last)
    return int(idx) if np.ndim(idx) == 0 else idx


ObsArg = Union[Observable, Sequence[Observable]]


def _as_list(obs: ObsArg) -> list[Observable]:
    return [obs] if isinstance(obs, Observable) else list(obs)


def sample(state: PureState, obs: ObsArg, stream: np.random.Generator):
    """Draw one Born-rule outcome and return it with the post-measurement state.

    Consumes exactly one ``stream.random()`` draw. A sequence of disjoint
    observables is sampled jointly and yields a tuple of labels.
    """
    obs_list = _as_list(obs)
    dist = joint_distribution(state, obs_list)
    keys = list(dist.support)
    k = inverse_cdf(list(dist.support.values()), stream.random())
    labels = keys[k]
    post = condition_on_outcomes(state, obs_list, labels)
    return (labels[0] if isinstance(obs, Observable) else labels), post


def sample_many(
    state: PureState, obs: ObsArg, n: int, stream: np.random.Generator
) -> np.ndarray:
    """Outcome indices (into the declared joint order) for ``n`` independent draws.

    Equivalent to ``n`` calls of :func:`sample` on the same stream.
    """
    dist = joint_distribution(state, _as_list(obs))
    return inverse_cdf(list(dist.support.values()), stream.random(n))


def marginal(d: Distribution, keep: Sequence[int]) -> Distribution:
    keep = list(keep)
    if not keep:
        raise ValueError("marginal needs at least one variable to keep")
    for k in keep:
        if not 0 <= k < len(d.variables):
            raise IndexError(f"variable position {k} out of range")
    out: dict[tuple[str, ...], float] = {}
    for key, p in d.items():
        sub = tuple(key[k] for k in keep)
        out[sub] = out.get(sub, 0.0) + p
    return Distribution(tuple(d.variables[k] for k in keep), out)


@dataclass(frozen=True)
class SignalingCheck:
    observable: str
    remote: str | None
    marginal: Distribution
    deviation: float


@dataclass(frozen=True)
class NoSignalingReport:
    checks: tuple[SignalingCheck, ...]
    tolerance: float = ZERO_TOL

    @property
    def max_deviation(self) -> float:
        return max((c.deviation for c in self.checks), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance


def no_signaling_audit(
    state: PureState,
    side1_choices: Sequence[Observable],
    side2_choices: Sequence[Observable],
    tolerance: float = ZERO_TOL,
) -> NoSignalingReport:
    """Compare each side-1 marginal across every side-2 setting and "no measurement"."""
    for a in side1_choices:
        for b in side2_choices:
            _check_disjoint([a, b])
    checks: list[SignalingCheck] = []
    for a in side1_choices:
        alone = born_distribution(state, a)
        checks.append(SignalingCheck(a.name, None, alone, 0.0))
        for b in side2_choices:
            m = marginal(joint_distribution(state, [a, b]), [0])
            dev = max(abs(m[k] - alone[k]) for k in alone)
            checks.append(SignalingCheck(a.name, b.name, m, dev))
    return NoSignalingReport(tuple(checks), tolerance)
