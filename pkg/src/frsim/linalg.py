"""Dense complex linear algebra over small labeled tensor-product spaces.

States are amplitude vectors indexed row-major by the declared system order;
operators act on a subset of a state's systems and are lifted with identity
elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DimensionError, NotOrthonormalError, SystemMismatchError

ATOL = 1e-9
MAX_DIMENSION = 4096


@dataclass(frozen=True)
class SystemSpec:
    name: str
    dimension: int
    basis_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.basis_labels)
        object.__setattr__(self, "basis_labels", labels)
        if self.dimension < 1:
            raise DimensionError(f"system {self.name!r} has dimension {self.dimension}")
        if len(labels) != self.dimension:
            raise DimensionError(
                f"system {self.name!r} declares dimension {self.dimension} "
                f"but {len(labels)} labels"
            )
        if len(set(labels)) != len(labels):
            raise DimensionError(f"system {self.name!r} has duplicate basis labels")

    def index(self, label: str) -> int:
        try:
            return self.basis_labels.index(str(label))
        except ValueError:
            raise SystemMismatchError(
                f"label {label!r} is not a basis label of system {self.name!r}"
            ) from None


def _check_systems(systems: Sequence[SystemSpec]) -> tuple[SystemSpec, ...]:
    systems = tuple(systems)
    names = [s.name for s in systems]
    for name in names:
        if names.count(name) > 1:
            raise SystemMismatchError(f"system {name!r} appears more than once")
    total = math.prod(s.dimension for s in systems)
    if total > MAX_DIMENSION:
        raise DimensionError(f"composite dimension {total} exceeds guard {MAX_DIMENSION}")
    return systems


class _OnSystems:
    """Shared helpers for values living on an ordered tuple of systems."""

    systems: tuple[SystemSpec, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dimension for s in self.systems)

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    @property
    def system_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.systems)

    def system(self, name: str) -> SystemSpec:
        for s in self.systems:
            if s.name == name:
                return s
        raise SystemMismatchError(f"system {name!r} not present")

    def basis_tuples(self) -> Iterator[tuple[str, ...]]:
        """Label tuples in row-major order."""
        if not self.systems:
            yield ()
            return
        grids = np.indices(self.dims).reshape(len(self.systems), -1).T
        for idx in grids:
            yield tuple(s.basis_labels[i] for s, i in zip(self.systems, idx))

    def flat_index(self, labels: Sequence[str]) -> int:
        if len(labels) != len(self.systems):
            raise SystemMismatchError(
                f"expected {len(self.systems)} labels, got {len(labels)}"
            )
        idx = tuple(s.index(lab) for s, lab in zip(self.systems, labels))
        return int(np.ravel_multi_index(idx, self.dims)) if idx else 0


@dataclass(frozen=True, eq=False)
class PureState(_OnSystems):
    systems: tuple[SystemSpec, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        systems = _check_systems(self.systems)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        expected = math.prod(s.dimension for s in systems)
        if amps.size != expected:
            raise DimensionError(f"{amps.size} amplitudes for dimension {expected}")
        amps.setflags(write=False)
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, systems: Sequence[SystemSpec], labels: Sequence[str]) -> PureState:
        systems = _check_systems(systems)
        amps = np.zeros(math.prod(s.dimension for s in systems), dtype=complex)
        state = cls(systems, amps)
        amps[state.flat_index(labels)] = 1.0
        return cls(systems, amps)

    @classmethod
    def from_terms(
        cls, systems: Sequence[SystemSpec], terms: Mapping[Sequence[str], complex]
    ) -> PureState:
        """Build a (not necessarily normalized) state from ``{labels: amplitude}``."""
        systems = _check_systems(systems)
        amps = np.zeros(math.prod(s.dimension for s in systems), dtype=complex)
        proto = cls(systems, amps)
        for labels, amp in terms.items():
            if isinstance(labels, str):
                labels = (labels,)
            amps[proto.flat_index(tuple(labels))] += amp
        return cls(systems, amps)

    def amplitude(self, *labels: str) -> complex:
        return complex(self.amplitudes[self.flat_index(labels)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> PureState:
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.systems, self.amplitudes / n)

    def inner(self, other: PureState) -> complex:
        _require_same_systems(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def as_dict(self, atol: float = 0.0) -> dict[tuple[str, ...], complex]:
        return {
            labels: complex(a)
            for labels, a in zip(self.basis_tuples(), self.amplitudes)
            if abs(a) > atol
        }

    def allclose(self, other: PureState, atol: float = ATOL) -> bool:
        return self.systems == other.systems and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        terms = " + ".join(
            f"({a:.4g})|{','.join(lab)}>" for lab, a in self.as_dict(1e-12).items()
        )
        return f"PureState[{','.join(self.system_names)}]({terms or '0'})"


def normalize(state: PureState) -> PureState:
    return state.normalized()


@dataclass(frozen=True, eq=False)
class OperatorMatrix(_OnSystems):
    systems: tuple[SystemSpec, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        systems = _check_systems(self.systems)
        m = np.array(self.entries, dtype=complex)
        d = math.prod(s.dimension for s in systems)
        if m.shape != (d, d):
            raise DimensionError(f"operator shape {m.shape} does not match dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "entries", m)

    @classmethod
    def identity(cls, systems: Sequence[SystemSpec]) -> OperatorMatrix:
        systems = _check_systems(systems)
        return cls(systems, np.eye(math.prod(s.dimension for s in systems)))

    @classmethod
    def from_columns(
        cls, systems: Sequence[SystemSpec], images: Sequence[PureState]
    ) -> OperatorMatrix:
        """Operator whose k-th column is the image of the k-th basis vector."""
        systems = _check_systems(systems)
        for img in images:
            if img.systems != systems:
                raise SystemMismatchError("column image lives on different systems")
        return cls(systems, np.column_stack([img.amplitudes for img in images]))

    def dagger(self) -> OperatorMatrix:
        return OperatorMatrix(self.systems, self.entries.conj().T)

    def is_unitary(self, atol: float = ATOL) -> bool:
        m = self.entries
        return bool(close(m.conj().T @ m, np.eye(m.shape[0]), atol))

    def is_hermitian(self, atol: float = ATOL) -> bool:
        return bool(close(self.entries, self.entries.conj().T, atol))

    def allclose(self, other: OperatorMatrix, atol: float = ATOL) -> bool:
        return self.systems == other.systems and bool(
            np.allclose(self.entries, other.entries, rtol=0.0, atol=atol)
        )

    def __matmul__(self, other: OperatorMatrix) -> OperatorMatrix:
        _require_same_systems(self, other)
        return OperatorMatrix(self.systems, self.entries @ other.entries)

    def __repr__(self) -> str:
        return f"{type(self).__name__}[{','.join(self.system_names)}]\n{np.round(self.entries, 6)}"


@dataclass(frozen=True, eq=False)
class Projector(OperatorMatrix):
    def __post_init__(self) -> None:
        super().__post_init__()
        m = self.entries
        if not close(m, m.conj().T):
            raise NotOrthonormalError("projector is not Hermitian")
        if not close(m @ m, m):
            raise NotOrthonormalError("projector is not idempotent")

    def complement(self) -> Projector:
        return Projector(self.systems, np.eye(self.dimension) - self.entries)

    def rank(self) -> int:
        return int(round(float(np.trace(self.entries).real)))

    def is_zero(self, atol: float = ATOL) -> bool:
        return bool(np.max(np.abs(self.entries), initial=0.0) <= atol)


def _require_same_systems(a: _OnSystems, b: _OnSystems) -> None:
    if a.systems != b.systems:
        raise SystemMismatchError(
            f"systems differ: [{','.join(a.system_names)}] vs [{','.join(b.system_names)}]"
        )


def tensor(a: PureState, b: PureState) -> PureState:
    shared = set(a.system_names) & set(b.system_names)
    if shared:
        raise SystemMismatchError(f"cannot tensor states sharing system {sorted(shared)[0]!r}")
    return PureState(a.systems + b.systems, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[PureState]) -> PureState:
    return reduce(tensor, states)


def _axes_of(op: _OnSystems, target: _OnSystems) -> list[int]:
    names = target.system_names
    axes = []
    for s in op.systems:
        if s.name not in names:
            raise SystemMismatchError(f"system {s.name!r} not present in target")
        if target.systems[names.index(s.name)] != s:
            raise DimensionError(f"system {s.name!r} declared differently in operator and target")
        axes.append(names.index(s.name))
    return axes


def close(a: np.ndarray, b, atol: float = ATOL) -> bool:
    """Max-norm comparison; cheaper than ``np.allclose`` on tiny arrays."""
    diff = np.abs(np.asarray(a) - b)
    return bool(diff.size == 0 or diff.max() <= atol)


def apply_raw(entries: np.ndarray, axes: Sequence[int], dims: Sequence[int], amps: np.ndarray) -> np.ndarray:
    """Array-level kernel behind :func:`apply`."""
    k = len(axes)
    d_u = entries.shape[0]
    if list(axes) == list(range(axes[0], axes[0] + k)):
        # contiguous block: batch matmul over (before, block, after)
        pre = math.prod(dims[: axes[0]])
        return np.matmul(entries, amps.reshape(pre, d_u, -1)).reshape(-1)
    psi = np.moveaxis(amps.reshape(dims), axes, list(range(k)))
    shape = psi.shape
    out = (entries @ psi.reshape(d_u, -1)).reshape(shape)
    return np.moveaxis(out, list(range(k)), axes).reshape(-1)


def apply(u: OperatorMatrix, s: PureState) -> PureState:
    """Apply ``u`` to the matching subsystems of ``s`` (identity elsewhere)."""
    return PureState(s.systems, apply_raw(u.entries, _axes_of(u, s), s.dims, s.amplitudes))


def expand(op: OperatorMatrix, systems: Sequence[SystemSpec]) -> OperatorMatrix:
    """Lift ``op`` to the joint space of ``systems`` by tensoring with identity."""
    systems = _check_systems(systems)
    if op.systems == systems:
        return op
    target = OperatorMatrix.identity(systems)
    axes = _axes_of(op, target)
    rest = [i for i in range(len(systems)) if i not in axes]
    d_rest = math.prod(systems[i].dimension for i in rest)
    full = np.kron(op.entries, np.eye(d_rest))
    # current axis order is op.systems then rest; permute to the requested order
    order = axes + rest
    n = len(systems)
    dims = [systems[i].dimension for i in order]
    t = full.reshape(dims + dims)
    perm = [order.index(i) for i in range(n)]
    t = t.transpose(perm + [p + n for p in perm])
    entries = t.reshape(target.dimension, target.dimension)
    if isinstance(op, Projector):
        return Projector(systems, entries)
    return OperatorMatrix(systems, entries)


def controlled(
    control: SystemSpec, branches: Mapping[str, OperatorMatrix]
) -> OperatorMatrix:
    """Block-diagonal sum of |k><k| (x) U_k over the control basis."""
    targets = {u.systems for u in branches.values()}
    if len(targets) != 1:
        raise SystemMismatchError("branch operators act on different systems")
    (target,) = targets
    missing = [lab for lab in control.basis_labels if lab not in branches]
    if missing:
        raise SystemMismatchError(f"no branch for control label {missing[0]!r}")
    d_t = math.prod(s.dimension for s in target)
    m = np.zeros((control.dimension * d_t,) * 2, dtype=complex)
    for k, lab in enumerate(control.basis_labels):
        m[k * d_t : (k + 1) * d_t, k * d_t : (k + 1) * d_t] = branches[lab].entries
    return OperatorMatrix((control,) + target, m)


def projector_onto(vectors: Sequence[PureState]) -> Projector:
    if not vectors:
        raise ValueError("need at least one vector")
    systems = vectors[0].systems
    for i, v in enumerate(vectors):
        if v.systems != systems:
            raise SystemMismatchError(f"vector {i} lives on different systems")
        if abs(v.norm() - 1.0) > ATOL:
            raise NotOrthonormalError(f"vector {i} is not normalized (norm {v.norm():.6g})")
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            overlap = abs(vectors[i].inner(vectors[j]))
            if overlap > ATOL:
                raise NotOrthonormalError(
                    f"vectors {i} and {j} are not orthogonal (overlap {overlap:.3g})"
                )
    cols = np.column_stack([v.amplitudes for v in vectors])
    return Projector(systems, cols @ cols.conj().T)


def range_basis(p: OperatorMatrix, atol: float = 1e-7) -> list[PureState]:
    """Orthonormal basis of the column space of ``p`` by Gram-Schmidt."""
    basis: list[np.ndarray] = []
    for col in p.entries.T:
        v = col.astype(complex)
        for b in basis:
            v = v - np.vdot(b, v) * b
        n = np.linalg.norm(v)
        if n > atol:
            basis.append(v / n)
    return [PureState(p.systems, b) for b in basis]


def commutator_norm(p: OperatorMatrix, q: OperatorMatrix) -> float:
    _require_same_systems(p, q)
    c = p.entries @ q.entries - q.entries @ p.entries
    return float(np.max(np.abs(c), initial=0.0))


def commutes(p: OperatorMatrix, q: OperatorMatrix, atol: float = ATOL) -> bool:
    if p.dimension != q.dimension:
        raise DimensionError(f"dimension mismatch: {p.dimension} vs {q.dimension}")
    return commutator_norm(p, q) <= atol


__all__ = [
    "ATOL",
    "MAX_DIMENSION",
    "OperatorMatrix",
    "Projector",
    "PureState",
    "SystemSpec",
    "apply",
    "apply_raw",
    "close",
    "commutator_norm",
    "commutes",
    "controlled",
    "expand",
    "normalize",
    "projector_onto",
    "range_basis",
    "tensor",
    "tensor_all",
]
