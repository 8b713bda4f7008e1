"""Two-party correlators and the CHSH combination."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import PureState, SystemSpec, tensor
from .measurement import Observable, joint_distribution

TSIRELSON = 2 * math.sqrt(2)


@dataclass(frozen=True, eq=False)
class DichotomicObservable:
    """Two-outcome observable; the first-listed outcome scores +1."""

    observable: Observable

    def __post_init__(self) -> None:
        if len(self.observable.outcomes) != 2:
            raise ValueError(
                f"{self.observable.name!r} has {len(self.observable.outcomes)} outcomes, need 2"
            )

    @property
    def name(self) -> str:
        return self.observable.name

    def value(self, label: str) -> int:
        plus, minus = self.observable.labels
        if label == plus:
            return 1
        if label == minus:
            return -1
        raise KeyError(label)

    def flipped(self) -> DichotomicObservable:
        """Same projectors with the +1/-1 assignment swapped."""
        a, b = self.observable.outcomes
        return DichotomicObservable(Observable(self.name, self.observable.subsystems, (b, a)))

    @classmethod
    def at_angle(cls, name: str, system: SystemSpec, theta: float) -> DichotomicObservable:
        """Spin along angle ``theta`` in the Bloch x-z plane (qubit systems only)."""
        if system.dimension != 2:
            raise ValueError("angle settings need a two-level system")
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        plus = PureState((system,), [c, s])
        minus = PureState((system,), [-s, c])
        return cls(Observable.from_eigenstates(name, {"plus": plus, "minus": minus}))

    @classmethod
    def from_basis(cls, name: str, system: SystemSpec, u: np.ndarray) -> DichotomicObservable:
        """Columns of the 2x2 unitary ``u`` are the +1 and -1 eigenvectors."""
        plus = PureState((system,), u[:, 0])
        minus = PureState((system,), u[:, 1])
        return cls(Observable.from_eigenstates(name, {"plus": plus, "minus": minus}))


def _obs(x) -> DichotomicObservable:
    return x if isinstance(x, DichotomicObservable) else DichotomicObservable(x)


def correlation(state: PureState, a, b) -> float:
    a, b = _obs(a), _obs(b)
    dist = joint_distribution(state, [a.observable, b.observable])
    return sum(a.value(la) * b.value(lb) * p for (la, lb), p in dist.items())


def chsh_value(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> float:
    return abs(e_ab + e_abp + e_apb - e_apbp)


def chsh(state: PureState, a, a_prime, b, b_prime) -> float:
    """|E(a,b) + E(a,b') + E(a',b) - E(a',b')|."""
    return chsh_value(
        correlation(state, a, b),
        correlation(state, a, b_prime),
        correlation(state, a_prime, b),
        correlation(state, a_prime, b_prime),
    )


def optimal_singlet_settings(left: SystemSpec, right: SystemSpec):
    """Settings at angles {0, pi/2} and {pi/4, 3pi/4} ordered to reach 2*sqrt(2) on the singlet."""
    a = DichotomicObservable.at_angle("a", left, math.pi / 2)
    a_prime = DichotomicObservable.at_angle("a'", left, 0.0)
    b = DichotomicObservable.at_angle("b", right, math.pi / 4)
    b_prime = DichotomicObservable.at_angle("b'", right, 3 * math.pi / 4)
    return a, a_prime, b, b_prime


def haar_unitary(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng: np.random.Generator, systems) -> PureState:
    d = math.prod(s.dimension for s in systems)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(tuple(systems), v / np.linalg.norm(v))


def tsirelson_sweep(n: int, seed: int, product: bool = False) -> np.ndarray:
    """CHSH values of ``n`` random two-qubit states with random settings per side."""
    rng = np.random.default_rng(seed)
    left, right = SystemSpec("left", 2, ("0", "1")), SystemSpec("right", 2, ("0", "1"))
    out = np.empty(n)
    for i in range(n):
        if product:
            state = tensor(random_state(rng, (left,)), random_state(rng, (right,)))
        else:
            state = random_state(rng, (left, right))
        a, ap = (DichotomicObservable.from_basis(nm, left, haar_unitary(rng)) for nm in ("a", "a'"))
        b, bp = (DichotomicObservable.from_basis(nm, right, haar_unitary(rng)) for nm in ("b", "b'"))
        out[i] = chsh(state, a, ap, b, bp)
    return out
