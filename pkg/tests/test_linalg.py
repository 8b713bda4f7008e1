from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frsim.errors import DimensionError, NotOrthonormalError, SystemMismatchError
from frsim.linalg import (
    OperatorMatrix,
    Projector,
    PureState,
    SystemSpec,
    apply,
    commutator_norm,
    commutes,
    controlled,
    expand,
    projector_onto,
    range_basis,
    tensor,
    tensor_all,
)

from conftest import random_state

A = SystemSpec("a", 2, ("0", "1"))
B = SystemSpec("b", 3, ("x", "y", "z"))
S = 1 / math.sqrt(2)


def test_system_spec_validation():
    with pytest.raises(ValueError):
        SystemSpec("bad", 2, ("0",))
    with pytest.raises(ValueError):
        SystemSpec("dup", 2, ("0", "0"))
    assert B.index("z") == 2


def test_basis_state_row_major():
    s = PureState.basis((A, B), ("1", "y"))
    assert s.flat_index(("1", "y")) == 4
    assert s.amplitudes[4] == 1
    assert s.amplitude("1", "y") == 1


def test_amplitude_length_checked():
    with pytest.raises(DimensionError):
        PureState((A,), [1, 0, 0])


def test_tensor_matches_kron():
    u = PureState((A,), [S, S])
    v = PureState((B,), [0, 1, 0])
    t = tensor(u, v)
    assert np.allclose(t.amplitudes, np.kron(u.amplitudes, v.amplitudes))
    assert t.system_names == ("a", "b")


def test_tensor_rejects_shared_system():
    u = PureState((A,), [1, 0])
    with pytest.raises(SystemMismatchError):
        tensor(u, u)


def test_ok_projector_entries():
    # |ok> = (|h> - |t>)/sqrt2, so |ok><ok| = [[1/2, -1/2], [-1/2, 1/2]]
    coin = SystemSpec("coin", 2, ("h", "t"))
    ok = PureState((coin,), [S, -S])
    p = projector_onto([ok])
    assert np.allclose(p.entries, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)
    assert p.rank() == 1


def test_projector_onto_rejects_nonorthogonal():
    with pytest.raises(NotOrthonormalError, match="0 and 1"):
        projector_onto([PureState((A,), [1, 0]), PureState((A,), [S, S])])


def test_projector_onto_rejects_unnormalized():
    with pytest.raises(NotOrthonormalError):
        projector_onto([PureState((A,), [1, 1])])


def test_projector_must_be_idempotent():
    with pytest.raises(ValueError):
        Projector((A,), np.array([[1.0, 0.0], [0.0, 0.5]]))


def test_complement_and_zero():
    p = projector_onto([PureState((A,), [1, 0])])
    q = p.complement()
    assert np.allclose(p.entries + q.entries, np.eye(2))
    assert not q.is_zero()
    assert Projector((A,), np.zeros((2, 2))).is_zero()


def test_commutator_oracle():
    z = projector_onto([PureState((A,), [1, 0])])
    x = projector_onto([PureState((A,), [S, S])])
    # [|0><0|, |+><+|] = [[0, 1/2], [-1/2, 0]], spectral norm 1/2
    assert commutator_norm(z, x) == pytest.approx(0.5, abs=1e-12)
    assert not commutes(z, x)
    assert commutes(z, z.complement())


def test_expand_reorders_systems():
    x = OperatorMatrix((A,), np.array([[0, 1], [1, 0]]))
    on_ab = expand(x, (A, B))
    on_ba = expand(x, (B, A))
    assert np.allclose(on_ab.entries, np.kron([[0, 1], [1, 0]], np.eye(3)))
    assert np.allclose(on_ba.entries, np.kron(np.eye(3), [[0, 1], [1, 0]]))


def test_expand_keeps_projector_type():
    p = projector_onto([PureState((A,), [1, 0])])
    assert isinstance(expand(p, (B, A)), Projector)


def test_apply_on_subsystem_matches_kron():
    rng = np.random.default_rng(1)
    s = random_state(rng, (A, B))
    m = rng.standard_normal((3, 3))
    op = OperatorMatrix((B,), m)
    out = apply(op, s)
    assert np.allclose(out.amplitudes, np.kron(np.eye(2), m) @ s.amplitudes)


def test_controlled_is_block_diagonal():
    h = OperatorMatrix((A,), np.array([[S, S], [S, -S]]))
    c = SystemSpec("c", 2, ("h", "t"))
    cu = controlled(c, {"h": OperatorMatrix.identity((A,)), "t": h})
    assert cu.system_names == ("c", "a")
    assert cu.is_unitary()
    assert np.allclose(cu.entries[:2, :2], np.eye(2))
    assert np.allclose(cu.entries[2:, 2:], h.entries)
    assert np.allclose(cu.entries[:2, 2:], 0)


def test_range_basis_recovers_rank():
    p = projector_onto([PureState.basis((B,), ("x",)), PureState.basis((B,), ("z",))])
    vs = range_basis(p)
    assert len(vs) == 2
    assert np.allclose(projector_onto(vs).entries, p.entries)


def test_from_terms_and_as_dict():
    s = PureState.from_terms((A, B), {("0", "x"): S, ("1", "z"): -S})
    d = s.as_dict(1e-12)
    assert set(d) == {("0", "x"), ("1", "z")}
    assert s.norm() == pytest.approx(1.0)


unit_seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(unit_seeds)
def test_unitary_preserves_norm(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    u = OperatorMatrix((A, B), q)
    s = random_state(rng, (A, B))
    assert u.is_unitary()
    assert apply(u, s).norm() == pytest.approx(1.0, abs=1e-12)


@given(unit_seeds)
def test_tensor_associative(seed):
    rng = np.random.default_rng(seed)
    c = SystemSpec("c", 2, ("u", "d"))
    x, y, z = (random_state(rng, (s,)) for s in (A, B, c))
    left = tensor(tensor(x, y), z)
    right = tensor(x, tensor(y, z))
    assert left.allclose(right, 1e-12)
    assert tensor_all([x, y, z]).allclose(left, 1e-12)


@given(unit_seeds)
def test_rank_one_projector_idempotent(seed):
    rng = np.random.default_rng(seed)
    v = random_state(rng, (A, B))
    p = projector_onto([v])
    assert np.allclose(p.entries @ p.entries, p.entries, atol=1e-12)
    assert np.vdot(v.amplitudes, p.entries @ v.amplitudes).real == pytest.approx(1.0)
