from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frsim.errors import ImpossibleEventError, NotOrthonormalError, SystemMismatchError
from frsim.linalg import PureState, SystemSpec, expand
from frsim.measurement import (
    Distribution,
    Observable,
    born_distribution,
    condition_on_outcomes,
    conditionalize,
    inverse_cdf,
    joint_distribution,
    marginal,
    no_signaling_audit,
    sample,
    sample_many,
)

from conftest import random_state

TOL = 1e-9


def test_born_on_psi(fr, psi):
    a = born_distribution(psi, fr.observable("A"))
    assert a["h"] == pytest.approx(1 / 3, abs=TOL)
    assert a["t"] == pytest.approx(2 / 3, abs=TOL)


def test_xy_distribution(fr, psi):
    d = joint_distribution(psi, [fr.observable("X"), fr.observable("Y")])
    assert list(d) == [("ok", "ok"), ("ok", "fail"), ("fail", "ok"), ("fail", "fail")]
    for key, want in zip(d, [1 / 12, 1 / 12, 1 / 12, 3 / 4]):
        assert d[key] == pytest.approx(want, abs=TOL)


def test_zero_events(fr, psi):
    o = fr.observables
    assert joint_distribution(psi, [o["X"], o["B"]])[("ok", "0")] < TOL
    assert joint_distribution(psi, [o["A"], o["Y"]])[("t", "ok")] < TOL
    assert joint_distribution(psi, [o["A"], o["B"]])[("h", "1")] < TOL


def test_joint_requires_disjoint(fr, psi):
    x = fr.observable("X")
    with pytest.raises(SystemMismatchError, match="disjoint"):
        joint_distribution(psi, [x, fr.observable("A")])


def test_observable_must_resolve_identity(qubit):
    with pytest.raises(NotOrthonormalError):
        Observable.from_eigenstates("Z", {"0": PureState.basis((qubit,), ("0",))})


def test_conditionalize_lueders(fr, psi):
    p = expand(fr.observable("A").projector("t"), psi.systems)
    post = conditionalize(psi, p)
    r = 1 / math.sqrt(2)
    assert post.allclose(PureState.from_terms(psi.systems, {("t", "0"): r, ("t", "1"): r}))


def test_conditioning_on_impossible_event_raises(fr, psi):
    with pytest.raises(ImpossibleEventError):
        condition_on_outcomes(psi, [fr.observable("X"), fr.observable("B")], ("ok", "0"))


def test_inverse_cdf_edges():
    assert inverse_cdf([0.25, 0.75], 0.0) == 0
    assert inverse_cdf([0.25, 0.75], 0.25) == 1
    assert inverse_cdf([0.5, 0.5, 0.0], 0.9999999999999999) == 1
    idx = inverse_cdf([0.2, 0.3, 0.5], np.array([0.1, 0.3, 0.6]))
    assert idx.tolist() == [0, 1, 2]


def test_sample_consumes_one_draw(fr, psi):
    g1, g2 = np.random.default_rng(5), np.random.default_rng(5)
    lab, post = sample(psi, fr.observable("A"), g1)
    g2.random()
    assert g1.random() == g2.random()
    assert lab in ("h", "t")
    assert born_distribution(post, fr.observable("A"))[lab] == pytest.approx(1.0)


def test_sample_many_matches_repeated_sample(fr, psi):
    obs = [fr.observable("X"), fr.observable("Y")]
    keys = list(joint_distribution(psi, obs))
    many = sample_many(psi, obs, 200, np.random.default_rng(11))
    g = np.random.default_rng(11)
    single = [keys.index(sample(psi, obs, g)[0]) for _ in range(200)]
    assert many.tolist() == single


def test_marginal_sums(fr, psi):
    d = joint_distribution(psi, [fr.observable("X"), fr.observable("Y")])
    m = marginal(d, [1])
    assert m.variables == ("Y",)
    assert m["ok"] == pytest.approx(1 / 6, abs=TOL)


def test_distribution_rejects_bad_totals():
    with pytest.raises(ValueError):
        Distribution(("x",), {("a",): 0.5, ("b",): 0.4})


def test_no_signaling_on_psi(fr, psi):
    o = fr.observables
    report = no_signaling_audit(psi, [o["A"], o["X"]], [o["B"], o["Y"]])
    assert report.passed
    assert report.max_deviation < TOL


@given(st.integers(0, 2**32 - 1))
def test_born_is_a_distribution(seed):
    rng = np.random.default_rng(seed)
    a, b = SystemSpec("a", 2, ("0", "1")), SystemSpec("b", 3, ("x", "y", "z"))
    s = random_state(rng, (a, b))
    oa = Observable.computational("A", a)
    ob = Observable.computational("B", b)
    d = joint_distribution(s, [oa, ob])
    assert d.total() == pytest.approx(1.0, abs=1e-12)
    assert all(0.0 <= p <= 1.0 for _, p in d.items())


@given(st.integers(0, 2**32 - 1))
def test_no_signaling_random_states(seed):
    rng = np.random.default_rng(seed)
    a, b = SystemSpec("a", 2, ("0", "1")), SystemSpec("b", 2, ("0", "1"))
    s = random_state(rng, (a, b))
    side = []
    for sys in (a, b):
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        side.append([
            Observable.computational(f"Z{sys.name}", sys),
            Observable.from_eigenstates(
                f"R{sys.name}",
                {"u": PureState((sys,), q[:, 0]), "v": PureState((sys,), q[:, 1])},
            ),
        ])
    assert no_signaling_audit(s, side[0], side[1]).max_deviation < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_lueders_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    a = SystemSpec("a", 3, ("x", "y", "z"))
    s = random_state(rng, (a,))
    obs = Observable.computational("A", a)
    lab, post = sample(s, obs, rng)
    again = condition_on_outcomes(post, [obs], (lab,))
    assert again.allclose(post, 1e-12)
