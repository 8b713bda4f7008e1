from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frsim.errors import StructureError
from frsim.linalg import OperatorMatrix, PureState, SystemSpec
from frsim.measurement import Observable
from frsim.scenario import (
    Measure,
    Perspective,
    Prepare,
    Scenario,
    Step,
    Unitary,
    ensemble_distribution,
    event_probability,
    fr_scenario,
    run_deterministic,
    run_uniforms,
    sample_run,
    sample_runs,
    scenario_diff,
)

TOL = 1e-9
R3 = 1 / math.sqrt(3)


def test_superobserver_state(fr):
    (b,) = run_deterministic(fr, "superobserver")
    assert b.probability == 1.0
    assert b.record == {}
    for labels in [("h", "0"), ("t", "0"), ("t", "1")]:
        assert b.state.amplitude(*labels) == pytest.approx(R3, abs=TOL)
    assert abs(b.state.amplitude("h", "1")) < TOL


def test_observer_branches(fr):
    e = run_deterministic(fr, "observer")
    assert [tuple(b.record.values()) for b in e] == [("h", "0"), ("t", "0"), ("t", "1")]
    for b in e:
        assert b.probability == pytest.approx(1 / 3, abs=TOL)
        assert b.state.allclose(PureState.basis(fr.systems, tuple(b.record.values())))


def test_event_probability_clash(fr):
    event = [("X", "ok"), ("Y", "ok")]
    assert event_probability(fr, "observer", event) == pytest.approx(1 / 4, abs=TOL)
    assert event_probability(fr, "superobserver", event) == pytest.approx(1 / 12, abs=TOL)


def test_observer_xy_table_is_product_mixture(fr):
    d = ensemble_distribution(fr, "observer", [fr.observable("X"), fr.observable("Y")])
    for key in d:
        assert d[key] == pytest.approx(0.25, abs=TOL)


def test_unknown_perspective(fr):
    with pytest.raises(StructureError):
        run_deterministic(fr, "nobody")


def test_perspective_must_name_measure_steps(fr):
    with pytest.raises(StructureError):
        Scenario(fr.systems, fr.initial, fr.steps, (Perspective("bad", {"alice_prepares"}),), fr.observables)


def test_control_collapsed_in_other_basis_is_rejected(fr):
    # measuring X on the coin then conditioning U on the coin record is ill-defined
    steps = (Step("look", Measure("Alice", fr.observable("X"))),) + fr.steps[1:2]
    s = Scenario(fr.systems, fr.initial, steps, (Perspective("p", {"look"}),), fr.observables)
    with pytest.raises(StructureError):
        run_deterministic(s, "p")


def test_prepare_requires_unentangled_target(fr):
    q = fr.systems[1]
    fresh = PureState.basis((q,), ("1",))
    steps = fr.steps + (Step("reset", Prepare("qubit", fresh, "one")),)
    s = Scenario(fr.systems, fr.initial, steps, fr.perspectives, fr.observables)
    with pytest.raises(StructureError, match="entangled"):
        run_deterministic(s, "superobserver")
    for b in run_deterministic(s, "observer"):
        assert b.state.amplitude(b.record["alice_measures"], "1") == pytest.approx(1.0)


def test_plain_unitary_step():
    q = SystemSpec("q", 2, ("0", "1"))
    x = OperatorMatrix((q,), np.array([[0, 1], [1, 0]]))
    z = Observable.computational("Z", q)
    s = Scenario(
        (q,),
        PureState.basis((q,), ("0",)),
        (Step("flip", Unitary(x, "X")), Step("look", Measure("A", z))),
        (Perspective("p", {"look"}),),
        {"Z": z},
    )
    (b,) = run_deterministic(s, "p")
    assert b.record == {"look": "1"}


def test_run_uniforms_chunking_invariant():
    whole = run_uniforms(3, 1, 0, 50)
    parts = np.concatenate([run_uniforms(3, 1, a, min(50, a + 7)) for a in range(0, 50, 7)])
    assert np.array_equal(whole, parts)
    assert not np.array_equal(whole, run_uniforms(3, 2, 0, 50))


def test_sample_runs_chunk_size_irrelevant(fr):
    obs = [fr.observable("X"), fr.observable("Y")]
    a = sample_runs(fr, "observer", 5000, 9, obs)
    b = sample_runs(fr, "observer", 5000, 9, obs, chunk_size=333)
    assert a == b


def test_sample_runs_matches_scalar_reference(fr):
    obs = [fr.observable("X"), fr.observable("Y")]
    n = 300
    table = sample_runs(fr, "observer", n, 4, obs)
    counts = dict.fromkeys(table.outcomes, 0)
    for i in range(n):
        _, labels = sample_run(fr, "observer", 4, i, obs)
        counts[labels] += 1
    assert tuple(counts[o] for o in table.outcomes) == table.counts


def test_sampling_reproducible_and_seed_sensitive(fr):
    obs = [fr.observable("X"), fr.observable("Y")]
    a = sample_runs(fr, "superobserver", 20000, 1, obs)
    b = sample_runs(fr, "superobserver", 20000, 1, obs)
    c = sample_runs(fr, "superobserver", 20000, 2, obs)
    assert a.counts == b.counts
    assert a.counts != c.counts
    assert sum(a.counts) == 20000


def test_scenario_diff_detects_changes(fr):
    assert scenario_diff(fr, fr_scenario()) is None
    other = Scenario(fr.systems, fr.initial, fr.steps[:2], (Perspective("p"),), fr.observables)
    assert "step" in scenario_diff(fr, other)


@given(st.floats(0.01, math.pi / 2 - 0.01))
def test_bias_family_clash(theta):
    # coin prepared as cos|h> + sin|t>: the observer value stays at 1/4
    fr = fr_scenario()
    initial = PureState.from_terms(fr.systems, {("h", "0"): math.cos(theta), ("t", "0"): math.sin(theta)})
    s = Scenario(fr.systems, initial, fr.steps, fr.perspectives, fr.observables)
    ev = [("X", "ok"), ("Y", "ok")]
    e = run_deterministic(s, "observer")
    assert sum(b.probability for b in e) == pytest.approx(1.0)
    assert event_probability(s, "observer", ev) == pytest.approx(0.25, abs=1e-9)
    assert 0.0 <= event_probability(s, "superobserver", ev) <= 1.0


@given(st.integers(0, 2**31 - 1), st.integers(1, 400))
def test_frequencies_sum_to_n(seed, n):
    fr = fr_scenario()
    t = sample_runs(fr, "observer", n, seed, [fr.observable("A"), fr.observable("B")])
    assert sum(t.counts) == n
    assert t.count(("h", "1")) == 0
