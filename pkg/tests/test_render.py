from __future__ import annotations

import json

import pytest

from frsim.frames import fr_contradiction_report
from frsim.measurement import joint_distribution
from frsim.render import fmt_prob, render
from frsim.scenario import ensemble_distribution, run_deterministic, sample_runs


def _xy(fr, psi):
    return joint_distribution(psi, [fr.observable("X"), fr.observable("Y")])


def test_text_distribution(fr, psi):
    text = render(_xy(fr, psi))
    lines = text.splitlines()
    assert lines[0].split() == ["X", "Y", "P"]
    assert lines[1].split() == ["ok", "ok", "0.0833333"]
    assert lines[4].split() == ["fail", "fail", "0.75"]


def test_exact_zero_prints_bare(fr, psi):
    d = joint_distribution(psi, [fr.observable("X"), fr.observable("B")])
    row = render(d).splitlines()[1].split()
    assert row == ["ok", "0", "0"]


def test_fmt_prob():
    assert fmt_prob(3e-17) == "0"
    assert fmt_prob(1 / 3) == "0.333333"
    assert fmt_prob(2e-9) == "2e-09"


def test_json_full_precision(fr, psi):
    data = json.loads(render(_xy(fr, psi), "json"))
    first = data["outcomes"][0]
    assert first["labels"] == ["ok", "ok"]
    assert first["probability"] == pytest.approx(1 / 12, abs=1e-15)


def test_deterministic_bytes(fr, psi):
    for report in (_xy(fr, psi), run_deterministic(fr, "observer"), fr_contradiction_report()):
        for fmt in ("text", "json"):
            assert render(report, fmt) == render(report, fmt)


def test_json_matches_memory(fr):
    e = run_deterministic(fr, "observer")
    data = json.loads(render(e, "json"))
    for b, jb in zip(e, data["branches"]):
        assert jb["record"] == b.record
        assert abs(jb["probability"] - b.probability) <= 1e-12
        amps = [complex(re, im) for re, im in jb["state"]["amplitudes"]]
        assert max(abs(x - y) for x, y in zip(amps, b.state.amplitudes)) <= 1e-12

    r = fr_contradiction_report()
    data = json.loads(render(r, "json"))
    assert data["valuation"]["status"] == "UNSAT"
    assert [t["text"] for t in data["valuation"]["trace"]] == [str(d) for d in r.result.trace]
    for jd, d in zip(data["distributions"], r.distributions):
        for o in jd["outcomes"]:
            assert abs(o["probability"] - d[tuple(o["labels"])]) <= 1e-12


def test_json_keys_sorted(fr):
    text = render(ensemble_distribution(fr, "observer", [fr.observable("A")]), "json")
    data = json.loads(text)
    assert text == json.dumps(data, sort_keys=True, indent=2) + "\n"


def test_frequency_table(fr):
    t = sample_runs(fr, "observer", 1000, 0, [fr.observable("A")])
    text = render(t)
    assert "1000 runs, seed 0" in text
    data = json.loads(render(t, "json"))
    assert sum(o["count"] for o in data["outcomes"]) == 1000


def test_unknown_format(fr, psi):
    with pytest.raises(ValueError):
        render(_xy(fr, psi), "yaml")
