from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from frsim.cli import execute
from frsim.dsl import resources_dir

MALFORMED = Path(__file__).parent / "data" / "malformed"


def test_super_observer_event():
    out = execute(["run", "--scenario", "fr", "--perspective", "superobserver", "--event", "X=ok,Y=ok"])
    assert out.code == 0
    assert "0.0833333" in out.stdout


def test_observer_event():
    out = execute(["run", "--scenario", "fr", "--perspective", "observer", "--event", "X=ok,Y=ok"])
    assert out.stdout.strip().endswith("= 0.25")


def test_consistency_prints_unsat_trace():
    out = execute(["consistency", "--scenario", "fr"])
    assert out.code == 0
    assert "status: UNSAT" in out.stdout
    assert "X=ok => B=1" in out.stdout
    assert "Y=ok => A=h" in out.stdout
    assert "A=h & B=1 is forbidden" in out.stdout


def test_consistency_generic_path_agrees():
    out = execute(["consistency", "--scenario", "fr", "--observables", "A,B,X,Y", "--event", "X=ok,Y=ok"])
    assert out.code == 0
    assert "status: UNSAT" in out.stdout


def test_missing_file_exit_2(tmp_path):
    out = execute(["run", "--scenario", str(tmp_path / "missing.scn")])
    assert out.code == 2
    assert "not found" in out.stderr


def test_parse_error_reports_position():
    path = MALFORMED / "02_unnormalized.scn"
    out = execute(["parse", "--scenario", str(path)])
    assert out.code == 2
    assert f"{path}:4:1: error: state not normalized" in out.stderr


def test_parse_ok():
    out = execute(["parse", "--scenario", str(resources_dir() / "fr.scn")])
    assert out.code == 0 and out.stdout.startswith("ok:")


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["run"],
        ["run", "--scenario", "fr", "--nope"],
        ["run", "--scenario", "fr", "--event", "X"],
        ["run", "--scenario", "fr", "--event", "X=maybe"],
        ["run", "--scenario", "fr", "--perspective", "nobody"],
        ["run", "--scenario", "nothing"],
        ["run", "--scenario", "fr", "--format", "xml"],
    ],
)
def test_usage_errors_exit_2(argv):
    out = execute(argv)
    assert out.code == 2
    assert out.stderr


def test_unknown_subcommand_shows_usage():
    assert "usage:" in execute(["bogus"]).stderr


def test_impossible_conditioning_exit_1():
    out = execute(
        ["distribution", "--scenario", "fr", "--perspective", "superobserver", "--observables", "A", "--event", "X=ok,B=0"]
    )
    assert out.code == 1
    assert "impossible" in out.stderr


def test_conditioned_distribution():
    out = execute(
        ["distribution", "--scenario", "fr", "--perspective", "superobserver", "--observables", "Y", "--event", "X=ok", "--format", "json"]
    )
    data = json.loads(out.stdout)
    probs = {tuple(o["labels"]): o["probability"] for o in data["outcomes"]}
    # P(Y=ok | X=ok) = (1/12) / (1/6)
    assert probs[("ok",)] == pytest.approx(0.5, abs=1e-12)


def test_sampling_byte_identical():
    argv = ["run", "--scenario", "fr", "--perspective", "observer", "--samples", "5000", "--seed", "3", "--event", "X=ok,Y=ok"]
    a, b = execute(argv), execute(argv)
    assert a.code == 0
    assert a.stdout == b.stdout
    assert execute(argv[:-4] + ["--seed", "4"] + argv[-2:]).stdout != a.stdout


def test_chsh_default():
    out = execute(["chsh", "--format", "json"])
    assert json.loads(out.stdout)["S"] == pytest.approx(2 * 2**0.5, abs=1e-9)


def test_chsh_named_observables():
    out = execute(["chsh", "--scenario", "singlet", "--observables", "ZL,XL,ZR,XR", "--format", "json"])
    data = json.loads(out.stdout)
    assert data["correlators"][0] == pytest.approx(-1.0)
    assert data["S"] <= 2 * 2**0.5 + 1e-9


def test_nosignal_passes():
    out = execute(["nosignal", "--scenario", "fr", "--observables", "A,X,B,Y", "--format", "json"])
    data = json.loads(out.stdout)
    assert data["passed"] and data["max_deviation"] < 1e-9


def test_frames_lists_intertwinement():
    out = execute(["frames", "--scenario", "fr"])
    assert out.code == 0
    assert "(A,B) ~ (X,Y): only 0 and 1" in out.stdout


def test_frames_needs_single_branch():
    out = execute(["frames", "--scenario", "fr", "--perspective", "observer"])
    assert out.code == 1


def test_ensemble_json_round_trip():
    out = execute(["run", "--scenario", "fr", "--perspective", "observer", "--format", "json"])
    data = json.loads(out.stdout)
    assert [b["probability"] for b in data["branches"]] == pytest.approx([1 / 3] * 3, abs=1e-12)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "frsim", "run", "--scenario", "fr", "--perspective", "superobserver", "--event", "X=ok,Y=ok"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "0.0833333" in proc.stdout
