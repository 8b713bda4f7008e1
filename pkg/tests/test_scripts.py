from __future__ import annotations

import runpy
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


@pytest.mark.parametrize(
    "script, args, needle",
    [
        ("fr_report.py", [], "status: UNSAT"),
        ("mc_convergence.py", ["--max-power", "3"], "observer"),
        ("tsirelson_sweep.py", ["--n", "50"], "bound 2*sqrt(2)"),
    ],
)
def test_script_runs(script, args, needle, monkeypatch, capsys):
    monkeypatch.setattr(sys, "argv", [script, *args])
    runpy.run_path(str(SCRIPTS / script), run_name="__main__")
    assert needle in capsys.readouterr().out
