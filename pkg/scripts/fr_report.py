"""Full walk-through of the built-in Wigner's-friend scenario.

Prints the final state under both perspectives, the super-observer
tables, the possibilistic constraints and the valuation search.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from frsim.frames import fr_contradiction_report
from frsim.render import render
from frsim.scenario import event_probability, fr_scenario, run_deterministic


@dataclass
class Config:
    format: str = "text"
    tolerance: float = 1e-9


def main(cfg: Config) -> None:
    fr = fr_scenario()
    for name in ("superobserver", "observer"):
        print(render(run_deterministic(fr, name), cfg.format, cfg.tolerance))
    for name in ("observer", "superobserver"):
        p = event_probability(fr, name, [("X", "ok"), ("Y", "ok")])
        print(f"P(X=ok, Y=ok) [{name}] = {p:.6g}")
    print()
    print(render(fr_contradiction_report(cfg.tolerance), cfg.format, cfg.tolerance))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--format", choices=("text", "json"), default=Config.format)
    ap.add_argument("--tolerance", type=float, default=Config.tolerance)
    main(Config(**vars(ap.parse_args())))
