"""Sampled P(X=ok, Y=ok) against the exact value as the run count grows."""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from frsim.scenario import event_probability, fr_scenario, sample_runs


@dataclass
class Config:
    seed: int = 2024
    max_power: int = 6


def main(cfg: Config) -> None:
    fr = fr_scenario()
    obs = [fr.observable("X"), fr.observable("Y")]
    print(f"{'perspective':<14}{'n':>9}{'freq':>11}{'exact':>11}{'|err|':>11}{'3 sigma':>11}")
    for name in ("superobserver", "observer"):
        exact = event_probability(fr, name, [("X", "ok"), ("Y", "ok")])
        for k in range(2, cfg.max_power + 1):
            n = 10**k
            f = sample_runs(fr, name, n, cfg.seed, obs).frequency(("ok", "ok"))
            band = 3 * math.sqrt(exact * (1 - exact) / n)
            print(f"{name:<14}{n:>9}{f:>11.6f}{exact:>11.6f}{abs(f - exact):>11.2e}{band:>11.2e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--max-power", dest="max_power", type=int, default=Config.max_power)
    main(Config(**vars(ap.parse_args())))
