"""Project noisy copies of the intro traces onto the 45-degree line and print
a text histogram of the crossing positions."""
import argparse
import math
from dataclasses import dataclass

from logidist.project import LineProjection, dimred
from logidist.specdsl import phi_ex
from logidist.synthetic import intro_traces
from logidist.trace import augment_noise


@dataclass
class Config:
    copies: int = 100
    stddev: float = 0.3
    bins: int = 20
    angle: float = math.pi / 4


def main(cfg: Config) -> None:
    noisy = [v for i, t in enumerate(intro_traces()) for v in augment_noise(t, cfg.copies, seed=i, stddev=cfg.stddev)]
    r = dimred(phi_ex(), noisy, LineProjection.from_angles(cfg.angle), bins=cfg.bins)
    width = max(r.counts.max(), 1)
    for lo, c in zip(r.edges[:-1], r.counts):
        print(f"{lo:5.2f} {'#' * int(60 * c / width)} {c}")
    print(f"{r.absent} of {len(noisy)} traces miss the line")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for name, default in vars(Config()).items():
        ap.add_argument(f"--{name}", type=type(default), default=default)
    main(Config(**vars(ap.parse_args())))
