"""Distance matrix and 3-way clustering of the six intro speed profiles."""
import argparse
from dataclasses import dataclass

from logidist.distance import distance_matrix
from logidist.learn import agglomerative
from logidist.project import extract_label_spec, optimize_projection_pair
from logidist.specdsl import phi_ex
from logidist.synthetic import intro_traces


@dataclass
class Config:
    delta: float = 0.02
    k: int = 3
    linkage: str = "complete"


def main(cfg: Config) -> None:
    spec = phi_ex()
    traces = intro_traces()
    dm = distance_matrix(spec, traces, cfg.delta)
    print("pair  lo      hi")
    for i, j, iv in dm.pairs:
        print(f"{i}-{j}   {iv.lo:.4f}  {iv.hi:.4f}")
    lab = agglomerative(dm.array("mid"), cfg.k, cfg.linkage, dm.ids)
    by_id = {t.id: t for t in traces}
    groups = {k: [by_id[i] for i in lab.members(k)] for k in range(lab.k)}
    for k, members in groups.items():
        print(f"label {k}: {[t.id for t in members]}")
    first, second = optimize_projection_pair(spec, groups)
    for ch in (first, second):
        print(f"line at {ch.line.angles[0]:.4f} rad, separation {ch.score:.4f}")
        for k, box in ch.boxes.items():
            print(f"  label {k}: {extract_label_spec(spec, box).render()}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=Config.delta)
    ap.add_argument("--k", type=int, default=Config.k)
    ap.add_argument("--linkage", default=Config.linkage)
    main(Config(**vars(ap.parse_args())))
