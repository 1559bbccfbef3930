"""Synthetic traffic case study across several seeds; prints stage counts and
refinement errors per seed."""
import argparse

from logidist.config import PipelineConfig
from logidist.pipeline import run_casestudy


def main(seeds, out_dir=None) -> None:
    for seed in seeds:
        cfg = PipelineConfig(seed=seed)
        cfg.validate()
        rep = run_casestudy(cfg, out_dir=f"{out_dir}/seed{seed}" if out_dir else None).report
        print(f"seed {seed}: {rep['stages']} FN={rep['false_negatives']} FP={rep['false_positives']}")
        for s in rep["label_specs"]:
            print(f"  {s}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--out-dir")
    a = ap.parse_args()
    main(a.seeds, a.out_dir)
