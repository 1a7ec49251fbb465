"""Benchmark a BSDS300-style subset.

Expects the usual layout, e.g.

    BSDS300/images/test/<id>.jpg
    BSDS300/human/color/<user>/<id>.seg

and prints the four-metric table with average ranks. Published rows can be
passed with --reference (CSV: algorithm,PRI,VoI,GCE,BDE) to rank against.

    python3 scripts/run_bsds_subset.py BSDS300 --split test --limit 10 --workers 4
"""

import argparse
import itertools
import logging
import shutil
import tempfile
from pathlib import Path

from covseg.cli import _read_reference
from covseg.pipeline import PipelineConfig, find_images, run_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root", type=Path)
    ap.add_argument("--split", default="test")
    ap.add_argument("--limit", type=int, help="use only the first N images")
    ap.add_argument("--feature-sets", nargs="+", default=["CovI", "CovII", "CovIII"])
    ap.add_argument("--backends", nargs="+", default=["rbf", "lrr"])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--cache", type=Path)
    ap.add_argument("--reference", type=Path)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    image_dir = args.root / "images" / args.split
    truth_dir = args.root / "human"
    with tempfile.TemporaryDirectory() as tmp:
        if args.limit:
            subset = Path(tmp)
            for p in find_images(image_dir)[: args.limit]:
                shutil.copy(p, subset / p.name)
            image_dir = subset
        configs = [PipelineConfig(feature_set=f, backend=b)
                   for f, b in itertools.product(args.feature_sets, args.backends)]
        res = run_benchmark(image_dir, truth_dir, configs, cache_dir=args.cache,
                            workers=args.workers)
    ref = _read_reference(args.reference) if args.reference else None
    table = res.table(ref)
    print(table, end="")
    if res.skipped:
        print("skipped:", ", ".join(res.skipped))
    if args.out:
        args.out.write_text(table)


if __name__ == "__main__":
    main()
