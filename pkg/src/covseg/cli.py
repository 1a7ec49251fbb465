"""Command line interface: ``segment``, ``bench`` and ``eval``.

Flags mirror :class:`~covseg.pipeline.PipelineConfig` fields. A JSON or
YAML file passed with ``--config`` may set any field; explicit flags win.
Exit codes: 0 success, 1 input error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .io import InputError, export_outputs, ingest_groundtruth, read_image, read_label_map
from .metrics import EvalReport, best_over_groundtruths, format_table
from .pipeline import PipelineConfig, run_benchmark, run_image
from .superpixels import layer_from_labels

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

CONFIG_FLAGS = {
    "feature_set": str, "backend": str, "sigma": float, "alpha": float, "self_link": float,
    "default_lambda": float, "k_min": int, "k_max": int, "fixed_k": int, "knn": int,
    "seed": int, "eps_spd": float, "rank_tol": float, "lrr_max_iters": int,
    "voi_base": float, "truth_aggregate": str, "best_k": str,
}


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read config ({exc})") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a mapping")
    return data


def _add_config_flags(p: argparse.ArgumentParser, multi: bool = False) -> None:
    p.add_argument("--config", help="JSON/YAML file with PipelineConfig fields")
    for name, typ in CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if multi and name in ("feature_set", "backend"):
            p.add_argument(flag, dest=name, nargs="+", default=None,
                           help="one or more values; every combination is benchmarked")
        else:
            p.add_argument(flag, dest=name, type=typ, default=None)
    p.add_argument("--lambda-grid", dest="lambda_grid", type=float, nargs="+", default=None)
    p.add_argument("--no-lrr-normalize", dest="lrr_normalize", action="store_false",
                   default=None, help="feed raw descriptors to LRR")


def _config_fields(args) -> dict:
    fields = load_config_file(args.config) if args.config else {}
    for name in list(CONFIG_FLAGS) + ["lambda_grid", "lrr_normalize"]:
        val = getattr(args, name, None)
        if val is not None:
            fields[name] = val
    return fields


def build_config(args) -> PipelineConfig:
    return PipelineConfig.from_dict(_config_fields(args))


def _print_report(rep: EvalReport, label: str) -> None:
    print(format_table({label: rep}), end="")


def cmd_segment(args) -> int:
    config = build_config(args)
    if args.k:
        config = PipelineConfig.from_dict({**config.to_dict(), "k_min": min(args.k),
                                           "k_max": max(args.k), "fixed_k": None})
    image = read_image(args.image)
    truths = ingest_groundtruth(args.truth, image.shape[:2]) if args.truth else None
    layers = None
    if args.superpixels:
        layers = [layer_from_labels(read_label_map(p), i, tag=f"import:{p}")
                  for i, p in enumerate(args.superpixels)]
        for l in layers:
            if l.shape != image.shape[:2]:
                raise InputError("superpixel label map does not match the image size")
    res = run_image(image, config, truths, layers=layers)
    wanted = set(args.k) if args.k else set(res.labels)
    stem = Path(args.image).stem
    for k in sorted(wanted & set(res.labels)):
        export_outputs(res.labels[k], image, Path(args.out), f"{stem}_k{k:02d}")
    print(f"wrote {len(wanted & set(res.labels))} segmentations to {args.out}")
    if res.lam is not None:
        print(f"lambda = {res.lam:g}")
    if res.best is not None:
        _print_report(res.best, config.label)
    return EXIT_OK


def _read_reference(path) -> dict:
    rows = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        cells = [c.strip() for c in line.replace(",", "\t").split("\t") if c.strip()]
        if not cells or cells[0].lower() == "algorithm":
            continue
        try:
            pri, voi, gce, bde = (float(c) for c in cells[1:5])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: expected algorithm,PRI,VoI,GCE,BDE") from exc
        rows[cells[0]] = EvalReport(pri, voi, gce, bde)
    return rows


def cmd_bench(args) -> int:
    base = _config_fields(args)
    fsets = base.pop("feature_set", None) or ["CovII"]
    backs = base.pop("backend", None) or ["rbf"]
    fsets = [fsets] if isinstance(fsets, str) else fsets
    backs = [backs] if isinstance(backs, str) else backs
    configs = [PipelineConfig.from_dict({**base, "feature_set": f, "backend": b})
               for f in fsets for b in backs]
    res = run_benchmark(args.images, args.truths, configs, cache_dir=args.cache,
                        workers=args.workers)
    reference = _read_reference(args.reference) if args.reference else None
    table = res.table(reference, delimiter="\t" if args.delimiter == "tab" else args.delimiter)
    if args.out:
        Path(args.out).write_text(table)
    print(table, end="")
    for name in res.skipped:
        print(f"warning: skipped {name} (no usable ground truth)", file=sys.stderr)
    if args.per_image:
        rows = ["algorithm\timage\tPRI\tVoI\tGCE\tBDE\tlambda"]
        for label, reps in res.per_image.items():
            for stem, r in reps.items():
                lam = res.lambdas[label].get(stem)
                rows.append(f"{label}\t{stem}\t{r.pri:.4f}\t{r.voi:.4f}\t{r.gce:.4f}\t"
                            f"{r.bde:.4f}\t{'' if lam is None else f'{lam:g}'}")
        Path(args.per_image).write_text("\n".join(rows) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    cand = read_label_map(args.candidate)
    truths = ingest_groundtruth(args.truth, cand.shape)
    rep = best_over_groundtruths(cand, truths, args.aggregate, args.voi_base)
    _print_report(rep, Path(args.candidate).stem)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covseg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("segment", help="segment one image")
    s.add_argument("image")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--k", type=int, nargs="+", help="segment counts to export (default: sweep)")
    s.add_argument("--truth", nargs="+", help="ground-truth files for scoring")
    s.add_argument("--superpixels", nargs="+",
                   help="precomputed superpixel label maps used instead of the generators")
    _add_config_flags(s)
    s.set_defaults(func=cmd_segment)

    b = sub.add_parser("bench", help="benchmark a directory of images")
    b.add_argument("images")
    b.add_argument("truths")
    b.add_argument("--out", help="write the table here as well as to stdout")
    b.add_argument("--per-image", help="write per-image best reports here")
    b.add_argument("--cache", help="per-image result cache directory")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--reference", help="delimited rows algorithm,PRI,VoI,GCE,BDE to rank against")
    b.add_argument("--delimiter", default="tab")
    _add_config_flags(b, multi=True)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("eval", help="score a label map against ground truth")
    e.add_argument("candidate")
    e.add_argument("truth", nargs="+")
    e.add_argument("--aggregate", choices=("mean", "best"), default="mean")
    e.add_argument("--voi-base", type=float, default=2.0)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    # LinAlgError subclasses ValueError, so it must be caught first
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
