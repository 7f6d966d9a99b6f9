"""Command line entry point: ``dnlpos {synth,split,baseline,train,predict,evaluate}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Results go to
files; progress lines go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import fingerprints as fpstore
from .metrics import compute_report, emit_comparison
from .model import TrainingConfig, load_checkpoint, save_checkpoint, train
from .neighborhood import ReferenceSet, predict_all
from .synth import RadioMapConfig, generate, inject_outliers, write_radio_map

log = logging.getLogger("dnlpos")


class CliError(Exception):
    pass


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def fraction(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"batch sizes must be positive, got {text!r}")
    return vals


def echo_config(args, out_dir) -> None:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load_split_data(args):
    if not Path(args.input).is_dir():
        raise CliError(f"input directory not found: {args.input}")
    fps = fpstore.load_dataset_dir(args.input)
    split = fpstore.DatasetSplit.load(args.split)
    train_fps, val_fps, test_fps = split.select(fps)
    if getattr(args, "outliers", 0.0):
        train_fps, ids = inject_outliers(train_fps, args.outliers, args.outlier_seed)
        log.info("corrupted %d training labels", len(ids))
    return train_fps, val_fps, test_fps


def _baseline_reports(train_fps, test_fps, k):
    index = fpstore.build_wap_index(train_fps)
    truth = np.array([f.position for f in test_fps])
    return [compute_report(predict_all(m, test_fps, train_fps, k, index), truth, m.upper())
            for m in ("knn", "wknn")]


def cmd_synth(args):
    cfg = RadioMapConfig(width=args.width, height=args.height, n_waps=args.waps, n_fps=args.fps,
                         p0=args.p0, eta=args.eta, sigma=args.sigma, threshold=args.threshold,
                         seed=args.seed, floor=args.floor, grid=args.grid)
    fps, waps = generate(cfg)
    write_radio_map(fps, waps, args.output)
    echo_config(args, args.output)
    log.info("wrote %d fingerprints and %d WAPs to %s", len(fps), len(waps), args.output)


def cmd_split(args):
    if not Path(args.input).is_dir():
        raise CliError(f"input directory not found: {args.input}")
    fps = fpstore.load_dataset_dir(args.input)
    split = fpstore.split_dataset(fps, args.seed)
    out = Path(args.output) if args.output else Path(args.input) / "split.json"
    split.save(out)
    echo_config(args, out.parent)
    log.info("split %d/%d/%d -> %s", len(split.train), len(split.validation), len(split.test), out)


def cmd_baseline(args):
    train_fps, _, test_fps = _load_split_data(args)
    reports = _baseline_reports(train_fps, test_fps, args.k)
    out = Path(args.output or args.input)
    emit_comparison(reports, out, title=f"Baselines (k={args.k})")
    echo_config(args, out)


def cmd_train(args):
    train_fps, val_fps, _ = _load_split_data(args)
    cfg = TrainingConfig(k=args.k, batch_sizes=tuple(args.batch_sizes), epochs=args.epochs,
                         initial_lr=args.lr, seed=args.seed, jobs=args.jobs)
    model, tlog = train(train_fps, val_fps, cfg)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    tlog.write_csv(out.with_name(out.stem + "_log.csv"))
    if tlog.failures:
        log.warning("failed runs: %s", tlog.failures)
    if args.dump_graphs:
        _dump_graphs(model, train_fps, val_fps, cfg.k, Path(args.dump_graphs))
    echo_config(args, out.parent)
    log.info("best val loss %.6g (batch %s, epoch %s) -> %s", tlog.best_val_loss,
             tlog.best_batch_size, tlog.best_epoch, out)


def _dump_graphs(model, train_fps, val_fps, k, directory):
    from .model import community_graphs

    directory.mkdir(parents=True, exist_ok=True)
    ref = ReferenceSet(train_fps, model.wap_index)
    for kind, fps, excl in (("train", train_fps, True), ("val", val_fps, False)):
        for fp, g in zip(fps, community_graphs(fps, ref, k, model.norm, labeled=(kind == "train"), exclude_self=excl)):
            g.dump(directory / f"{kind}_{fp.fp_id}.json")


def cmd_predict(args):
    model = load_checkpoint(args.model)
    if not model.reference:
        raise CliError(f"{args.model} carries no reference fingerprints")
    obs = fpstore.read_observations(args.scans)
    ref_ids = {f.fp_id for f in model.reference}
    clash = sorted(set(obs) & ref_ids)
    if clash:
        raise CliError(f"scan fp_id {clash[0]} collides with a reference fingerprint id")
    scans = [fpstore.Fingerprint(fid, 0, (0.0, 0.0), o) for fid, o in sorted(obs.items())]
    pred = model.predict_many(scans, model.reference)
    out = Path(args.output) if args.output else Path(args.scans).with_name("positions.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fp_id", "x", "y"])
        for s, (x, y) in zip(scans, pred):
            w.writerow([s.fp_id, repr(float(x)), repr(float(y))])
    echo_config(args, out.parent)


def cmd_evaluate(args):
    train_fps, _, test_fps = _load_split_data(args)
    model = load_checkpoint(args.model)
    truth = np.array([f.position for f in test_fps])
    reports = _baseline_reports(train_fps, test_fps, args.k) if args.baselines else []
    reports.append(compute_report(model.predict_many(test_fps, train_fps), truth, "DNL"))
    out = Path(args.output or args.input)
    emit_comparison(reports, out)
    echo_config(args, out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dnlpos", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic radio map")
    s.add_argument("-o", "--output", required=True, type=Path)
    s.add_argument("--fps", type=positive_int, default=2000)
    s.add_argument("--waps", type=positive_int, default=60)
    s.add_argument("--width", type=float, default=100.0)
    s.add_argument("--height", type=float, default=80.0)
    s.add_argument("--p0", type=float, default=-30.0)
    s.add_argument("--eta", type=float, default=3.0)
    s.add_argument("--sigma", type=float, default=4.0)
    s.add_argument("--threshold", type=float, default=-95.0)
    s.add_argument("--floor", type=int, default=1)
    s.add_argument("--grid", action="store_true", help="place fingerprints on a regular grid")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="6:2:2 train/validation/test split")
    s.add_argument("-i", "--input", required=True, type=Path)
    s.add_argument("-o", "--output", type=Path, help="default: <input>/split.json")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_split)

    def data_args(s, with_k=True):
        s.add_argument("-i", "--input", required=True, type=Path)
        s.add_argument("--split", required=True, type=Path)
        if with_k:
            s.add_argument("--k", type=positive_int, default=10)
        s.add_argument("--outliers", type=fraction, default=0.0,
                       help="fraction of training labels to replace with random positions")
        s.add_argument("--outlier-seed", type=int, default=0)

    s = sub.add_parser("baseline", help="KNN and WKNN on the test split")
    data_args(s)
    s.add_argument("-o", "--output", type=Path, help="report directory (default: input)")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("train", help="train the graph model (batch-size sweep)")
    data_args(s)
    s.add_argument("-o", "--output", required=True, type=Path, help="checkpoint path")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=positive_int, default=100)
    s.add_argument("--batch-sizes", type=int_list, default=[64, 128, 256])
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--jobs", type=positive_int, default=1)
    s.add_argument("--dump-graphs", type=Path, help="write one JSON file per community graph here")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="positions for unlabeled scans")
    s.add_argument("--model", required=True, type=Path)
    s.add_argument("--scans", required=True, type=Path, help="CSV with header fp_id,mac,rss_dbm")
    s.add_argument("-o", "--output", type=Path, help="default: positions.csv next to the scans")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="report for the trained model (and baselines)")
    data_args(s)
    s.add_argument("--model", required=True, type=Path)
    s.add_argument("--baselines", action="store_true")
    s.add_argument("-o", "--output", type=Path, help="report directory (default: input)")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (CliError, OSError, ValueError, RuntimeError) as e:
        print(f"dnlpos {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
