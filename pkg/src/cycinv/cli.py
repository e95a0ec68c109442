"""Command-line entry point.

Subcommands: gen-data (write a dataset file), train (run a config against a
dataset into a run directory, with the four ablation modes), eval (latent
probes and/or generator label scores from a run's checkpoint), synth
(interpolation grids and prior samples as PGM), selfcheck (gradient and
loss-oracle battery). Exit codes: 0 success, 1 environment/I-O, 2
usage/config.
"""

import argparse
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from . import data, evaluate
from . import model as model_mod
from . import selfcheck
from . import train as train_mod
from .config import ConfigError, load_config, serialize_config
from .serialize import FormatError

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2

ABLATIONS = {
    "fw": (False, False, False),
    "fw+z": (True, True, False),
    "fw+x": (True, False, True),
    "full": (True, True, True),
}

RUN_CONFIG_SNAPSHOT = "config.cfg"
RUN_CONFIG_EFFECTIVE = "config.effective.cfg"
RUN_CHECKPOINT = "checkpoint.cycc"
RUN_METRICS = "metrics.csv"


def _build_parser():
    p = argparse.ArgumentParser(prog="cycinv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a factored-shapes dataset file")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--classes", type=int, default=4)
    g.add_argument("--side", type=int, default=32)
    g.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train a model into a run directory")
    t.add_argument("--config", required=True)
    t.add_argument("--data", default=None, help="dataset file (falls back to data_path in the config)")
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--ablation", choices=sorted(ABLATIONS), default=None)

    e = sub.add_parser("eval", help="probe and/or GLS reports for a run")
    e.add_argument("--run", required=True)
    e.add_argument("--data", default=None)
    e.add_argument("--which", choices=("probes", "gls", "both"), default="both")

    s = sub.add_parser("synth", help="synthesize image grids from a run")
    s.add_argument("--run", required=True)
    s.add_argument("--out", required=True, help="output PGM path")
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--interpolate", nargs=4, type=int, default=None,
                      metavar=("X0_IDX", "X1_IDX", "Y0", "Y1"),
                      help="interpolate between two test images")
    mode.add_argument("--prior", action="store_true", help="decode latents drawn from the prior")
    s.add_argument("--steps", type=int, default=8, help="grid steps per axis (interpolation)")
    s.add_argument("--class", dest="cls", type=int, default=0, help="class code (prior mode)")
    s.add_argument("--n", type=int, default=16, help="sample count (prior mode)")

    sub.add_parser("selfcheck", help="run the gradient and loss-oracle battery")
    return p


def cmd_gen_data(args):
    ds = data.generate_dataset(args.n, args.classes, args.side, args.seed)
    data.save_dataset(args.out, ds)
    print(f"wrote {args.out}: n={len(ds)} classes={ds.n_s} side={ds.side} seed={ds.seed}")
    return EXIT_OK


def _resolve_data_path(explicit, cfg):
    path = explicit or cfg.data_path
    if not path:
        raise ConfigError("no dataset given: pass --data or set data_path in the config")
    return path


def _load_split(path, cfg):
    ds = data.load_dataset(path)
    return data.split(ds, cfg.train_fraction, seed=cfg.seed_data)


def cmd_train(args):
    cfg = load_config(args.config)
    data_path = _resolve_data_path(args.data, cfg)
    if args.ablation is not None:
        bw, z, x = ABLATIONS[args.ablation]
        cfg.enable_backward_cycle = bw
        cfg.enable_z_cycle = z
        cfg.enable_x_cycle = x
    cfg.data_path = str(data_path)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(args.config, out / RUN_CONFIG_SNAPSHOT)
    (out / RUN_CONFIG_EFFECTIVE).write_text(serialize_config(cfg), encoding="utf-8")

    train_ds, _ = _load_split(data_path, cfg)
    ckpt, rows = train_mod.train(train_ds, cfg)
    train_mod.write_metrics_csv(out / RUN_METRICS, rows)
    train_mod.save_checkpoint(out / RUN_CHECKPOINT, ckpt)

    for epoch in range(cfg.epochs):
        epoch_rows = [r for r in rows if r["epoch"] == epoch]
        if epoch_rows:
            means = {c: float(np.mean([r[c] for r in epoch_rows])) for c in train_mod.METRIC_COLUMNS}
            summary = " ".join(f"{k}={v:.4g}" for k, v in means.items())
            print(f"epoch {epoch}: {summary}")
    print(f"run directory {out} complete ({len(rows)} steps)")
    return EXIT_OK


def _load_run(run_dir):
    run = Path(run_dir)
    cfg = load_config(run / RUN_CONFIG_EFFECTIVE)
    ckpt = train_mod.load_checkpoint(run / RUN_CHECKPOINT)
    return run, cfg, ckpt


def cmd_eval(args):
    run, cfg, ckpt = _load_run(args.run)
    data_path = _resolve_data_path(args.data, cfg)
    train_ds, test_ds = _load_split(data_path, cfg)

    if args.which in ("probes", "both"):
        rows = evaluate.probe_report(ckpt.models, train_ds, test_ds, seed=cfg.seed_init)
        evaluate.write_report_csv(run / "probes_report.csv", rows)
        table = evaluate.format_report_table(rows)
        (run / "probes_report.txt").write_text(table, encoding="utf-8")
        print("latent probes (specified factor should sit near its chance baseline):")
        print(table)
    if args.which in ("gls", "both"):
        estimators = evaluate.train_estimators(train_ds, seed=cfg.seed_init)
        rows = evaluate.gls_report(ckpt.models, estimators, test_ds, seed=cfg.seed_codes)
        evaluate.write_report_csv(run / "gls_report.csv", rows)
        table = evaluate.format_report_table(rows)
        (run / "gls_report.txt").write_text(table, encoding="utf-8")
        print("generator label scores (categorical high, quantitative low):")
        print(table)
    return EXIT_OK


def _grid_dims(n):
    cols = max(1, math.isqrt(n))
    if cols * cols < n:
        cols += 1
    rows = (n + cols - 1) // cols
    return rows, cols


def cmd_synth(args):
    run, cfg, ckpt = _load_run(args.run)
    side = ckpt.models.side
    if args.interpolate is not None:
        if args.steps < 2:
            raise ConfigError("--steps must be >= 2")
        x0_idx, x1_idx, y0, y1 = args.interpolate
        _, test_ds = _load_split(_resolve_data_path(None, cfg), cfg)
        n = len(test_ds)
        for idx in (x0_idx, x1_idx):
            if not 0 <= idx < n:
                raise ConfigError(f"test-image index {idx} out of range [0, {n})")
        flat = test_ds.flat_images()
        grid = evaluate.interpolate(
            ckpt.models, flat[x0_idx], flat[x1_idx], y0, y1,
            steps_c=args.steps, steps_z=args.steps,
        )
        images = grid.reshape(-1, side, side)
        evaluate.export_grid_pgm(images, args.steps, args.steps, args.out)
        print(f"wrote {args.out}: {args.steps}x{args.steps} interpolation grid")
    else:
        if args.n < 1:
            raise ConfigError("--n must be >= 1")
        samples = evaluate.sample_prior(ckpt.models, args.cls, args.n, seed=cfg.seed_reparam)
        rows, cols = _grid_dims(args.n)
        images = np.ones((rows * cols, side, side), dtype=np.float32)
        images[: args.n] = samples.reshape(-1, side, side)
        evaluate.export_grid_pgm(images, rows, cols, args.out)
        print(f"wrote {args.out}: {args.n} prior samples of class {args.cls}")
    return EXIT_OK


def cmd_selfcheck(args):
    results = selfcheck.run_all()
    print(selfcheck.format_results(results))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_IO


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    handler = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "eval": cmd_eval,
        "synth": cmd_synth,
        "selfcheck": cmd_selfcheck,
    }[args.command]
    try:
        return handler(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
