"""Command-line entry points: make-data, train, matrix, figure, serve."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data_io, digits
from .models import GenerationConfig, generate
from .tensor import Tensor
from .training import TrainConfig, train_gan, generator_from_checkpoint
from .variety import DEFAULT_P_GRID, ExperimentMatrix, run_matrix

log = logging.getLogger("dropgen")

_PLACEMENTS = {"all": "all-hidden", "first": "first-hidden-only"}


def _load_models(models_dir) -> dict:
    """p_train -> (generator, latent_dim) from every *.ckpt in a directory."""
    models = {}
    for path in sorted(Path(models_dir).glob("*.ckpt")):
        ckpt = data_io.load_checkpoint(path)
        gen, spec = generator_from_checkpoint(ckpt)
        models[float(ckpt.train_config["p_train"])] = (gen, spec.latent_dim)
    return models


def cmd_make_data(args):
    images_path, labels_path = digits.write_digits_corpus(
        args.out, count=args.count, seed=args.seed)
    log.info("wrote %s and %s", images_path, labels_path)


def cmd_train(args):
    dataset = data_io.load_mnist_idx(args.data)
    cfg = TrainConfig(p_train=args.p_train, epochs=args.epochs,
                      batch_size=args.batch, seed=args.seed,
                      dataset_slice=args.slice)
    ckpt, tlog = train_gan(cfg, dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data_io.save_checkpoint(ckpt, out)
    out.with_suffix(".log.json").write_text(tlog.to_json() + "\n")
    log.info("trained p_train=%.1f: %d steps, final g_loss=%.3f d_loss=%.3f -> %s",
             args.p_train, tlog.steps, tlog.g_loss[-1], tlog.d_loss[-1], out)


def cmd_matrix(args):
    models = _load_models(args.models)
    matrix = ExperimentMatrix(
        train_grid=tuple(sorted(models)),
        scaling=args.scaling, placement=_PLACEMENTS[args.placement],
        n_latents=args.n, repeats=args.r, master_seed=args.seed)
    report = run_matrix(matrix, models, out_dir=args.out,
                        metadata={"models_dir": str(args.models)})
    log.info("matrix done: %d cells -> %s", len(report.cells), args.out)


def cmd_figure(args):
    """3 repeats x len(grid) dropout rates for one latent, as in the paper's
    qualitative grids."""
    ckpt = data_io.load_checkpoint(args.ckpt)
    gen, spec = generator_from_checkpoint(ckpt)
    grid = list(DEFAULT_P_GRID)
    rows = args.repeats
    ss = np.random.SeedSequence(args.seed)
    z = Tensor(np.random.default_rng(ss.spawn(1)[0])
               .standard_normal((1, spec.latent_dim)).astype(np.float32))
    images = []
    for rep in range(rows):
        for p in grid:
            p_scale = p if args.scaling == "matched" else 0.0
            cfg = GenerationConfig(p, p_scale, _PLACEMENTS[args.placement])
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, rep, int(p * 10)]))
            images.append(generate(gen, z, cfg, None if cfg.is_noiseless else rng).data[0])
    data_io.save_image_grid(np.stack(images), rows, len(grid), args.out)
    log.info("figure grid -> %s", args.out)


def cmd_serve(args):
    import uvicorn
    from .serve import create_app
    port = int(os.environ.get("DROPGEN_PORT", args.port))
    app = create_app(models_dir=args.models)
    uvicorn.run(app, host=args.host, port=port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dropgen")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("make-data", help="synthesize the desk-scale digit corpus")
    d.add_argument("--out", required=True)
    d.add_argument("--count", type=int, default=5000)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_make_data)

    t = sub.add_parser("train", help="train one GAN")
    t.add_argument("--p-train", type=float, required=True, dest="p_train")
    t.add_argument("--epochs", type=int, default=5)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--slice", type=int, default=5000)
    t.add_argument("--data", required=True, help="IDX image file")
    t.add_argument("--out", required=True, help="checkpoint output path")
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("matrix", help="run the variety experiment matrix")
    m.add_argument("--models", required=True, help="directory of *.ckpt files")
    m.add_argument("--scaling", choices=["matched", "none"], default="matched")
    m.add_argument("--placement", choices=["all", "first"], default="all")
    m.add_argument("--n", type=int, default=100)
    m.add_argument("--r", type=int, default=10)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_matrix)

    f = sub.add_parser("figure", help="render a repeats x dropout-rates image grid")
    f.add_argument("--ckpt", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--repeats", type=int, default=3)
    f.add_argument("--scaling", choices=["matched", "none"], default="matched")
    f.add_argument("--placement", choices=["all", "first"], default="all")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_figure)

    s = sub.add_parser("serve", help="serve trained models over HTTP")
    s.add_argument("--models", required=True)
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--host", default="127.0.0.1")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    sys.exit(main())
