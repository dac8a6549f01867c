"""Command-line experiment harness.

Subcommands: simulate (observations only), reconstruct (solver on existing
observations), sweep (parameter grids), phantom (test images), inspect
(cube/image file stats). Flags mirror config-file keys and override them.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .cube import HSC1_MAGIC, HSR1_MAGIC, read_cube, read_real
from .experiment import (
    ExperimentConfig,
    config_from_file,
    reconstruct_from,
    run_single,
    run_sweep,
    simulate,
)
from .phantoms import PHANTOM_KINDS, make_phantom, write_pgm


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value config file")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--force", action="store_true", help="overwrite prior outputs")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--K", type=int, dest="channels", help="spectral channels")
    parser.add_argument("--T", type=int, dest="masks", help="experiments (masks)")
    parser.add_argument("--size", type=int, help="image side in pixels")
    parser.add_argument("--snr-db", type=float, dest="snr_db")
    parser.add_argument("--noise", choices=["gaussian", "poisson", "none"])
    parser.add_argument("--iters", type=int)
    parser.add_argument("--warmup", type=int)
    parser.add_argument("--filter", choices=["identity", "svd"])
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--reg", type=float)
    parser.add_argument("--no-lagrange", action="store_true",
                        help="disable the multiplier updates")


_OVERRIDE_KEYS = ("seed", "workers", "channels", "masks", "size", "snr_db",
                  "noise", "iters", "warmup", "filter", "gamma", "beta", "reg")


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    config = config_from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in _OVERRIDE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "no_lagrange", False):
        overrides["lagrange"] = False
    if getattr(args, "sweep_K", None):
        overrides["sweep_channels"] = tuple(args.sweep_K)
    if getattr(args, "sweep_T", None):
        overrides["sweep_masks"] = tuple(args.sweep_T)
    if getattr(args, "sweep_snr", None):
        overrides["sweep_snr_db"] = tuple(args.sweep_snr)
    if getattr(args, "heatmaps", False):
        overrides["heatmaps"] = True
    return dataclasses.replace(config, **overrides)


def _cmd_simulate(args) -> int:
    out = args.out or Path("out-simulate")
    path = simulate(_build_config(args), out, force=args.force)
    print(f"observations written to {path}")
    return 0


def _cmd_reconstruct(args) -> int:
    out = args.out or Path("out-reconstruct")
    config = _build_config(args)
    if args.obs is None:
        path = run_single(config, out, force=args.force)
        print(f"reconstruction written to {path}")
        return 0
    path = reconstruct_from(args.obs, config, out, force=args.force)
    print(f"reconstruction written to {path}")
    return 0


def _cmd_sweep(args) -> int:
    out = args.out or Path("out-sweep")
    path = run_sweep(_build_config(args), out, force=args.force)
    print(f"sweep written to {path}")
    return 0


def _cmd_phantom(args) -> int:
    img = make_phantom(args.kind, args.size, args.seed or 0)
    write_pgm(args.out, img, vmin=0.0, vmax=1.0)
    print(f"phantom written to {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    with open(args.path, "rb") as f:
        magic = f.read(4)
    if magic == HSC1_MAGIC:
        cube = read_cube(args.path)
        amp = np.abs(cube)
        print(f"{args.path}: complex cube K={cube.shape[0]} H={cube.shape[1]} W={cube.shape[2]}")
        for k in range(cube.shape[0]):
            print(
                f"  channel {k}: |.| in [{amp[k].min():.6g}, {amp[k].max():.6g}], "
                f"energy {np.sum(amp[k]**2):.6g}"
            )
    elif magic == HSR1_MAGIC:
        imgs = read_real(args.path)
        print(f"{args.path}: real stack K={imgs.shape[0]} H={imgs.shape[1]} W={imgs.shape[2]}")
        for k in range(imgs.shape[0]):
            print(
                f"  image {k}: values in [{imgs[k].min():.6g}, {imgs[k].max():.6g}], "
                f"mean {imgs[k].mean():.6g}"
            )
    else:
        print(f"{args.path}: unknown magic {magic!r}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hsphase",
        description="Hyperspectral phase retrieval from coded total-intensity patterns",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize observations only")
    _add_common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_rec = sub.add_parser("reconstruct", help="run the solver")
    _add_common(p_rec)
    p_rec.add_argument("--obs", type=Path,
                       help="observation directory from `simulate` (omit to synthesize inline)")
    p_rec.set_defaults(func=_cmd_reconstruct)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--sweep-K", type=int, nargs="+", help="channel counts to sweep")
    p_sweep.add_argument("--sweep-T", type=int, nargs="+", help="mask counts to sweep")
    p_sweep.add_argument("--sweep-snr", type=float, nargs="+", help="SNR values to sweep")
    p_sweep.add_argument("--heatmaps", action="store_true", help="emit PGM heatmaps")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ph = sub.add_parser("phantom", help="write a phantom image as PGM")
    p_ph.add_argument("kind", choices=PHANTOM_KINDS)
    p_ph.add_argument("--size", type=int, default=64)
    p_ph.add_argument("--seed", type=int, default=0)
    p_ph.add_argument("--out", type=Path, required=True)
    p_ph.set_defaults(func=_cmd_phantom)

    p_ins = sub.add_parser("inspect", help="print cube/image file statistics")
    p_ins.add_argument("path", type=Path)
    p_ins.set_defaults(func=_cmd_inspect)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
