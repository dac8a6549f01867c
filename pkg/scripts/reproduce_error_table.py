#!/usr/bin/env python3
"""Accuracy versus spectral channels K and experiment count T.

Runs the near-noiseless (K, T) grid and prints the final mean relative
errors as a table; the rule of thumb is that T >= 3K reaches visually
usable reconstructions (error < 0.1).

Usage:
    python scripts/reproduce_error_table.py --out out-table [--full]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from hsphase.experiment import ExperimentConfig, run_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out-table"))
    parser.add_argument("--full", action="store_true",
                        help="K in {2,4,8,12}, T in {2,6,12,24,36} (slow)")
    parser.add_argument("--iters", type=int, default=300)
    parser.add_argument("--snr-db", type=float, default=54.0)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args()

    if args.full:
        k_list, t_list = (2, 4, 8, 12), (2, 6, 12, 24, 36)
    else:
        k_list, t_list = (2, 4), (2, 6, 12)

    config = ExperimentConfig(
        sweep_channels=k_list,
        sweep_masks=t_list,
        snr_db=args.snr_db,
        iters=args.iters,
        seed=args.seed,
        workers=args.workers,
        heatmaps=True,
    )
    out = run_sweep(config, args.out, force=args.force)
    print((out / "sweep_kt.csv").read_text())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
