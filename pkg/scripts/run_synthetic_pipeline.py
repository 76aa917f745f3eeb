#!/usr/bin/env python3
"""Desk-scale end-to-end run on synthetic data.

Generates a small synthetic corpus, labels it, trains one acceleration
regressor per labeled style, calibrates IDM parameters, and writes the
comparison report.  Everything goes through the installed ``carfollow``
command-line interface so this doubles as a smoke test of that surface.

Usage::

    python3 scripts/run_synthetic_pipeline.py [workdir] [--seed N] [--episodes N]

Artifacts land under ``<workdir>/out`` (default workdir: ``./pipeline_demo``).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from carfollow.cli import main as carfollow_main


def run(argv: list[str]) -> None:
    code = carfollow_main(argv)
    if code != 0:
        sys.exit(code)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("workdir", nargs="?", default="pipeline_demo")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--episodes", type=int, default=30, help="episodes per style")
    ap.add_argument("--epochs", type=int, default=40, help="regressor epoch cap")
    args = ap.parse_args()

    work = Path(args.workdir).resolve()
    work.mkdir(parents=True, exist_ok=True)
    cfg = work / "pipeline.cfg"
    cfg.write_text(
        "\n".join(
            [
                f"data_dir={work / 'data'}",
                f"output_dir={work / 'out'}",
                f"synthetic.n={args.episodes}",
                "synthetic.duration=20.0",
                f"train.max_epochs={args.epochs}",
                "calib.simplex_iters=120",
            ]
        )
        + "\n"
    )

    base = ["--config", str(cfg), "--seed", str(args.seed)]
    run(["ingest", *base])
    run(["classify", *base])
    for style in ("aggressive", "normal", "conservative"):
        run(["train-regressor", *base, "--style", style])
        run(["calibrate-idm", *base, "--style", style])
    run(["report", *base])

    print(f"done; artifacts under {work / 'out'}")


if __name__ == "__main__":
    main()
