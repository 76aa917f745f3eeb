#!/usr/bin/env python3
"""Desk-scale constrained-agent training run.

Prepares a small aggressive-style synthetic corpus, trains the style's
acceleration regressor, then trains the constrained longitudinal agent
against it and evaluates the selected checkpoint — all through the
``carfollow`` command-line interface.  Network sizes and episode counts are
shrunk so the whole thing finishes on a laptop; expect minutes, not hours.

Usage::

    python3 scripts/train_agent_desk.py [workdir] [--seed N] [--episodes N]
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
    ap.add_argument("workdir", nargs="?", default="agent_demo")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--episodes", type=int, default=600, help="training episodes")
    args = ap.parse_args()

    work = Path(args.workdir).resolve()
    work.mkdir(parents=True, exist_ok=True)
    cfg = work / "agent.cfg"
    cfg.write_text(
        "\n".join(
            [
                f"data_dir={work / 'data'}",
                f"output_dir={work / 'out'}",
                "synthetic.n=14",
                "synthetic.duration=15.0",
                "train.max_epochs=40",
                "train.hidden=64,64",
                f"agent.n_episodes={args.episodes}",
                "agent.actor_hidden=64,64",
                "agent.critic_hidden=64,64",
                f"agent.random_episodes={min(40, max(1, args.episodes // 3))}",
                f"agent.eval_every={min(50, max(1, args.episodes // 4))}",
                "agent.n_eval_traces=2",
                f"agent.switch_episode={args.episodes // 2}",
            ]
        )
        + "\n"
    )

    base = ["--config", str(cfg), "--seed", str(args.seed), "--style", "aggressive"]
    run(["ingest", "--config", str(cfg), "--seed", str(args.seed)])
    run(["classify", "--config", str(cfg), "--seed", str(args.seed)])
    run(["train-regressor", *base])
    run(["train-agent", *base])
    run(["evaluate", *base])
    run(["report", "--config", str(cfg), "--seed", str(args.seed)])

    print(f"done; artifacts under {work / 'out'}")


if __name__ == "__main__":
    main()
