#!/usr/bin/env python3
"""Render the standard 10-scene ablation corpus to disk."""

import argparse
from pathlib import Path

from sdam.ablation import build_default_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path, help="corpus output directory")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    scenes = build_default_corpus(args.out, seed=args.seed)
    for s in scenes:
        print(s)


if __name__ == "__main__":
    main()
