#!/usr/bin/env python3
"""Serve the deterministic stub backends over HTTP for a rendered scene.

Useful for exercising remote-mode configs without any real model:

    python scripts/serve_stubs.py path/to/scene --port 8000
    sdam run --frames path/to/scene/frames --query "object 1" \
        --out /tmp/run --config remote.json
"""

import argparse
import time
from pathlib import Path

from sdam.backends.server import StubBackendServer
from sdam.backends.stubs import stub_backends_for_annotations
from sdam.frames import read_masks
from sdam.synth import load_annotations


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scene_dir", type=Path, help="directory with masks/ and annotations.json")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8000)
    args = ap.parse_args()

    annotations = load_annotations(args.scene_dir / "annotations.json")
    gt = read_masks(args.scene_dir / "masks") if (args.scene_dir / "masks").is_dir() else None
    g, s, t = stub_backends_for_annotations(annotations, gt)
    server = StubBackendServer(g, s, t, host=args.host, port=args.port).start()
    print(f"stub backends at {server.url} (ground/segment/track/*)")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
