"""Launch CLI: `adapters serve --role grounder --port 8001 --model <id>`."""

from __future__ import annotations

import click

from .grounder import build_grounder
from .segmenter import build_segmenter
from .server import ROLES, AdapterServer
from .tracker import build_tracker

_BUILDERS = {
    "grounder": build_grounder,
    "segmenter": build_segmenter,
    "tracker": build_tracker,
}


@click.group()
def main():
    """Reference perception servers for the sdam backend protocol."""


@main.command("serve")
@click.option("--role", type=click.Choice(ROLES), required=True)
@click.option("--port", type=int, default=8001)
@click.option("--host", default="127.0.0.1")
@click.option("--model", "model_id", default="classical",
              help="'classical' (no weights) or a checkpoint id")
@click.option("--device", default="cpu")
def serve_cmd(role, port, host, model_id, device):
    """Serve one role until interrupted."""
    adapter = _BUILDERS[role](model_id, device)
    server = AdapterServer(role, adapter, host=host, port=port)
    click.echo(f"{role} ({model_id}) at {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


if __name__ == "__main__":
    main()
