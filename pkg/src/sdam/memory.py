"""Object memory ledger.

Records what the pipeline memorized from the keyframe: one entry per
object with a box-aligned pooled feature descriptor. This is an auditable
artifact-side mirror of whatever memory the tracker backend keeps
internally; it is append-only during a run.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

import numpy as np

from .encoder import EncoderConfig, cell_stats, luma


class MemoryError_(ValueError):
    """Raised for invalid memory operations (name avoids the builtin)."""


@dataclass(frozen=True)
class ObjectMemoryEntry:
    source_t: int
    object_id: int
    descriptor: tuple[float, ...]
    box: tuple[int, int, int, int]  # x1, y1, x2, y2 exclusive
    area: int
    direction: str = "init"

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.object_id, self.source_t, self.direction)

    def to_json(self) -> str:
        return json.dumps(
            {
                "t": self.source_t,
                "id": self.object_id,
                "box": list(self.box),
                "area": self.area,
                "direction": self.direction,
                "descriptor": list(self.descriptor),
            }
        )


def memorize(
    image: np.ndarray,
    t: int,
    mask: np.ndarray,
    encoder: EncoderConfig,
    pool_grid: int = 4,
    direction: str = "init",
) -> list[ObjectMemoryEntry]:
    """One entry per object present in the mask.

    The descriptor mean-pools the encoder channels over a pool_grid x
    pool_grid partition of the object's bounding box, masked to the
    object's own pixels. Pooling is aligned to the box, so integer
    translations of the object (with its surrounding frame content) leave
    the descriptor bit-identical.
    """
    ids = [int(k) for k in np.unique(mask) if k != 0]
    if not ids:
        raise MemoryError_("all-background mask: nothing to memorize")
    lum = luma(image)
    entries = []
    for oid in ids:
        layer = mask == oid
        ys, xs = np.nonzero(layer)
        y1, y2 = int(ys.min()), int(ys.max()) + 1
        x1, x2 = int(xs.min()), int(xs.max()) + 1
        grid = min(pool_grid, y2 - y1, x2 - x1)
        pooled = cell_stats(
            lum[y1:y2, x1:x2],
            grid_h=grid,
            grid_w=grid,
            channels=encoder.channels,
            support=layer[y1:y2, x1:x2],
        )
        entries.append(
            ObjectMemoryEntry(
                source_t=t,
                object_id=oid,
                descriptor=tuple(float(v) for v in pooled.ravel()),
                box=(x1, y1, x2, y2),
                area=int(layer.sum()),
                direction=direction,
            )
        )
    return entries


class MemoryBank:
    """Append-only entry store; unique by (object id, source frame, direction)."""

    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self._entries: list[ObjectMemoryEntry] = []
        self._keys: set[tuple[int, int, str]] = set()
        self._lock = threading.Lock()

    def insert(self, entry: ObjectMemoryEntry) -> None:
        with self._lock:
            if entry.key in self._keys:
                raise MemoryError_(f"duplicate memory entry: {entry.key}")
            if self.capacity is not None and len(self._entries) >= self.capacity:
                raise MemoryError_(f"memory bank full (capacity {self.capacity})")
            self._entries.append(entry)
            self._keys.add(entry.key)

    def lookup(self, object_id: int) -> list[ObjectMemoryEntry]:
        with self._lock:
            return [e for e in self._entries if e.object_id == object_id]

    def snapshot(self) -> tuple[ObjectMemoryEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def dump_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.snapshot())
