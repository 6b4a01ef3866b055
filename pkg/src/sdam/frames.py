"""Frame-sequence and mask I/O.

Frames and masks live as one-file-per-frame lossless rasters in sibling
directories (DAVIS-style layout): ``frames/%05d.png`` RGB and
``masks/%05d.png`` indexed-color with palette index = object id. Frame
indices in the public API are 1-based and contiguous; on-disk numbering may
start at any padded integer but must be contiguous.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

LOSSLESS_EXTENSIONS = (".png", ".bmp", ".tif", ".tiff")

_FRAME_NAME = re.compile(r"^(\d+)$")


class SequenceError(ValueError):
    """Raised for malformed frame or mask directories."""


class MaskError(ValueError):
    """Raised for mask label/dimension violations."""


def _object_palette() -> list[int]:
    # VOC/DAVIS-style colormap: bit-reversal of the label index, so every
    # object id gets a stable distinct color.
    pal = []
    for k in range(256):
        r = g = b = 0
        c = k
        for shift in range(8):
            r |= ((c >> 0) & 1) << (7 - shift)
            g |= ((c >> 1) & 1) << (7 - shift)
            b |= ((c >> 2) & 1) << (7 - shift)
            c >>= 3
        pal += [r, g, b]
    return pal


OBJECT_PALETTE = _object_palette()


@dataclass(frozen=True)
class FrameSequence:
    """An ordered RGB frame sequence. Frame i (1-based) is frames[i-1]."""

    frames: tuple[np.ndarray, ...]
    sequence_id: str = "seq"

    def __post_init__(self):
        if len(self.frames) < 1:
            raise SequenceError("sequence must contain at least one frame")
        h, w = self.frames[0].shape[:2]
        for i, f in enumerate(self.frames, start=1):
            if f.ndim != 3 or f.shape[2] != 3 or f.dtype != np.uint8:
                raise SequenceError(f"frame {i} is not an 8-bit RGB image")
            if f.shape[:2] != (h, w):
                raise SequenceError(
                    f"mixed dimensions: frame {i} is {f.shape[1]}x{f.shape[0]}, "
                    f"expected {w}x{h}"
                )

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]

    def frame(self, t: int) -> np.ndarray:
        """Return frame t, 1-based."""
        if not 1 <= t <= self.length:
            raise IndexError(f"frame index {t} outside [1, {self.length}]")
        return self.frames[t - 1]


@dataclass(frozen=True)
class MaskSequence:
    """Per-frame multi-object label masks; 0 = background, k = object k."""

    masks: tuple[np.ndarray, ...]
    object_count: int

    def __post_init__(self):
        if len(self.masks) < 1:
            raise MaskError("mask sequence must contain at least one frame")
        h, w = self.masks[0].shape
        for i, m in enumerate(self.masks, start=1):
            if m.ndim != 2:
                raise MaskError(f"mask {i} is not a 2-d label grid")
            if m.shape != (h, w):
                raise MaskError(f"mixed dimensions: mask {i} is {m.shape}")
            if m.size and int(m.max()) > self.object_count:
                raise MaskError(
                    f"mask {i} uses label {int(m.max())} > object_count "
                    f"{self.object_count}"
                )

    @property
    def length(self) -> int:
        return len(self.masks)

    def mask(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.length:
            raise IndexError(f"mask index {t} outside [1, {self.length}]")
        return self.masks[t - 1]


def _indexed_files(directory: Path) -> list[tuple[int, Path]]:
    if not directory.is_dir():
        raise SequenceError(f"missing directory: {directory}")
    found = []
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() not in LOSSLESS_EXTENSIONS:
            continue
        m = _FRAME_NAME.match(p.stem)
        if m is None:
            raise SequenceError(f"non-numeric frame filename: {p.name}")
        found.append((int(m.group(1)), p))
    if not found:
        raise SequenceError(f"no frame files in {directory}")
    found.sort(key=lambda kv: kv[0])
    prev_idx, prev_path = found[0]
    for idx, p in found[1:]:
        if idx != prev_idx + 1:
            raise SequenceError(
                f"non-contiguous frame indices: {prev_path.name} -> {p.name}"
            )
        prev_idx, prev_path = idx, p
    return found


def indexed_frame_paths(directory_path: str | Path) -> dict[int, Path]:
    """1-based frame index -> file path, for path-preferring backends."""
    files = _indexed_files(Path(directory_path))
    return {i + 1: p for i, (_, p) in enumerate(files)}


def load_sequence(directory_path: str | Path, sequence_id: str | None = None) -> FrameSequence:
    """Load a frame directory into a FrameSequence.

    Files must be named with zero-padded decimal indices and a lossless
    raster extension; indices must be contiguous (any start offset).
    """
    directory = Path(directory_path)
    files = _indexed_files(directory)
    frames = []
    shape = None
    for _, p in files:
        arr = np.asarray(PILImage.open(p).convert("RGB"), dtype=np.uint8)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise SequenceError(
                f"mixed dimensions: {p.name} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
        frames.append(arr)
    return FrameSequence(tuple(frames), sequence_id or directory.name)


def write_frames(seq: FrameSequence, directory_path: str | Path) -> None:
    """Write frames as frames/%05d.png starting at 00001."""
    directory = Path(directory_path)
    directory.mkdir(parents=True, exist_ok=True)
    for t in range(1, seq.length + 1):
        PILImage.fromarray(seq.frame(t)).save(directory / f"{t:05d}.png")


def write_masks(seq: MaskSequence, directory_path: str | Path) -> None:
    """Write masks as indexed-color PNGs, palette index = object id."""
    directory = Path(directory_path)
    directory.mkdir(parents=True, exist_ok=True)
    for t in range(1, seq.length + 1):
        m = seq.mask(t)
        if m.size and int(m.max()) > 255:
            raise MaskError(
                f"label overflow in mask {t}: {int(m.max())} > 255"
            )
        im = PILImage.fromarray(m.astype(np.uint8), mode="P")
        im.putpalette(OBJECT_PALETTE)
        im.save(directory / f"{t:05d}.png")


def read_masks(directory_path: str | Path, object_count: int | None = None) -> MaskSequence:
    """Read an indexed-mask directory; inverse of write_masks."""
    directory = Path(directory_path)
    files = _indexed_files(directory)
    masks = []
    shape = None
    for _, p in files:
        im = PILImage.open(p)
        if im.mode != "P":
            im = im.convert("P")
        arr = np.asarray(im, dtype=np.uint8)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise MaskError(
                f"dimension mismatch: {p.name} is {arr.shape}, expected {shape}"
            )
        masks.append(arr)
    n = object_count if object_count is not None else int(max(int(m.max()) for m in masks))
    return MaskSequence(tuple(masks), n)


def mask_to_png_bytes(mask: np.ndarray) -> bytes:
    """Encode a label mask as indexed-color PNG bytes (wire payload form)."""
    import io

    if mask.size and int(mask.max()) > 255:
        raise MaskError(f"label overflow: {int(mask.max())} > 255")
    im = PILImage.fromarray(mask.astype(np.uint8), mode="P")
    im.putpalette(OBJECT_PALETTE)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_mask(data: bytes) -> np.ndarray:
    import io

    im = PILImage.open(io.BytesIO(data))
    if im.mode != "P":
        im = im.convert("P")
    return np.asarray(im, dtype=np.uint8)


def image_to_png_bytes(image: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    PILImage.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(data: bytes) -> np.ndarray:
    import io

    return np.asarray(PILImage.open(io.BytesIO(data)).convert("RGB"), dtype=np.uint8)
