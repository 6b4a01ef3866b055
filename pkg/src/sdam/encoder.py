"""Grid feature encoder for motion scoring.

Maps an RGB image to an h x w x c feature grid: per cell, mean luma
(Rec.601 weights) plus mean absolute horizontal/vertical adjacent-pixel
luma differences, all normalized to [0, 1]. Deterministic and
dependency-free so sampler behavior is exactly testable; a learned
encoder can replace it behind the backend protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHANNELS = ("luma_mean", "grad_x_energy", "grad_y_energy")

REC601 = (0.299, 0.587, 0.114)


class EncoderError(ValueError):
    """Raised when an image cannot be encoded with the given config."""


@dataclass(frozen=True)
class EncoderConfig:
    grid_h: int = 16
    grid_w: int = 16
    channels: tuple[str, ...] = CHANNELS

    def __post_init__(self):
        if self.grid_h < 1 or self.grid_w < 1:
            raise EncoderError("grid dims must be >= 1")
        unknown = set(self.channels) - set(CHANNELS)
        if unknown:
            raise EncoderError(f"unknown channels: {sorted(unknown)}")
        if not self.channels:
            raise EncoderError("channel set must be nonempty")

    def to_dict(self) -> dict:
        return {"grid_h": self.grid_h, "grid_w": self.grid_w, "channels": list(self.channels)}

    @classmethod
    def from_dict(cls, doc: dict) -> "EncoderConfig":
        return cls(
            grid_h=doc.get("grid_h", 16),
            grid_w=doc.get("grid_w", 16),
            channels=tuple(doc.get("channels", CHANNELS)),
        )


@dataclass(frozen=True)
class FeatureMap:
    """h x w x c grid of real features, all finite, in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3:
            raise EncoderError("feature map must be h x w x c")
        if not np.isfinite(self.values).all():
            raise EncoderError("feature map contains non-finite values")

    @property
    def grid_h(self) -> int:
        return self.values.shape[0]

    @property
    def grid_w(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def cell_bounds(dim: int, cells: int) -> list[tuple[int, int]]:
    """Floor-sized cell boundaries; the last cell absorbs the remainder."""
    size = dim // cells
    bounds = [(i * size, (i + 1) * size) for i in range(cells)]
    bounds[-1] = (bounds[-1][0], dim)
    return bounds


def luma(image: np.ndarray) -> np.ndarray:
    """Rec.601 luma in [0, 1] from an 8-bit RGB image."""
    r, g, b = (image[..., k].astype(np.float64) for k in range(3))
    return (REC601[0] * r + REC601[1] * g + REC601[2] * b) / 255.0


def _cell_sums(grid: np.ndarray, row_starts: np.ndarray, col_starts: np.ndarray) -> np.ndarray:
    if grid.size == 0:
        return np.zeros((len(row_starts), len(col_starts)), dtype=np.float64)
    return np.add.reduceat(np.add.reduceat(grid, row_starts, axis=0), col_starts, axis=1)


def _grid_channel_means(
    luma_grid: np.ndarray, rows: list[tuple[int, int]], cols: list[tuple[int, int]], channel: str
) -> np.ndarray:
    """Vectorized per-cell channel means over the full (unmasked) image."""
    row_starts = np.array([r0 for r0, _ in rows])
    col_starts = np.array([c0 for c0, _ in cols])
    rh = np.array([r1 - r0 for r0, r1 in rows], dtype=np.float64)
    cw = np.array([c1 - c0 for c0, c1 in cols], dtype=np.float64)
    if channel == "luma_mean":
        return _cell_sums(luma_grid, row_starts, col_starts) / np.outer(rh, cw)
    if channel == "grad_x_energy":
        dx = np.abs(np.diff(luma_grid, axis=1))
        if dx.shape[1] == 0:
            return np.zeros((len(rows), len(cols)), dtype=np.float64)
        dx = dx.copy()
        for _, c1 in cols[:-1]:
            dx[:, c1 - 1] = 0.0  # drop pairs straddling a cell boundary
        counts = np.outer(rh, np.maximum(cw - 1, 0))
        sums = _cell_sums(dx, row_starts, np.minimum(col_starts, dx.shape[1] - 1))
        return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    if channel == "grad_y_energy":
        dy = np.abs(np.diff(luma_grid, axis=0))
        if dy.shape[0] == 0:
            return np.zeros((len(rows), len(cols)), dtype=np.float64)
        dy = dy.copy()
        for _, r1 in rows[:-1]:
            dy[r1 - 1, :] = 0.0
        counts = np.outer(np.maximum(rh - 1, 0), cw)
        sums = _cell_sums(dy, np.minimum(row_starts, dy.shape[0] - 1), col_starts)
        return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    raise EncoderError(f"unknown channel {channel!r}")


def _masked_mean(values: np.ndarray, valid: np.ndarray) -> float:
    n = int(valid.sum())
    if n == 0:
        return 0.0
    return float(values[valid].sum() / n)


def cell_stats(
    luma_grid: np.ndarray,
    grid_h: int,
    grid_w: int,
    channels: tuple[str, ...],
    support: np.ndarray | None = None,
) -> np.ndarray:
    """Per-cell channel statistics over an optional boolean support mask.

    Gradient channels average |delta luma| over adjacent pixel pairs lying
    fully inside the cell (and, when a support is given, with both pixels
    on the support). Cells with no contributing pixels/pairs yield 0.
    """
    h_px, w_px = luma_grid.shape
    rows = cell_bounds(h_px, grid_h)
    cols = cell_bounds(w_px, grid_w)
    if support is None:
        planes = [_grid_channel_means(luma_grid, rows, cols, ch) for ch in channels]
        return np.stack(planes, axis=2)

    out = np.zeros((grid_h, grid_w, len(channels)), dtype=np.float64)
    dx = np.abs(np.diff(luma_grid, axis=1))
    dy = np.abs(np.diff(luma_grid, axis=0))
    sup_dx = support[:, 1:] & support[:, :-1]
    sup_dy = support[1:, :] & support[:-1, :]
    for ri, (r0, r1) in enumerate(rows):
        for ci, (c0, c1) in enumerate(cols):
            for ki, ch in enumerate(channels):
                if ch == "luma_mean":
                    out[ri, ci, ki] = _masked_mean(
                        luma_grid[r0:r1, c0:c1], support[r0:r1, c0:c1]
                    )
                elif ch == "grad_x_energy":
                    out[ri, ci, ki] = _masked_mean(
                        dx[r0:r1, c0 : c1 - 1], sup_dx[r0:r1, c0 : c1 - 1]
                    )
                elif ch == "grad_y_energy":
                    out[ri, ci, ki] = _masked_mean(
                        dy[r0 : r1 - 1, c0:c1], sup_dy[r0 : r1 - 1, c0:c1]
                    )
    return out


def encode(image: np.ndarray, cfg: EncoderConfig) -> FeatureMap:
    """Encode one RGB image into its feature grid.

    Pure and deterministic; identical pixels yield identical features.
    """
    h_px, w_px = image.shape[:2]
    if h_px < cfg.grid_h or w_px < cfg.grid_w:
        raise EncoderError(
            f"image {w_px}x{h_px} smaller than grid {cfg.grid_w}x{cfg.grid_h}"
        )
    return FeatureMap(cell_stats(luma(image), cfg.grid_h, cfg.grid_w, cfg.channels))
