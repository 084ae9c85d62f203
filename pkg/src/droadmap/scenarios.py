"""Synthetic test maps: an open square, a zig-zag corridor and a central
circular obstacle, loosely mirroring typical warehouse-floor layouts.

Each generator returns binary graymap bytes (magic P5) so the files can be
bundled, diffed and fed back through the normal loader.
"""

from __future__ import annotations

import numpy as np

WHITE = 255
BLACK = 0
GRAY = 128


def _pgm(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + pixels.astype(np.uint8).tobytes()


def open_square(size: int = 64) -> bytes:
    """Fully free square map."""
    return _pgm(np.full((size, size), WHITE, dtype=np.uint8))


def corridor_map(size: int = 160, wall: int | None = None) -> bytes:
    """Zig-zag corridor: border walls plus two interleaved partial walls.

    Free space forms a Z-shaped corridor forcing opposing traffic through
    long narrow sections.
    """
    if wall is None:
        wall = max(3, size // 32)
    px = np.full((size, size), WHITE, dtype=np.uint8)
    px[:wall, :] = BLACK
    px[-wall:, :] = BLACK
    px[:, :wall] = BLACK
    px[:, -wall:] = BLACK
    y1 = size // 3
    y2 = 2 * size // 3
    reach = int(size * 0.68)
    px[y1 : y1 + wall, :reach] = BLACK
    px[y2 : y2 + wall, size - reach :] = BLACK
    return _pgm(px)


def circle_map(size: int = 160, radius_frac: float = 0.28, unknown_patch: bool = True) -> bytes:
    """Border walls plus a central circular obstacle; routes must go around it."""
    wall = max(3, size // 32)
    px = np.full((size, size), WHITE, dtype=np.uint8)
    px[:wall, :] = BLACK
    px[-wall:, :] = BLACK
    px[:, :wall] = BLACK
    px[:, -wall:] = BLACK
    yy, xx = np.mgrid[0:size, 0:size]
    cx = cy = size / 2.0
    r = size * radius_frac
    px[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = BLACK
    if unknown_patch:
        s = max(2, size // 20)
        px[wall + 1 : wall + 1 + s, wall + 1 : wall + 1 + s] = GRAY
    return _pgm(px)


BUNDLED = {
    "open.pgm": lambda: open_square(),
    "corridor.pgm": lambda: corridor_map(),
    "circle.pgm": lambda: circle_map(),
}


def write_bundled(directory) -> None:
    """Regenerate the bundled map files (used once at packaging time)."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, gen in BUNDLED.items():
        (directory / name).write_bytes(gen())
