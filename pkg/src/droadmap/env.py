"""Occupancy maps: loading, collision checks and free-space sampling.

Maps are tristate grids (free / obstacle / unknown) loaded from portable
graymaps. Unknown cells are treated as non-free everywhere: we never place
vertices or route edges through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FREE = 0
OBSTACLE = 1
UNKNOWN = 2

# grayscale classification thresholds (of 255)
_FREE_MIN = 204
_OBSTACLE_MAX = 51

_MAX_REJECTIONS = 10_000


class MapLoadError(Exception):
    """Raised for malformed graymap input; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SamplingError(Exception):
    """Raised when rejection sampling cannot find free space."""


@dataclass(frozen=True)
class OccupancyMap:
    """Immutable tristate occupancy grid.

    ``cells`` is laid out row-major with shape (height, width); cell (ix, iy)
    covers the world rectangle [ix*res, (ix+1)*res) x [iy*res, (iy+1)*res).
    """

    width: int
    height: int
    cells: np.ndarray  # int8, shape (height, width), values FREE/OBSTACLE/UNKNOWN
    resolution: float = 0.01
    name: str = "map"
    _free_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("map dimensions must be positive")
        if self.cells.shape != (self.height, self.width):
            raise ValueError("cells shape does not match width/height")
        object.__setattr__(self, "_free_mask", self.cells == FREE)
        self.cells.setflags(write=False)

    @property
    def world_width(self) -> float:
        return self.width * self.resolution

    @property
    def world_height(self) -> float:
        return self.height * self.resolution

    def free_cell_count(self) -> int:
        return int(self._free_mask.sum())


def classify_pixel(v: int) -> int:
    """Map a 0..255 gray value to a cell state."""
    if v >= _FREE_MIN:
        return FREE
    if v <= _OBSTACLE_MAX:
        return OBSTACLE
    return UNKNOWN


def load_map(source: bytes, resolution: float = 0.01, name: str = "map") -> OccupancyMap:
    """Parse a portable graymap (P2 ASCII or P5 binary, maxval 255).

    Pixels >= 204 are free, <= 51 obstacle, anything between is unknown.
    """
    data = bytes(source)
    if len(data) < 2:
        raise MapLoadError("truncated graymap", 0)
    magic = data[0:2]
    if magic not in (b"P2", b"P5"):
        raise MapLoadError(f"unsupported magic {magic!r}", 0)

    pos = 2
    header: list[int] = []

    def skip_separators(p: int) -> int:
        while p < len(data):
            c = data[p : p + 1]
            if c.isspace():
                p += 1
            elif c == b"#":
                while p < len(data) and data[p : p + 1] not in (b"\n", b"\r"):
                    p += 1
            else:
                break
        return p

    while len(header) < 3:
        pos = skip_separators(pos)
        if pos >= len(data):
            raise MapLoadError("unexpected end of header", pos)
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise MapLoadError(f"malformed header token {token!r}", start)
        header.append(int(token))

    width, height, maxval = header
    if width < 1 or height < 1:
        raise MapLoadError(f"invalid dimensions {width}x{height}", 2)
    if maxval != 255:
        raise MapLoadError(f"unsupported max value {maxval}", pos - len(str(maxval)))

    npix = width * height
    if magic == b"P5":
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise MapLoadError("missing whitespace after max value", pos)
        pos += 1
        raster = data[pos : pos + npix]
        if len(raster) < npix:
            raise MapLoadError(
                f"raster truncated: expected {npix} bytes, got {len(raster)}", len(data)
            )
        values = np.frombuffer(raster, dtype=np.uint8, count=npix)
    else:
        values_list = []
        while len(values_list) < npix:
            pos = skip_separators(pos)
            if pos >= len(data):
                raise MapLoadError(
                    f"raster truncated: expected {npix} values, got {len(values_list)}", pos
                )
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
                pos += 1
            token = data[start:pos]
            if not token.isdigit():
                raise MapLoadError(f"malformed pixel value {token!r}", start)
            v = int(token)
            if v > maxval:
                raise MapLoadError(f"pixel value {v} exceeds max value", start)
            values_list.append(v)
        values = np.array(values_list, dtype=np.uint8)

    cells = np.full(npix, UNKNOWN, dtype=np.int8)
    cells[values >= _FREE_MIN] = FREE
    cells[values <= _OBSTACLE_MAX] = OBSTACLE
    return OccupancyMap(
        width=width,
        height=height,
        cells=cells.reshape(height, width),
        resolution=resolution,
        name=name,
    )


def is_free(occ: OccupancyMap, p) -> bool:
    """True iff p is inside the map and its cell is free. Out of bounds is False."""
    x, y = float(p[0]), float(p[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        return False
    if x < 0.0 or y < 0.0 or x >= occ.world_width or y >= occ.world_height:
        return False
    ix = int(x / occ.resolution)
    iy = int(y / occ.resolution)
    # guard against float edge cases right at the boundary
    if ix >= occ.width or iy >= occ.height:
        return False
    return bool(occ._free_mask[iy, ix])


def _segment_samples(occ: OccupancyMap, a, b) -> np.ndarray:
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    dist = float(np.hypot(bx - ax, by - ay))
    spacing = occ.resolution / 2.0
    n = max(2, int(np.ceil(dist / spacing)) + 1) if dist > 0 else 1
    t = np.linspace(0.0, 1.0, n)
    return np.column_stack((ax + t * (bx - ax), ay + t * (by - ay)))


def segment_free(occ: OccupancyMap, a, b) -> bool:
    """Collision check by supersampling the segment at half-cell spacing."""
    pts = _segment_samples(occ, a, b)
    x = pts[:, 0]
    y = pts[:, 1]
    if (x < 0).any() or (y < 0).any() or (x >= occ.world_width).any() or (y >= occ.world_height).any():
        return False
    ix = np.minimum((x / occ.resolution).astype(np.intp), occ.width - 1)
    iy = np.minimum((y / occ.resolution).astype(np.intp), occ.height - 1)
    return bool(occ._free_mask[iy, ix].all())


def segment_witness(occ: OccupancyMap, a, b):
    """First sampled point along ab failing is_free, or None if the segment is free."""
    for pt in _segment_samples(occ, a, b):
        if not is_free(occ, pt):
            return (float(pt[0]), float(pt[1]))
    return None


def sample_free(occ: OccupancyMap, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` configurations uniformly over the free space by rejection.

    Returns an array of shape (count, 2). Deterministic for a given rng state.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    out = np.empty((count, 2), dtype=np.float64)
    w, h = occ.world_width, occ.world_height
    for i in range(count):
        rejections = 0
        while True:
            x = rng.random() * w
            y = rng.random() * h
            if is_free(occ, (x, y)):
                out[i, 0] = x
                out[i, 1] = y
                break
            rejections += 1
            if rejections >= _MAX_REJECTIONS:
                raise SamplingError("free space too sparse: rejection sampling exhausted")
    return out
