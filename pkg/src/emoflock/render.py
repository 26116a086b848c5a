"""Headless trail renderer producing deterministic PPM (P6) frames.

Rasterization is pure integer Bresenham thickened by perpendicular offsets;
no anti-aliasing, so identical inputs give bit-identical pixels on any
platform. Trail strokes are painted as pre-blended opaque colors: each
segment's color is the palette color mixed over the background at that
segment's fade opacity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

RGB = tuple[int, int, int]

WARM_COLORS: tuple[RGB, ...] = (
    (0xFF, 0x8C, 0x00),  # orange
    (0xE0, 0x31, 0x31),  # red
    (0xFF, 0xD4, 0x3B),  # yellow
)
COLD_COLORS: tuple[RGB, ...] = (
    (0x2F, 0x9E, 0x44),  # green
    (0x19, 0x71, 0xC2),  # blue
    (0x42, 0x63, 0xEB),  # indigo
    (0x70, 0x48, 0xE8),  # violet
)
DARK_BACKGROUND: RGB = (0x14, 0x21, 0x3D)
BRIGHT_BACKGROUND: RGB = (0xF1, 0xF3, 0xF5)

MIN_FADE = 0.1  # oldest segment opacity
PERSIST_ALL = 100  # stroke_length value that disables trail eviction


class Background(Enum):
    DARK = "dark"
    BRIGHT = "bright"

    @property
    def rgb(self) -> RGB:
        return DARK_BACKGROUND if self is Background.DARK else BRIGHT_BACKGROUND


class Palette(Enum):
    WARM = "warm"
    COLD = "cold"
    MIXED = "mixed"


_PALETTE_CYCLES: dict[Palette, tuple[RGB, ...]] = {
    Palette.WARM: WARM_COLORS,
    Palette.COLD: COLD_COLORS,
    Palette.MIXED: WARM_COLORS + COLD_COLORS,
}


def palette_color(palette: Palette, boid_index: int) -> RGB:
    """Deterministic cycling color assignment for a boid index."""
    cycle = _PALETTE_CYCLES[palette]
    return cycle[boid_index % len(cycle)]


@dataclass(frozen=True)
class Aesthetics:
    stroke_length: int = PERSIST_ALL
    stroke_width: int = 3
    background: Background = Background.DARK
    palette: Palette = Palette.MIXED

    def __post_init__(self) -> None:
        if not 0 <= self.stroke_length <= 100:
            raise ValueError(f"stroke_length must be in [0, 100], got {self.stroke_length}")
        if self.stroke_width < 1:
            raise ValueError(f"stroke_width must be >= 1, got {self.stroke_width}")


@dataclass
class TrailBuffer:
    """Per-boid trail of recent world positions.

    Each point carries a break flag: True when the boid wrapped around the
    torus since the previous point, so the renderer starts a fresh segment
    instead of drawing a screen-crossing line.
    """

    bounds: tuple[float, float]
    trails: list[list[tuple[float, float, bool]]]

    @classmethod
    def for_flock(cls, n_boids: int, bounds: tuple[float, float]) -> "TrailBuffer":
        return cls(bounds=bounds, trails=[[] for _ in range(n_boids)])

    @property
    def n_boids(self) -> int:
        return len(self.trails)

    def append_positions(self, positions: np.ndarray, aesthetics: Aesthetics) -> None:
        """Append one tick's positions and evict beyond capacity."""
        if len(positions) != self.n_boids:
            raise ValueError(
                f"buffer holds {self.n_boids} boids, got {len(positions)} positions"
            )
        half_w = self.bounds[0] / 2.0
        half_h = self.bounds[1] / 2.0
        for trail, (x, y) in zip(self.trails, np.asarray(positions, dtype=float)):
            wrapped = False
            if trail:
                px, py, _ = trail[-1]
                wrapped = bool(abs(x - px) > half_w or abs(y - py) > half_h)
            trail.append((float(x), float(y), wrapped))
        if aesthetics.stroke_length < PERSIST_ALL:
            cap = aesthetics.stroke_length
            for i, trail in enumerate(self.trails):
                if len(trail) > cap:
                    self.trails[i] = trail[len(trail) - cap :]


def update_trails(
    buffer: TrailBuffer, state, aesthetics: Aesthetics
) -> TrailBuffer:
    """Append the flock's current positions to the trail buffer."""
    buffer.append_positions(state.positions, aesthetics)
    return buffer


@dataclass
class Frame:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


def _blend(background: RGB, color: RGB, alpha: float) -> RGB:
    return tuple(
        int(round(b * (1.0 - alpha) + c * alpha)) for b, c in zip(background, color)
    )  # type: ignore[return-value]


def _stamp(pixels: np.ndarray, x: int, y: int, color: RGB, width: int) -> None:
    h, w, _ = pixels.shape
    lo = -((width - 1) // 2)
    hi = width // 2
    x0, x1 = max(0, x + lo), min(w - 1, x + hi)
    y0, y1 = max(0, y + lo), min(h - 1, y + hi)
    if x0 <= x1 and y0 <= y1:
        pixels[y0 : y1 + 1, x0 : x1 + 1] = color


def _draw_thick_line(
    pixels: np.ndarray, p0: tuple[int, int], p1: tuple[int, int], color: RGB, width: int
) -> None:
    """Bresenham line thickened by perpendicular offsets across the minor axis."""
    h, w, _ = pixels.shape
    x0, y0 = p0
    x1, y1 = p1
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    lo = -((width - 1) // 2)
    hi = width // 2
    horizontal_major = dx >= dy
    err = dx - dy
    x, y = x0, y0
    while True:
        if horizontal_major:
            ya, yb = max(0, y + lo), min(h - 1, y + hi)
            if 0 <= x < w and ya <= yb:
                pixels[ya : yb + 1, x] = color
        else:
            xa, xb = max(0, x + lo), min(w - 1, x + hi)
            if 0 <= y < h and xa <= xb:
                pixels[y, xa : xb + 1] = color
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def render_frame(
    buffer: TrailBuffer, aesthetics: Aesthetics, size: tuple[int, int]
) -> Frame:
    """Rasterize all trails onto a background-filled frame.

    Per-segment opacity fades linearly from the newest segment (opaque) to the
    oldest (10%); a single-point trail paints an opaque square dot of side
    ``stroke_width``.
    """
    width, height = int(size[0]), int(size[1])
    if width <= 0 or height <= 0:
        raise ValueError(f"frame size must be positive, got {size!r}")
    bg = aesthetics.background.rgb
    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:] = bg
    sx = width / buffer.bounds[0]
    sy = height / buffer.bounds[1]

    def to_pixel(x: float, y: float) -> tuple[int, int]:
        return (
            min(width - 1, max(0, int(x * sx))),
            min(height - 1, max(0, int(y * sy))),
        )

    for boid_index, trail in enumerate(buffer.trails):
        if not trail:
            continue
        color = palette_color(aesthetics.palette, boid_index)
        if len(trail) == 1:
            x, y, _ = trail[0]
            _stamp(pixels, *to_pixel(x, y), color, aesthetics.stroke_width)
            continue
        n_seg = len(trail) - 1
        for seg in range(n_seg):
            x0, y0, _ = trail[seg]
            x1, y1, broke = trail[seg + 1]
            alpha = 1.0 if n_seg == 1 else MIN_FADE + (1.0 - MIN_FADE) * seg / (n_seg - 1)
            faded = _blend(bg, color, alpha)
            if broke:
                # Wrap discontinuity: cap both sides instead of crossing the frame.
                _stamp(pixels, *to_pixel(x0, y0), faded, aesthetics.stroke_width)
                _stamp(pixels, *to_pixel(x1, y1), faded, aesthetics.stroke_width)
                continue
            _draw_thick_line(
                pixels, to_pixel(x0, y0), to_pixel(x1, y1), faded, aesthetics.stroke_width
            )
    return Frame(width, height, pixels)


def encode_frame(frame: Frame) -> bytes:
    """Binary PPM (P6), maxval 255."""
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + frame.tobytes()


def decode_frame(data: bytes) -> Frame:
    """Parse a binary PPM produced by :func:`encode_frame`."""
    if not data.startswith(b"P6"):
        raise ValueError("not a P6 PPM")
    # Read three whitespace-separated integers, then exactly one whitespace
    # byte before the payload (payload bytes may themselves look like
    # whitespace, so a naive split would corrupt it).
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        fields.append(int(data[start:pos]))
    pos += 1  # the single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    payload = data[pos : pos + width * height * 3]
    if len(payload) != width * height * 3:
        raise ValueError("truncated PPM payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return Frame(width, height, pixels)
