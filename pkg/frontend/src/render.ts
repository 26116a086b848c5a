/**
 * Canvas renderer for the live view. Palette and background constants are
 * identical to the headless renderer's table; the drawing itself is
 * approximate (anti-aliased strokes), not a bit-for-bit match.
 */
import {
  BACKGROUND_COLORS,
  PALETTE_CYCLES,
  StateSnapshot,
} from "./protocol.js";
import { TrailPoint } from "./state.js";

/** The slice of CanvasRenderingContext2D the renderer uses — narrow enough
 * to stub in tests without a DOM. */
export interface Canvas2DLike {
  fillStyle: string | unknown;
  strokeStyle: string | unknown;
  lineWidth: number;
  globalAlpha: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
}

export function boidColor(palette: StateSnapshot["aesthetics"]["palette"], index: number): string {
  const cycle = PALETTE_CYCLES[palette];
  return cycle[index % cycle.length]!;
}

const MIN_FADE = 0.1;

/** Paint one frame: background, then every trail oldest-to-newest with a
 * linear fade, breaking strokes where a boid wrapped around the torus. */
export function paint(
  ctx: Canvas2DLike,
  width: number,
  height: number,
  snapshot: StateSnapshot | null,
  trails: TrailPoint[][],
): void {
  const background = snapshot
    ? BACKGROUND_COLORS[snapshot.aesthetics.background]
    : BACKGROUND_COLORS.dark;
  ctx.globalAlpha = 1;
  ctx.fillStyle = background;
  ctx.fillRect(0, 0, width, height);
  if (!snapshot) return;

  const [bw, bh] = snapshot.bounds;
  const sx = width / bw;
  const sy = height / bh;
  ctx.lineWidth = Math.max(1, snapshot.aesthetics.stroke_width * Math.min(sx, sy));

  trails.forEach((trail, i) => {
    if (trail.length === 0) return;
    ctx.strokeStyle = boidColor(snapshot.aesthetics.palette, i);
    const segments = trail.length - 1;
    if (segments === 0) {
      // Single point: draw a minimal opaque dash so the boid is visible.
      const p = trail[0]!;
      ctx.globalAlpha = 1;
      ctx.beginPath();
      ctx.moveTo(p.x * sx, p.y * sy);
      ctx.lineTo(p.x * sx + ctx.lineWidth, p.y * sy);
      ctx.stroke();
      return;
    }
    for (let s = 0; s < segments; s += 1) {
      const a = trail[s]!;
      const b = trail[s + 1]!;
      if (b.break_) continue; // torus wrap: no stroke across the edge
      ctx.globalAlpha =
        segments === 1 ? 1 : MIN_FADE + ((1 - MIN_FADE) * s) / (segments - 1);
      ctx.beginPath();
      ctx.moveTo(a.x * sx, a.y * sy);
      ctx.lineTo(b.x * sx, b.y * sy);
      ctx.stroke();
    }
  });
  ctx.globalAlpha = 1;
}
