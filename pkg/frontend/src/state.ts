/**
 * Viewer-side session state: the latest snapshot, per-boid trail history,
 * and strictly monotone sequence handling. Out-of-order frames (seq less
 * than or equal to the last applied) are discarded, so the displayed tick
 * never decreases.
 */
import type { Emotion, ServerFrame, StateSnapshot } from "./protocol.js";
import { PERSIST_ALL } from "./protocol.js";

export interface TrailPoint {
  x: number;
  y: number;
  /** True when the hop from the previous point crossed the torus edge;
   * the renderer breaks the stroke there instead of drawing across. */
  break_: boolean;
}

export class ViewerState {
  lastSeq = 0;
  snapshot: StateSnapshot | null = null;
  emotion: Emotion | null = null;
  participants = 0;
  collective: Emotion | null = null;
  trails: TrailPoint[][] = [];
  /** Snapshots applied since construction/reset — observability for tests
   * and the latency readout. */
  applied = 0;

  /** Drop all local history (fresh connection => no ghost trails). */
  reset(): void {
    this.lastSeq = 0;
    this.snapshot = null;
    this.emotion = null;
    this.trails = [];
    this.applied = 0;
  }

  /**
   * Apply one validated server frame. Returns true if it advanced state,
   * false if it was stale and discarded.
   */
  apply(frame: ServerFrame): boolean {
    if (frame.seq <= this.lastSeq) return false;
    this.lastSeq = frame.seq;
    switch (frame.kind) {
      case "state_snapshot":
        this.applySnapshot(frame);
        return true;
      case "emotion_changed":
        this.emotion = frame.emotion;
        return true;
      case "metrics_update":
        this.participants = frame.participants;
        this.collective = frame.collective;
        return true;
    }
  }

  private applySnapshot(snap: StateSnapshot): void {
    const [w, h] = snap.bounds;
    if (this.trails.length !== snap.boids.length) {
      this.trails = snap.boids.map(() => []);
    }
    const cap =
      snap.aesthetics.stroke_length === PERSIST_ALL
        ? Infinity
        : Math.max(1, snap.aesthetics.stroke_length);
    snap.boids.forEach(([x, y], i) => {
      const trail = this.trails[i]!;
      const prev = trail[trail.length - 1];
      const break_ =
        prev !== undefined &&
        (Math.abs(x - prev.x) > w / 2 || Math.abs(y - prev.y) > h / 2);
      trail.push({ x, y, break_ });
      while (trail.length > cap) trail.shift();
    });
    this.snapshot = snap;
    this.emotion = snap.emotion;
    this.applied += 1;
  }

  /** Largest boid speed in the current snapshot (0 when empty). */
  maxSpeed(): number {
    if (!this.snapshot) return 0;
    let top = 0;
    for (const [, , vx, vy] of this.snapshot.boids) {
      top = Math.max(top, Math.hypot(vx, vy));
    }
    return top;
  }
}
