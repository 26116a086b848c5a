/**
 * Wire protocol for the emoflock session service.
 *
 * Every WebSocket frame in either direction is one JSON object with a
 * `kind` field. This module owns the schemas, the valid-range table shared
 * with the server, and the clamping helpers that make it impossible to
 * build an out-of-range control message.
 */
import { z } from "zod";

export const EMOTIONS = [
  "joy",
  "sadness",
  "fear",
  "anger",
  "trust",
  "disgust",
  "surprise",
  "anticipation",
] as const;
export type Emotion = (typeof EMOTIONS)[number];

export const PALETTES = ["warm", "cold", "mixed"] as const;
export const BACKGROUNDS = ["dark", "bright"] as const;
export type Palette = (typeof PALETTES)[number];
export type Background = (typeof BACKGROUNDS)[number];

/** Stroke colors, identical to the headless renderer's constant table. */
export const WARM_COLORS = ["#FF8C00", "#E03131", "#FFD43B"] as const;
export const COLD_COLORS = ["#2F9E44", "#1971C2", "#4263EB", "#7048E8"] as const;
export const PALETTE_CYCLES: Record<Palette, readonly string[]> = {
  warm: WARM_COLORS,
  cold: COLD_COLORS,
  mixed: [...WARM_COLORS, ...COLD_COLORS],
};
export const BACKGROUND_COLORS: Record<Background, string> = {
  dark: "#14213D",
  bright: "#F1F3F5",
};

/** stroke_length at this value means "keep every trail point forever". */
export const PERSIST_ALL = 100;

// ---------------------------------------------------------------------------
// Outbound frames (service -> viewer)

const flockConfigSchema = z.object({
  separation_coeff: z.number().nonnegative(),
  alignment_coeff: z.number().nonnegative(),
  cohesion_coeff: z.number().nonnegative(),
  perception_range: z.number().nonnegative(),
  separation_range: z.number().nonnegative(),
  max_speed: z.number().positive(),
  flock_size: z.number().int().positive(),
});

const aestheticsSchema = z.object({
  stroke_length: z.number().int().min(0).max(100),
  stroke_width: z.number().int().min(1),
  background: z.enum(BACKGROUNDS),
  palette: z.enum(PALETTES),
});

export const snapshotSchema = z.object({
  kind: z.literal("state_snapshot"),
  seq: z.number().int().positive(),
  tick: z.number().int().nonnegative(),
  emotion: z.enum(EMOTIONS),
  boids: z.array(z.tuple([z.number(), z.number(), z.number(), z.number()])),
  bounds: z.tuple([z.number().positive(), z.number().positive()]),
  config: flockConfigSchema,
  aesthetics: aestheticsSchema,
});

export const emotionChangedSchema = z.object({
  kind: z.literal("emotion_changed"),
  seq: z.number().int().positive(),
  tick: z.number().int().nonnegative(),
  emotion: z.enum(EMOTIONS),
});

export const metricsUpdateSchema = z.object({
  kind: z.literal("metrics_update"),
  seq: z.number().int().positive(),
  tick: z.number().int().nonnegative(),
  participants: z.number().int().nonnegative(),
  collective: z.enum(EMOTIONS),
});

export const serverFrameSchema = z.discriminatedUnion("kind", [
  snapshotSchema,
  emotionChangedSchema,
  metricsUpdateSchema,
]);

export type StateSnapshot = z.infer<typeof snapshotSchema>;
export type EmotionChanged = z.infer<typeof emotionChangedSchema>;
export type MetricsUpdate = z.infer<typeof metricsUpdateSchema>;
export type ServerFrame = z.infer<typeof serverFrameSchema>;
export type FlockConfig = z.infer<typeof flockConfigSchema>;
export type Aesthetics = z.infer<typeof aestheticsSchema>;

/** Parse one wire frame; returns null for malformed or unknown frames. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  const result = serverFrameSchema.safeParse(data);
  return result.success ? result.data : null;
}

// ---------------------------------------------------------------------------
// Inbound messages (viewer -> service)

export interface SetEmotionMessage {
  kind: "set_emotion";
  emotion: Emotion;
}

export type ConfigField =
  | "separation_coeff"
  | "alignment_coeff"
  | "cohesion_coeff"
  | "perception_range"
  | "separation_range"
  | "max_speed";

export interface SetConfigMessage extends Partial<Record<ConfigField, number>> {
  kind: "set_config";
}

export interface SetAestheticsMessage {
  kind: "set_aesthetics";
  stroke_length?: number;
  stroke_width?: number;
  background?: Background;
  palette?: Palette;
}

export type ClientMessage =
  | SetEmotionMessage
  | SetConfigMessage
  | SetAestheticsMessage;

/** Slider ranges. `min` is the hard validity floor the server enforces;
 * `max` is the panel's chosen ceiling (any finite value is valid wire-wise
 * for ranges/coefficients, but a slider needs an end stop). */
export const SLIDER_RANGES: Record<ConfigField, { min: number; max: number }> = {
  separation_coeff: { min: 0, max: 1 },
  alignment_coeff: { min: 0, max: 1 },
  cohesion_coeff: { min: 0, max: 1 },
  perception_range: { min: 0, max: 300 },
  separation_range: { min: 0, max: 300 },
  max_speed: { min: 0.1, max: 20 },
};

export const STROKE_LENGTH_RANGE = { min: 0, max: 100 };
export const STROKE_WIDTH_RANGE = { min: 1, max: 12 };

function clampNumber(value: number, min: number, max: number): number {
  if (!Number.isFinite(value)) return min;
  return Math.min(max, Math.max(min, value));
}

/** Clamp a config slider value into its valid range. */
export function clampConfigField(field: ConfigField, value: number): number {
  const { min, max } = SLIDER_RANGES[field];
  return clampNumber(value, min, max);
}

export function clampStrokeLength(value: number): number {
  return Math.round(
    clampNumber(value, STROKE_LENGTH_RANGE.min, STROKE_LENGTH_RANGE.max),
  );
}

export function clampStrokeWidth(value: number): number {
  return Math.round(
    clampNumber(value, STROKE_WIDTH_RANGE.min, STROKE_WIDTH_RANGE.max),
  );
}

/** The only constructors the UI uses to build control messages; every
 * numeric value passes through its clamp, so invalid values cannot reach
 * the wire. */
export function buildSetEmotion(emotion: string): SetEmotionMessage {
  if (!(EMOTIONS as readonly string[]).includes(emotion)) {
    throw new Error(`unknown emotion: ${emotion}`);
  }
  return { kind: "set_emotion", emotion: emotion as Emotion };
}

export function buildSetConfig(field: ConfigField, value: number): SetConfigMessage {
  return { kind: "set_config", [field]: clampConfigField(field, value) };
}

export function buildSetAesthetics(
  change: Omit<SetAestheticsMessage, "kind">,
): SetAestheticsMessage {
  const msg: SetAestheticsMessage = { kind: "set_aesthetics" };
  if (change.stroke_length !== undefined)
    msg.stroke_length = clampStrokeLength(change.stroke_length);
  if (change.stroke_width !== undefined)
    msg.stroke_width = clampStrokeWidth(change.stroke_width);
  if (change.background !== undefined) {
    if (!(BACKGROUNDS as readonly string[]).includes(change.background)) {
      throw new Error(`unknown background: ${change.background}`);
    }
    msg.background = change.background;
  }
  if (change.palette !== undefined) {
    if (!(PALETTES as readonly string[]).includes(change.palette)) {
      throw new Error(`unknown palette: ${change.palette}`);
    }
    msg.palette = change.palette;
  }
  if (Object.keys(msg).length === 1) {
    throw new Error("set_aesthetics carries no fields");
  }
  return msg;
}

/** Final gate before the socket. Throws rather than transmit an invalid
 * message, whatever path produced it. */
export function assertValidClientMessage(msg: ClientMessage): void {
  if (msg.kind === "set_emotion") {
    if (!(EMOTIONS as readonly string[]).includes(msg.emotion)) {
      throw new Error(`invalid emotion: ${msg.emotion}`);
    }
    return;
  }
  if (msg.kind === "set_config") {
    const fields = Object.keys(msg).filter((k) => k !== "kind") as ConfigField[];
    if (fields.length === 0) throw new Error("set_config carries no fields");
    for (const field of fields) {
      const range = SLIDER_RANGES[field];
      if (!range) throw new Error(`unknown config field: ${field}`);
      const value = msg[field];
      if (
        typeof value !== "number" ||
        !Number.isFinite(value) ||
        value < range.min ||
        value > range.max
      ) {
        throw new Error(`invalid ${field}: ${value}`);
      }
    }
    return;
  }
  if (msg.kind === "set_aesthetics") {
    const { stroke_length, stroke_width, background, palette } = msg;
    if (
      stroke_length === undefined &&
      stroke_width === undefined &&
      background === undefined &&
      palette === undefined
    ) {
      throw new Error("set_aesthetics carries no fields");
    }
    if (
      stroke_length !== undefined &&
      (!Number.isInteger(stroke_length) ||
        stroke_length < STROKE_LENGTH_RANGE.min ||
        stroke_length > STROKE_LENGTH_RANGE.max)
    ) {
      throw new Error(`invalid stroke_length: ${stroke_length}`);
    }
    if (
      stroke_width !== undefined &&
      (!Number.isInteger(stroke_width) || stroke_width < STROKE_WIDTH_RANGE.min)
    ) {
      throw new Error(`invalid stroke_width: ${stroke_width}`);
    }
    if (background !== undefined && !(BACKGROUNDS as readonly string[]).includes(background)) {
      throw new Error(`invalid background: ${background}`);
    }
    if (palette !== undefined && !(PALETTES as readonly string[]).includes(palette)) {
      throw new Error(`invalid palette: ${palette}`);
    }
    return;
  }
  throw new Error(`unknown message kind: ${(msg as { kind: string }).kind}`);
}

export function encodeClientMessage(msg: ClientMessage): string {
  assertValidClientMessage(msg);
  return JSON.stringify(msg);
}
