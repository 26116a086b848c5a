/**
 * Browser entry point: wires the control panel and canvas to a session.
 * Everything sent to the service goes through the protocol builders, so
 * slider input is clamped before it can reach the wire. Panel controls
 * reflect server-acknowledged values from snapshots, not optimistic ones.
 */
import { ViewerConnection } from "./connection.js";
import {
  buildSetAesthetics,
  buildSetConfig,
  buildSetEmotion,
  ConfigField,
  EMOTIONS,
  SLIDER_RANGES,
  StateSnapshot,
} from "./protocol.js";
import { paint } from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d");
if (!ctx) throw new Error("2D canvas unsupported");
const statusEl = el<HTMLSpanElement>("status");
const emotionSelect = el<HTMLSelectElement>("emotion");
const paletteSelect = el<HTMLSelectElement>("palette");
const backgroundSelect = el<HTMLSelectElement>("background");
const strokeLength = el<HTMLInputElement>("stroke-length");
const strokeWidth = el<HTMLInputElement>("stroke-width");

for (const emotion of EMOTIONS) {
  const option = document.createElement("option");
  option.value = emotion;
  option.textContent = emotion;
  emotionSelect.append(option);
}

const params = new URLSearchParams(location.search);
const sessionId = params.get("session") ?? "s0";
const wsScheme = location.protocol === "https:" ? "wss" : "ws";
const url = `${wsScheme}://${location.host}/sessions/${sessionId}/ws`;

let needsPaint = false;

function syncPanel(snapshot: StateSnapshot): void {
  if (document.activeElement !== emotionSelect)
    emotionSelect.value = snapshot.emotion;
  if (document.activeElement !== paletteSelect)
    paletteSelect.value = snapshot.aesthetics.palette;
  if (document.activeElement !== backgroundSelect)
    backgroundSelect.value = snapshot.aesthetics.background;
  if (document.activeElement !== strokeLength)
    strokeLength.value = String(snapshot.aesthetics.stroke_length);
  if (document.activeElement !== strokeWidth)
    strokeWidth.value = String(snapshot.aesthetics.stroke_width);
  for (const field of Object.keys(SLIDER_RANGES) as ConfigField[]) {
    const input = document.getElementById(`cfg-${field}`) as HTMLInputElement | null;
    if (input && document.activeElement !== input) {
      input.value = String(snapshot.config[field]);
    }
  }
}

const connection = new ViewerConnection(url, {
  onStatus: (status, retryInMs) => {
    statusEl.textContent =
      status === "disconnected" && retryInMs !== undefined
        ? `disconnected, retrying in ${(retryInMs / 1000).toFixed(1)}s`
        : status;
  },
  onFrame: (frame, state) => {
    if (frame.kind === "state_snapshot") {
      syncPanel(frame);
      needsPaint = true;
    } else if (frame.kind === "emotion_changed") {
      emotionSelect.value = frame.emotion;
    } else {
      statusEl.textContent = `connected — ${frame.participants} participant(s), collective ${frame.collective}`;
    }
    void state;
  },
});

function frameLoop(): void {
  if (needsPaint) {
    needsPaint = false;
    paint(ctx!, canvas.width, canvas.height, connection.state.snapshot, connection.state.trails);
  }
  requestAnimationFrame(frameLoop);
}
requestAnimationFrame(frameLoop);

function trySend(build: () => Parameters<ViewerConnection["send"]>[0]): void {
  try {
    connection.send(build());
  } catch (err) {
    statusEl.textContent = String(err);
  }
}

emotionSelect.addEventListener("change", () =>
  trySend(() => buildSetEmotion(emotionSelect.value)),
);
paletteSelect.addEventListener("change", () =>
  trySend(() =>
    buildSetAesthetics({ palette: paletteSelect.value as never }),
  ),
);
backgroundSelect.addEventListener("change", () =>
  trySend(() =>
    buildSetAesthetics({ background: backgroundSelect.value as never }),
  ),
);
strokeLength.addEventListener("change", () =>
  trySend(() => buildSetAesthetics({ stroke_length: Number(strokeLength.value) })),
);
strokeWidth.addEventListener("change", () =>
  trySend(() => buildSetAesthetics({ stroke_width: Number(strokeWidth.value) })),
);
for (const field of Object.keys(SLIDER_RANGES) as ConfigField[]) {
  const input = document.getElementById(`cfg-${field}`) as HTMLInputElement | null;
  input?.addEventListener("change", () =>
    trySend(() => buildSetConfig(field, Number(input.value))),
  );
}
