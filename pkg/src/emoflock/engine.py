"""Deterministic session engine behind the streaming service.

The engine is a pure state machine: it consumes inbound messages and tick
calls, and produces outbound messages (JSON-ready dicts with strictly
increasing sequence numbers). Wall-clock concerns (the tick loop, sockets)
live in :mod:`emoflock.api`; because the engine itself only depends on the
seed, the config, and the message/tick interleaving, a recorded inbound log
replays to a bit-identical outbound stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from . import flock as fl
from .emotions import (
    DEFAULT_TRANSITION_S,
    Emotion,
    EmotionTransition,
    config_for,
    parse_emotion,
    transition,
)
from .physio import PersonPipeline, aggregate
from .render import Aesthetics, Background, Palette

DEFAULT_BOUNDS = (800.0, 600.0)
DEFAULT_TICK_RATE = 30.0
OVERRIDE_RELEASE_COUNT = 2  # aggregates that must disagree before physio wins back

INBOUND_KINDS = ("rr_sample", "set_emotion", "set_config", "set_aesthetics")
CONFIG_FIELDS = (
    "separation_coeff",
    "alignment_coeff",
    "cohesion_coeff",
    "perception_range",
    "separation_range",
    "max_speed",
)
AESTHETICS_FIELDS = ("stroke_length", "stroke_width", "background", "palette")


class ProtocolError(ValueError):
    """Malformed or unknown inbound message; never fatal to the session."""


@dataclass
class EngineConfig:
    seed: int = 0
    flock_size: int = 100
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    tick_rate: float = DEFAULT_TICK_RATE
    emotion: Emotion = Emotion.JOY
    transition_s: float = DEFAULT_TRANSITION_S

    def __post_init__(self) -> None:
        if self.tick_rate <= 0:
            raise ValueError(f"tick_rate must be > 0, got {self.tick_rate!r}")
        if self.flock_size < 1:
            raise ValueError(f"flock_size must be >= 1, got {self.flock_size!r}")
        if self.bounds[0] <= 0 or self.bounds[1] <= 0:
            raise ValueError(f"bounds must be positive, got {self.bounds!r}")
        if self.transition_s < 0:
            raise ValueError(f"transition_s must be >= 0, got {self.transition_s!r}")


class SessionEngine:
    """One session: flock state, collective emotion, per-person pipelines."""

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.emotion = config.emotion
        self.active_config = config_for(config.emotion, config.flock_size)
        self.state = fl.init_flock(self.active_config, config.bounds, config.seed)
        self.aesthetics = Aesthetics()
        self.seq = 0
        self.pipelines: dict[str, PersonPipeline] = {}
        self.drop_count = 0
        self.override: Optional[Emotion] = None
        self._override_disagreements = 0
        self._transition: Optional[EmotionTransition] = None
        self._transition_ticks = 0
        self._transition_total_ticks = 0
        self.record: list[tuple[int, dict]] = []
        self.last_snapshot_json: Optional[str] = None
        self._last_max_speed = self.active_config.max_speed

    # -- inbound ---------------------------------------------------------

    def handle_message(self, msg: dict) -> list[dict]:
        """Apply one inbound message; returns broadcast events it triggered.

        Raises :class:`ProtocolError` on malformed input without touching the
        session state.
        """
        if not isinstance(msg, dict) or "kind" not in msg:
            raise ProtocolError("message must be an object with a 'kind' field")
        kind = msg["kind"]
        if kind not in INBOUND_KINDS:
            raise ProtocolError(
                f"unknown message kind {kind!r}; expected one of {list(INBOUND_KINDS)}"
            )
        handler = getattr(self, f"_on_{kind}")
        events = handler(msg)
        self.record.append((self.state.tick, msg))
        return events

    def _on_rr_sample(self, msg: dict) -> list[dict]:
        try:
            person = str(msg["person_id"])
            ts = int(msg["timestamp_ms"])
            rr = float(msg["rr_ms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad rr_sample: {exc}") from exc
        pipeline = self.pipelines.get(person)
        if pipeline is None:
            pipeline = PersonPipeline(person)
            self.pipelines[person] = pipeline
        before = pipeline.dropped
        closed = pipeline.add_sample(ts, rr)
        self.drop_count += pipeline.dropped - before
        events: list[dict] = []
        if any(w.footprint is not None for w in closed):
            events.extend(self._run_aggregate())
        return events

    def _on_set_emotion(self, msg: dict) -> list[dict]:
        try:
            target = parse_emotion(msg["emotion"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(str(exc)) from exc
        self.override = target
        self._override_disagreements = 0
        if target is self.emotion and self._transition is None:
            return []  # idempotent no-op
        return [self._begin_transition(target)]

    def _on_set_config(self, msg: dict) -> list[dict]:
        updates = {}
        for name, value in msg.items():
            if name == "kind":
                continue
            if name not in CONFIG_FIELDS:
                raise ProtocolError(
                    f"unknown config field {name!r}; valid fields: {list(CONFIG_FIELDS)}"
                )
            try:
                updates[name] = float(value)
            except (TypeError, ValueError) as exc:
                raise ProtocolError(f"bad value for {name!r}: {value!r}") from exc
        if not updates:
            raise ProtocolError("set_config carries no config fields")
        try:
            new_config = replace(self.active_config, **updates)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        self.active_config = new_config
        self._transition = None  # manual tuning cancels any blend in progress
        return []

    def _on_set_aesthetics(self, msg: dict) -> list[dict]:
        current = self.aesthetics
        kwargs = dict(
            stroke_length=current.stroke_length,
            stroke_width=current.stroke_width,
            background=current.background,
            palette=current.palette,
        )
        seen = False
        for name, value in msg.items():
            if name == "kind":
                continue
            if name not in AESTHETICS_FIELDS:
                raise ProtocolError(
                    f"unknown aesthetics field {name!r}; valid fields: {list(AESTHETICS_FIELDS)}"
                )
            seen = True
            try:
                if name == "background":
                    kwargs[name] = Background(str(value).lower())
                elif name == "palette":
                    kwargs[name] = Palette(str(value).lower())
                else:
                    kwargs[name] = int(value)
            except (TypeError, ValueError) as exc:
                raise ProtocolError(f"bad value for {name!r}: {value!r}") from exc
        if not seen:
            raise ProtocolError("set_aesthetics carries no aesthetics fields")
        try:
            self.aesthetics = Aesthetics(**kwargs)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        return []

    # -- collective emotion ------------------------------------------------

    def _run_aggregate(self) -> list[dict]:
        assessments = [
            p.last_assessment for p in self.pipelines.values() if p.last_assessment
        ]
        if not assessments:
            return []
        collective = aggregate(assessments)
        events: list[dict] = [
            {
                "kind": "metrics_update",
                "seq": self._next_seq(),
                "tick": self.state.tick,
                "participants": len(assessments),
                "collective": collective.value,
            }
        ]
        if self.override is not None:
            if collective is self.override:
                self._override_disagreements = 0
                return events
            self._override_disagreements += 1
            if self._override_disagreements < OVERRIDE_RELEASE_COUNT:
                return events
            self.override = None
            self._override_disagreements = 0
        if collective is not self.emotion:
            events.append(self._begin_transition(collective))
        return events

    def _begin_transition(self, target: Emotion) -> dict:
        previous = self.emotion
        self._transition = EmotionTransition(
            from_config=self.active_config,
            to_emotion=target,
            duration_s=self.config.transition_s,
        )
        self._transition_total_ticks = max(
            1, round(self.config.transition_s * self.config.tick_rate)
        )
        self._transition_ticks = 0
        self.emotion = target
        return {
            "kind": "emotion_changed",
            "seq": self._next_seq(),
            "tick": self.state.tick,
            "emotion": target.value,
            "previous": previous.value,
            "transition_s": self.config.transition_s,
        }

    # -- simulation --------------------------------------------------------

    def tick(self) -> dict:
        """Advance the simulation one step and return the state snapshot."""
        if self._transition is not None:
            self._transition_ticks += 1
            fraction = min(1.0, self._transition_ticks / self._transition_total_ticks)
            blend = EmotionTransition(
                from_config=self._transition.from_config,
                to_emotion=self._transition.to_emotion,
                duration_s=self.config.transition_s,
                elapsed_s=fraction * self.config.transition_s,
            )
            self.active_config = transition(blend)
            if fraction >= 1.0:
                self._transition = None
                self._normalize_pace()
        if self.active_config.max_speed != self._last_max_speed:
            # Max speed doubles as the flock's energy level: low-interaction
            # configs (e.g. perception 0) would otherwise never change pace,
            # so velocities scale with it while headings stay put.
            self._scale_velocities(self.active_config.max_speed / self._last_max_speed)
            self._last_max_speed = self.active_config.max_speed
        self.state = fl.step(self.state, self.active_config)
        snapshot = self._snapshot()
        self.last_snapshot_json = json.dumps(snapshot, separators=(",", ":"))
        return snapshot

    def _scale_velocities(self, factor: float) -> None:
        self.state = fl.FlockState(
            self.state.positions,
            self.state.velocities * factor,
            self.state.tick,
            self.state.bounds,
            self.state.rng,
        )

    def _normalize_pace(self) -> None:
        # A completed transition pins the flock's top speed to the new max
        # speed, so the energy level of the target emotion is visible even
        # for configs whose ranges disable all steering forces.
        speeds = np.hypot(self.state.velocities[:, 0], self.state.velocities[:, 1])
        top = float(speeds.max()) if len(speeds) else 0.0
        if top > 0:
            self._scale_velocities(self.active_config.max_speed / top)

    def _snapshot(self) -> dict:
        boids = [
            [round(float(x), 2), round(float(y), 2), round(float(vx), 2), round(float(vy), 2)]
            for (x, y), (vx, vy) in zip(self.state.positions, self.state.velocities)
        ]
        cfg = self.active_config
        return {
            "kind": "state_snapshot",
            "seq": self._next_seq(),
            "tick": self.state.tick,
            "emotion": self.emotion.value,
            "boids": boids,
            "bounds": [self.state.bounds[0], self.state.bounds[1]],
            "config": {
                "separation_coeff": cfg.separation_coeff,
                "alignment_coeff": cfg.alignment_coeff,
                "cohesion_coeff": cfg.cohesion_coeff,
                "perception_range": cfg.perception_range,
                "separation_range": cfg.separation_range,
                "max_speed": cfg.max_speed,
                "flock_size": cfg.flock_size,
            },
            "aesthetics": {
                "stroke_length": self.aesthetics.stroke_length,
                "stroke_width": self.aesthetics.stroke_width,
                "background": self.aesthetics.background.value,
                "palette": self.aesthetics.palette.value,
            },
        }

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq


def replay(
    config: EngineConfig,
    log: Iterable[tuple[int, dict]],
    frames: Optional[int] = None,
) -> list[dict]:
    """Re-execute a recorded inbound log; returns the full outbound stream.

    ``log`` is (tick, message) pairs: each message is delivered once the
    engine has completed that many ticks, exactly as the live service
    interleaves them. ``frames`` extends (or truncates) the run; by default it
    runs to the last logged tick.
    """
    entries = sorted(log, key=lambda e: e[0])
    last_tick = entries[-1][0] if entries else 0
    total = frames if frames is not None else last_tick
    engine = SessionEngine(config)
    out: list[dict] = []
    idx = 0
    while idx < len(entries) and entries[idx][0] <= 0:
        out.extend(engine.handle_message(entries[idx][1]))
        idx += 1
    for t in range(1, total + 1):
        out.append(engine.tick())
        while idx < len(entries) and entries[idx][0] <= t:
            out.extend(engine.handle_message(entries[idx][1]))
            idx += 1
    return out


def dump_stream(messages: Iterable[dict]) -> str:
    """Serialize an outbound stream as newline-delimited JSON."""
    return "".join(json.dumps(m, separators=(",", ":")) + "\n" for m in messages)


def load_log(path: str) -> list[tuple[int, dict]]:
    """Read a recorded inbound log: NDJSON lines {"tick": int, "message": {...}}."""
    entries: list[tuple[int, dict]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                entries.append((int(rec["tick"]), dict(rec["message"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"corrupt log line {lineno}: {exc}") from exc
    return entries


def save_log(path: str, entries: Iterable[tuple[int, dict]]) -> None:
    with open(path, "w") as fh:
        for tick, message in entries:
            fh.write(json.dumps({"tick": tick, "message": message}) + "\n")
