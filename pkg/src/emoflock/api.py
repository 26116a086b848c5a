"""FastAPI service exposing live flock sessions.

Wire protocol: every WebSocket frame is one JSON object with a mandatory
``kind`` field. Clients send ``rr_sample`` / ``set_emotion`` / ``set_config`` /
``set_aesthetics``; the service pushes ``state_snapshot`` (every tick),
``emotion_changed`` and ``metrics_update``. Slow viewers are never buffered
beyond the latest snapshot. Only collective state ever leaves the service;
per-person metrics stay inside the session.
"""

from __future__ import annotations

import asyncio
import itertools
import json
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field, field_validator

from .emotions import Emotion, parse_emotion
from .engine import DEFAULT_TICK_RATE, EngineConfig, ProtocolError, SessionEngine


class SessionCreateRequest(BaseModel):
    seed: int = 0
    flock_size: int = Field(default=100, ge=1, le=10_000)
    tick_rate: float = Field(default=DEFAULT_TICK_RATE, gt=0, le=240)
    emotion: str = "joy"
    bounds: tuple[float, float] = (800.0, 600.0)
    transition_s: float = Field(default=2.0, ge=0)
    paused: bool = False

    @field_validator("emotion")
    @classmethod
    def _known_emotion(cls, v: str) -> str:
        return parse_emotion(v).value

    @field_validator("bounds")
    @classmethod
    def _positive_bounds(cls, v: tuple[float, float]) -> tuple[float, float]:
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("bounds must be positive")
        return v


class SessionInfo(BaseModel):
    session_id: str
    emotion: str
    tick: int
    tick_rate: float
    flock_size: int
    seed: int
    bounds: tuple[float, float]
    participants: int
    viewers: int
    dropped_samples: int
    paused: bool


class MessageAck(BaseModel):
    status: str = "ok"
    events: int = 0


class _Session:
    def __init__(self, session_id: str, request: SessionCreateRequest) -> None:
        self.session_id = session_id
        self.engine = SessionEngine(
            EngineConfig(
                seed=request.seed,
                flock_size=request.flock_size,
                bounds=request.bounds,
                tick_rate=request.tick_rate,
                emotion=parse_emotion(request.emotion),
                transition_s=request.transition_s,
            )
        )
        self.paused = request.paused
        self.viewers: set[asyncio.Queue[str]] = set()
        self.task: Optional[asyncio.Task] = None
        self.closed = False

    def broadcast(self, payload: str) -> None:
        for queue in self.viewers:
            # Backpressure bound: at most one queued snapshot per viewer.
            while queue.full():
                queue.get_nowait()
            queue.put_nowait(payload)

    def handle(self, msg: dict) -> list[dict]:
        events = self.engine.handle_message(msg)
        for event in events:
            self.broadcast(json.dumps(event, separators=(",", ":")))
        return events

    def advance(self, steps: int = 1) -> None:
        for _ in range(steps):
            self.engine.tick()
            assert self.engine.last_snapshot_json is not None
            self.broadcast(self.engine.last_snapshot_json)

    async def run(self) -> None:
        period = 1.0 / self.engine.config.tick_rate
        try:
            while not self.closed:
                if not self.paused:
                    self.advance()
                await asyncio.sleep(period)
        except asyncio.CancelledError:
            pass


def create_app(default_session: Optional[SessionCreateRequest] = None) -> FastAPI:
    """Build the service app; with ``default_session``, session "s0" exists
    from startup so operators can point viewers at it immediately."""
    sessions: dict[str, _Session] = {}
    ids = itertools.count(1)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        if default_session is not None:
            sessions["s0"] = _Session("s0", default_session)
            sessions["s0"].task = asyncio.create_task(sessions["s0"].run())
        yield
        for session in sessions.values():
            session.closed = True
            if session.task:
                session.task.cancel()

    app = FastAPI(title="emoflock", version="0.1.0", lifespan=lifespan)

    def get_session(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session

    def info(session: _Session) -> SessionInfo:
        engine = session.engine
        return SessionInfo(
            session_id=session.session_id,
            emotion=engine.emotion.value,
            tick=engine.state.tick,
            tick_rate=engine.config.tick_rate,
            flock_size=engine.config.flock_size,
            seed=engine.config.seed,
            bounds=engine.config.bounds,
            participants=len(engine.pipelines),
            viewers=len(session.viewers),
            dropped_samples=engine.drop_count,
            paused=session.paused,
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions", response_model=SessionInfo, status_code=201)
    async def create_session(request: SessionCreateRequest) -> SessionInfo:
        session_id = f"s{next(ids)}"
        session = _Session(session_id, request)
        sessions[session_id] = session
        session.task = asyncio.create_task(session.run())
        return info(session)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def get_info(session_id: str) -> SessionInfo:
        return info(get_session(session_id))

    @app.delete("/sessions/{session_id}", status_code=204)
    async def delete_session(session_id: str) -> None:
        session = get_session(session_id)
        session.closed = True
        if session.task:
            session.task.cancel()
        del sessions[session_id]

    @app.post("/sessions/{session_id}/messages", response_model=MessageAck)
    def post_message(session_id: str, msg: dict) -> MessageAck:
        session = get_session(session_id)
        try:
            events = session.handle(msg)
        except ProtocolError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return MessageAck(events=len(events))

    @app.post("/sessions/{session_id}/advance", response_model=SessionInfo)
    def advance(session_id: str, steps: int = 1) -> SessionInfo:
        # Manual stepping for paused sessions (deterministic tests/tools).
        session = get_session(session_id)
        if steps < 1 or steps > 100_000:
            raise HTTPException(status_code=422, detail="steps must be in [1, 100000]")
        session.advance(steps)
        return info(session)

    @app.websocket("/sessions/{session_id}/ws")
    async def session_ws(websocket: WebSocket, session_id: str) -> None:
        session = sessions.get(session_id)
        if session is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        queue: asyncio.Queue[str] = asyncio.Queue(maxsize=1)
        session.viewers.add(queue)
        # Joining viewers start from a full snapshot, never a delta.
        if session.engine.last_snapshot_json is not None:
            queue.put_nowait(session.engine.last_snapshot_json)

        async def sender() -> None:
            while True:
                await websocket.send_text(await queue.get())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ProtocolError("message must be a JSON object")
                    session.handle(msg)
                except (json.JSONDecodeError, ProtocolError) as exc:
                    await websocket.send_text(
                        json.dumps({"kind": "error", "detail": str(exc)})
                    )
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            session.viewers.discard(queue)

    return app


app = create_app()
