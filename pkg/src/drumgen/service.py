"""HTTP service exposing generate / analyze / variation to the CLI and UI.

All endpoints live under /api/v1 and speak JSON; errors come back as
{"error": ..., "detail": ...} with conventional status codes.  Model weights
are loaded once and never mutated; per-session state is guarded by a lock.
"""

from __future__ import annotations

import base64
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .audio import read_wav
from .navigation import NavigationState, SynthEngine, change_directions, decode_position, sample_center, z_digest


class SessionRecord:
    def __init__(self, nav: NavigationState):
        self.nav = nav
        self.c = np.array([1 / 3, 1 / 3, 1 / 3])
        self.last_clip_id: str | None = None
        self.lock = threading.Lock()

    def as_dict(self) -> dict:
        return {
            "z_center": self.nav.z_center.tolist(),
            "e1": self.nav.e1.tolist(),
            "e2": self.nav.e2.tolist(),
            "mode": self.nav.mode,
            "c": self.c.tolist(),
            "last_clip_id": self.last_clip_id,
        }


class GenerateBody(BaseModel):
    u: float = 0.0
    v: float | None = None
    c: list[float]


class SeedBody(BaseModel):
    seed: int | None = None
    mode: str | None = None


def create_app(engine: SynthEngine, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="drumgen service")
    sessions: dict[str, SessionRecord] = {}

    @app.exception_handler(HTTPException)
    async def http_error(_req: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": "request failed", "detail": exc.detail})

    @app.exception_handler(RequestValidationError)
    async def validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": "invalid request body", "detail": str(exc.errors())})

    def get_session(session_id: str) -> SessionRecord:
        record = sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return record

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "models": engine.fingerprints()}

    @app.post("/api/v1/session")
    def create_session():
        session_id = uuid.uuid4().hex
        sessions[session_id] = SessionRecord(sample_center())
        return {"session_id": session_id}

    @app.get("/api/v1/session/{session_id}/state")
    def get_state(session_id: str):
        record = get_session(session_id)
        with record.lock:
            return record.as_dict()

    @app.post("/api/v1/session/{session_id}/sample-center")
    def post_sample_center(session_id: str, body: SeedBody | None = None):
        record = get_session(session_id)
        body = body or SeedBody()
        with record.lock:
            mode = body.mode or record.nav.mode
            record.nav = sample_center(body.seed, mode=mode)
        return {"ok": True}

    @app.post("/api/v1/session/{session_id}/change-direction")
    def post_change_direction(session_id: str, body: SeedBody | None = None):
        record = get_session(session_id)
        body = body or SeedBody()
        with record.lock:
            record.nav = change_directions(record.nav, body.seed)
        return {"ok": True}

    @app.post("/api/v1/session/{session_id}/generate")
    def post_generate(session_id: str, body: GenerateBody):
        record = get_session(session_id)
        if len(body.c) != 3:
            raise HTTPException(status_code=400, detail="c must have exactly 3 entries")
        with record.lock:
            z = decode_position(record.nav, body.u, body.v or 0.0)
            try:
                _clip, wav = engine.render(z, np.array(body.c))
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            digest = z_digest(z)
            record.c = np.array(body.c, dtype=np.float64)
            record.last_clip_id = digest
        return {"wav_base64": base64.b64encode(wav).decode(), "z_digest": digest}

    @app.post("/api/v1/session/{session_id}/analyze")
    def post_analyze(session_id: str, file: UploadFile, seed: int | None = None):
        record = get_session(session_id)
        raw = file.file.read()
        if not raw.startswith(b"RIFF") or raw[8:12] != b"WAVE":
            raise HTTPException(status_code=415, detail="only WAV uploads are supported")
        try:
            clip = read_wav(raw)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"unreadable audio: {exc}") from exc
        try:
            nav, c_hat = engine.analyze(clip, direction_seed=seed)
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        with record.lock:
            record.nav = nav
            record.c = c_hat
        return {"c": c_hat.tolist(), "note": "z_center updated"}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
