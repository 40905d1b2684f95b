"""HTTP service exposing the model store and measurement core.

Measurement responses reuse the exact payload builder the CLI prints, so
the two interfaces are byte-identical for identical probes. Meshes are
immutable once stored; session registration is serialized by a lock.
"""
from __future__ import annotations

import json
import threading

from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse

from .config import Config
from .errors import (GirthkitError, InvalidParam, NoSection, ParseError,
                     UnknownModel, UnknownPatient, UnknownSession)
from .probes import probe_from_dict
from .sessions import Store, measurement_payload

_NOT_FOUND = (UnknownModel, UnknownPatient, UnknownSession)


def payload_json(payload: dict) -> str:
    """Canonical measurement JSON shared by CLI stdout and HTTP bodies."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def create_app(config: Config | None = None) -> FastAPI:
    config = config or Config()
    store = Store(config.data_path)
    app = FastAPI(title="girthkit", version="0.1.0")
    write_lock = threading.Lock()

    @app.exception_handler(GirthkitError)
    async def _domain_error(request: Request, exc: GirthkitError):
        status = 404 if isinstance(exc, _NOT_FOUND) else \
            422 if isinstance(exc, NoSection) else 400
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    @app.get("/models")
    def list_models():
        return store.list_models()

    @app.get("/models/{model_id}/mesh")
    def get_mesh(model_id: str):
        path = store.model_path(model_id)
        if not path.is_file():
            raise UnknownModel(f"model {model_id!r} not in store")
        return FileResponse(path, media_type="application/octet-stream",
                            filename=f"{model_id}.ply")

    @app.post("/models/{model_id}/mesh")
    async def put_mesh(model_id: str, request: Request):
        import tempfile
        body = await request.body()
        with tempfile.NamedTemporaryFile(suffix=".ply") as tmp:
            tmp.write(body)
            tmp.flush()
            with write_lock:
                store.add_model(model_id, tmp.name)
        return {"id": model_id}

    @app.post("/models/{model_id}/measure")
    async def measure(model_id: str, request: Request):
        try:
            body = await request.json()
        except ValueError as exc:
            raise InvalidParam(f"request body is not JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise InvalidParam("measure body must be a JSON object")
        probe = probe_from_dict(body, default_rays=config.ray_count)
        height = body.get("height")
        h = body.get("h", config.slice_h)
        _, bvh = store.load_model(model_id)
        payload = measurement_payload(
            bvh, probe, height=None if height is None else float(height),
            h=float(h))
        return Response(content=payload_json(payload),
                        media_type="application/json")

    @app.get("/patients/{patient}/sessions")
    def list_sessions(patient: str):
        return [{"session": s.session, "timestamp": s.timestamp,
                 "model_id": s.model_id, "meta": s.meta}
                for s in store.list_sessions(patient)]

    @app.post("/patients/{patient}/sessions")
    async def add_session(patient: str, request: Request):
        try:
            body = await request.json()
        except ValueError as exc:
            raise InvalidParam(f"request body is not JSON: {exc}") from exc
        for key in ("session", "timestamp", "model_id"):
            if key not in body:
                raise InvalidParam(f"session registration needs {key!r}")
        with write_lock:
            info = store.add_session(patient, str(body["session"]),
                                     str(body["timestamp"]),
                                     str(body["model_id"]),
                                     meta=body.get("meta"))
        return {"session": info.session, "timestamp": info.timestamp,
                "model_id": info.model_id}

    @app.get("/patients/{patient}/compare")
    def compare(patient: str, probe: str, sessions: str | None = None):
        try:
            probe_dict = json.loads(probe)
        except ValueError as exc:
            raise ParseError(f"probe query param is not JSON: {exc}") from exc
        p = probe_from_dict(probe_dict, default_rays=config.ray_count)
        session_ids = sessions.split(",") if sessions else None
        return store.session_compare(patient, p, session_ids)

    return app


def serve(config: Config, host: str = "127.0.0.1", port: int = 8008) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")
