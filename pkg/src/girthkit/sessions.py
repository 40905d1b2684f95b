"""File-backed model and patient-session store.

Layout under the data directory:

    models/<model_id>.ply
    patients/<patient>/sessions/<session>/mesh.ply
    patients/<patient>/sessions/<session>/meta.json
    index.json

Sessions are self-contained (the mesh is copied in); index.json is the
single scan-free listing the services read.
"""
from __future__ import annotations

import json
import re
import shutil
from dataclasses import dataclass
from pathlib import Path

from .bvh import Bvh, build_bvh
from .errors import (InvalidParam, IoError, UnknownModel, UnknownPatient,
                     UnknownSession)
from .mesh import TriangleMesh, load_mesh
from .probes import (CircleProbe, CylinderProbe, measure_section,
                     measure_volume)

_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def _check_id(kind: str, value: str) -> str:
    if not _ID_RE.match(value or ""):
        raise InvalidParam(f"invalid {kind} id {value!r}")
    return value


@dataclass(frozen=True)
class SessionInfo:
    patient: str
    session: str
    timestamp: str  # ISO-8601
    model_id: str
    meta: dict


def measurement_payload(bvh: Bvh, probe: CircleProbe,
                        height: float | None = None,
                        h: float = 1.0) -> dict:
    """Shared CLI/server measurement JSON body (identical on both paths)."""
    section = measure_section(bvh, probe)
    payload = section.to_dict(probe)
    if height is not None:
        vol = measure_volume(bvh, CylinderProbe(base=probe, height=height, h=h))
        payload.update(vol.to_dict())
        payload["probe"]["height"] = float(height)
        payload["probe"]["h"] = float(h)
    return payload


class Store:
    """Single-writer/multi-reader session and model store."""

    def __init__(self, data_dir):
        self.root = Path(data_dir)
        self.models_dir = self.root / "models"
        self.patients_dir = self.root / "patients"
        self.index_path = self.root / "index.json"
        self._mesh_cache: dict[str, tuple[float, TriangleMesh, Bvh]] = {}

    # -- models ------------------------------------------------------------

    def model_path(self, model_id: str) -> Path:
        _check_id("model", model_id)
        return self.models_dir / f"{model_id}.ply"

    def list_models(self) -> list[dict]:
        out = []
        if self.models_dir.is_dir():
            for p in sorted(self.models_dir.glob("*.ply")):
                mesh, _ = self.load_model(p.stem)
                out.append({"id": p.stem, "vertex_count": mesh.vertex_count,
                            "triangle_count": mesh.triangle_count})
        return out

    def add_model(self, model_id: str, mesh_file) -> None:
        path = self.model_path(model_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        load_mesh(mesh_file)  # validate before accepting
        shutil.copyfile(mesh_file, path)

    def load_model(self, model_id: str) -> tuple[TriangleMesh, Bvh]:
        path = self.model_path(model_id)
        if not path.is_file():
            raise UnknownModel(f"model {model_id!r} not in store")
        mtime = path.stat().st_mtime
        cached = self._mesh_cache.get(model_id)
        if cached and cached[0] == mtime:
            return cached[1], cached[2]
        mesh = load_mesh(path)
        bvh = build_bvh(mesh)
        self._mesh_cache[model_id] = (mtime, mesh, bvh)
        return mesh, bvh

    # -- sessions ----------------------------------------------------------

    def _read_index(self) -> dict:
        if not self.index_path.is_file():
            return {"patients": {}}
        try:
            return json.loads(self.index_path.read_text())
        except (OSError, ValueError) as exc:
            raise IoError(f"{self.index_path}: {exc}") from exc

    def _write_index(self, index: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.index_path)

    def session_dir(self, patient: str, session: str) -> Path:
        _check_id("patient", patient)
        _check_id("session", session)
        return self.patients_dir / patient / "sessions" / session

    def add_session(self, patient: str, session: str, timestamp: str,
                    model_id: str, meta: dict | None = None) -> SessionInfo:
        sdir = self.session_dir(patient, session)
        if sdir.exists():
            raise InvalidParam(f"session {patient}/{session} already exists")
        src = self.model_path(model_id)
        if not src.is_file():
            raise UnknownModel(f"model {model_id!r} not in store")
        sdir.mkdir(parents=True)
        shutil.copyfile(src, sdir / "mesh.ply")
        record = {"timestamp": timestamp, "model_id": model_id,
                  **(meta or {})}
        (sdir / "meta.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n")
        index = self._read_index()
        index["patients"].setdefault(patient, [])
        if session not in index["patients"][patient]:
            index["patients"][patient].append(session)
            index["patients"][patient].sort()
        self._write_index(index)
        return SessionInfo(patient=patient, session=session,
                           timestamp=timestamp, model_id=model_id,
                           meta=meta or {})

    def list_patients(self) -> list[str]:
        return sorted(self._read_index()["patients"])

    def list_sessions(self, patient: str) -> list[SessionInfo]:
        _check_id("patient", patient)
        index = self._read_index()
        if patient not in index["patients"]:
            raise UnknownPatient(f"unknown patient {patient!r}")
        infos = []
        for session in index["patients"][patient]:
            meta_path = self.session_dir(patient, session) / "meta.json"
            try:
                meta = json.loads(meta_path.read_text())
            except (OSError, ValueError) as exc:
                raise IoError(f"{meta_path}: {exc}") from exc
            extra = {k: v for k, v in meta.items()
                     if k not in ("timestamp", "model_id")}
            infos.append(SessionInfo(patient=patient, session=session,
                                     timestamp=str(meta.get("timestamp", "")),
                                     model_id=str(meta.get("model_id", "")),
                                     meta=extra))
        infos.sort(key=lambda s: (s.timestamp, s.session))
        return infos

    def session_mesh(self, patient: str, session: str) -> tuple[TriangleMesh, Bvh]:
        path = self.session_dir(patient, session) / "mesh.ply"
        if not path.is_file():
            raise UnknownSession(f"unknown session {patient}/{session}")
        mesh = load_mesh(path)
        return mesh, build_bvh(mesh)

    def session_compare(self, patient: str, probe: CircleProbe,
                        sessions: list[str] | None = None) -> list[dict]:
        """Apply one probe across sessions in timestamp order."""
        infos = self.list_sessions(patient)
        if sessions is not None:
            by_id = {s.session: s for s in infos}
            missing = [s for s in sessions if s not in by_id]
            if missing:
                raise UnknownSession(
                    f"unknown sessions for {patient!r}: {missing}")
            infos = sorted((by_id[s] for s in sessions),
                           key=lambda s: (s.timestamp, s.session))
        series = []
        for info in infos:
            _, bvh = self.session_mesh(patient, info.session)
            section = measure_section(bvh, probe)
            series.append({"session": info.session,
                           "timestamp": info.timestamp,
                           "perimeter_cm": section.perimeter,
                           "area_cm2": section.area})
        return series
