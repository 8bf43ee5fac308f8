"""Local HTTP session service for interactive class remapping.

A session holds the prepared (remap-independent) pipeline state for one
image pair. Remap requests re-run only correspondence and fusion against
pristine reduced class maps, so a remap response is byte-identical to a
cold run with the same remap baked into the config.

Sessions live in memory behind an LRU cap; each session serializes its
mutations with a lock. The service binds loopback unless explicitly told
otherwise (see the CLI).
"""

from __future__ import annotations

import base64
import json
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import FileResponse, HTMLResponse, Response

from chromatch.errors import DataError, ParameterError
from chromatch.pipeline import (
    PipelineConfig,
    PipelineResult,
    PreparedPair,
    finish,
    prepare,
    result_artifacts,
)
from chromatch.tensor_io import decode_png_bytes, encode_png_bytes, tensor_to_bytes

MAX_SESSIONS = 16
MAX_SIDE = 2048


@dataclass
class Session:
    id: str
    prepared: PreparedPair
    result: PipelineResult
    remap_target: dict[int, int] = field(default_factory=dict)
    remap_reference: dict[int, int] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """LRU-capped session map; access refreshes recency."""

    def __init__(self, cap: int = MAX_SESSIONS):
        self.cap = cap
        self._lock = threading.Lock()
        self._sessions: OrderedDict[str, Session] = OrderedDict()

    def put(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session
            self._sessions.move_to_end(session.id)
            while len(self._sessions) > self.cap:
                self._sessions.popitem(last=False)

    def get(self, sid: str) -> Session:
        with self._lock:
            if sid not in self._sessions:
                raise HTTPException(status_code=404, detail=f"no session {sid}")
            self._sessions.move_to_end(sid)
            return self._sessions[sid]

    def delete(self, sid: str) -> None:
        with self._lock:
            if sid not in self._sessions:
                raise HTTPException(status_code=404, detail=f"no session {sid}")
            del self._sessions[sid]

    def __len__(self) -> int:
        return len(self._sessions)


def _label_color(label: int) -> str:
    """Stable distinguishable color per label (golden-angle hue walk)."""
    hue = (label * 137.50776405) % 360.0
    c = 0.55
    x = c * (1.0 - abs((hue / 60.0) % 2.0 - 1.0))
    sector = int(hue // 60) % 6
    rgb = [
        (c, x, 0.0),
        (x, c, 0.0),
        (0.0, c, x),
        (0.0, x, c),
        (x, 0.0, c),
        (c, 0.0, x),
    ][sector]
    m = 0.35
    return "#" + "".join(f"{int(round((v + m) * 255)):02x}" for v in rgb)


def _similarity_png(sim: np.ndarray) -> bytes:
    """Grid-resolution heatmap: dark blue (0) to warm red (1)."""
    s = np.clip(sim.astype(np.float64), 0.0, 1.0)
    r = np.clip(1.5 * s - 0.25, 0, 1)
    g = np.clip(1.0 - np.abs(2.0 * s - 1.0), 0, 1)
    b = np.clip(1.0 - 1.5 * s, 0, 1)
    rgb = np.stack([r, g, b], axis=-1)
    return encode_png_bytes(np.clip(np.rint(rgb * 255), 0, 255).astype(np.uint8))


def _session_payload(session: Session, include_id: bool = True) -> dict:
    res = session.result
    p = session.prepared
    labels_t = res.class_t.labels
    labels_r = res.class_r.labels
    present_t = set(np.unique(labels_t).tolist())
    present_r = set(np.unique(labels_r).tolist())
    legend = [
        {
            "label": lab,
            "color": _label_color(lab),
            "in_target": lab in present_t,
            "in_reference": lab in present_r,
        }
        for lab in range(p.k)
        if lab in present_t or lab in present_r
    ]
    payload = {
        "k": p.k,
        "grid_target": [int(labels_t.shape[0]), int(labels_t.shape[1])],
        "grid_reference": [int(labels_r.shape[0]), int(labels_r.shape[1])],
        "stride": p.config.stride,
        "offset_target": [int(p.off_t[0]), int(p.off_t[1])],
        "labels_target": labels_t.tolist(),
        "labels_reference": labels_r.tolist(),
        "legend": legend,
        "preview_png_b64": base64.b64encode(encode_png_bytes(res.rgb)).decode(),
        "similarity_png_b64": base64.b64encode(_similarity_png(res.sim)).decode(),
        "stats": {
            "losses": res.losses.to_dict(),
            "related_fraction": res.meta["related_fraction"],
            "policy": res.meta["policy"],
            "warnings": res.meta["warnings"],
        },
    }
    if include_id:
        payload["id"] = session.id
    return payload


def _decode_upload(raw: bytes, name: str) -> np.ndarray:
    try:
        rgb = decode_png_bytes(raw)
    except Exception as e:
        raise HTTPException(
            status_code=400, detail=f"cannot decode {name} image: {e}"
        ) from e
    h, w = rgb.shape[:2]
    if max(h, w) > MAX_SIDE:
        raise HTTPException(
            status_code=413,
            detail=f"{name} is {w}x{h}; the longest side may be {MAX_SIDE}px",
        )
    return rgb


def _parse_config(raw: str | None) -> PipelineConfig:
    cfg = PipelineConfig()
    if raw:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            raise HTTPException(
                status_code=400, detail=f"config is not valid JSON: {e}"
            ) from e
        if not isinstance(data, dict):
            raise HTTPException(status_code=400, detail="config must be an object")
        allowed = {
            "stride",
            "initial_classes",
            "reduced_k",
            "tau",
            "seed",
            "fill",
        }
        unknown = set(data) - allowed
        if unknown:
            raise HTTPException(
                status_code=400, detail=f"unknown config keys: {sorted(unknown)}"
            )
        for key, value in data.items():
            setattr(cfg, key, value)
    try:
        cfg.validate()
    except ParameterError as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    return cfg


def _parse_remap_section(data: dict, key: str, k: int) -> dict[int, int]:
    section = data.get(key) or {}
    if not isinstance(section, dict):
        raise HTTPException(status_code=422, detail=f"{key} must be an object")
    out: dict[int, int] = {}
    for raw_src, raw_dst in section.items():
        try:
            src, dst = int(raw_src), int(raw_dst)
        except (TypeError, ValueError):
            raise HTTPException(
                status_code=422,
                detail=f"invalid {key} entry {raw_src!r}: {raw_dst!r}",
            ) from None
        if not (0 <= src < k) or not (0 <= dst < k):
            raise HTTPException(
                status_code=422,
                detail=(
                    f"invalid {key} entry {src}->{dst}: labels must be in [0, {k})"
                ),
            )
        out[src] = dst
    return out


def create_app(static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="chromatch session service")
    store = SessionStore()
    app.state.sessions = store

    @app.post("/api/session")
    def create_session(
        target: UploadFile = File(...),
        reference: UploadFile = File(...),
        config: str | None = Form(None),
    ):
        cfg = _parse_config(config)
        rgb_t = _decode_upload(target.file.read(), "target")
        rgb_r = _decode_upload(reference.file.read(), "reference")
        try:
            prepared = prepare(rgb_t, rgb_r, cfg)
            result = finish(prepared)
        except (ParameterError, DataError) as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        session = Session(
            id=uuid.uuid4().hex, prepared=prepared, result=result
        )
        store.put(session)
        return _session_payload(session)

    @app.post("/api/session/{sid}/remap")
    def update_remap(sid: str, body: dict):
        session = store.get(sid)
        k = session.prepared.k
        remap_t = _parse_remap_section(body, "target", k)
        remap_r = _parse_remap_section(body, "reference", k)
        with session.lock:
            session.remap_target = remap_t
            session.remap_reference = remap_r
            session.result = finish(session.prepared, remap_t, remap_r)
            return _session_payload(session, include_id=False)

    @app.get("/api/session/{sid}/artifact/{name}")
    def get_artifact(sid: str, name: str):
        session = store.get(sid)
        artifacts = result_artifacts(session.result)
        if name not in artifacts:
            raise HTTPException(
                status_code=404,
                detail=f"unknown artifact {name!r}; have {sorted(artifacts)}",
            )
        return Response(
            content=tensor_to_bytes(artifacts[name]),
            media_type="application/octet-stream",
        )

    @app.delete("/api/session/{sid}")
    def delete_session(sid: str):
        store.delete(sid)
        return {"deleted": sid}

    if static_dir is not None:
        root = Path(static_dir)

        @app.get("/", response_class=HTMLResponse)
        def index():
            page = root / "index.html"
            if not page.is_file():
                raise HTTPException(status_code=404, detail="no editor build")
            return page.read_text()

        @app.get("/assets/{name}")
        def asset(name: str):
            f = (root / name).resolve()
            if not f.is_file() or root.resolve() not in f.parents:
                raise HTTPException(status_code=404, detail=f"no asset {name}")
            return FileResponse(f)

    return app
