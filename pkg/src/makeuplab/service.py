"""HTTP service exposing the transfer pipeline to the mask-editor UI.

Sessions move through created -> extracted <-> edited -> applied. Mask bytes
round-trip verbatim: what a client PUTs is exactly what a later GET returns.
All heavy lifting happens synchronously under a per-session lock, bounded by
the configured timeout.
"""
from __future__ import annotations

import base64
import concurrent.futures
import io
import json
import os

import numpy as np
from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from .config import ServiceConfig, load_config
from .extractor import load_extractor
from .gan import load_generator
from .geometry import NoFaceError, load_landmarks, region_encoding
from .imaging import load_image, save_image
from .pipeline import EXTRACT_METHODS, apply_stage, extract_stage, warp_reference
from .sessions import (
    DimensionMismatch,
    InvalidTransition,
    SessionStore,
    UnknownSession,
)


class ExtractRequest(BaseModel):
    method: str | None = None
    params: dict = {}


class ApplyRequest(BaseModel):
    bypass: bool | None = None


def _mask_to_png_bytes(mask: np.ndarray) -> bytes:
    buf = io.BytesIO()
    arr = np.round(np.clip(mask, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _image_to_png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    arr = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def create_app(cfg: ServiceConfig = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    cfg.validate()
    app = FastAPI(title="makeuplab service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(cfg.sessions_dir)
    extractor = load_extractor(cfg.extractor_path) if cfg.extractor_path else None
    generator = load_generator(cfg.generator_path) if cfg.generator_path else None
    default_method = "bagnet" if extractor is not None else cfg.default_method
    pool = concurrent.futures.ThreadPoolExecutor(max_workers=4)

    app.state.cfg = cfg
    app.state.store = store

    def run_bounded(fn, *args, **kwargs):
        future = pool.submit(fn, *args, **kwargs)
        try:
            return future.result(timeout=cfg.timeout_s)
        except concurrent.futures.TimeoutError:
            raise TimeoutError(f"operation exceeded {cfg.timeout_s}s")

    @app.exception_handler(UnknownSession)
    async def _unknown(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(InvalidTransition)
    async def _transition(request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(DimensionMismatch)
    async def _dims(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(NoFaceError)
    async def _noface(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(TimeoutError)
    async def _timeout(request, exc):
        return JSONResponse(status_code=504, content={"detail": str(exc)})

    def _session_lms(sid, which):
        path = store.path(sid, f"{which}.landmarks.json")
        if not os.path.exists(path):
            raise DimensionMismatch(
                f"session has no {which} landmarks; upload them at session creation"
            )
        return load_landmarks(path)

    def _warped_reference(sid):
        """Warp the reference onto the target geometry, cached on disk."""
        wpath = store.path(sid, "warped_ref.png")
        if os.path.exists(wpath):
            return load_image(wpath)
        target = load_image(store.path(sid, "target.png"))
        ref = load_image(store.path(sid, "reference.png"))
        wref, _ = warp_reference(
            target.shape, _session_lms(sid, "target"), ref, _session_lms(sid, "reference")
        )
        save_image(wref, wpath)
        return wref

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "extractor": bool(extractor),
            "generator": bool(generator),
            "default_method": default_method,
        }

    @app.post("/sessions", status_code=201)
    async def create_session(
        target: UploadFile,
        reference: UploadFile,
        target_landmarks: UploadFile = None,
        reference_landmarks: UploadFile = None,
    ):
        t = await target.read()
        r = await reference.read()
        tl = await target_landmarks.read() if target_landmarks else None
        rl = await reference_landmarks.read() if reference_landmarks else None
        return store.create(t, r, tl, rl)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return store.state(sid)

    @app.post("/sessions/{sid}/extract")
    def extract(sid: str, req: ExtractRequest = None):
        req = req or ExtractRequest()
        method = req.method or default_method
        if method not in EXTRACT_METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {EXTRACT_METHODS}")
        if method == "bagnet" and extractor is None:
            raise ValueError("service has no extractor model configured; pick another method")
        with store.lock(sid):
            store.check_transition(sid, "extract")
            wref = run_bounded(_warped_reference, sid)
            mask = run_bounded(
                extract_stage,
                method,
                wref,
                _session_lms(sid, "target"),
                model=extractor,
                **req.params,
            )
            version = store.record_mask(sid, _mask_to_png_bytes(mask), f"extract:{method}")
        return {"mask_version": version, "status": "extracted", "method": method}

    @app.get("/sessions/{sid}/mask")
    def get_mask(sid: str, version: int = None):
        return Response(content=store.mask_bytes(sid, version), media_type="image/png")

    @app.put("/sessions/{sid}/mask")
    async def put_mask(sid: str, request: Request):
        data = await request.body()
        try:
            img = Image.open(io.BytesIO(data))
            img.load()
        except Exception as exc:
            raise DimensionMismatch(f"mask payload is not a decodable image: {exc}")
        if img.mode != "L":
            raise DimensionMismatch(f"mask must be 8-bit grayscale (mode L), got {img.mode}")
        state = store.state(sid)
        if img.size != (state["width"], state["height"]):
            raise DimensionMismatch(
                f"mask dims {img.size} do not match target {(state['width'], state['height'])}"
            )
        with store.lock(sid):
            version = store.record_mask(sid, data, "edit:put")
        return {"mask_version": version, "status": "edited"}

    @app.post("/sessions/{sid}/apply")
    def apply(sid: str, req: ApplyRequest = None):
        req = req or ApplyRequest()
        bypass = req.bypass if req.bypass is not None else generator is None
        if not bypass and generator is None:
            raise ValueError("service has no generator model configured; use bypass")
        with store.lock(sid):
            store.check_transition(sid, "apply")
            mask_bytes = store.mask_bytes(sid)
            mask = np.asarray(Image.open(io.BytesIO(mask_bytes)), dtype=np.float32) / 255.0
            target = load_image(store.path(sid, "target.png"))
            wref = run_bounded(_warped_reference, sid)
            result = run_bounded(
                apply_stage, target, wref, mask, None if bypass else generator
            )
            version = store.record_result(sid, _image_to_png_bytes(result))
        return {"result_version": version, "status": "applied", "bypass": bypass}

    @app.get("/sessions/{sid}/result")
    def get_result(sid: str, version: int = None):
        return Response(content=store.result_bytes(sid, version), media_type="image/png")

    @app.get("/sessions/{sid}/regions")
    def get_regions(sid: str):
        state = store.state(sid)
        lms = _session_lms(sid, "target")
        enc = region_encoding(lms, state["height"], state["width"])
        layers = {}
        for name, layer in enc.as_dict().items():
            layers[name] = base64.b64encode(_mask_to_png_bytes(layer)).decode("ascii")
        return {"width": state["width"], "height": state["height"], "layers": layers}

    @app.get("/sessions/{sid}/image/{which}")
    def get_image(sid: str, which: str):
        state = store.state(sid)
        if which in ("target", "reference"):
            with open(store.path(state["id"], f"{which}.png"), "rb") as f:
                return Response(content=f.read(), media_type="image/png")
        if which == "warped":
            wref = _warped_reference(sid)
            return Response(content=_image_to_png_bytes(wref), media_type="image/png")
        raise ValueError("image name must be target, reference, or warped")

    return app


def main(config_path=None, host=None, port=None):
    """Entry point used by the CLI serve command."""
    import uvicorn

    cfg = load_config(config_path)
    if host:
        cfg.host = host
    if port:
        cfg.port = int(port)
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
