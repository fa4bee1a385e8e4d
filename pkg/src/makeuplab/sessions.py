"""File-backed transfer sessions.

One directory per session holding the uploaded rasters verbatim, landmark
files, append-only mask/result versions, and a state.json. No database, no
timestamps: replaying the same requests rebuilds byte-identical state.

Status machine: created -> extracted <-> edited -> applied. Extraction and
mask edits may alternate; apply requires a mask to exist; applied is final.
"""
from __future__ import annotations

import io
import json
import os
import threading

from PIL import Image

STATUSES = ("created", "extracted", "edited", "applied")

# operations -> statuses they may start from
_ALLOWED = {
    "extract": {"created", "extracted", "edited"},
    "edit": {"created", "extracted", "edited"},
    "apply": {"extracted", "edited"},
}
_RESULT_STATUS = {"extract": "extracted", "edit": "edited", "apply": "applied"}


class SessionError(Exception):
    pass


class UnknownSession(SessionError):
    pass


class InvalidTransition(SessionError):
    pass


class DimensionMismatch(SessionError):
    pass


def _decode_image(data: bytes):
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
        return img
    except Exception as exc:
        raise DimensionMismatch(f"payload is not a decodable image: {exc}") from exc


class SessionStore:
    """Directory-per-session store with per-session locks."""

    def __init__(self, root):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)
        self._admin_lock = threading.Lock()
        self._locks = {}

    # -- locking ---------------------------------------------------------

    def lock(self, sid) -> threading.Lock:
        with self._admin_lock:
            if sid not in self._locks:
                self._locks[sid] = threading.Lock()
            return self._locks[sid]

    # -- paths / state ---------------------------------------------------

    def _dir(self, sid) -> str:
        return os.path.join(self.root, sid)

    def path(self, sid, name) -> str:
        return os.path.join(self._dir(sid), name)

    def exists(self, sid) -> bool:
        return os.path.isfile(self.path(sid, "state.json"))

    def state(self, sid) -> dict:
        try:
            with open(self.path(sid, "state.json")) as f:
                return json.load(f)
        except FileNotFoundError:
            raise UnknownSession(f"no such session: {sid}") from None

    def _write_state(self, sid, state) -> None:
        tmp = self.path(sid, "state.json.tmp")
        with open(tmp, "w") as f:
            json.dump(state, f, indent=2, sort_keys=True)
        os.replace(tmp, self.path(sid, "state.json"))

    def ids(self) -> list:
        return sorted(d for d in os.listdir(self.root) if self.exists(d))

    # -- creation --------------------------------------------------------

    def _next_id(self) -> str:
        counter_path = os.path.join(self.root, "next_id")
        with self._admin_lock:
            n = 1
            if os.path.exists(counter_path):
                with open(counter_path) as f:
                    n = int(f.read().strip() or 1)
            with open(counter_path, "w") as f:
                f.write(str(n + 1))
        return f"s{n:06d}"

    def create(self, target_png: bytes, reference_png: bytes,
               target_landmarks: bytes = None, reference_landmarks: bytes = None) -> dict:
        t_img = _decode_image(target_png)
        r_img = _decode_image(reference_png)
        sid = self._next_id()
        os.makedirs(self._dir(sid), exist_ok=True)
        with open(self.path(sid, "target.png"), "wb") as f:
            f.write(target_png)
        with open(self.path(sid, "reference.png"), "wb") as f:
            f.write(reference_png)
        has_lms = {"target": False, "reference": False}
        for name, data in (("target", target_landmarks), ("reference", reference_landmarks)):
            if data:
                json.loads(data)  # must at least be JSON; schema checked on use
                with open(self.path(sid, f"{name}.landmarks.json"), "wb") as f:
                    f.write(data)
                has_lms[name] = True
        state = {
            "id": sid,
            "status": "created",
            "width": t_img.size[0],
            "height": t_img.size[1],
            "reference_width": r_img.size[0],
            "reference_height": r_img.size[1],
            "masks": [],
            "results": [],
            "has_landmarks": has_lms,
        }
        self._write_state(sid, state)
        return state

    # -- transitions -----------------------------------------------------

    def check_transition(self, sid, op) -> dict:
        state = self.state(sid)
        if op not in _ALLOWED:
            raise ValueError(f"unknown operation {op!r}")
        if state["status"] not in _ALLOWED[op]:
            raise InvalidTransition(
                f"cannot {op} while session is {state['status']!r}"
            )
        return state

    # -- versioned artifacts ----------------------------------------------

    def record_mask(self, sid, png_bytes: bytes, origin: str) -> int:
        """Store mask bytes verbatim as the next version. The caller has
        already validated dims/format; verbatim storage is what makes the
        PUT-then-GET round trip byte-exact."""
        state = self.check_transition(sid, "edit" if origin.startswith("edit") else "extract")
        version = len(state["masks"]) + 1
        fname = f"mask_v{version:03d}.png"
        with open(self.path(sid, fname), "wb") as f:
            f.write(png_bytes)
        state["masks"].append({"version": version, "file": fname, "origin": origin})
        state["status"] = _RESULT_STATUS["edit" if origin.startswith("edit") else "extract"]
        self._write_state(sid, state)
        return version

    def mask_bytes(self, sid, version=None) -> bytes:
        state = self.state(sid)
        if not state["masks"]:
            raise InvalidTransition("session has no mask yet")
        if version is None:
            entry = state["masks"][-1]
        else:
            matches = [m for m in state["masks"] if m["version"] == version]
            if not matches:
                raise UnknownSession(f"no mask version {version}")
            entry = matches[0]
        with open(self.path(sid, entry["file"]), "rb") as f:
            return f.read()

    def record_result(self, sid, png_bytes: bytes) -> int:
        state = self.check_transition(sid, "apply")
        if not state["masks"]:
            raise InvalidTransition("apply needs an extracted or edited mask")
        version = len(state["results"]) + 1
        fname = f"result_v{version:03d}.png"
        with open(self.path(sid, fname), "wb") as f:
            f.write(png_bytes)
        state["results"].append({"version": version, "file": fname})
        state["status"] = "applied"
        self._write_state(sid, state)
        return version

    def result_bytes(self, sid, version=None) -> bytes:
        state = self.state(sid)
        if not state["results"]:
            raise InvalidTransition("session has no result yet")
        entry = state["results"][-1] if version is None else next(
            (r for r in state["results"] if r["version"] == version), None
        )
        if entry is None:
            raise UnknownSession(f"no result version {version}")
        with open(self.path(sid, entry["file"]), "rb") as f:
            return f.read()
