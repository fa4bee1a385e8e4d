"""Landmark handling, piecewise-affine warping, and facial region encodings.

The warp aligns a reference face onto a target face: Delaunay triangulation
over the source landmarks (plus 8 border anchors), one affine map per
triangle, backward bilinear resampling. Region encodings are four binary
indicator layers (lips/eyes/skin/other) rasterized from landmark hulls; they
are the global prior channels appended to the extractor input.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage
import scipy.spatial
from skimage.draw import polygon as draw_polygon

from . import kernels
from .imaging import REGION_NAMES


class NoFaceError(RuntimeError):
    """The landmark backend found no face in the image."""


@dataclass(frozen=True)
class LandmarkSchema:
    """Semantic index convention for a landmark set."""

    name: str
    jaw: tuple
    right_brow: tuple
    left_brow: tuple
    nose: tuple
    right_eye: tuple
    left_eye: tuple
    lips: tuple


# The common 68-point convention (iBUG-style indexing). The synthetic face
# generator emits this same schema so one code path serves both.
FACE68 = LandmarkSchema(
    name="face68",
    jaw=tuple(range(0, 17)),
    right_brow=tuple(range(17, 22)),
    left_brow=tuple(range(22, 27)),
    nose=tuple(range(27, 36)),
    right_eye=tuple(range(36, 42)),
    left_eye=tuple(range(42, 48)),
    lips=tuple(range(48, 68)),
)

SCHEMAS = {FACE68.name: FACE68}


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered subpixel (x, y) control points plus the naming convention."""

    points: np.ndarray  # (N, 2) float64, columns (x, y)
    schema: str = "face68"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"landmarks must be (N, 2), got {pts.shape}")
        if pts.shape[0] == 0:
            raise ValueError("landmark set is empty")
        if not np.isfinite(pts).all():
            raise ValueError("landmarks contain non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def schema_def(self) -> LandmarkSchema:
        if self.schema not in SCHEMAS:
            raise ValueError(f"unknown landmark schema {self.schema!r}")
        return SCHEMAS[self.schema]

    def check_bounds(self, h, w):
        pts = self.points
        if (pts[:, 0] < 0).any() or (pts[:, 0] > w - 1).any() or (pts[:, 1] < 0).any() or (pts[:, 1] > h - 1).any():
            raise ValueError("landmarks fall outside image bounds")

    def flipped(self, width) -> "LandmarkSet":
        """Mirror horizontally: x -> width-1-x. Indices keep their slots."""
        pts = self.points.copy()
        pts[:, 0] = width - 1 - pts[:, 0]
        return LandmarkSet(points=pts, schema=self.schema)


def save_landmarks(lms: LandmarkSet, path) -> None:
    with open(path, "w") as f:
        json.dump({"schema": lms.schema, "points": lms.points.tolist()}, f)


def load_landmarks(path) -> LandmarkSet:
    with open(path) as f:
        payload = json.load(f)
    return LandmarkSet(points=np.asarray(payload["points"], dtype=np.float64), schema=payload["schema"])


class FixtureLandmarkBackend:
    """File-based landmarks: a single JSON file, or a directory searched by
    the source image's stem (<stem>.landmarks.json)."""

    def __init__(self, path):
        self.path = path

    def detect(self, img, source=None) -> LandmarkSet:
        import os

        if os.path.isdir(self.path):
            if source is None:
                raise ValueError("directory fixture backend needs the source image path")
            stem = os.path.splitext(os.path.basename(str(source)))[0]
            candidate = os.path.join(self.path, stem + ".landmarks.json")
            if not os.path.exists(candidate):
                raise FileNotFoundError(f"no fixture landmarks for {source}: {candidate}")
            return load_landmarks(candidate)
        return load_landmarks(self.path)


class HttpLandmarkBackend:
    """Client for an external detector service.

    Protocol: POST <endpoint> with the PNG-encoded image as the body;
    response is {"schema": ..., "points": [[x, y], ...]} on success or a 422
    with {"error": "no_face"} when detection fails.
    """

    def __init__(self, endpoint, timeout=30.0, client=None):
        import httpx

        self.endpoint = endpoint
        self._client = client or httpx.Client(timeout=timeout)

    def detect(self, img, source=None) -> LandmarkSet:
        import io

        from .imaging import save_image

        buf = io.BytesIO()
        from PIL import Image

        data = np.round(np.asarray(img, dtype=np.float32) * 255.0).astype(np.uint8)
        Image.fromarray(data, mode="RGB").save(buf, format="PNG")
        resp = self._client.post(self.endpoint, content=buf.getvalue(), headers={"content-type": "image/png"})
        if resp.status_code == 422:
            raise NoFaceError(f"detector found no face: {resp.text}")
        resp.raise_for_status()
        payload = resp.json()
        return LandmarkSet(points=np.asarray(payload["points"], dtype=np.float64), schema=payload["schema"])


def detect_landmarks(img, backend, source=None) -> LandmarkSet:
    """Run a landmark backend and validate the result against the image."""
    img = np.asarray(img)
    lms = backend.detect(img, source=source)
    lms.schema_def()
    lms.check_bounds(img.shape[0], img.shape[1])
    return lms


def _border_anchors(h, w) -> np.ndarray:
    """Eight (x, y) anchors on the image border: corners + edge midpoints."""
    h1, w1 = h - 1.0, w - 1.0
    return np.array(
        [
            [0.0, 0.0], [w1 / 2, 0.0], [w1, 0.0],
            [0.0, h1 / 2], [w1, h1 / 2],
            [0.0, h1], [w1 / 2, h1], [w1, h1],
        ],
        dtype=np.float64,
    )


def _triangle_areas(pts, simplices):
    p = pts[simplices]
    return 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


@dataclass(frozen=True)
class WarpTransform:
    """Triangulation over source landmarks + per-triangle maps to the target.

    Points include the 8 border anchors (appended after the landmarks, shared
    between source and target so the border stays put).
    """

    src_pts: np.ndarray  # (N+8, 2)
    dst_pts: np.ndarray  # (N+8, 2)
    simplices: np.ndarray  # (T, 3) indices into the point arrays
    shape: tuple  # (h, w) working canvas
    schema: str = "face68"


def build_warp(src: LandmarkSet, dst: LandmarkSet, shape) -> WarpTransform:
    """Triangulate the source landmarks and pair each triangle with its
    target-position affine. shape is the (h, w) canvas both images share."""
    if src.schema != dst.schema:
        raise ValueError(f"schema mismatch: {src.schema!r} vs {dst.schema!r}")
    if len(src) != len(dst):
        raise ValueError(f"point count mismatch: {len(src)} vs {len(dst)}")
    h, w = int(shape[0]), int(shape[1])
    anchors = _border_anchors(h, w)
    src_pts = np.vstack([src.points, anchors])
    dst_pts = np.vstack([dst.points, anchors])
    try:
        tri = scipy.spatial.Delaunay(src_pts)
    except scipy.spatial.QhullError as exc:
        raise ValueError(f"degenerate landmark configuration: {exc}") from exc
    simplices = np.asarray(tri.simplices, dtype=np.int64)
    if (_triangle_areas(src_pts, simplices) < 1e-9).any():
        raise ValueError("degenerate (collinear) source triangle")
    if (_triangle_areas(dst_pts, simplices) < 1e-9).any():
        raise ValueError("degenerate (collinear) target triangle")
    return WarpTransform(src_pts=src_pts, dst_pts=dst_pts, simplices=simplices, shape=(h, w), schema=src.schema)


def warp_image(warp: WarpTransform, img) -> np.ndarray:
    """Resample an image through the warp (backward mapping, bilinear)."""
    img = np.asarray(img, dtype=np.float32)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[..., None]
    if img.shape[:2] != warp.shape:
        raise ValueError(f"image shape {img.shape[:2]} does not match warp canvas {warp.shape}")
    h, w = warp.shape
    sy, sx = kernels.warp_coords(warp.src_pts, warp.dst_pts, warp.simplices, h, w)
    out = kernels.bilinear_sample(img, sy, sx)
    return out[..., 0] if squeeze else out


def warp_mask(warp: WarpTransform, mask) -> np.ndarray:
    """Warp an alpha mask (same resampling as images, clipped to [0, 1])."""
    return np.clip(warp_image(warp, np.asarray(mask, dtype=np.float32)), 0.0, 1.0)


def _hull_polygon(pts) -> np.ndarray:
    hull = scipy.spatial.ConvexHull(pts)
    return pts[hull.vertices]


def _rasterize_hull(pts, h, w) -> np.ndarray:
    poly = _hull_polygon(pts)
    rr, cc = draw_polygon(poly[:, 1], poly[:, 0], shape=(h, w))
    out = np.zeros((h, w), dtype=bool)
    out[rr, cc] = True
    return out


def _disk(radius) -> np.ndarray:
    r = int(max(1, round(radius)))
    yy, xx = np.ogrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= r * r


@dataclass(frozen=True)
class RegionEncoding:
    """Four mutually exclusive binary layers partitioning the image."""

    lips: np.ndarray
    eyes: np.ndarray
    skin: np.ndarray
    other: np.ndarray

    def as_dict(self):
        return {"lips": self.lips, "eyes": self.eyes, "skin": self.skin, "other": self.other}

    def stack(self) -> np.ndarray:
        """(H, W, 4) float32 in the canonical lips/eyes/skin/other order."""
        return np.stack([np.asarray(self.as_dict()[n], dtype=np.float32) for n in REGION_NAMES], axis=-1)

    def flipped(self) -> "RegionEncoding":
        return RegionEncoding(**{k: v[:, ::-1].copy() for k, v in self.as_dict().items()})


def region_encoding(lms: LandmarkSet, h, w) -> RegionEncoding:
    """Rasterize lips/eyes/skin/other indicator layers from landmark hulls.

    The eye layer is dilated by 15% of the inter-eye distance so eyeshadow
    territory counts as "eyes". Overlaps resolve with priority
    lips > eyes > skin, keeping the four layers an exact partition.
    """
    schema = lms.schema_def()
    pts = lms.points
    lips = _rasterize_hull(pts[list(schema.lips)], h, w)
    right_eye = _rasterize_hull(pts[list(schema.right_eye)], h, w)
    left_eye = _rasterize_hull(pts[list(schema.left_eye)], h, w)
    eye_dist = np.linalg.norm(pts[list(schema.right_eye)].mean(axis=0) - pts[list(schema.left_eye)].mean(axis=0))
    band = _disk(0.15 * eye_dist)
    eyes = scipy.ndimage.binary_dilation(right_eye | left_eye, structure=band)
    face = _rasterize_hull(pts, h, w)

    eyes = eyes & ~lips
    skin = face & ~lips & ~eyes
    other = ~(lips | eyes | skin)
    return RegionEncoding(
        lips=lips.astype(np.float32),
        eyes=eyes.astype(np.float32),
        skin=skin.astype(np.float32),
        other=other.astype(np.float32),
    )


def skin_mask(img, lms: LandmarkSet) -> np.ndarray:
    """Binary mask of bare-skin pixels (the GMM fitting support)."""
    img = np.asarray(img)
    return region_encoding(lms, img.shape[0], img.shape[1]).skin
