"""Dataset manifests, weighted sampling with flip augmentation, and a
synthetic-face generator.

The generator draws parametric faces (skin/eyes/brows/lips on a plain
background) and composites makeup overlays with known per-pixel alpha, so
every makeup image carries an exact ground-truth mask plus landmarks in the
face68 convention. That gives the desk-scale training and evaluation sets a
ground truth the real-world data never had.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np
from skimage.draw import disk as draw_disk
from skimage.draw import ellipse as draw_ellipse
from skimage.draw import polygon as draw_polygon

from .geometry import LandmarkSet, save_landmarks, load_landmarks
from .imaging import load_image, load_mask, save_image, save_mask

INTENSITIES = ("none", "light", "mid", "heavy")
DEFAULT_OVERSAMPLE = {"none": 1.0, "light": 1.0, "mid": 2.0, "heavy": 3.0}


# ---------------------------------------------------------------------------
# manifests


@dataclass
class ManifestEntry:
    image: str
    label: int
    intensity: str
    landmarks: str | None = None
    gt_mask: str | None = None

    def validate(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.intensity not in INTENSITIES:
            raise ValueError(f"unknown intensity {self.intensity!r}")
        if (self.label == 0) != (self.intensity == "none"):
            raise ValueError("label 0 entries must have intensity 'none' and vice versa")


def write_manifest(entries, path) -> None:
    """One JSON object per line; paths stored relative to the manifest."""
    with open(path, "w") as f:
        for e in entries:
            e.validate()
            f.write(json.dumps(asdict(e)) + "\n")


def load_manifest(path, check_files=True) -> list:
    """Parse and validate a JSONL manifest. Paths resolve against its dir."""
    root = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                entry = ManifestEntry(**row)
                entry.validate()
            except (TypeError, ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: malformed manifest row: {exc}") from exc
            entries.append(entry)
    if check_files:
        for e in entries:
            for p in (e.image, e.landmarks, e.gt_mask):
                if p is not None and not os.path.exists(os.path.join(root, p)):
                    raise FileNotFoundError(f"manifest references missing file: {p}")
    return entries


def manifest_root(path) -> str:
    return os.path.dirname(os.path.abspath(path))


# ---------------------------------------------------------------------------
# sampling


@dataclass
class BatchRecord:
    image: np.ndarray
    label: int
    intensity: str
    landmarks: LandmarkSet | None
    gt_mask: np.ndarray | None
    flipped: bool
    entry: ManifestEntry


def sample_batch(entries, n, rng, root="", weights=None, flip_prob=0.5) -> list:
    """Draw n records with intensity-weighted replacement and random flips.

    Heavier makeup is oversampled (default none:light:mid:heavy = 1:1:2:3).
    A flip mirrors the image, the ground-truth mask, and the landmark
    x coordinates consistently.
    """
    if not entries:
        raise ValueError("empty manifest")
    weights = dict(DEFAULT_OVERSAMPLE if weights is None else weights)
    w = np.array([weights.get(e.intensity, 0.0) for e in entries], dtype=np.float64)
    if w.sum() <= 0:
        raise ValueError("all sampling weights are zero")
    p = w / w.sum()
    idx = rng.choice(len(entries), size=n, replace=True, p=p)

    out = []
    for i in idx:
        e = entries[int(i)]
        img = load_image(os.path.join(root, e.image))
        lms = load_landmarks(os.path.join(root, e.landmarks)) if e.landmarks else None
        mask = load_mask(os.path.join(root, e.gt_mask)) if e.gt_mask else None
        flip = bool(rng.random() < flip_prob)
        if flip:
            img = img[:, ::-1].copy()
            if mask is not None:
                mask = mask[:, ::-1].copy()
            if lms is not None:
                lms = lms.flipped(img.shape[1])
        out.append(
            BatchRecord(
                image=img, label=e.label, intensity=e.intensity,
                landmarks=lms, gt_mask=mask, flipped=flip, entry=e,
            )
        )
    return out


# ---------------------------------------------------------------------------
# synthetic faces


@dataclass(frozen=True)
class Overlay:
    """One makeup element: a hard-edged support shape composited at a fixed
    opacity, which is therefore the exact per-pixel ground-truth alpha."""

    kind: str  # lipstick | eyeshadow | eyeliner | blush | stroke | patch | ellipse
    color: tuple
    opacity: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.opacity <= 1.0):
            raise ValueError("overlay opacity must lie in (0, 1]")


@dataclass(frozen=True)
class SynthFaceSpec:
    size: int
    skin_rgb: tuple
    bg_rgb: tuple
    lip_rgb: tuple
    iris_rgb: tuple
    face_center: tuple  # (cx, cy) pixels
    face_radii: tuple  # (rx, ry) pixels
    overlays: tuple = ()
    # natural blemishes: (x, y, radius, darkness, redness) per spot. Drawn on
    # faces of both classes and never part of the ground truth; they are what
    # trips pixelwise color heuristics.
    freckles: tuple = ()
    noise_sigma: float = 0.01
    noise_seed: int = 0

    def geometry(self) -> dict:
        """Derived feature placement (pixels), shared by renderer/landmarks."""
        cx, cy = self.face_center
        rx, ry = self.face_radii
        eye_dx = 0.42 * rx
        eye_y = cy - 0.24 * ry
        geo = {
            "eye_r": (cx - eye_dx, eye_y),
            "eye_l": (cx + eye_dx, eye_y),
            "eye_radii": (0.20 * rx, 0.085 * ry),
            "brow_dy": 0.30 * ry,
            "lip_center": (cx, cy + 0.47 * ry),
            "lip_radii": (0.30 * rx, 0.105 * ry),
            "nose_top": (cx, cy - 0.18 * ry),
            "nose_base_y": cy + 0.14 * ry,
        }
        return geo


def _paint(img, rr, cc, color, alpha=1.0):
    img[rr, cc] = alpha * np.asarray(color, dtype=np.float32) + (1.0 - alpha) * img[rr, cc]


def _ellipse_rr_cc(center_xy, radii_xy, shape, rot=0.0):
    cx, cy = center_xy
    rx, ry = radii_xy
    return draw_ellipse(cy, cx, ry, rx, shape=shape, rotation=rot)


def _thick_line_mask(p0, p1, thickness, shape):
    """Stamp disks along a segment; cheap thick-line rasterization."""
    mask = np.zeros(shape, dtype=bool)
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    steps = int(max(2, np.ceil(np.linalg.norm(p1 - p0) * 2)))
    for t in np.linspace(0.0, 1.0, steps):
        x, y = p0 * (1 - t) + p1 * t
        rr, cc = draw_disk((y, x), max(thickness / 2.0, 0.5), shape=shape)
        mask[rr, cc] = True
    return mask


def overlay_support(ov: Overlay, spec: SynthFaceSpec) -> np.ndarray:
    """Boolean support of one overlay on the spec's canvas."""
    s = spec.size
    shape = (s, s)
    geo = spec.geometry()
    mask = np.zeros(shape, dtype=bool)
    p = ov.params
    if ov.kind == "ellipse":
        rr, cc = _ellipse_rr_cc(p["center"], p["radii"], shape, p.get("rot", 0.0))
        mask[rr, cc] = True
    elif ov.kind == "lipstick":
        rx, ry = geo["lip_radii"]
        grow = p.get("grow", 1.1)
        rr, cc = _ellipse_rr_cc(geo["lip_center"], (rx * grow, ry * grow), shape)
        mask[rr, cc] = True
    elif ov.kind == "eyeshadow":
        erx, ery = geo["eye_radii"]
        for key in ("eye_r", "eye_l"):
            ex, ey = geo[key]
            rr, cc = _ellipse_rr_cc(
                (ex, ey - ery * p.get("lift", 1.6)),
                (erx * p.get("spread", 1.5), ery * p.get("depth", 1.7)),
                shape,
            )
            mask[rr, cc] = True
    elif ov.kind == "eyeliner":
        erx, ery = geo["eye_radii"]
        for key in ("eye_r", "eye_l"):
            ex, ey = geo[key]
            seg = _thick_line_mask((ex - erx, ey + ery), (ex + erx, ey + ery), p.get("thickness", 1.6), shape)
            mask |= seg
    elif ov.kind == "blush":
        cx, cy = spec.face_center
        rx, ry = spec.face_radii
        r = p.get("radius", 0.17 * rx)
        for sign in (-1, 1):
            rr, cc = draw_disk((cy + 0.18 * ry, cx + sign * 0.48 * rx), r, shape=shape)
            mask[rr, cc] = True
    elif ov.kind == "stroke":
        pts = p["points"]
        for a, b in zip(pts[:-1], pts[1:]):
            mask |= _thick_line_mask(a, b, p.get("thickness", 2.0), shape)
    elif ov.kind == "patch":
        pts = np.asarray(p["points"], dtype=np.float64)
        rr, cc = draw_polygon(pts[:, 1], pts[:, 0], shape=shape)
        mask[rr, cc] = True
    else:
        raise ValueError(f"unknown overlay kind {ov.kind!r}")
    return mask


def _face68_landmarks(spec: SynthFaceSpec) -> LandmarkSet:
    cx, cy = spec.face_center
    rx, ry = spec.face_radii
    geo = spec.geometry()
    erx, ery = geo["eye_radii"]
    pts = np.zeros((68, 2), dtype=np.float64)

    # jaw: lower face ellipse arc, left temple through the chin to the right
    t = np.linspace(np.pi - 0.35, 0.35, 17)
    pts[0:17, 0] = cx + rx * np.cos(t)
    pts[0:17, 1] = cy + ry * np.sin(t)

    # brows: arcs above each eye
    for (base, key) in ((17, "eye_r"), (22, "eye_l")):
        ex, ey = geo[key]
        xs = np.linspace(ex - 1.3 * erx, ex + 1.3 * erx, 5)
        lift = geo["brow_dy"] * (1.0 + 0.12 * np.sin(np.linspace(0, np.pi, 5)))
        pts[base : base + 5, 0] = xs
        pts[base : base + 5, 1] = ey - lift

    # nose: 4 bridge points + 5 base points
    nx, ny = geo["nose_top"]
    base_y = geo["nose_base_y"]
    pts[27:31, 0] = nx
    pts[27:31, 1] = np.linspace(ny, base_y - 0.03 * ry, 4)
    pts[31:36, 0] = np.linspace(nx - 0.10 * rx, nx + 0.10 * rx, 5)
    pts[31:36, 1] = base_y

    # eyes: 6 points each on the eye ellipse
    angles = np.array([np.pi, 2 * np.pi / 3, np.pi / 3, 0.0, -np.pi / 3, -2 * np.pi / 3])
    for (base, key) in ((36, "eye_r"), (42, "eye_l")):
        ex, ey = geo[key]
        pts[base : base + 6, 0] = ex + erx * np.cos(angles)
        pts[base : base + 6, 1] = ey - ery * np.sin(angles)

    # lips: 12 outer + 8 inner points on the lip ellipses
    lx, ly = geo["lip_center"]
    lrx, lry = geo["lip_radii"]
    t = np.linspace(0, 2 * np.pi, 13)[:-1]
    pts[48:60, 0] = lx + lrx * np.cos(t)
    pts[48:60, 1] = ly + lry * np.sin(t)
    t = np.linspace(0, 2 * np.pi, 9)[:-1]
    pts[60:68, 0] = lx + 0.6 * lrx * np.cos(t)
    pts[60:68, 1] = ly + 0.5 * lry * np.sin(t)

    s1 = spec.size - 1.0
    pts[:, 0] = np.clip(pts[:, 0], 0.0, s1)
    pts[:, 1] = np.clip(pts[:, 1], 0.0, s1)
    return LandmarkSet(points=pts, schema="face68")


def ground_truth_regions(spec: SynthFaceSpec) -> dict:
    """Analytic region masks from the generator's own shapes (used as the
    independent reference when scoring the landmark-driven encodings)."""
    s = spec.size
    shape = (s, s)
    lms = _face68_landmarks(spec)
    pts = lms.points
    geo = spec.geometry()
    erx, ery = geo["eye_radii"]

    # face boundary: ordered jaw arc plus brow line, no convex-hull call
    boundary = np.vstack([pts[0:17], pts[26:21:-1], pts[21:16:-1]])
    rr, cc = draw_polygon(boundary[:, 1], boundary[:, 0], shape=shape)
    face = np.zeros(shape, dtype=bool)
    face[rr, cc] = True

    lips = np.zeros(shape, dtype=bool)
    rr, cc = _ellipse_rr_cc(geo["lip_center"], geo["lip_radii"], shape)
    lips[rr, cc] = True

    eye_dist = abs(geo["eye_l"][0] - geo["eye_r"][0])
    grow = 0.15 * eye_dist
    eyes = np.zeros(shape, dtype=bool)
    for key in ("eye_r", "eye_l"):
        rr, cc = _ellipse_rr_cc(geo[key], (erx + grow, ery + grow), shape)
        eyes[rr, cc] = True
    eyes &= ~lips
    skin = face & ~lips & ~eyes
    return {
        "lips": lips.astype(np.float32),
        "eyes": eyes.astype(np.float32),
        "skin": skin.astype(np.float32),
        "other": (~(lips | eyes | skin)).astype(np.float32),
    }


def render_face(spec: SynthFaceSpec):
    """Render one face. Returns (image, gt_alpha, landmarks)."""
    s = spec.size
    shape = (s, s)
    rng = np.random.default_rng(spec.noise_seed)
    geo = spec.geometry()
    cx, cy = spec.face_center
    rx, ry = spec.face_radii
    erx, ery = geo["eye_radii"]

    img = np.empty((s, s, 3), dtype=np.float32)
    img[:] = np.asarray(spec.bg_rgb, dtype=np.float32)
    img *= np.linspace(0.92, 1.08, s, dtype=np.float32)[:, None, None]

    rr, cc = _ellipse_rr_cc((cx, cy), (rx, ry), shape)
    img[rr, cc] = np.asarray(spec.skin_rgb, dtype=np.float32)

    # soft horizontal lighting across the face
    light = np.linspace(0.95, 1.05, s, dtype=np.float32)[None, :, None]
    img *= light

    # nose shading
    nx, ny = geo["nose_top"]
    rr, cc = _ellipse_rr_cc((nx, (ny + geo["nose_base_y"]) / 2), (0.035 * rx, 0.16 * ry), shape)
    img[rr, cc] *= 0.93

    # brows
    brow_color = np.asarray(spec.skin_rgb, dtype=np.float32) * 0.35
    for (base, key) in ((17, "eye_r"), (22, "eye_l")):
        ex, ey = geo[key]
        m = _thick_line_mask(
            (ex - 1.3 * erx, ey - geo["brow_dy"]),
            (ex + 1.3 * erx, ey - geo["brow_dy"] * 1.1),
            max(1.2, 0.05 * ry),
            shape,
        )
        img[m] = brow_color

    # eyes: sclera, iris, pupil
    for key in ("eye_r", "eye_l"):
        ex, ey = geo[key]
        rr, cc = _ellipse_rr_cc((ex, ey), (erx, ery), shape)
        img[rr, cc] = (0.93, 0.92, 0.90)
        rr, cc = draw_disk((ey, ex), max(1.0, 0.8 * ery), shape=shape)
        img[rr, cc] = np.asarray(spec.iris_rgb, dtype=np.float32)
        rr, cc = draw_disk((ey, ex), max(0.6, 0.35 * ery), shape=shape)
        img[rr, cc] = (0.05, 0.05, 0.05)

    # natural lips
    rr, cc = _ellipse_rr_cc(geo["lip_center"], geo["lip_radii"], shape)
    img[rr, cc] = np.asarray(spec.lip_rgb, dtype=np.float32)

    # freckles and moles: skin-derived spots, not makeup
    skin = np.asarray(spec.skin_rgb, dtype=np.float32)
    for (fx, fy, fr, darkness, redness) in spec.freckles:
        rr, cc = draw_disk((fy, fx), fr, shape=shape)
        spot = skin * darkness
        spot[0] = min(1.0, spot[0] * (1.0 + redness))
        img[rr, cc] = spot

    img += rng.normal(0.0, spec.noise_sigma, img.shape).astype(np.float32)
    img = np.clip(img, 0.0, 1.0)

    # makeup overlays: hard support at fixed opacity == exact ground truth
    gt = np.zeros(shape, dtype=np.float32)
    for ov in spec.overlays:
        support = overlay_support(ov, spec)
        a = np.float32(ov.opacity)
        img[support] = a * np.asarray(ov.color, dtype=np.float32) + (1.0 - a) * img[support]
        np.maximum(gt, np.where(support, a, 0.0).astype(np.float32), out=gt)

    return np.clip(img, 0.0, 1.0), gt, _face68_landmarks(spec)


def _sample_color(rng, saturated=True):
    if saturated:
        base = rng.uniform(0.0, 1.0, size=3)
        base[rng.integers(0, 3)] = rng.uniform(0.75, 1.0)
        base[rng.integers(0, 3)] *= 0.25
        return tuple(np.round(base, 4))
    return tuple(np.round(rng.uniform(0.2, 0.8, size=3), 4))


def _sample_overlays(rng, spec_wo: SynthFaceSpec, intensity: str):
    """Pick overlays matching the requested intensity tier."""
    geo = spec_wo.geometry()
    cx, cy = spec_wo.face_center
    rx, ry = spec_wo.face_radii

    def lipstick():
        return Overlay("lipstick", _sample_color(rng), float(rng.uniform(0.55, 1.0)), {"grow": float(rng.uniform(1.0, 1.25))})

    def eyeshadow():
        return Overlay("eyeshadow", _sample_color(rng), float(rng.uniform(0.55, 1.0)), {"spread": float(rng.uniform(1.3, 1.8)), "lift": float(rng.uniform(1.3, 1.9)), "depth": float(rng.uniform(1.4, 2.0))})

    def eyeliner():
        return Overlay("eyeliner", (0.03, 0.02, 0.05), float(rng.uniform(0.7, 1.0)), {"thickness": float(rng.uniform(1.2, 2.2))})

    def blush():
        pink = (float(rng.uniform(0.8, 1.0)), float(rng.uniform(0.35, 0.55)), float(rng.uniform(0.4, 0.6)))
        return Overlay("blush", pink, float(rng.uniform(0.55, 0.75)), {"radius": float(rng.uniform(0.14, 0.22) * rx)})

    def stroke():
        n_seg = int(rng.integers(2, 5))
        start = np.array([cx + rng.uniform(-0.8, 0.8) * rx, cy + rng.uniform(-0.6, 0.8) * ry])
        pts = [start]
        for _ in range(n_seg):
            step = rng.uniform(-0.45, 0.45, size=2) * np.array([rx, ry])
            pts.append(np.clip(pts[-1] + step, 2, spec_wo.size - 3))
        return Overlay("stroke", _sample_color(rng), float(rng.uniform(0.6, 1.0)), {"points": [p.tolist() for p in pts], "thickness": float(rng.uniform(2.0, 3.8))})

    def patch():
        center = np.array([cx + rng.choice([-1, 1]) * rng.uniform(0.3, 0.6) * rx, cy + rng.uniform(-0.2, 0.5) * ry])
        n = int(rng.integers(5, 8))
        ang = np.sort(rng.uniform(0, 2 * np.pi, size=n))
        rad = rng.uniform(0.12, 0.24) * rx * rng.uniform(0.6, 1.0, size=n)
        pts = np.stack([center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)], axis=1)
        pts = np.clip(pts, 1, spec_wo.size - 2)
        return Overlay("patch", _sample_color(rng), float(rng.uniform(0.6, 1.0)), {"points": pts.tolist()})

    light_pool = [blush, eyeliner, lipstick]
    standard_pool = [lipstick, eyeshadow, eyeliner, blush]
    extreme_pool = [stroke, patch]

    if intensity == "light":
        picks = [light_pool[int(rng.integers(0, len(light_pool)))]]
    elif intensity == "mid":
        k = int(rng.integers(1, 3))
        picks = list(rng.choice(standard_pool, size=k, replace=False))
    else:  # heavy
        k = int(rng.integers(2, 4))
        picks = list(rng.choice(standard_pool, size=k, replace=False))
        picks.append(extreme_pool[int(rng.integers(0, len(extreme_pool)))])
    return tuple(fn() for fn in picks)


def sample_face_spec(rng, size=64, label=0, intensity=None) -> tuple:
    """Sample one face spec. Returns (spec, intensity)."""
    r = float(rng.uniform(0.55, 0.88))
    skin = (r, r * float(rng.uniform(0.72, 0.86)), r * float(rng.uniform(0.52, 0.70)))
    bg = tuple(rng.uniform(0.10, 0.32, size=3).round(4))
    # natural lips vary; redder ones brush against fixed chroma bands
    lip = (
        min(1.0, skin[0] * float(rng.uniform(1.0, 1.2))),
        skin[1] * float(rng.uniform(0.5, 0.72)),
        skin[2] * float(rng.uniform(0.55, 0.8)),
    )
    iris = tuple((rng.uniform(0.05, 0.45, size=3)).round(4))
    cx = size / 2 + rng.uniform(-0.02, 0.02) * size
    cy = size * 0.52 + rng.uniform(-0.02, 0.02) * size
    rx = size * rng.uniform(0.33, 0.38)
    ry = size * rng.uniform(0.40, 0.45)

    n_freckles = int(rng.integers(0, 9))
    freckles = []
    for _ in range(n_freckles):
        ang = rng.uniform(0, 2 * np.pi)
        rad = np.sqrt(rng.uniform(0.05, 0.8))
        fx = cx + rad * rx * np.cos(ang)
        fy = cy + rad * ry * np.sin(ang)
        freckles.append(
            (
                float(fx),
                float(fy),
                float(rng.uniform(0.5, 0.013 * size + 0.7)),
                float(rng.uniform(0.35, 0.7)),
                float(rng.uniform(0.0, 0.6)),
            )
        )

    spec = SynthFaceSpec(
        size=size,
        skin_rgb=tuple(np.round(skin, 4)),
        bg_rgb=bg,
        lip_rgb=tuple(np.round(lip, 4)),
        iris_rgb=iris,
        face_center=(float(cx), float(cy)),
        face_radii=(float(rx), float(ry)),
        overlays=(),
        freckles=tuple(freckles),
        noise_seed=int(rng.integers(0, 2**31 - 1)),
    )
    if label == 0:
        return spec, "none"
    if intensity is None:
        intensity = str(rng.choice(["light", "mid", "heavy"], p=[0.4, 0.35, 0.25]))
    overlays = _sample_overlays(rng, spec, intensity)
    spec = SynthFaceSpec(**{**asdict(spec), "overlays": overlays})
    return spec, intensity


def synth_faces(n, seed, out_dir, size=64, makeup_fraction=0.5) -> list:
    """Generate n faces and write images/masks/landmarks plus manifest.jsonl.

    Deterministic per seed, byte for byte. Returns the manifest entries.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    for sub in ("images", "masks", "landmarks"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    entries = []
    for i in range(n):
        label = 1 if (i % max(1, round(1 / makeup_fraction))) == 0 and makeup_fraction > 0 else 0
        spec, intensity = sample_face_spec(rng, size=size, label=label)
        img, gt, lms = render_face(spec)
        img_rel = f"images/face_{i:05d}.png"
        lms_rel = f"landmarks/face_{i:05d}.landmarks.json"
        save_image(img, os.path.join(out_dir, img_rel))
        save_landmarks(lms, os.path.join(out_dir, lms_rel))
        mask_rel = None
        if label == 1:
            mask_rel = f"masks/face_{i:05d}.png"
            save_mask(gt, os.path.join(out_dir, mask_rel))
        entries.append(ManifestEntry(image=img_rel, label=label, intensity=intensity, landmarks=lms_rel, gt_mask=mask_rel))

    write_manifest(entries, os.path.join(out_dir, "manifest.jsonl"))
    return entries
