"""Regenerate the PNG/JSON fixtures under tests/fixtures.

Uses the backend package as the source of truth: a deterministic synthetic
face pair for the service tests, the target's region layers, and a combine
example whose expected output comes from the core mask_combine so the
TypeScript port can be checked pixel for pixel.

Run from the frontend directory:  python3 tools/make_fixtures.py
"""

import os
import shutil
import tempfile

import numpy as np

from makeuplab.data import synth_faces
from makeuplab.geometry import load_landmarks, region_encoding
from makeuplab.imaging import RegionSelection, mask_combine, quantize_mask, save_mask

SIZE = 64
HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, os.pardir, "tests", "fixtures")


def structured_masks(size):
    """Two hand-shaped soft masks with distinct spatial structure."""
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    a = np.clip(1.2 * np.exp(-((x - 32.0) ** 2 + (y - 40.0) ** 2) / 180.0), 0.0, 1.0)
    b = np.clip((np.sin(x / 3.0) * 0.5 + 0.5) * np.exp(-((y - 24.0) ** 2) / 300.0) * 1.4, 0.0, 1.0)
    return quantize_mask(a.astype(np.float32)), quantize_mask(b.astype(np.float32))


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix="fixture_faces_")
    try:
        synth_faces(2, 21, tmp, size=SIZE)
        # index 0 carries makeup, index 1 is plain; plain face is the target
        pairs = [
            ("images/face_00001.png", "target.png"),
            ("landmarks/face_00001.landmarks.json", "target.landmarks.json"),
            ("images/face_00000.png", "reference.png"),
            ("landmarks/face_00000.landmarks.json", "reference.landmarks.json"),
        ]
        for src, dst in pairs:
            shutil.copyfile(os.path.join(tmp, src), os.path.join(FIXTURES, dst))

        lms = load_landmarks(os.path.join(FIXTURES, "target.landmarks.json"))
        enc = region_encoding(lms, SIZE, SIZE)
        for name, layer in enc.as_dict().items():
            save_mask(layer, os.path.join(FIXTURES, f"region_{name}.png"))

        mask_a, mask_b = structured_masks(SIZE)
        combined = mask_combine(
            [
                (mask_a, RegionSelection.of("lips"), enc),
                (mask_b, RegionSelection.of("eyes", "skin"), enc),
            ]
        )
        save_mask(mask_a, os.path.join(FIXTURES, "combine_mask_a.png"))
        save_mask(mask_b, os.path.join(FIXTURES, "combine_mask_b.png"))
        save_mask(combined, os.path.join(FIXTURES, "combine_expected.png"))
    finally:
        shutil.rmtree(tmp)
    print(f"fixtures written to {os.path.normpath(FIXTURES)}")


if __name__ == "__main__":
    main()
