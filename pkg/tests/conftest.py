import numpy as np
import pytest

from makeuplab.data import render_face, sample_face_spec
from makeuplab.geometry import LandmarkSet


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_image(rng):
    return rng.random((12, 10, 3)).astype(np.float32)


@pytest.fixture
def small_mask(rng):
    return rng.random((12, 10)).astype(np.float32)


@pytest.fixture(scope="session")
def face_pair():
    """One plain face and one made-up face with landmarks and ground truth."""
    rng = np.random.default_rng(11)
    plain_spec, _ = sample_face_spec(rng, size=64, label=0)
    made_spec, _ = sample_face_spec(rng, size=64, label=1, intensity="mid")
    plain, _, plain_lms = render_face(plain_spec)
    made, made_gt, made_lms = render_face(made_spec)
    return {
        "plain": plain,
        "plain_lms": plain_lms,
        "made": made,
        "made_gt": made_gt,
        "made_lms": made_lms,
    }


@pytest.fixture
def square_landmarks():
    """Landmark sets over a 32x32 canvas for warp tests: a synthetic face68
    layout and a slightly shifted copy."""
    rng = np.random.default_rng(3)
    spec, _ = sample_face_spec(rng, size=32, label=0)
    _, _, lms = render_face(spec)
    shifted = LandmarkSet(points=lms.points + np.array([0.8, -0.6]), schema=lms.schema)
    return lms, shifted
