"""Shared helpers for the test suite."""

import numpy as np
import pytest

from roadlabel.imgcore import Frame, LabelMask, PROVENANCE_MANUAL
from roadlabel.synthbench import noise_texture


def gray_frame(values, camera_id="cam", frame_id="000000", timestamp=0.0):
    """Frame from a float image in [0, 1]."""
    px = np.clip(np.round(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)
    return Frame(camera_id=camera_id, frame_id=frame_id,
                 timestamp=timestamp, pixels=px)


def square_mask(size, lo, hi, frame_id="000000"):
    bits = np.zeros((size, size), dtype=bool)
    bits[lo:hi, lo:hi] = True
    return LabelMask(bits=bits, provenance=PROVENANCE_MANUAL,
                     source_frame_id=frame_id)


@pytest.fixture
def textured():
    """Factory for reproducible band-limited test textures."""

    def make(size=128, seed=0):
        return noise_texture(size, size, seed)

    return make
