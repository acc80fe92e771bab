"""Shared fixtures: hand-built embeddings stand in for the real model.

Trackers and miners accept any callable mapping a patch list to a
descriptor matrix, so tests pin descriptors per patch and exercise the
matching logic without a network in the loop.
"""

import numpy as np
import pytest

from tripletrack.model import Patch
from tripletrack.tracker import FrameDetections


def make_patch(frame, det, value=0.0, bbox=None):
    """1x1x3 patch; `value` fills the pixels so patches stay distinguishable."""
    return Patch(
        pixels=np.full((1, 1, 3), value),
        frame_index=frame,
        detection_index=det,
        bbox=bbox or (10.0 * det, 0.0, 5.0, 5.0),
        confidence=1.0,
    )


@pytest.fixture
def patch_factory():
    return make_patch


class MappedEmbedder:
    """Embedder returning a fixed descriptor per patch identity."""

    def __init__(self):
        self.table: dict[int, np.ndarray] = {}

    def assign(self, patch, descriptor):
        self.table[id(patch)] = np.asarray(descriptor, dtype=np.float64)
        return patch

    def __call__(self, patches):
        return np.stack([self.table[id(p)] for p in patches])


@pytest.fixture
def mapped_embedder():
    return MappedEmbedder()


def frame_of(frame_index, patches):
    return FrameDetections(frame_index=frame_index, detections=list(patches))
