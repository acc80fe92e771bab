"""Self-labelled triplet generation for online descriptor training.

The miner keeps its own patch buffers, separate from the tracker's
tracks. A buffer is extended only when a detection and the buffer head
are each other's nearest neighbor in descriptor space (mutual nearest),
which is stricter than assignment matching and yields reliable
same-object sequences. Buffers that miss a frame are deleted, so a full
buffer always spans consecutive frames.

A full buffer emits one triplet per frame while it stays full: the
anchor is its oldest entry, the positive its newest, and the negative is
the same-frame detection currently closest to the positive in descriptor
space (or a uniformly drawn one in random-negatives mode).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import cosine_distance_matrix
from .errors import ConfigError
from .model import DescriptorCache, Patch, as_embedder
from .tracker import FrameDetections

POSITIVE_MODES = ("temporal_distant", "adjacent")
NEGATIVE_MODES = ("hardest", "random")


@dataclass(frozen=True)
class MinerConfig:
    buffer_length: int = 19
    positive_mode: str = "temporal_distant"
    negative_mode: str = "hardest"
    seed: int = 0

    def __post_init__(self):
        if self.buffer_length < 2:
            raise ConfigError("buffer_length must be >= 2")
        if self.positive_mode not in POSITIVE_MODES:
            raise ConfigError(f"positive_mode must be one of {POSITIVE_MODES}")
        if self.negative_mode not in NEGATIVE_MODES:
            raise ConfigError(f"negative_mode must be one of {NEGATIVE_MODES}")


@dataclass(eq=False)
class PatchBuffer:
    patches: list[Patch]
    created_frame: int
    last_detection_index: int  # detection that extended this buffer last


@dataclass(eq=False)
class Triplet:
    anchor: Patch
    positive: Patch
    negative: Patch
    negative_distance: float | None = None


TripletBatch = list
"""A training batch is a plain list of exactly N triplets."""


def accumulate(pool: list, new: list, batch_size: int):
    """FIFO-pool triplets; pop a batch of the oldest when enough are queued.

    Returns (remaining pool, batch or None). At most one batch is
    released per call; leftovers stay pooled for the next call.
    """
    pool = pool + list(new)
    if len(pool) >= batch_size:
        return pool[batch_size:], pool[:batch_size]
    return pool, None


class TripletMiner:
    """Owns the buffer set for one sequence; advance once per frame."""

    def __init__(self, config: MinerConfig | None = None):
        self.config = config or MinerConfig()
        self.buffers: list[PatchBuffer] = []
        self._rng = np.random.default_rng(self.config.seed)
        self._frame_descriptors: np.ndarray | None = None
        self._frame_index: int | None = None
        self._head_cache = DescriptorCache()

    def update_buffers(self, frame: FrameDetections, model, det_descriptors=None):
        """Mutual-nearest extension of buffers by this frame's detections.

        Detection i extends buffer j only if j is i's nearest buffer head
        AND i is j's nearest detection (ties to the lowest index). Buffers
        not extended are deleted; unassigned detections seed new
        single-patch buffers; full buffers drop their oldest entry.
        Returns the extension pairs [(detection_index, buffer), ...].
        """
        detections = frame.detections
        det_desc = det_descriptors
        if det_desc is None and detections:
            det_desc = as_embedder(model)(detections)
        self._frame_descriptors = det_desc
        self._frame_index = frame.frame_index

        pairs: list[tuple[int, PatchBuffer]] = []
        extended: dict[int, int] = {}  # buffer position -> detection index
        if detections and det_desc is not None:
            # Today's detections are tomorrow's buffer heads.
            self._head_cache.insert(model, detections, det_desc)
        if detections and self.buffers:
            heads = self._head_cache.embed(model, [b.patches[-1] for b in self.buffers])
            dist = cosine_distance_matrix(det_desc, heads)  # (Z, M)
            nearest_buffer = np.argmin(dist, axis=1)
            nearest_detection = np.argmin(dist, axis=0)
            for j in range(len(self.buffers)):
                i = int(nearest_detection[j])
                if int(nearest_buffer[i]) == j:
                    extended[j] = i

        survivors: list[PatchBuffer] = []
        for j, buffer in enumerate(self.buffers):
            if j not in extended:
                continue  # not extended: deleted
            i = extended[j]
            buffer.patches.append(detections[i])
            if len(buffer.patches) > self.config.buffer_length:
                buffer.patches.pop(0)
            buffer.last_detection_index = i
            survivors.append(buffer)
            pairs.append((i, buffer))
        taken = set(extended.values())
        for i, patch in enumerate(detections):
            if i in taken:
                continue
            survivors.append(
                PatchBuffer(
                    patches=[patch],
                    created_frame=frame.frame_index,
                    last_detection_index=i,
                )
            )
        self.buffers = survivors
        return pairs

    def emit_triplets(self, frame: FrameDetections, model) -> list[Triplet]:
        """One triplet per full buffer, if a negative candidate exists.

        Must run after update_buffers for the same frame. The positive is
        the detection that just extended the buffer; candidates for the
        negative are all other detections in this frame.
        """
        if self._frame_index != frame.frame_index:
            raise ValueError("emit_triplets called before update_buffers")
        detections = frame.detections
        if len(detections) < 2:
            return []
        det_desc = self._frame_descriptors
        triplets: list[Triplet] = []
        for buffer in self.buffers:
            if len(buffer.patches) != self.config.buffer_length:
                continue
            pos_idx = buffer.last_detection_index
            positive = buffer.patches[-1]
            if self.config.positive_mode == "adjacent":
                anchor = buffer.patches[-2]
            else:
                anchor = buffer.patches[0]
            candidates = [i for i in range(len(detections)) if i != pos_idx]
            if self.config.negative_mode == "random":
                neg_idx = candidates[int(self._rng.integers(len(candidates)))]
            else:
                dists = cosine_distance_matrix(
                    det_desc[pos_idx : pos_idx + 1], det_desc[candidates]
                )[0]
                neg_idx = candidates[int(np.argmin(dists))]
            neg_dist = float(
                cosine_distance_matrix(
                    det_desc[pos_idx : pos_idx + 1], det_desc[neg_idx : neg_idx + 1]
                )[0, 0]
            )
            triplets.append(
                Triplet(
                    anchor=anchor,
                    positive=positive,
                    negative=detections[neg_idx],
                    negative_distance=neg_dist,
                )
            )
        return triplets

    def step(self, frame: FrameDetections, model, det_descriptors=None) -> list[Triplet]:
        """update_buffers followed by emit_triplets, sharing descriptors."""
        self.update_buffers(frame, model, det_descriptors=det_descriptors)
        return self.emit_triplets(frame, model)
