"""Frame-to-frame tracking by descriptor distance alone.

Each frame's detections are matched to the active tracks' most recent
patches by cosine distance, via gated minimum-cost assignment. There is
no motion model and no spatial gating: association quality is exactly
descriptor quality, which is the point. Track descriptors are recomputed
under the current model every frame so refinement reaches the tracker
immediately.
"""

from __future__ import annotations

from dataclasses import dataclass

from .assignment import solve_gated
from .descriptors import cosine_distance_matrix
from .errors import ConfigError, SequencingError
from .model import DescriptorCache, Patch, as_embedder


@dataclass(eq=False)
class FrameDetections:
    """All detection patches for one frame, in detection-file order."""

    frame_index: int
    detections: list[Patch]


@dataclass(frozen=True)
class TrackerConfig:
    gate_threshold: float = 0.59
    max_frames_unextended: int = 1
    min_track_length: int = 12
    # Tracks still active when the sequence ends are exported even if
    # shorter than min_track_length; the length rule applies on
    # deregistration. Set False to erase those too.
    keep_short_active: bool = True

    def __post_init__(self):
        if self.gate_threshold < 0:
            raise ConfigError("gate_threshold must be >= 0")
        if self.max_frames_unextended < 1:
            raise ConfigError("max_frames_unextended must be >= 1")
        if self.min_track_length < 1:
            raise ConfigError("min_track_length must be >= 1")


@dataclass(eq=False)
class Track:
    track_id: int
    patches: list[Patch]
    start_frame: int
    last_extended: int


@dataclass(frozen=True, order=True)
class TrackRecord:
    frame: int
    track_id: int
    bb_left: float
    bb_top: float
    bb_width: float
    bb_height: float


class Tracker:
    """Owns the track set for one sequence; advance with step()."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.active: list[Track] = []
        self.finished: list[Track] = []
        self.next_id = 0
        self.last_frame: int | None = None
        self._head_cache = DescriptorCache()

    def step(self, frame: FrameDetections, model, det_descriptors=None):
        """Process one frame; returns [(detection_index, track_id), ...].

        Matched detections extend their tracks; every unmatched detection
        starts a new track (ids in detection order). Tracks unextended for
        more than ``max_frames_unextended`` frames are deregistered, and
        deregistered tracks shorter than ``min_track_length`` patches are
        erased outright. ``det_descriptors`` lets the caller reuse
        descriptors it already computed for this frame.
        """
        if self.last_frame is not None and frame.frame_index <= self.last_frame:
            raise SequencingError(
                f"frame {frame.frame_index} after frame {self.last_frame}"
            )
        detections = frame.detections
        assignments: list[tuple[int, int]] = []
        matched: set[int] = set()
        dd = det_descriptors
        if dd is None and detections:
            dd = as_embedder(model)(detections)
        if detections and self.active:
            # Head descriptors always reflect the current model; the cache
            # only skips recomputation while the model version is unchanged.
            heads = self._head_cache.embed(model, [t.patches[-1] for t in self.active])
            costs = cosine_distance_matrix(dd, heads)
            result = solve_gated(costs, self.config.gate_threshold)
            for det_idx, track_idx in result.pairs:
                track = self.active[track_idx]
                track.patches.append(detections[det_idx])
                track.last_extended = frame.frame_index
                assignments.append((det_idx, track.track_id))
                matched.add(det_idx)
        if detections and dd is not None:
            # This frame's detections become next frame's track heads; the
            # full-frame batch is recomputed identically on replay, so
            # seeding the cache keeps values bit-stable across runs.
            self._head_cache.insert(model, detections, dd)
        for det_idx, patch in enumerate(detections):
            if det_idx in matched:
                continue
            track = Track(
                track_id=self.next_id,
                patches=[patch],
                start_frame=frame.frame_index,
                last_extended=frame.frame_index,
            )
            self.next_id += 1
            self.active.append(track)
            assignments.append((det_idx, track.track_id))

        survivors = []
        for track in self.active:
            if frame.frame_index - track.last_extended > self.config.max_frames_unextended:
                if len(track.patches) >= self.config.min_track_length:
                    self.finished.append(track)
                # shorter tracks are erased and never exported
            else:
                survivors.append(track)
        self.active = survivors
        self.last_frame = frame.frame_index
        return sorted(assignments)

    def export_tracks(self) -> list[TrackRecord]:
        """Per-frame records of all surviving tracks, sorted frame-then-id."""
        tracks = list(self.finished)
        for track in self.active:
            if self.config.keep_short_active or len(track.patches) >= self.config.min_track_length:
                tracks.append(track)
        records = [
            TrackRecord(
                frame=p.frame_index,
                track_id=t.track_id,
                bb_left=p.bbox[0],
                bb_top=p.bbox[1],
                bb_width=p.bbox[2],
                bb_height=p.bbox[3],
            )
            for t in tracks
            for p in t.patches
        ]
        return sorted(records, key=lambda r: (r.frame, r.track_id))
