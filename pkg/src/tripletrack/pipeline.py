"""Sequence orchestration: tracking and descriptor refinement together.

Per frame, in fixed order: the tracker matches detections under the
current model snapshot, then the miner updates its buffers and emits
triplets, then a full batch (if one accumulated) trains the model. The
updated model becomes visible at the next frame, never mid-frame, so a
frame's tracking can never see a model trained on its own triplets. The
two halves interact only through the model parameters; replaying the
recorded parameter schedule into a bare tracker reproduces the tracks
exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, TrainingDivergenceError
from .mining import MinerConfig, TripletMiner, accumulate
from .model import (
    ModelConfig,
    ModelParameters,
    TrainerConfig,
    forward_batch,
    init_model,
    train_batch,
)
from .tracker import Tracker, TrackerConfig, TrackRecord

MODES = ("online", "frozen", "easy_positives", "random_negatives")


@dataclass(frozen=True)
class PipelineConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    miner: MinerConfig = field(default_factory=MinerConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    mode: str = "online"
    reset_model_per_sequence: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")

    def resolved_miner(self) -> MinerConfig:
        """Miner settings with the ablation mode applied."""
        cfg = self.miner
        if self.mode == "easy_positives":
            cfg = replace(cfg, positive_mode="adjacent")
        elif self.mode == "random_negatives":
            cfg = replace(cfg, negative_mode="random")
        return cfg

    @property
    def training_enabled(self) -> bool:
        return self.mode != "frozen"


@dataclass
class RunStats:
    frames: int = 0
    triplets_emitted: int = 0
    batches_trained: int = 0
    mean_loss_per_batch: list[float] = field(default_factory=list)
    wall_time_sec: float = 0.0
    mode: str = "online"
    aborted: bool = False
    error: str | None = None

    def to_json(self, deterministic: bool = False) -> str:
        payload = {
            "frames": self.frames,
            "triplets_emitted": self.triplets_emitted,
            "batches_trained": self.batches_trained,
            "mean_loss_per_batch": self.mean_loss_per_batch,
            # Wall time is the one nondeterministic field; reproducible
            # artifacts (the CLI stats file) write it as null.
            "wall_time_sec": None if deterministic else self.wall_time_sec,
            "mode": self.mode,
            "aborted": self.aborted,
            "error": self.error,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


@dataclass
class RunResult:
    tracks: list[TrackRecord]
    stats: RunStats
    final_params: ModelParameters
    # (frame_index, params) whenever the effective snapshot changed;
    # enough to replay the exact per-frame model schedule.
    snapshots: list[tuple[int, ModelParameters]] = field(default_factory=list)


def run_sequence(
    frames,
    cfg: PipelineConfig,
    initial_params: ModelParameters | None = None,
    record_snapshots: bool = False,
    triplet_log=None,
) -> RunResult:
    """Run tracking plus online refinement over one frame sequence.

    ``frames`` is an iterable of FrameDetections in strictly increasing
    order. ``triplet_log`` is an optional callable receiving one dict per
    emitted triplet (diagnostics). Training divergence aborts the
    sequence, returning partial results with stats.aborted set.
    """
    params = initial_params if initial_params is not None else init_model(cfg.model)
    tracker = Tracker(cfg.tracker)
    miner = TripletMiner(cfg.resolved_miner())
    pool: list = []
    stats = RunStats(mode=cfg.mode)
    snapshots: list[tuple[int, ModelParameters]] = []
    started = time.perf_counter()

    for frame in frames:
        if record_snapshots and (
            not snapshots or snapshots[-1][1].version != params.version
        ):
            snapshots.append((frame.frame_index, params))
        with np.errstate(over="ignore", invalid="ignore"):
            det_desc = (
                forward_batch(params, frame.detections) if frame.detections else None
            )
        if det_desc is not None and not np.all(np.isfinite(det_desc)):
            # A trained model overflowing in its forward pass is divergence
            # surfacing one frame late; abort with partial results.
            stats.aborted = True
            stats.error = "non-finite descriptors from the current model"
            break
        tracker.step(frame, params, det_descriptors=det_desc)
        triplets = miner.step(frame, params, det_descriptors=det_desc)
        stats.triplets_emitted += len(triplets)
        if triplet_log is not None:
            for t in triplets:
                triplet_log(
                    {
                        "frame": frame.frame_index,
                        "anchor_frame": t.anchor.frame_index,
                        "positive_frame": t.positive.frame_index,
                        "anchor_detection": t.anchor.detection_index,
                        "positive_detection": t.positive.detection_index,
                        "negative_detection": t.negative.detection_index,
                        "negative_distance": t.negative_distance,
                    }
                )
        pool, batch = accumulate(pool, triplets, cfg.trainer.batch_size)
        if batch is not None and cfg.training_enabled:
            try:
                params, loss = train_batch(params, batch, cfg.trainer)
            except TrainingDivergenceError as exc:
                stats.aborted = True
                stats.error = str(exc)
                stats.frames += 1
                break
            stats.batches_trained += 1
            stats.mean_loss_per_batch.append(loss)
        stats.frames += 1

    stats.wall_time_sec = time.perf_counter() - started
    return RunResult(
        tracks=tracker.export_tracks(),
        stats=stats,
        final_params=params,
        snapshots=snapshots,
    )


def run_tracker_only(
    frames, tracker_cfg: TrackerConfig, params: ModelParameters
) -> list[TrackRecord]:
    """Tracking with a fixed model and no mining or training at all."""
    tracker = Tracker(tracker_cfg)
    for frame in frames:
        tracker.step(frame, params)
    return tracker.export_tracks()


def replay_tracks(
    frames,
    snapshots: list[tuple[int, ModelParameters]],
    tracker_cfg: TrackerConfig,
) -> list[TrackRecord]:
    """Re-run tracking alone from a recorded parameter schedule.

    With the snapshots from a recorded run, this reproduces that run's
    tracks exactly: the tracker communicates with the training side only
    through the parameter versions.
    """
    tracker = Tracker(tracker_cfg)
    params = None
    cursor = 0
    for frame in frames:
        while cursor < len(snapshots) and snapshots[cursor][0] <= frame.frame_index:
            params = snapshots[cursor][1]
            cursor += 1
        if params is None:
            raise ValueError("no parameter snapshot covers the first frame")
        tracker.step(frame, params)
    return tracker.export_tracks()
