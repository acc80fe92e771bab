"""Seeded synthetic tracking sequences with ground truth.

Objects are textured sprites (a distinct base color per object plus
seeded pixel noise) moving with constant velocity and bouncing off the
frame borders, rendered over a static noise background. Detections are
the ground-truth boxes corrupted by Gaussian jitter, Bernoulli misses,
and Poisson background false positives. Scheduled occlusion events hide
an object completely for a stretch of frames while its motion continues.

Everything is driven by one seeded generator, so a config reproduces its
sequence bit for bit.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .mot_io import DetectionRecord, _resize_bilinear, write_frame_dump


TEXTURE_MODES = ("color", "muted")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    frame_height: int = 96
    frame_width: int = 128
    num_objects: int = 8
    num_frames: int = 300
    sprite_min: int = 12
    sprite_max: int = 18
    # "color": saturated distinct base hues (objects separable by color
    # alone). "muted": washed-out hues, so identity lives mostly in each
    # object's noise texture and must be learned.
    texture_mode: str = "color"
    texture_noise: float = 0.25
    speed_min: float = 0.5
    speed_max: float = 2.5
    jitter_std: float = 1.0
    miss_rate: float = 0.05
    fp_rate: float = 0.2
    occlusion_count: int = 2
    occlusion_duration: int = 10

    def __post_init__(self):
        if self.texture_mode not in TEXTURE_MODES:
            raise ConfigError(f"texture_mode must be one of {TEXTURE_MODES}")
        if self.num_frames < 1 or self.num_objects < 0:
            raise ConfigError("num_frames must be >= 1 and num_objects >= 0")
        if not (0 < self.sprite_min <= self.sprite_max):
            raise ConfigError("need 0 < sprite_min <= sprite_max")
        if self.sprite_max > min(self.frame_height, self.frame_width):
            raise ConfigError(
                f"sprites up to {self.sprite_max} px do not fit a "
                f"{self.frame_width} x {self.frame_height} frame"
            )
        for name in ("miss_rate",):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.fp_rate < 0 or self.jitter_std < 0 or self.texture_noise < 0:
            raise ConfigError("noise rates must be nonnegative")
        if not 0 <= self.speed_min <= self.speed_max:
            raise ConfigError("need 0 <= speed_min <= speed_max")
        if self.occlusion_count < 0 or self.occlusion_duration < 0:
            raise ConfigError("occlusion settings must be nonnegative")
        if self.occlusion_duration >= self.num_frames:
            raise ConfigError("occlusion_duration must be shorter than the sequence")


@dataclass(eq=False)
class _SpriteState:
    object_id: int
    width: int
    height: int
    texture: np.ndarray  # (height, width, 3) float in [0, 1]
    x: float
    y: float
    vx: float
    vy: float
    hidden: list[tuple[int, int]] = field(default_factory=list)  # [start, end)

    def visible(self, t: int) -> bool:
        return not any(start <= t < end for start, end in self.hidden)


class SyntheticSequence:
    """Rendered frames plus aligned ground truth and noisy detections."""

    def __init__(self, frames, gt_by_frame, det_by_frame, trajectories, textures):
        self.frames = frames
        self._gt = gt_by_frame
        self._det = det_by_frame
        self.trajectories = trajectories
        self.textures = textures

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def frame(self, t: int) -> np.ndarray:
        return self.frames[t - 1]

    def detections(self, t: int) -> list[DetectionRecord]:
        return self._det.get(t, [])

    def ground_truth(self, t: int) -> list[DetectionRecord]:
        return self._gt.get(t, [])

    def all_ground_truth(self) -> dict[int, list[DetectionRecord]]:
        return dict(self._gt)


def _base_color(index: int, count: int, mode: str) -> np.ndarray:
    hue = index / max(count, 1)
    if mode == "muted":
        return np.array(colorsys.hsv_to_rgb(hue, 0.5, 0.7))
    return np.array(colorsys.hsv_to_rgb(hue, 0.85, 0.9))


def texture_difference(a: np.ndarray, b: np.ndarray) -> float:
    """Mean per-pixel absolute difference after resizing to a common shape."""
    h = max(a.shape[0], b.shape[0])
    w = max(a.shape[1], b.shape[1])
    ra = _resize_bilinear(a, h, w)
    rb = _resize_bilinear(b, h, w)
    return float(np.mean(np.abs(ra - rb)))


def generate(cfg: SynthConfig) -> SyntheticSequence:
    rng = np.random.default_rng(cfg.seed)
    h, w = cfg.frame_height, cfg.frame_width

    background = rng.uniform(0.25, 0.75, size=(h, w, 3))

    sprites: list[_SpriteState] = []
    for i in range(cfg.num_objects):
        sw = int(rng.integers(cfg.sprite_min, cfg.sprite_max + 1))
        sh = int(rng.integers(cfg.sprite_min, cfg.sprite_max + 1))
        noise = rng.uniform(-cfg.texture_noise, cfg.texture_noise, size=(sh, sw, 3))
        texture = np.clip(
            _base_color(i, cfg.num_objects, cfg.texture_mode) + noise, 0.0, 1.0
        )
        x = float(rng.uniform(0, w - sw))
        y = float(rng.uniform(0, h - sh))
        speed = float(rng.uniform(cfg.speed_min, cfg.speed_max))
        angle = float(rng.uniform(0, 2 * np.pi))
        sprites.append(
            _SpriteState(
                object_id=i,
                width=sw,
                height=sh,
                texture=texture,
                x=x,
                y=y,
                vx=speed * np.cos(angle),
                vy=speed * np.sin(angle),
            )
        )

    if cfg.num_objects > 0:
        for _ in range(cfg.occlusion_count):
            target = int(rng.integers(cfg.num_objects))
            start = int(rng.integers(1, cfg.num_frames - cfg.occlusion_duration + 1))
            sprites[target].hidden.append((start, start + cfg.occlusion_duration))

    frames = np.zeros((cfg.num_frames, h, w, 3), dtype=np.uint8)
    gt_by_frame: dict[int, list[DetectionRecord]] = {}
    det_by_frame: dict[int, list[DetectionRecord]] = {}
    trajectories: dict[int, list[tuple[int, float, float]]] = {
        s.object_id: [] for s in sprites
    }

    for t in range(1, cfg.num_frames + 1):
        canvas = background.copy()
        gt_list: list[DetectionRecord] = []
        det_list: list[DetectionRecord] = []
        for s in sprites:
            if t > 1:
                s.x += s.vx
                s.y += s.vy
                if s.x < 0:
                    s.x = -s.x
                    s.vx = -s.vx
                elif s.x > w - s.width:
                    s.x = 2 * (w - s.width) - s.x
                    s.vx = -s.vx
                if s.y < 0:
                    s.y = -s.y
                    s.vy = -s.vy
                elif s.y > h - s.height:
                    s.y = 2 * (h - s.height) - s.y
                    s.vy = -s.vy
                s.x = float(np.clip(s.x, 0, w - s.width))
                s.y = float(np.clip(s.y, 0, h - s.height))
            trajectories[s.object_id].append((t, s.x, s.y))
            if not s.visible(t):
                continue
            ix, iy = int(round(s.x)), int(round(s.y))
            canvas[iy : iy + s.height, ix : ix + s.width] = s.texture
            gt_list.append(
                DetectionRecord(
                    frame=t,
                    id=s.object_id,
                    bb_left=s.x,
                    bb_top=s.y,
                    bb_width=float(s.width),
                    bb_height=float(s.height),
                    confidence=1.0,
                )
            )
            # Detector noise for this object.
            missed = rng.random() < cfg.miss_rate
            jitter = rng.normal(0.0, cfg.jitter_std, size=4) if cfg.jitter_std > 0 else np.zeros(4)
            conf = float(rng.uniform(0.5, 1.0))
            if missed:
                continue
            left = float(np.clip(s.x + jitter[0], -(s.width - 1.0), w - 1.0))
            top = float(np.clip(s.y + jitter[1], -(s.height - 1.0), h - 1.0))
            bw = float(max(s.width + jitter[2], 2.0))
            bh = float(max(s.height + jitter[3], 2.0))
            det_list.append(
                DetectionRecord(
                    frame=t,
                    id=-1,
                    bb_left=left,
                    bb_top=top,
                    bb_width=bw,
                    bb_height=bh,
                    confidence=conf,
                )
            )
        n_fp = int(rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0 else 0
        for _ in range(n_fp):
            fw = int(rng.integers(cfg.sprite_min, cfg.sprite_max + 1))
            fh = int(rng.integers(cfg.sprite_min, cfg.sprite_max + 1))
            fx = float(rng.uniform(0, w - fw))
            fy = float(rng.uniform(0, h - fh))
            det_list.append(
                DetectionRecord(
                    frame=t,
                    id=-1,
                    bb_left=fx,
                    bb_top=fy,
                    bb_width=float(fw),
                    bb_height=float(fh),
                    confidence=float(rng.uniform(0.3, 0.9)),
                )
            )
        frames[t - 1] = np.clip(canvas * 255.0, 0.0, 255.0).astype(np.uint8)
        if gt_list:
            gt_by_frame[t] = gt_list
        if det_list:
            det_by_frame[t] = det_list

    return SyntheticSequence(
        frames=frames,
        gt_by_frame=gt_by_frame,
        det_by_frame=det_by_frame,
        trajectories=trajectories,
        textures=[s.texture for s in sprites],
    )


def _record_line(r: DetectionRecord) -> str:
    return (
        f"{r.frame},{r.id},{r.bb_left:.2f},{r.bb_top:.2f},"
        f"{r.bb_width:.2f},{r.bb_height:.2f},{r.confidence:.2f},-1,-1,-1"
    )


def write_sequence(seq: SyntheticSequence, out_dir) -> dict[str, str]:
    """Persist a sequence as det.txt + gt.txt + frames.bin in a directory."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    det_lines = []
    gt_lines = []
    for t in range(1, seq.num_frames + 1):
        det_lines.extend(_record_line(r) for r in seq.detections(t))
        gt_lines.extend(_record_line(r) for r in seq.ground_truth(t))
    det_path = out / "det.txt"
    gt_path = out / "gt.txt"
    frames_path = out / "frames.bin"
    det_path.write_text("\n".join(det_lines) + ("\n" if det_lines else ""))
    gt_path.write_text("\n".join(gt_lines) + ("\n" if gt_lines else ""))
    write_frame_dump(seq.frames, frames_path)
    return {
        "det": str(det_path),
        "gt": str(gt_path),
        "frames": str(frames_path),
    }
