"""MOT-style file I/O, patch extraction, and sequence sources.

Detection and ground-truth files are comma-separated, one box per line:

    frame, id, bb_left, bb_top, bb_width, bb_height, conf, x, y, z

Frames are 1-based; raw detections carry id -1; the trailing world
coordinates are ignored on input and written as -1. Track output uses
the same layout with confidence fixed to 1 and reals printed with two
decimals, and parses back through the same reader.

Raw frame dumps are flat binary: an 8-byte magic, four little-endian
uint32 fields (num_frames, height, width, channels), then the frames as
contiguous uint8 bytes. No image codecs are involved anywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ExtractionError, ParseError
from .model import Patch
from .tracker import FrameDetections, TrackRecord

FRAME_DUMP_MAGIC = b"TTRKFRM1"


@dataclass(frozen=True)
class DetectionRecord:
    frame: int
    id: int
    bb_left: float
    bb_top: float
    bb_width: float
    bb_height: float
    confidence: float = 1.0


def parse_mot_file(text: str) -> list[DetectionRecord]:
    """Parse detection/ground-truth CSV text into records.

    Empty input gives an empty list. Malformed lines and non-positive box
    sizes raise ParseError naming the 1-based line number.
    """
    records: list[DetectionRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) < 7:
            raise ParseError(f"expected at least 7 fields, got {len(parts)}", lineno)
        try:
            frame = int(parts[0])
            obj_id = int(parts[1])
            left, top, width, height = (float(p) for p in parts[2:6])
            conf = float(parts[6])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if frame < 1:
            raise ParseError(f"frame index must be >= 1, got {frame}", lineno)
        if width <= 0 or height <= 0:
            raise ParseError(
                f"box size must be positive, got {width} x {height}", lineno
            )
        records.append(
            DetectionRecord(
                frame=frame,
                id=obj_id,
                bb_left=left,
                bb_top=top,
                bb_width=width,
                bb_height=height,
                confidence=conf,
            )
        )
    return records


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def write_tracks(records: list[TrackRecord]) -> str:
    """Serialize track records as MOT-style CSV text.

    One line per record, sorted by frame then id, reals with two
    decimals. parse_mot_file reads the result back exactly for
    coordinates representable at that precision.
    """
    lines = []
    for r in sorted(records, key=lambda r: (r.frame, r.track_id)):
        lines.append(
            f"{r.frame},{r.track_id},{_fmt(r.bb_left)},{_fmt(r.bb_top)},"
            f"{_fmt(r.bb_width)},{_fmt(r.bb_height)},1,-1,-1,-1"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def records_to_track_records(records: list[DetectionRecord]) -> list[TrackRecord]:
    return [
        TrackRecord(
            frame=r.frame,
            track_id=r.id,
            bb_left=r.bb_left,
            bb_top=r.bb_top,
            bb_width=r.bb_width,
            bb_height=r.bb_height,
        )
        for r in records
    ]


def group_by_frame(records: list[DetectionRecord]) -> dict[int, list[DetectionRecord]]:
    grouped: dict[int, list[DetectionRecord]] = {}
    for r in records:
        grouped.setdefault(r.frame, []).append(r)
    return grouped


# ---------------------------------------------------------------------------
# Patch extraction


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned separable bilinear resize, deterministic."""
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()

    def grid(n_in: int, n_out: int) -> np.ndarray:
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * ((n_in - 1) / (n_out - 1))

    ys = grid(h, out_h)
    y0 = np.floor(ys).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    wy = (ys - y0)[:, None, None]
    rows = img[y0] * (1.0 - wy) + img[y1] * wy

    xs = grid(w, out_w)
    x0 = np.floor(xs).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    wx = (xs - x0)[None, :, None]
    return rows[:, x0] * (1.0 - wx) + rows[:, x1] * wx


def extract_patch(
    frame_image: np.ndarray,
    record: DetectionRecord,
    target_h: int,
    target_w: int,
    detection_index: int = 0,
) -> Patch:
    """Crop a detection box from a frame and resize it to the model input.

    The box is clipped to the frame (no padding) and intensities are
    scaled to [0, 1]. A box with no overlap raises ExtractionError.
    """
    img = np.asarray(frame_image)
    if img.ndim != 3:
        raise ExtractionError(f"frame must be (h, w, c), got shape {img.shape}")
    h, w = img.shape[:2]
    x0 = max(int(np.floor(record.bb_left)), 0)
    y0 = max(int(np.floor(record.bb_top)), 0)
    x1 = min(int(np.ceil(record.bb_left + record.bb_width)), w)
    y1 = min(int(np.ceil(record.bb_top + record.bb_height)), h)
    if x1 <= x0 or y1 <= y0:
        raise ExtractionError(
            f"box ({record.bb_left}, {record.bb_top}, {record.bb_width}, "
            f"{record.bb_height}) lies outside a {w} x {h} frame"
        )
    crop = img[y0:y1, x0:x1].astype(np.float64)
    if img.dtype == np.uint8:
        crop /= 255.0
    pixels = _resize_bilinear(crop, target_h, target_w)
    return Patch(
        pixels=pixels,
        frame_index=record.frame,
        detection_index=detection_index,
        bbox=(record.bb_left, record.bb_top, record.bb_width, record.bb_height),
        confidence=record.confidence,
    )


# ---------------------------------------------------------------------------
# Frame dumps and sequence sources


def write_frame_dump(frames: np.ndarray, path) -> None:
    """Write (t, h, w, c) uint8 frames as a flat binary dump."""
    arr = np.ascontiguousarray(frames, dtype=np.uint8)
    if arr.ndim != 4:
        raise ValueError(f"frames must be (t, h, w, c), got shape {arr.shape}")
    t, h, w, c = arr.shape
    with open(path, "wb") as fh:
        fh.write(FRAME_DUMP_MAGIC)
        fh.write(struct.pack("<4I", t, h, w, c))
        fh.write(arr.tobytes())


def read_frame_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(FRAME_DUMP_MAGIC))
        if magic != FRAME_DUMP_MAGIC:
            raise ParseError(f"bad frame dump magic {magic!r}")
        t, h, w, c = struct.unpack("<4I", fh.read(16))
        data = fh.read()
    expected = t * h * w * c
    if len(data) != expected:
        raise ParseError(
            f"frame dump payload is {len(data)} bytes, header implies {expected}"
        )
    return np.frombuffer(data, dtype=np.uint8).reshape(t, h, w, c)


class FileSequence:
    """Sequence source backed by a frame dump plus detection files."""

    def __init__(self, det_path, frames_path, gt_path=None):
        self.frames = read_frame_dump(frames_path)
        with open(det_path) as fh:
            detections = parse_mot_file(fh.read())
        self._detections = group_by_frame(detections)
        self._ground_truth = None
        if gt_path is not None:
            with open(gt_path) as fh:
                self._ground_truth = group_by_frame(parse_mot_file(fh.read()))
        bad = [f for f in self._detections if f > self.num_frames]
        if bad:
            raise ParseError(
                f"detections reference frame {max(bad)} but dump has {self.num_frames}"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def frame(self, t: int) -> np.ndarray:
        return self.frames[t - 1]

    def detections(self, t: int) -> list[DetectionRecord]:
        return self._detections.get(t, [])

    def ground_truth(self, t: int) -> list[DetectionRecord]:
        if self._ground_truth is None:
            return []
        return self._ground_truth.get(t, [])

    def all_ground_truth(self) -> dict[int, list[DetectionRecord]]:
        return dict(self._ground_truth or {})


def frame_stream(source, target_h: int, target_w: int) -> list[FrameDetections]:
    """Extract per-frame detection patches from any sequence source.

    Frames with no detections still appear (with empty lists) so track
    lifecycle advances through them.
    """
    frames = []
    for t in range(1, source.num_frames + 1):
        image = source.frame(t)
        patches = [
            extract_patch(image, rec, target_h, target_w, detection_index=i)
            for i, rec in enumerate(source.detections(t))
        ]
        frames.append(FrameDetections(frame_index=t, detections=patches))
    return frames
