"""CLEAR-MOT scoring of hypothesis tracks against ground truth.

Correspondences persist: a ground-truth object stays bound to its
hypothesis while both are present and still overlap at the IoU gate;
only the remainder is re-matched each frame, by maximum-total-IoU
assignment. An identity switch is counted whenever an object that was
matched before ends up bound to a different hypothesis id.

MOTA = 1 - (FP + FN + IDs) / GT over the whole sequence and may be
negative; MOTP is the mean IoU of all matches (higher is better).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .assignment import solve_gated
from .errors import ConfigError


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError(
                f"iou_threshold must be in (0, 1], got {self.iou_threshold}"
            )


@dataclass
class EvalReport:
    mota: float
    motp: float
    fp: int
    fn: int
    ids: int
    gt_total: int
    matches: int
    per_frame: list[dict]
    iou_threshold: float
    error: str | None = None

    def to_json(self) -> str:
        payload = {
            "mota": None if math.isnan(self.mota) else self.mota,
            "motp": None if math.isnan(self.motp) else self.motp,
            "fp": self.fp,
            "fn": self.fn,
            "ids": self.ids,
            "gt_total": self.gt_total,
            "matches": self.matches,
            "per_frame": self.per_frame,
            "config": {"iou_threshold": self.iou_threshold},
            "error": self.error,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_csv(self) -> str:
        def fmt(x: float) -> str:
            return "nan" if math.isnan(x) else f"{x:.6f}"

        return (
            "mota,motp,ids,fp,fn\n"
            f"{fmt(self.mota)},{fmt(self.motp)},{self.ids},{self.fp},{self.fn}\n"
        )


def iou(box_a, box_b) -> float:
    """Intersection over union of two (left, top, width, height) boxes."""
    ax0, ay0, aw, ah = box_a
    bx0, by0, bw, bh = box_b
    ix0 = max(ax0, bx0)
    iy0 = max(ay0, by0)
    ix1 = min(ax0 + aw, bx0 + bw)
    iy1 = min(ay0 + ah, by0 + bh)
    iw = max(ix1 - ix0, 0.0)
    ih = max(iy1 - iy0, 0.0)
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _box(record) -> tuple[float, float, float, float]:
    if hasattr(record, "bb_left"):
        return (record.bb_left, record.bb_top, record.bb_width, record.bb_height)
    return tuple(record)


def _ids_of(records, kind: str, frame: int):
    ids = []
    seen = set()
    for r in records:
        rid = r.id if hasattr(r, "id") else r.track_id
        if rid in seen:
            raise ValueError(f"duplicate {kind} id {rid} in frame {frame}")
        seen.add(rid)
        ids.append(rid)
    return ids


def evaluate(gt_by_frame: dict, hyp_by_frame: dict, cfg: EvalConfig | None = None) -> EvalReport:
    """Score hypothesis tracks against ground truth, frame by frame.

    Both inputs map frame index to record lists (ground truth uses ``id``
    fields, hypotheses either ``id`` or ``track_id``). Empty ground truth
    with nonempty hypotheses yields mota = NaN with the error field set;
    false positives are still counted.
    """
    cfg = cfg or EvalConfig()
    frames = sorted(set(gt_by_frame) | set(hyp_by_frame))
    fp = fn = ids = gt_total = 0
    motp_sum = 0.0
    match_count = 0
    last_match: dict = {}  # gt id -> hyp id, most recent binding
    prev_matches: dict = {}  # matches carried from the previous frame
    per_frame = []

    for t in frames:
        gt = gt_by_frame.get(t, [])
        hyp = hyp_by_frame.get(t, [])
        gt_ids = _ids_of(gt, "ground-truth", t)
        hyp_ids = _ids_of(hyp, "hypothesis", t)
        gt_boxes = {i: _box(r) for i, r in zip(gt_ids, gt)}
        hyp_boxes = {i: _box(r) for i, r in zip(hyp_ids, hyp)}

        matches: dict = {}
        # 1. Keep surviving correspondences from the previous frame.
        for g, h_prev in sorted(prev_matches.items(), key=lambda kv: kv[0]):
            if g in gt_boxes and h_prev in hyp_boxes:
                overlap = iou(gt_boxes[g], hyp_boxes[h_prev])
                if overlap >= cfg.iou_threshold:
                    matches[g] = (h_prev, overlap)

        # 2. Re-match the remainder by maximum total IoU, gated.
        free_gt = [g for g in gt_ids if g not in matches]
        used_hyp = {h for h, _ in matches.values()}
        free_hyp = [h for h in hyp_ids if h not in used_hyp]
        if free_gt and free_hyp:
            overlaps = np.array(
                [[iou(gt_boxes[g], hyp_boxes[h]) for h in free_hyp] for g in free_gt]
            )
            # Maximizing total IoU == minimizing total (1 - IoU); keeping
            # IoU >= threshold == keeping cost <= 1 - threshold.
            result = solve_gated(1.0 - overlaps, 1.0 - cfg.iou_threshold)
            for gi, hi in result.pairs:
                g, h = free_gt[gi], free_hyp[hi]
                matches[g] = (h, float(overlaps[gi, hi]))

        frame_ids = 0
        for g, (h, overlap) in sorted(matches.items(), key=lambda kv: kv[0]):
            if g in last_match and last_match[g] != h:
                frame_ids += 1
            last_match[g] = h
            motp_sum += overlap
            match_count += 1
        matched_hyp = {h for h, _ in matches.values()}
        frame_fp = len([h for h in hyp_ids if h not in matched_hyp])
        frame_fn = len([g for g in gt_ids if g not in matches])

        fp += frame_fp
        fn += frame_fn
        ids += frame_ids
        gt_total += len(gt_ids)
        prev_matches = {g: h for g, (h, _) in matches.items()}
        per_frame.append(
            {
                "frame": t,
                "fp": frame_fp,
                "fn": frame_fn,
                "ids": frame_ids,
                "matches": len(matches),
                "gt": len(gt_ids),
            }
        )

    motp = motp_sum / match_count if match_count else float("nan")
    if gt_total > 0:
        mota = 1.0 - (fp + fn + ids) / gt_total
        error = None
    else:
        mota = float("nan")
        error = "gt_total is zero: MOTA undefined"
    return EvalReport(
        mota=mota,
        motp=motp,
        fp=fp,
        fn=fn,
        ids=ids,
        gt_total=gt_total,
        matches=match_count,
        per_frame=per_frame,
        iou_threshold=cfg.iou_threshold,
        error=error,
    )
