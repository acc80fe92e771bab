"""Command-line entry points.

Subcommands: synth, track, evaluate, ablate, gradcheck. Exit codes:
0 success, 1 runtime failure (bad input data, training divergence,
failed check), 2 usage or configuration errors (including missing input
files). Config files are flat key=value text (see configs.py); --set
overrides win over the file, and --seed seeds model, miner, and
generator at once.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from .configs import (
    load_config_file,
    make_eval_config,
    make_pipeline_config,
    make_synth_config,
    merge_config,
    parse_overrides,
)
from .errors import ConfigError, ParseError, TripleTrackError
from .evaluation import evaluate
from .model import run_gradient_check, save_checkpoint
from .mot_io import (
    FileSequence,
    frame_stream,
    group_by_frame,
    parse_mot_file,
    write_tracks,
)
from .pipeline import MODES, PipelineConfig, run_sequence
from .synthetic import generate, write_sequence


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="seed for model, miner, and generator")


def _merged_kv(args) -> dict[str, str]:
    file_kv = load_config_file(args.config) if args.config else {}
    return merge_config(file_kv, args.seed, parse_overrides(args.overrides))


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"missing {what} file: {path}")
    return p


def _print_path(path) -> None:
    print(f"wrote {path}")


def cmd_synth(args) -> int:
    kv = _merged_kv(args)
    cfg = make_synth_config(kv)
    seq = generate(cfg)
    paths = write_sequence(seq, args.out)
    for p in paths.values():
        _print_path(p)
    return 0


def cmd_track(args) -> int:
    kv = _merged_kv(args)
    cfg = make_pipeline_config(kv)
    det_path = _require_file(args.det, "detection")
    frames_path = _require_file(args.frames, "frame dump")

    source = FileSequence(det_path, frames_path)
    h, w, _ = cfg.model.input_shape
    frames = frame_stream(source, h, w)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_fh = None
    log_fn = None
    if args.triplet_log:
        log_fh = open(args.triplet_log, "w")
        log_fn = lambda rec: log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
    try:
        result = run_sequence(frames, cfg, triplet_log=log_fn)
    finally:
        if log_fh:
            log_fh.close()
            _print_path(args.triplet_log)

    tracks_path = out / "tracks.txt"
    stats_path = out / "stats.json"
    tracks_path.write_text(write_tracks(result.tracks))
    stats_path.write_text(result.stats.to_json(deterministic=True) + "\n")
    info_path = out / "run_info.json"
    info_path.write_text(
        json.dumps(
            {
                "wall_time_sec": result.stats.wall_time_sec,
                "final_model_version": result.final_params.version,
            },
            sort_keys=True,
        )
        + "\n"
    )
    _print_path(tracks_path)
    _print_path(stats_path)
    _print_path(info_path)
    if args.checkpoint_out:
        save_checkpoint(result.final_params, args.checkpoint_out)
        _print_path(args.checkpoint_out)
    if result.stats.aborted:
        print(f"sequence aborted: {result.stats.error}", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(args) -> int:
    kv = _merged_kv(args)
    cfg = make_eval_config(kv)
    gt_path = _require_file(args.gt, "ground-truth")
    hyp_path = _require_file(args.hyp, "hypothesis")
    gt = group_by_frame(parse_mot_file(gt_path.read_text()))
    hyp = group_by_frame(parse_mot_file(hyp_path.read_text()))
    report = evaluate(gt, hyp, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    csv_path = out / "summary.csv"
    report_path.write_text(report.to_json() + "\n")
    csv_path.write_text(report.to_csv())
    _print_path(report_path)
    _print_path(csv_path)
    if report.error:
        print(f"evaluation error: {report.error}", file=sys.stderr)
        return 1
    return 0


def run_ablation(sequence_dirs, kv: dict[str, str]):
    """Run every mode over every sequence; returns per-mode pooled rows.

    All modes share seeds and the model is re-initialized per sequence,
    so rows differ only in the mining/training behavior under test.
    """
    base = make_pipeline_config(kv)
    eval_cfg = make_eval_config(kv)
    rows = []
    sources = []
    for d in sequence_dirs:
        det = _require_file(str(Path(d) / "det.txt"), "detection")
        frames_bin = _require_file(str(Path(d) / "frames.bin"), "frame dump")
        gt = _require_file(str(Path(d) / "gt.txt"), "ground-truth")
        sources.append(FileSequence(det, frames_bin, gt_path=gt))
    h, w, _ = base.model.input_shape
    streams = [frame_stream(s, h, w) for s in sources]
    for mode in MODES:
        cfg = PipelineConfig(
            model=base.model,
            tracker=base.tracker,
            miner=base.miner,
            trainer=base.trainer,
            mode=mode,
            reset_model_per_sequence=base.reset_model_per_sequence,
        )
        started = time.perf_counter()
        fp = fn = ids = gt_total = matches = 0
        motp_weighted = 0.0
        carried = None
        for source, frames in zip(sources, streams):
            result = run_sequence(frames, cfg, initial_params=carried)
            if not cfg.reset_model_per_sequence:
                carried = result.final_params
            hyp = group_by_frame(result.tracks)
            report = evaluate(source.all_ground_truth(), hyp, eval_cfg)
            fp += report.fp
            fn += report.fn
            ids += report.ids
            gt_total += report.gt_total
            matches += report.matches
            if report.matches:
                motp_weighted += report.motp * report.matches
        wall = time.perf_counter() - started
        mota = 1.0 - (fp + fn + ids) / gt_total if gt_total else float("nan")
        motp = motp_weighted / matches if matches else float("nan")
        rows.append(
            {
                "mode": mode,
                "mota": mota,
                "motp": motp,
                "ids": ids,
                "fp": fp,
                "fn": fn,
                "wall_time_sec": wall,
            }
        )
    return rows


def cmd_ablate(args) -> int:
    kv = _merged_kv(args)
    rows = run_ablation(args.sequences, kv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "ablation.csv"
    lines = ["mode,mota,motp,ids,fp,fn,wall_time_sec"]
    for r in rows:
        def fmt(x):
            return "nan" if isinstance(x, float) and math.isnan(x) else (
                f"{x:.6f}" if isinstance(x, float) else str(x)
            )

        lines.append(
            f"{r['mode']},{fmt(r['mota'])},{fmt(r['motp'])},{r['ids']},"
            f"{r['fp']},{r['fn']},{r['wall_time_sec']:.3f}"
        )
    csv_path.write_text("\n".join(lines) + "\n")
    _print_path(csv_path)
    for r in rows:
        print(
            f"{r['mode']}: mota={r['mota']:.4f} motp={r['motp']:.4f} "
            f"ids={r['ids']} fp={r['fp']} fn={r['fn']}"
        )
    return 0


def cmd_gradcheck(args) -> int:
    kv = _merged_kv(args)
    cfg = make_pipeline_config(kv)
    worst, reports = run_gradient_check(
        config=cfg.model,
        trials=args.trials,
        triplets_per_trial=args.triplets,
        eps=args.eps,
        samples_per_tensor=args.samples,
        margin=cfg.trainer.margin,
        base_seed=args.seed if args.seed is not None else 0,
        corrupt=args.corrupt,
    )
    skipped = sum(r.skipped_nonsmooth for r in reports)
    probed = sum(r.probed for r in reports)
    for i, r in enumerate(reports):
        print(f"trial {i}: max relative error {r.max_rel_error:.3e}")
    print(f"probed {probed} elements, skipped {skipped} non-smooth points")
    print(f"max relative error: {worst:.3e}")
    ok = worst <= 1e-4
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tripletrack",
        description="Tracking-by-detection with online descriptor refinement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic sequence")
    p_synth.add_argument("--out", required=True, help="output directory")
    _add_common(p_synth)
    p_synth.set_defaults(fn=cmd_synth)

    p_track = sub.add_parser("track", help="track a sequence")
    p_track.add_argument("--det", required=True, help="detection file")
    p_track.add_argument("--frames", required=True, help="frame dump file")
    p_track.add_argument("--out", required=True, help="output directory")
    p_track.add_argument("--checkpoint-out", help="write final model checkpoint here")
    p_track.add_argument("--triplet-log", help="write emitted triplets as JSON lines")
    _add_common(p_track)
    p_track.set_defaults(fn=cmd_track)

    p_eval = sub.add_parser("evaluate", help="score tracks against ground truth")
    p_eval.add_argument("--gt", required=True, help="ground-truth file")
    p_eval.add_argument("--hyp", required=True, help="hypothesis track file")
    p_eval.add_argument("--out", required=True, help="output directory")
    _add_common(p_eval)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_abl = sub.add_parser("ablate", help="compare all modes over sequences")
    p_abl.add_argument(
        "--sequences", nargs="+", required=True, help="sequence directories"
    )
    p_abl.add_argument("--out", required=True, help="output directory")
    _add_common(p_abl)
    p_abl.set_defaults(fn=cmd_ablate)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_grad.add_argument("--trials", type=int, default=20)
    p_grad.add_argument("--triplets", type=int, default=5)
    p_grad.add_argument("--eps", type=float, default=1e-6)
    p_grad.add_argument("--samples", type=int, default=20)
    p_grad.add_argument(
        "--corrupt",
        action="store_true",
        help="negative control: bias the analytic gradient so the check fails",
    )
    _add_common(p_grad)
    p_grad.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, TripleTrackError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
