"""Command-line entry point.

Exit codes: 0 success, 1 input error (missing or malformed files), 2 config error.
Diagnostics go to stderr; results go to the files named on the command line.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as uio
from .config import ConfigError, PipelineConfig, dump_config, load_config
from .detection import DetectionU
from .grouping import GroupingConfig, fuse_samples
from .kalman import transform_uncertainty
from .metrics import aggregate, evaluate, sweep_report
from .sim import emit_samples, generate
from .tracker import run_sequence
from .uncertainty import AnchorBox, OffsetPrediction, propagate_variance, variance_to_covariance

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


class InputError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"ua3dmot: error: {msg}", file=sys.stderr)


def _config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    return load_config(path)


def _sequences(path) -> list[tuple[str, Path]]:
    """``(name, file)`` pairs: a single file, or every ``*.txt`` in a directory."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.txt"))
        if not files:
            raise InputError(f"no .txt files in directory: {p}")
        return [(f.stem, f) for f in files]
    if not p.exists():
        raise InputError(f"no such file: {p}")
    return [(p.stem, p)]


def _out_path(out, name: str, multi: bool) -> Path:
    out = Path(out)
    if multi:
        out.mkdir(parents=True, exist_ok=True)
        return out / f"{name}.txt"
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _read(reader, path):
    try:
        return reader(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except uio.ParseError as e:
        raise InputError(str(e)) from None


def _with_overrides(cfg: PipelineConfig, alpha=None, beta=None) -> PipelineConfig:
    tr = cfg.tracker
    noise = tr.noise
    if alpha is not None or beta is not None:
        try:
            noise = dataclasses.replace(
                noise,
                alpha=noise.alpha if alpha is None else alpha,
                beta=noise.beta if beta is None else beta,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from None
    return dataclasses.replace(cfg, tracker=dataclasses.replace(tr, noise=noise))


def _roundtrip(tracks, n_frames: int):
    """Tracks as they would read back from a written submission file."""
    lines = [uio.format_kitti_record(r) for frame in uio.labeled_to_records(tracks) for r in frame]
    frames = uio.records_to_labeled(uio.parse_kitti_lines(lines))
    return frames + [[] for _ in range(n_frames - len(frames))]


def cmd_track(dets_path, config_path, out_path, alpha=None, beta=None, emit_ellipses=None) -> int:
    try:
        cfg = _with_overrides(_config(config_path), alpha, beta)
        seqs = _sequences(dets_path)
        multi = len(seqs) > 1 or Path(dets_path).is_dir()
        ellipses = []
        for name, f in seqs:
            frames = _read(uio.read_detections_u, f)
            tracks = run_sequence(frames, cfg.tracker)
            uio.write_tracks(_out_path(out_path, name, multi), tracks)
            n_ids = len({o.id for fr in tracks for o in fr})
            n_boxes = sum(len(fr) for fr in tracks)
            print(f"{name}: {len(frames)} frames, {n_ids} tracks, {n_boxes} boxes")
            if emit_ellipses:
                n = cfg.tracker.noise
                for fr in frames:
                    for d in fr:
                        rec = uio.ellipse_record(d, transform_uncertainty(d.sigma, n.alpha, n.beta))
                        rec["sequence"] = name
                        ellipses.append(rec)
        if emit_ellipses:
            uio.write_jsonl(emit_ellipses, ellipses)
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    except (InputError, ValueError) as e:
        _err(str(e))
        return EXIT_INPUT
    return EXIT_OK


def cmd_group(sample_paths, out_path, gate=None, config_path=None, n_samples=None, emit_ellipses=None) -> int:
    try:
        cfg = _config(config_path).grouping
        if gate is not None:
            cfg = GroupingConfig(gate_distance=gate, min_support_fraction=cfg.min_support_fraction)
        if not sample_paths:
            raise InputError("need at least one sample file")
        per_file = [_read(uio.read_detections_u, p) for p in sample_paths]
        if len(per_file) == 1:
            sets, S = uio.to_sample_sets(per_file[0], n_samples)
        else:
            # one file per sample; in-file sample ids are ignored
            n_frames = max(len(f) for f in per_file)
            S = len(per_file)
            sets = [[(f[t] if t < len(f) else []) for f in per_file] for t in range(n_frames)]
        fused = [fuse_samples(s, cfg, frame=t) for t, s in enumerate(sets)]
        uio.write_detections_u(out_path, fused)
        print(f"grouped {S} samples over {len(fused)} frames into {sum(len(f) for f in fused)} detections")
        if emit_ellipses:
            uio.write_jsonl(emit_ellipses, [uio.ellipse_record(d) for f in fused for d in f])
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    except (InputError, ValueError) as e:
        _err(str(e))
        return EXIT_INPUT
    return EXIT_OK


def parse_offset_lines(lines, source="<input>") -> list[list[DetectionU]]:
    """``frame class score`` + 7 anchor values + 7 offset means + 7 offset variances (24 fields)."""
    out = []
    for lineno, line in enumerate(lines, 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) != 24:
            raise uio.ParseError(source, lineno, f"expected 24 fields, got {len(tok)}")
        try:
            frame = int(tok[0])
            vals = [float(t) for t in tok[2:]]
            anchor = AnchorBox(*vals[1:8])
            pred = OffsetPrediction(np.array(vals[8:15]), np.array(vals[15:22]))
            dec = propagate_variance(pred, anchor)
        except ValueError as e:
            raise uio.ParseError(source, lineno, str(e)) from None
        if not 0 <= frame <= uio.MAX_FRAME:
            raise uio.ParseError(source, lineno, f"frame index {frame} out of range")
        out.append(DetectionU(frame, tok[1], vals[0], dec.box, variance_to_covariance(dec)))
    frames = [[] for _ in range(max((d.frame for d in out), default=-1) + 1)]
    for d in out:
        frames[d.frame].append(d)
    return frames


def cmd_decode(offsets_path, out_path, emit_ellipses=None) -> int:
    try:
        frames = _read(lambda p: parse_offset_lines(uio._read_lines(p), os.fspath(p)), offsets_path)
        uio.write_detections_u(out_path, frames)
        if emit_ellipses:
            uio.write_jsonl(emit_ellipses, [uio.ellipse_record(d) for f in frames for d in f])
    except (InputError, ValueError) as e:
        _err(str(e))
        return EXIT_INPUT
    return EXIT_OK


def _evaluate_pair(gt_frames, hyp_frames, ecfg, name):
    n = max(len(gt_frames), len(hyp_frames))
    gt_frames = gt_frames + [[] for _ in range(n - len(gt_frames))]
    hyp_frames = hyp_frames + [[] for _ in range(n - len(hyp_frames))]
    return evaluate(gt_frames, hyp_frames, ecfg, name=name)


def _match_dirs(gt_path, hyp_path):
    gts = _sequences(gt_path)
    if Path(hyp_path).is_dir():
        pairs = []
        for name, g in gts:
            h = Path(hyp_path) / f"{name}.txt"
            if not h.exists():
                raise InputError(f"no hypothesis file for sequence {name}: {h}")
            pairs.append((name, g, h))
        return pairs
    if len(gts) != 1:
        raise InputError("a directory of GT sequences needs a directory of hypotheses")
    if not Path(hyp_path).exists():
        raise InputError(f"no such file: {hyp_path}")
    return [(gts[0][0], gts[0][1], Path(hyp_path))]


def print_report(reports, total, stream=None) -> None:
    stream = stream or sys.stdout
    head = f"{'sequence':<16} {'MOTA%':>8} {'F1%':>7} {'ML%':>7} {'MT%':>7} {'IDSW':>6} {'FP':>6} {'FN':>6} {'GT':>7}"
    print(head, file=stream)
    for r in list(reports) + [total]:
        mota = "nan" if math.isnan(r.mota) else f"{r.mota:.2f}"
        print(
            f"{r.name:<16} {mota:>8} {r.f1:>7.2f} {r.ml_pct:>7.2f} {r.mt_pct:>7.2f} {r.idsw:>6} {r.fp:>6} {r.fn:>6} {r.n_gt:>7}",
            file=stream,
        )


def cmd_eval(gt_path, hyp_path, config_path=None, criterion=None, threshold=None, out_path=None) -> int:
    try:
        ecfg = _config(config_path).eval
        if criterion is not None or threshold is not None:
            kw = {"criterion": criterion or ecfg.criterion}
            if threshold is not None:
                key = "distance_threshold" if kw["criterion"] == "center_distance" else "iou_threshold"
                kw[key] = threshold
            try:
                ecfg = dataclasses.replace(ecfg, **kw)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        reports = []
        for name, g, h in _match_dirs(gt_path, hyp_path):
            gt_frames = uio.records_to_labeled(_read(uio.read_kitti_labels, g))
            hyp_frames = uio.records_to_labeled(_read(uio.read_kitti_labels, h))
            reports.append(_evaluate_pair(gt_frames, hyp_frames, ecfg, name))
        total = aggregate(reports)
        print_report(reports, total)
        if out_path:
            uio.write_jsonl(out_path, [r.record() for r in reports] + [total.record()])
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    except (InputError, ValueError) as e:
        _err(str(e))
        return EXIT_INPUT
    return EXIT_OK


def cmd_simulate(config_path, out_dir, seed=None, samples=None) -> int:
    try:
        sc = _config(config_path).scenario
        if seed is not None:
            sc = dataclasses.replace(sc, seed=seed)
        scn = generate(sc)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        uio.write_tracks(out / "gt.txt", scn.gt)
        uio.write_detections_u(out / "detections.txt", scn.detections)
        if samples:
            sample_frames = emit_samples(scn, samples)
            uio.write_detections_u(out / "samples.txt", [[d for s in f for d in s] for f in sample_frames])
        uio.write_jsonl(
            out / "sigma_true.jsonl",
            [{"id": k, "sigma": v.tolist()} for k, v in sorted(scn.sigma_true.items())],
        )
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    except (InputError, ValueError, OSError) as e:
        _err(str(e))
        return EXIT_INPUT
    return EXIT_OK


def _sweep_cell(args):
    alpha, beta, cfg, data = args
    cfg = _with_overrides(cfg, alpha, beta)
    reports = []
    for name, det_frames, gt_frames in data:
        n = max(len(det_frames), len(gt_frames))
        tracks = run_sequence(det_frames + [[] for _ in range(n - len(det_frames))], cfg.tracker)
        reports.append(_evaluate_pair(gt_frames, _roundtrip(tracks, n), cfg.eval, name))
    return (alpha, beta), aggregate(reports)


def run_sweep(data, cfg: PipelineConfig, alphas, betas, workers: int = 1):
    """``data``: list of ``(name, detection frames, gt frames)``. Returns ``{(a, b): report}``."""
    jobs = [(a, b, cfg, data) for a in alphas for b in betas if a or b]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    return dict(results)


def cmd_sweep(dets_path, gt_path, alphas, betas, config_path=None, out_path=None, workers=1) -> int:
    try:
        cfg = _config(config_path)
        if any(a < 0 for a in alphas) or any(b < 0 for b in betas):
            raise ConfigError("alphas and betas must be non-negative")
        if 0.0 in alphas and 0.0 in betas:
            print("ua3dmot: note: skipping the (alpha, beta) = (0, 0) cell", file=sys.stderr)
        data = []
        for name, g, d in _match_dirs(gt_path, dets_path):
            gt_frames = uio.records_to_labeled(_read(uio.read_kitti_labels, g))
            det_frames = _read(uio.read_detections_u, d)
            data.append((name, det_frames, gt_frames))
        table = sweep_report(run_sweep(data, cfg, alphas, betas, workers))
        print(table.text)
        if out_path:
            with open(out_path, "w") as fh:
                fh.write(table.jsonl())
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    except (InputError, ValueError) as e:
        _err(str(e))
        return EXIT_INPUT
    return EXIT_OK


def cmd_config(dump_defaults: bool, check=None) -> int:
    if check:
        try:
            _config(check)
        except ConfigError as e:
            _err(str(e))
            return EXIT_CONFIG
        print(f"{check}: ok")
        return EXIT_OK
    if dump_defaults:
        sys.stdout.write(dump_config())
        return EXIT_OK
    _err("nothing to do; pass --dump-defaults or --check FILE")
    return EXIT_CONFIG


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ua3dmot", description="Uncertainty-aware 3D multi-object tracking")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("track", help="track detection file(s) and write KITTI tracking results")
    s.add_argument("detections", help="detection file or directory of per-sequence files")
    s.add_argument("-c", "--config", help="config file (see `config --dump-defaults`)")
    s.add_argument("-o", "--output", required=True, help="output file, or directory for several sequences")
    s.add_argument("--alpha", type=float, help="override noise.alpha")
    s.add_argument("--beta", type=float, help="override noise.beta")
    s.add_argument("--emit-ellipses", metavar="PATH", help="write ground-plane ellipses of the filter noise as JSON lines")

    s = sub.add_parser("group", help="fuse ensemble sample detections into covariance detections")
    s.add_argument("samples", nargs="+", help="one file per sample, or one file with sample ids")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--gate", type=float, help="grouping distance gate in meters (default 1.0)")
    s.add_argument("-n", "--num-samples", type=int, help="ensemble size when a single file carries sample ids")
    s.add_argument("-c", "--config")
    s.add_argument("--emit-ellipses", metavar="PATH")

    s = sub.add_parser("decode", help="decode anchor offsets with variances into covariance detections")
    s.add_argument("offsets")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--emit-ellipses", metavar="PATH")

    s = sub.add_parser("eval", help="CLEAR-MOT evaluation of tracking results")
    s.add_argument("gt")
    s.add_argument("hyp")
    s.add_argument("-c", "--config")
    s.add_argument("--criterion", choices=("iou_3d", "iou_bev", "center_distance"))
    s.add_argument("--threshold", type=float, help="IoU threshold or distance in meters")
    s.add_argument("-o", "--output", help="write per-sequence and aggregate records as JSON lines")

    s = sub.add_parser("simulate", help="write a synthetic scenario (gt.txt, detections.txt, ...)")
    s.add_argument("-c", "--config")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--samples", type=int, help="also write S ensemble samples to samples.txt")

    s = sub.add_parser("sweep", help="track + evaluate over an alpha x beta grid")
    s.add_argument("detections")
    s.add_argument("gt")
    s.add_argument("--alphas", type=_floats, default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    s.add_argument("--betas", type=_floats, default=[0.1, 1.0, 5.0, 10.0, 50.0])
    s.add_argument("-c", "--config")
    s.add_argument("-o", "--output", help="write ranked rows as JSON lines")
    s.add_argument("-j", "--workers", type=int, default=1)

    s = sub.add_parser("config", help="print or check configuration")
    s.add_argument("--dump-defaults", action="store_true")
    s.add_argument("--check", metavar="FILE")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    c = args.command
    if c == "track":
        return cmd_track(args.detections, args.config, args.output, args.alpha, args.beta, args.emit_ellipses)
    if c == "group":
        return cmd_group(args.samples, args.output, args.gate, args.config, args.num_samples, args.emit_ellipses)
    if c == "decode":
        return cmd_decode(args.offsets, args.output, args.emit_ellipses)
    if c == "eval":
        return cmd_eval(args.gt, args.hyp, args.config, args.criterion, args.threshold, args.output)
    if c == "simulate":
        return cmd_simulate(args.config, args.output, args.seed, args.samples)
    if c == "sweep":
        return cmd_sweep(args.detections, args.gt, args.alphas, args.betas, args.config, args.output, args.workers)
    return cmd_config(args.dump_defaults, args.check)


if __name__ == "__main__":
    sys.exit(main())
