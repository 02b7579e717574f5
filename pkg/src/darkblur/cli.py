"""Command-line surface: synth, gradcheck, train, infer, stats.

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from .blursynth import FrameSequence, make_pair
from .colorcore import load_image, save_image
from .config import PipelineConfig, load_config
from .errors import ConfigError, DarkblurError, ValidationError
from .kernels.tensorio import save_tensor
from .network import infer_image, train_toy


def derive_seed(master_seed: int, tag: str) -> int:
    """Stable per-item seed so parallel or reordered synthesis agrees."""
    digest = hashlib.blake2b(f"{master_seed}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (2**63)


def _log(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _load_sequence_frames(seq_dir: Path) -> list[Path]:
    return sorted(seq_dir.glob("*.png"))


def cmd_synth(args) -> int:
    cfg = _config_from_args(args)
    in_dir = Path(cfg.input_dir)
    out_dir = Path(cfg.output_dir)
    if not cfg.input_dir or not in_dir.is_dir():
        raise ConfigError(f"input directory {cfg.input_dir!r} does not exist")
    if not cfg.output_dir:
        raise ConfigError("paths.output must point at the output directory")
    seq_dirs = sorted(d for d in in_dir.iterdir() if d.is_dir())
    if not seq_dirs:
        raise ConfigError(f"input directory {in_dir} contains no sequence directories")

    blur_cfg = cfg.blur_config()
    darken_cfg = cfg.darken_config()
    degrade_cfg = cfg.degrade_config()
    window = blur_cfg.window
    for sub in ("low_blur", "gt", "meta"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    n_ok = n_fail = 0
    for seq_dir in seq_dirs:
        frame_paths = _load_sequence_frames(seq_dir)
        if len(frame_paths) < window:
            _log(f"skip {seq_dir.name}: only {len(frame_paths)} frames, need {window}")
            n_fail += 1
            continue
        for start in range(0, len(frame_paths) - window + 1, window):
            pair_id = f"{seq_dir.name}_{start:04d}"
            try:
                frames = tuple(load_image(p) for p in frame_paths[start : start + window])
                seq = FrameSequence(frames)
                result = make_pair(
                    seq, blur_cfg, darken_cfg, degrade_cfg, derive_seed(cfg.seed, pair_id)
                )
            except DarkblurError as exc:
                _log(f"skip {pair_id}: {exc}")
                n_fail += 1
                continue
            save_image(out_dir / "low_blur" / f"{pair_id}.png", result.low_blur)
            save_image(out_dir / "gt" / f"{pair_id}.png", result.gt)
            meta_lines = [f"{k} = {v}" for k, v in result.meta.items()]
            (out_dir / "meta" / f"{pair_id}.txt").write_text("\n".join(meta_lines) + "\n")
            n_ok += 1
            _log(f"pair {pair_id}: ok")
    _log(f"synth done: {n_ok} pairs written, {n_fail} skipped")
    if n_ok == 0:
        _log("all sequences failed")
        return 2
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    from .gradfixtures import run_all  # import here: pulls in the whole network stack

    reports = run_all(args.pattern)
    failed = 0
    for rep in reports:
        print(rep.summary())
        if not rep.passed:
            failed += 1
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# train / infer
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.input_dir:
        raise ConfigError("paths.input must point at a dataset directory")
    if not cfg.output_dir:
        raise ConfigError("paths.output must point at the run directory")
    rows = train_toy(
        cfg.input_dir,
        cfg.net_config(),
        cfg.train_settings(),
        cfg.seed,
        cfg.output_dir,
        resume=args.resume,
    )
    _log(f"train done: {len(rows)} steps, final total loss {rows[-1]['total']:.6f}")
    return 0


def cmd_infer(args) -> int:
    img = load_image(args.image)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    restored, trace = infer_image(img, args.checkpoint)
    out_path = out_dir / f"{Path(args.image).stem}_restored.png"
    save_image(out_path, restored)
    _log(f"wrote {out_path}")
    if args.dump_alpha:
        count = 0
        for s, amap in enumerate(trace.curve_maps):
            if amap is None:
                continue
            for i in range(amap.shape[2]):
                save_tensor(out_dir / f"alpha_s{s}_i{i}.tnsr", amap[:, :, i])
                count += 1
        _log(f"dumped {count} curve parameter maps")
    return 0


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------


def luminance_histogram(image_dir: str | Path, bins: int = 32) -> tuple[np.ndarray, int]:
    """Histogram of per-image mean luminance over every PNG under ``image_dir``."""
    paths = sorted(Path(image_dir).rglob("*.png"))
    if not paths:
        raise ConfigError(f"no PNG files under {image_dir}")
    counts = np.zeros(bins, dtype=np.int64)
    for p in paths:
        mean = float(load_image(p).data.mean())
        idx = min(bins - 1, int(mean * bins))
        counts[idx] += 1
    return counts, len(paths)


def cmd_stats(args) -> int:
    counts, total = luminance_histogram(args.dir)
    bins = len(counts)
    lines_csv = ["bin_lo,bin_hi,count"]
    peak = max(1, int(counts.max()))
    for i, c in enumerate(counts):
        lo, hi = i / bins, (i + 1) / bins
        lines_csv.append(f"{lo:.5f},{hi:.5f},{int(c)}")
        bar = "#" * round(40 * int(c) / peak)
        print(f"{lo:5.3f}-{hi:5.3f} |{bar:<40s}| {int(c)}")
    print(f"total images: {total}, modal bin: {int(np.argmax(counts))}")
    if args.csv:
        Path(args.csv).write_text("\n".join(lines_csv) + "\n")
        _log(f"wrote {args.csv}")
    return 0


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="darkblur",
        description="Low-light blur synthesis, gradient verification, toy training and inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize low-blur/sharp pairs from frame sequences")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="override paths.output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="run finite-difference checks on all registered kernels")
    p.add_argument("pattern", nargs="?", default="*", help="op-name glob, e.g. 'fac*'")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="toy-scale deterministic training")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="restore one image with a checkpoint")
    p.add_argument("image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default="infer_out")
    p.add_argument("--dump-alpha", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("stats", help="mean-luminance histogram over a directory of PNGs")
    p.add_argument("dir")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        _log(f"error: {exc}")
        return 1
    except (DarkblurError, OSError) as exc:
        _log(f"runtime error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
