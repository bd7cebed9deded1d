"""Batch command-line surface for reproducible perturbation runs.

Every artifact-producing subcommand writes a run.json next to its output
capturing the fully resolved configuration and seeds; `replay` re-executes
a run.json bit-exactly. Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric
degeneracy.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    LeKeyMaterial,
    add_gaussian_noise,
    bdct_mask_clip,
    instahide_mix,
    instahide_to_u8,
    le_encrypt_clip,
)
from .clipio import read_clip, write_clip
from .errors import DataError, PulseVeilError
from .estimators import get_estimator
from .evaluate import HR_BAND_HZ, hr_peak
from .ingest import (
    WINDOW_FRAMES,
    WINDOW_STRIDE,
    load_frames,
    load_landmarks,
    load_ppg,
    load_video,
    write_video_dir,
)
from .model import Clip, KeyPolicy, PerturbSpec, PpgTrace
from .perturb import (
    derive_sample_key,
    keygen,
    load_key,
    log10_keyspace,
    patch_keyspace,
    perturb_clip,
    save_key,
    splitmix64_once,
)
from .pipeline import benchmark_methods, evaluate_corpus, parse_method
from .roi import roi_clip
from .synth import synthesize_clip


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": {"code": "usage", "message": message}}), file=sys.stderr)
        raise SystemExit(2)


def _parse_band(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise DataError(f"band must look like 0.7:4.0, got {text!r}", code="decode-failure") from None


def _run_json_path(out: Path) -> Path:
    return out / "run.json" if out.is_dir() else out.with_suffix(".run.json")


def _write_run_json(out: Path, command: str, params: dict) -> None:
    doc = {"tool": "pulseveil", "version": __version__, "command": command, "params": params}
    _run_json_path(out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_keygen(args) -> int:
    key = keygen(args.seed, args.n)
    out = Path(args.out)
    save_key(key, out, include_perm=args.explicit)
    _write_run_json(out, "keygen", {"seed": args.seed, "n": args.n,
                                    "explicit": args.explicit, "out": str(out)})
    return 0


def cmd_synth(args) -> int:
    clip, gt = synthesize_clip(
        hr=args.hr,
        fps=args.fps,
        frames=args.frames,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        source_id=args.id or Path(args.out).name,
    )
    out = Path(args.out)
    write_video_dir(out, clip, gt)
    _write_run_json(out, "synth", {
        "hr": args.hr, "fps": args.fps, "frames": args.frames,
        "noise_sigma": args.noise_sigma, "seed": args.seed,
        "id": args.id, "out": str(out),
    })
    return 0


def _resolve_key(args, n: int):
    if args.key:
        key = load_key(args.key)
        if key.n != n:
            raise DataError(f"key file covers {key.n} positions, need {n}", code="size-mismatch")
        return key
    if args.master_seed is None:
        raise DataError("need --key or --master-seed for keyed methods", code="missing-file")
    policy_name = args.key_policy or "fixed"
    if policy_name.startswith("pool:"):
        policy = KeyPolicy(mode="pool", master_seed=args.master_seed,
                           pool_size=int(policy_name.split(":", 1)[1]))
    else:
        policy = KeyPolicy(mode=policy_name, master_seed=args.master_seed)
    return derive_sample_key(policy, args.sample_index, n=n)


def cmd_perturb(args) -> int:
    in_dir = Path(args.in_dir)
    out = Path(args.out)
    method, patch = parse_method(args.method)
    entry = load_video(in_dir, fps=args.fps)

    out.mkdir(parents=True, exist_ok=True)
    for extra in ("ppg.csv", "manifest.json"):
        src = in_dir / extra
        if src.exists():
            shutil.copyfile(src, out / extra)

    params = {
        "in": str(in_dir), "out": str(out), "method": args.method,
        "landmarks": args.landmarks, "key": args.key,
        "master_seed": args.master_seed, "key_policy": args.key_policy,
        "sample_index": args.sample_index, "blur_k": args.blur_k,
        "seed": args.seed, "noise_var": args.noise_var,
        "mix_with": args.mix_with, "emit_clip": args.emit_clip, "fps": args.fps,
    }

    if method == "roi" and not args.landmarks:
        # Passthrough: preserve the input frames byte for byte.
        frames_out = out / "frames"
        frames_out.mkdir(exist_ok=True)
        for src in sorted(entry.frames_dir.iterdir()):
            if src.is_file():
                shutil.copyfile(src, frames_out / src.name)
        if args.emit_clip:
            clip = load_frames(entry.frames_dir, fps=entry.fps, source_id=entry.video_id)
            write_clip(out / "clip.rppgclip", clip, gt_ppg="ppg.csv")
        _write_run_json(out, "perturb", params)
        return 0

    clip = load_frames(entry.frames_dir, fps=entry.fps, source_id=entry.video_id)
    if args.landmarks:
        clip = roi_clip(clip, load_landmarks(args.landmarks, expected_frames=len(clip)))

    key_file: str | None = None
    if method in ("roi_sh", "roi_sh_b", "roi_sh_patch"):
        n = 4096 if patch == 1 else (64 // patch) ** 2
        key = _resolve_key(args, n)
        blur = args.blur_k
        if method in ("roi_sh_b", "roi_sh_patch") and blur is None:
            blur = 3
        if blur == 0:
            blur = None
        spec_method = "roi_sh" if (method == "roi_sh_patch" and patch == 1) else method
        spec = PerturbSpec(method=spec_method, patch_size=patch, blur_kernel=blur)
        result = perturb_clip(clip, spec, key)
        save_key(key, out / "key.json")
        key_file = "key.json"
    elif method == "roi":
        result = clip
    elif method == "noise":
        result = add_gaussian_noise(clip, variance=args.noise_var, seed=args.seed)
    elif method == "bdct":
        result = bdct_mask_clip(clip, _resolve_key(args, 64))
    elif method == "le":
        result = le_encrypt_clip(clip, LeKeyMaterial.from_seed(args.seed))
    elif method == "instahide":
        if not args.mix_with:
            raise DataError("instahide needs --mix-with VIDEO_DIR", code="missing-file")
        partner_entry = load_video(Path(args.mix_with))
        partner = load_frames(partner_entry.frames_dir, fps=partner_entry.fps)
        t = min(len(clip), len(partner))
        result = instahide_mix(
            Clip(clip.data[:t], fps=clip.fps, source_id=clip.source_id),
            Clip(partner.data[:t], fps=partner.fps, source_id=partner.source_id),
            sign_seed=args.seed,
        )
    else:
        raise DataError(f"unknown method {args.method!r}", code="decode-failure")

    if result.data.dtype == np.uint8:
        frames_out = out / "frames"
        if frames_out.exists():
            shutil.rmtree(frames_out)
        write_video_dir(out, result)
        if args.emit_clip:
            write_clip(out / "clip.rppgclip", result, key_file=key_file, gt_ppg="ppg.csv")
    else:
        # Real-valued output has no faithful PNG form; the binary clip is the artifact.
        write_clip(out / "clip.rppgclip", result, key_file=key_file, gt_ppg="ppg.csv")
    _write_run_json(out, "perturb", params)
    return 0


def _load_clip_any(path: Path, fps: float | None = None) -> Clip:
    if path.is_file() and path.suffix == ".rppgclip":
        clip, _ = read_clip(path)
        if clip.data.dtype == np.float32:
            clip = instahide_to_u8(clip)
        return clip
    entry = load_video(path, fps=fps)
    return load_frames(entry.frames_dir, fps=entry.fps, source_id=entry.video_id)


def cmd_estimate(args) -> int:
    clip = _load_clip_any(Path(args.in_path), fps=args.fps)
    est = get_estimator(args.method)
    trace = est(clip)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        fh.write("t_s,value\n")
        for t, v in zip(trace.times(), trace.samples):
            fh.write(f"{t:.9g},{v:.12g}\n")
    _write_run_json(out, "estimate", {
        "in": str(args.in_path), "method": args.method,
        "out": str(out), "fps": args.fps,
    })
    return 0


def cmd_hr(args) -> int:
    trace = load_ppg(args.signal)
    if args.fs:
        trace = PpgTrace(samples=trace.samples, fs=args.fs, t0=trace.t0)
    band = _parse_band(args.band)
    hr, low_confidence = hr_peak(trace, band)
    print(json.dumps({"hr_bpm": hr, "low_confidence": low_confidence}))
    return 0


def cmd_evaluate(args) -> int:
    report = evaluate_corpus(
        pred_root=args.pred_root,
        gt_root=args.gt_root,
        estimator=args.method,
        window=args.window,
        stride=args.stride,
        band=_parse_band(args.band),
        jobs=args.jobs,
    )
    out = Path(args.report)
    out.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    _write_run_json(out, "evaluate", {
        "pred_root": str(args.pred_root), "gt_root": str(args.gt_root),
        "method": args.method, "window": args.window, "stride": args.stride,
        "band": args.band, "report": str(out),
    })
    return 0


def cmd_benchmark(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    report = benchmark_methods(
        root=args.root,
        methods=methods,
        estimator=args.estimator,
        master_seed=args.master_seed,
        window=args.window,
        stride=args.stride,
        band=_parse_band(args.band),
        blur_k=args.blur_k,
        noise_var=args.noise_var,
        jobs=args.jobs,
    )
    report["mae_ranking"] = sorted(
        ((m, report["methods"][m]["mae"]) for m in methods), key=lambda kv: kv[1]
    )
    out = Path(args.report)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_run_json(out, "benchmark", {
        "root": str(args.root), "methods": args.methods, "estimator": args.estimator,
        "master_seed": args.master_seed, "window": args.window, "stride": args.stride,
        "band": args.band, "blur_k": args.blur_k, "noise_var": args.noise_var,
        "report": str(out),
    })
    return 0


def cmd_keyspace(args) -> int:
    if args.patch:
        value = patch_keyspace(args.patch)
    elif args.n:
        value = log10_keyspace(args.n)
    else:
        raise DataError("keyspace needs --n or --patch", code="decode-failure")
    print(f"{value:.4f}")
    return 0


def cmd_replay(args) -> int:
    doc = json.loads(Path(args.run).read_text())
    command = doc.get("command")
    params = doc.get("params", {})
    argv: list[str] = [command]

    def put(flag: str, value) -> None:
        if value is not None:
            argv.extend([flag, str(value)])

    if command == "keygen":
        put("--seed", params["seed"])
        put("--n", params["n"])
        put("--out", args.out or params["out"])
        if params.get("explicit"):
            argv.append("--explicit")
    elif command == "synth":
        put("--hr", params["hr"])
        put("--fps", params["fps"])
        put("--frames", params["frames"])
        put("--noise-sigma", params["noise_sigma"])
        put("--seed", params["seed"])
        put("--id", params.get("id"))
        put("--out", args.out or params["out"])
    elif command == "perturb":
        put("--in", params["in"])
        put("--method", params["method"])
        put("--landmarks", params.get("landmarks"))
        put("--key", params.get("key"))
        put("--master-seed", params.get("master_seed"))
        put("--key-policy", params.get("key_policy"))
        put("--sample-index", params.get("sample_index"))
        put("--blur-k", params.get("blur_k"))
        put("--seed", params.get("seed"))
        put("--noise-var", params.get("noise_var"))
        put("--mix-with", params.get("mix_with"))
        put("--fps", params.get("fps"))
        if params.get("emit_clip"):
            argv.append("--emit-clip")
        put("--out", args.out or params["out"])
    elif command == "estimate":
        put("--in", params["in"])
        put("--method", params["method"])
        put("--fps", params.get("fps"))
        put("--out", args.out or params["out"])
    elif command == "evaluate":
        put("--pred-root", params["pred_root"])
        put("--gt-root", params["gt_root"])
        put("--method", params["method"])
        put("--window", params["window"])
        put("--stride", params["stride"])
        put("--band", params["band"])
        put("--jobs", args.jobs)
        put("--report", args.out or params["report"])
    elif command == "benchmark":
        put("--root", params["root"])
        put("--methods", params["methods"])
        put("--estimator", params["estimator"])
        put("--master-seed", params["master_seed"])
        put("--window", params["window"])
        put("--stride", params["stride"])
        put("--band", params["band"])
        put("--blur-k", params["blur_k"])
        put("--noise-var", params["noise_var"])
        put("--jobs", args.jobs)
        put("--report", args.out or params["report"])
    else:
        raise DataError(f"cannot replay command {command!r}", code="decode-failure")
    return main(argv)


def build_parser() -> _Parser:
    parser = _Parser(prog="pulseveil", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="derive and store a shuffle key")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.add_argument("--explicit", action="store_true", help="store the full permutation")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("synth", help="render a synthetic pulse video directory")
    p.add_argument("--hr", type=float, required=True)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--id", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("perturb", help="apply a privacy perturbation to a video")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--method", required=True,
                   help="roi | roi+sh | roi+sh+b | patch:P | noise | bdct | le | instahide")
    p.add_argument("--landmarks", default=None)
    p.add_argument("--key", default=None, help="key JSON file")
    p.add_argument("--master-seed", type=int, default=None)
    p.add_argument("--key-policy", default=None, help="fixed | pool:M | unbounded")
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--blur-k", type=int, default=None, help="odd kernel width; 0 disables blur")
    p.add_argument("--seed", type=int, default=0, help="seed for noise/le/instahide")
    p.add_argument("--noise-var", type=float, default=0.5)
    p.add_argument("--mix-with", default=None, help="partner video dir for instahide")
    p.add_argument("--emit-clip", action="store_true", help="also write clip.rppgclip")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("estimate", help="run a classical estimator over a video")
    p.add_argument("--in", dest="in_path", required=True, help="video dir or .rppgclip file")
    p.add_argument("--method", default="chrom", choices=["chrom", "pos"])
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--out", required=True, help="output signal CSV")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("hr", help="heart rate of a signal CSV")
    p.add_argument("--signal", required=True)
    p.add_argument("--fs", type=float, default=None)
    p.add_argument("--band", default="0.7:4.0")
    p.set_defaults(func=cmd_hr)

    p = sub.add_parser("evaluate", help="score perturbed videos against ground truth")
    p.add_argument("--pred-root", required=True)
    p.add_argument("--gt-root", required=True)
    p.add_argument("--method", default="chrom", choices=["chrom", "pos"])
    p.add_argument("--window", type=int, default=WINDOW_FRAMES)
    p.add_argument("--stride", type=int, default=WINDOW_STRIDE)
    p.add_argument("--band", default="0.7:4.0")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="compare perturbation methods on one corpus")
    p.add_argument("--root", required=True)
    p.add_argument("--methods", default="roi+sh+b,noise,bdct,le,instahide")
    p.add_argument("--estimator", default="chrom", choices=["chrom", "pos"])
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--window", type=int, default=WINDOW_FRAMES)
    p.add_argument("--stride", type=int, default=WINDOW_STRIDE)
    p.add_argument("--band", default="0.7:4.0")
    p.add_argument("--blur-k", type=int, default=3)
    p.add_argument("--noise-var", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("keyspace", help="print log10(n!) for a key domain")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--patch", type=int, default=None)
    p.set_defaults(func=cmd_keyspace)

    p = sub.add_parser("replay", help="re-execute a stored run.json")
    p.add_argument("--run", required=True)
    p.add_argument("--out", default=None, help="override the original output location")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PulseVeilError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - defensive
        print(json.dumps({"error": {"code": "internal", "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
