"""Corpus-level runs: window, estimate, aggregate, and compare methods.

All functions here are pure given their inputs, and parallel execution over
videos never changes the result: per-video work is independent and the
aggregation order is fixed by sorted video id.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import baselines
from .errors import DataError
from .estimators import get_estimator
from .evaluate import HR_BAND_HZ, estimate_hr, hr_metrics
from .ingest import (
    WINDOW_FRAMES,
    WINDOW_STRIDE,
    aligned_gt_for_video,
    list_videos,
    load_frames,
    load_video,
)
from .model import Clip, HrReport, KeyPolicy, PermutationKey, PerturbSpec, PpgTrace
from .perturb import derive_sample_key, perturb_clip, splitmix64_once

BASELINE_METHODS = ("noise", "bdct", "le", "instahide")

METHOD_ALIASES = {
    "roi": ("roi", 1),
    "roi+sh": ("roi_sh", 1),
    "roi+sh+b": ("roi_sh_b", 1),
    "noise": ("noise", 1),
    "bdct": ("bdct", 1),
    "le": ("le", 1),
    "instahide": ("instahide", 1),
}


def parse_method(name: str) -> tuple[str, int]:
    """Map a CLI method name ("roi+sh+b", "patch:4", ...) to (method, patch)."""
    if name in METHOD_ALIASES:
        return METHOD_ALIASES[name]
    if name.startswith("patch:"):
        try:
            p = int(name.split(":", 1)[1])
        except ValueError:
            raise DataError(f"bad patch size in {name!r}", code="bad-patch-size") from None
        return "roi_sh_patch", p
    raise DataError(f"unknown method {name!r}", code="decode-failure")


def clip_windows(clip: Clip, window: int = WINDOW_FRAMES, stride: int = WINDOW_STRIDE) -> list[Clip]:
    t = len(clip)
    if t < window:
        raise DataError(f"clip of {t} frames is shorter than window {window}", code="clip-too-short")
    count = (t - window) // stride + 1
    return [
        Clip(clip.data[i * stride : i * stride + window], fps=clip.fps,
             source_id=clip.source_id, window_index=i)
        for i in range(count)
    ]


def trace_windows(trace: PpgTrace, window: int, stride: int) -> list[PpgTrace]:
    n = len(trace)
    if n < window:
        raise DataError(f"trace of {n} samples is shorter than window {window}", code="clip-too-short")
    count = (n - window) // stride + 1
    return [
        PpgTrace(samples=trace.samples[i * stride : i * stride + window], fs=trace.fs,
                 t0=i * stride / trace.fs)
        for i in range(count)
    ]


def video_hr(
    clip: Clip,
    estimator: str = "chrom",
    window: int = WINDOW_FRAMES,
    stride: int = WINDOW_STRIDE,
    band: tuple[float, float] = HR_BAND_HZ,
) -> tuple[float, list[float]]:
    """Per-window HR estimates for one clip and their unweighted mean."""
    est = get_estimator(estimator)
    per_window = [estimate_hr(est(w), band) for w in clip_windows(clip, window, stride)]
    return float(np.mean(per_window)), per_window


def gt_video_hr(
    gt: PpgTrace,
    window: int = WINDOW_FRAMES,
    stride: int = WINDOW_STRIDE,
    band: tuple[float, float] = HR_BAND_HZ,
) -> tuple[float, list[float]]:
    """Ground-truth HR from the aligned PPG, through the same Welch pipeline."""
    per_window = [estimate_hr(w, band) for w in trace_windows(gt, window, stride)]
    return float(np.mean(per_window)), per_window


def evaluate_corpus(
    pred_root: str | Path,
    gt_root: str | Path,
    estimator: str = "chrom",
    window: int = WINDOW_FRAMES,
    stride: int = WINDOW_STRIDE,
    band: tuple[float, float] = HR_BAND_HZ,
    jobs: int = 1,
) -> HrReport:
    """Estimate HR on every perturbed video and score against ground truth."""
    pred_ids = {p.name for p in list_videos(pred_root)}
    gt_ids = {p.name for p in list_videos(gt_root)}
    ids = sorted(pred_ids & gt_ids)
    if not ids:
        raise DataError(
            f"no video ids shared between {pred_root} and {gt_root}", code="missing-dir"
        )

    def one(vid: str) -> dict:
        entry = load_video(Path(pred_root) / vid)
        clip = load_frames(entry.frames_dir, fps=entry.fps, source_id=vid)
        pred_hr, _ = video_hr(clip, estimator, window, stride, band)
        gt_trace, _, _ = aligned_gt_for_video(Path(gt_root) / vid)
        gt_hr, _ = gt_video_hr(gt_trace, window, stride, band)
        return {"id": vid, "pred_hr": pred_hr, "gt_hr": gt_hr}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = {r["id"]: r for r in pool.map(one, ids)}
    else:
        rows = {vid: one(vid) for vid in ids}

    per_video = [rows[vid] for vid in ids]
    mae, rmse, r = hr_metrics(
        np.asarray([row["pred_hr"] for row in per_video]),
        np.asarray([row["gt_hr"] for row in per_video]),
    )
    return HrReport(
        per_video=per_video,
        mae=mae,
        rmse=rmse,
        pearson_r=r,
        config={
            "estimator": estimator,
            "window": window,
            "stride": stride,
            "band": list(band),
        },
    )


def apply_method(
    clip: Clip,
    method_name: str,
    master_seed: int,
    sample_index: int,
    partner: Clip | None = None,
    blur_k: int = 3,
    noise_var: float = baselines.NOISE_VARIANCE,
) -> Clip:
    """Apply any perturbation method to one video clip, keyed per sample.

    Every per-sample secret derives from (master_seed, sample_index) via the
    unbounded key policy, so the whole comparison is replayable from one
    seed. InstaHide (k = 2) mixes in the ``partner`` clip at equal weight.
    """
    method, patch = parse_method(method_name)
    policy = KeyPolicy(mode="unbounded", master_seed=master_seed)
    if method in ("roi", "roi_sh", "roi_sh_b", "roi_sh_patch"):
        n = 4096 if patch == 1 else (64 // patch) ** 2
        spec_method = "roi_sh" if (method == "roi_sh_patch" and patch == 1) else method
        key: PermutationKey | None = None
        if spec_method != "roi":
            key = derive_sample_key(policy, sample_index, n=n)
        blur = blur_k if method in ("roi_sh_b", "roi_sh_patch") else None
        spec = PerturbSpec(method=spec_method, patch_size=patch, blur_kernel=blur)
        return perturb_clip(clip, spec, key)
    if method == "noise":
        seed = splitmix64_once(master_seed ^ sample_index)
        return baselines.add_gaussian_noise(clip, variance=noise_var, seed=seed)
    if method == "bdct":
        key = derive_sample_key(policy, sample_index, n=64)
        return baselines.bdct_mask_clip(clip, key)
    if method == "le":
        km = baselines.LeKeyMaterial.from_seed(splitmix64_once(master_seed ^ sample_index))
        return baselines.le_encrypt_clip(clip, km)
    if method == "instahide":
        if partner is None:
            raise DataError("instahide needs a partner clip to mix with", code="shape-mismatch")
        t = min(len(clip), len(partner))
        a = Clip(clip.data[:t], fps=clip.fps, source_id=clip.source_id)
        b = Clip(partner.data[:t], fps=partner.fps, source_id=partner.source_id)
        mixed = baselines.instahide_mix(a, b, sign_seed=splitmix64_once(master_seed ^ sample_index))
        return baselines.instahide_to_u8(mixed)
    raise DataError(f"unknown method {method!r}", code="decode-failure")


def benchmark_methods(
    root: str | Path,
    methods: list[str],
    estimator: str = "chrom",
    master_seed: int = 0,
    window: int = WINDOW_FRAMES,
    stride: int = WINDOW_STRIDE,
    band: tuple[float, float] = HR_BAND_HZ,
    blur_k: int = 3,
    noise_var: float = baselines.NOISE_VARIANCE,
    jobs: int = 1,
) -> dict:
    """Run several perturbation methods over one corpus and compare HR MAE.

    InstaHide is applied at estimation time here (not just during training),
    which the emitted report records as a deviation from its original
    training-only usage.
    """
    dirs = list_videos(root)
    if not dirs:
        raise DataError(f"no videos under {root}", code="missing-dir")
    ids = [p.name for p in dirs]

    def load_one(i: int) -> tuple[Clip, float, list[float]]:
        entry = load_video(dirs[i])
        clip = load_frames(entry.frames_dir, fps=entry.fps, source_id=ids[i])
        gt_trace, _, _ = aligned_gt_for_video(dirs[i])
        hr, per_window = gt_video_hr(gt_trace, window, stride, band)
        return clip, hr, per_window

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            loaded = list(pool.map(load_one, range(len(ids))))
    else:
        loaded = [load_one(i) for i in range(len(ids))]
    clips = [item[0] for item in loaded]
    gt_hrs = [item[1] for item in loaded]

    def score(args: tuple[str, int]) -> tuple[str, int, float]:
        method, i = args
        partner = clips[(i + 1) % len(clips)] if method == "instahide" else None
        perturbed = apply_method(
            clips[i], method, master_seed, i, partner=partner,
            blur_k=blur_k, noise_var=noise_var,
        )
        hr, _ = video_hr(perturbed, estimator, window, stride, band)
        return method, i, hr

    tasks = [(m, i) for m in methods for i in range(len(ids))]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(score, tasks))
    else:
        results = [score(t) for t in tasks]

    by_method: dict[str, dict[int, float]] = {m: {} for m in methods}
    for method, i, hr in results:
        by_method[method][i] = hr

    gt_arr = np.asarray(gt_hrs)
    report: dict = {
        "config": {
            "estimator": estimator,
            "master_seed": master_seed,
            "window": window,
            "stride": stride,
            "band": list(band),
            "blur_k": blur_k,
            "noise_var": noise_var,
            "key_policy": "unbounded",
            "notes": "instahide applied at estimation time, not only during training",
        },
        "gt": {vid: hr for vid, hr in zip(ids, gt_hrs)},
        "methods": {},
    }
    for method in methods:
        pred = np.asarray([by_method[method][i] for i in range(len(ids))])
        mae, rmse, r = hr_metrics(pred, gt_arr)
        report["methods"][method] = {
            "per_video": [
                {"id": vid, "pred_hr": float(p), "gt_hr": float(g)}
                for vid, p, g in zip(ids, pred, gt_arr)
            ],
            "mae": mae,
            "rmse": rmse,
            "pearson_r": r,
        }
    return report
