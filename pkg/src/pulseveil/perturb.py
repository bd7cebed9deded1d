"""The privacy transform: keyed shuffling, blurring, and key management.

Shuffling permutes the 4096 spatial positions of a 64x64 ROI frame (or its
P x P patches), moving all three channels together, so per-frame channel
sums are preserved exactly. The permutation is generated by a pinned,
bit-exact recipe: a SplitMix64 stream drives a Fisher-Yates shuffle with
modulo draws. Modulo bias is negligible at n <= 4096 and accepted in
exchange for cross-implementation determinism.

Blurring is a separable Gaussian with sigma = (k - 1) / 4 and replicate
(edge-clamp) borders, applied after shuffling and keyless.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Clip, KeyPolicy, PermutationKey, PerturbSpec, validate_frame

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

KEYGEN_ALGORITHM = "splitmix64-fisheryates-v1"
ROI_SIDE = 64
ROI_PIXELS = ROI_SIDE * ROI_SIDE


class SplitMix64:
    """The standard SplitMix64 generator; state and outputs are 64-bit."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)


def splitmix64_once(x: int) -> int:
    """First output of a SplitMix64 stream seeded with ``x``."""
    return SplitMix64(x).next_u64()


def _splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """Vectorized SplitMix64: the first ``count`` outputs for ``seed``."""
    with np.errstate(over="ignore"):
        state = (
            np.uint64(seed & MASK64)
            + np.arange(1, count + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
        )
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def keygen(seed: int, n: int) -> PermutationKey:
    """Derive the permutation key for ``seed`` over ``n`` positions.

    Fisher-Yates over identity[0..n): at step i, descending from n-1 to 1,
    swap position i with next_u64() mod (i + 1). Bit-exact across
    implementations of the same recipe.
    """
    if n < 1:
        raise DataError(f"key domain size must be >= 1, got {n}", code="shape-mismatch")
    perm = np.arange(n, dtype=np.int64)
    if n > 1:
        draws = _splitmix64_stream(seed, n - 1)
        view = perm  # mutated in place before PermutationKey freezes it
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = int(draws[step] % np.uint64(i + 1))
            view[i], view[j] = view[j], view[i]
    return PermutationKey(n=n, perm=perm, seed=seed & MASK64, algorithm=KEYGEN_ALGORITHM)


def derive_sample_key(policy: KeyPolicy, sample_index: int, n: int = ROI_PIXELS) -> PermutationKey:
    """Pick the shuffle key for one sample under the given key policy.

    All frames of a sample share the key, so pixel locations stay coherent
    across the whole clip; only the seed choice varies between samples.
    """
    idx = sample_index & MASK64
    if policy.mode == "fixed":
        return keygen(policy.master_seed, n)
    if policy.mode == "pool":
        h = splitmix64_once(idx)
        return keygen((policy.master_seed + (h % policy.pool_size)) & MASK64, n)
    return keygen(splitmix64_once(policy.master_seed ^ idx), n)


def _check_roi_frame(frame: np.ndarray) -> np.ndarray:
    frame = validate_frame(frame)
    if frame.shape[:2] != (ROI_SIDE, ROI_SIDE):
        raise DataError(
            f"expected a {ROI_SIDE}x{ROI_SIDE} ROI frame, got {frame.shape[0]}x{frame.shape[1]}",
            code="size-mismatch",
        )
    return frame


def shuffle_pixels(frame: np.ndarray, key: PermutationKey) -> np.ndarray:
    """Permute the 4096 pixel positions of a 64x64 frame by ``key``.

    Output position i holds input pixel key.perm[i], all channels together.
    """
    frame = _check_roi_frame(frame)
    if key.n != ROI_PIXELS:
        raise DataError(f"key covers {key.n} positions, need {ROI_PIXELS}", code="size-mismatch")
    flat = frame.reshape(ROI_PIXELS, 3)
    return flat[key.perm].reshape(ROI_SIDE, ROI_SIDE, 3)


def unshuffle_pixels(frame: np.ndarray, key: PermutationKey) -> np.ndarray:
    """Exact inverse of :func:`shuffle_pixels` for the same key."""
    frame = _check_roi_frame(frame)
    if key.n != ROI_PIXELS:
        raise DataError(f"key covers {key.n} positions, need {ROI_PIXELS}", code="size-mismatch")
    flat = frame.reshape(ROI_PIXELS, 3)
    out = np.empty_like(flat)
    out[key.perm] = flat
    return out.reshape(ROI_SIDE, ROI_SIDE, 3)


def _patch_grid(frame: np.ndarray, p: int) -> np.ndarray:
    """View a (64, 64, 3) frame as (n_patches, p, p, 3) in row-major patch order."""
    g = ROI_SIDE // p
    return frame.reshape(g, p, g, p, 3).transpose(0, 2, 1, 3, 4).reshape(g * g, p, p, 3)


def _from_patch_grid(patches: np.ndarray, p: int) -> np.ndarray:
    g = ROI_SIDE // p
    return patches.reshape(g, g, p, p, 3).transpose(0, 2, 1, 3, 4).reshape(ROI_SIDE, ROI_SIDE, 3)


def shuffle_patches(frame: np.ndarray, p: int, key: PermutationKey) -> np.ndarray:
    """Permute non-overlapping p x p patches as atomic blocks."""
    frame = _check_roi_frame(frame)
    if p < 1 or ROI_SIDE % p != 0:
        raise DataError(f"patch size must divide {ROI_SIDE}, got {p}", code="bad-patch-size")
    n = (ROI_SIDE // p) ** 2
    if key.n != n:
        raise DataError(f"key covers {key.n} positions, need {n} patches", code="size-mismatch")
    return _from_patch_grid(_patch_grid(frame, p)[key.perm], p)


def unshuffle_patches(frame: np.ndarray, p: int, key: PermutationKey) -> np.ndarray:
    """Exact inverse of :func:`shuffle_patches` for the same key."""
    frame = _check_roi_frame(frame)
    if p < 1 or ROI_SIDE % p != 0:
        raise DataError(f"patch size must divide {ROI_SIDE}, got {p}", code="bad-patch-size")
    n = (ROI_SIDE // p) ** 2
    if key.n != n:
        raise DataError(f"key covers {key.n} positions, need {n} patches", code="size-mismatch")
    patches = _patch_grid(frame, p)
    out = np.empty_like(patches)
    out[key.perm] = patches
    return _from_patch_grid(out, p)


def gaussian_kernel1d(k: int) -> np.ndarray:
    """Normalized 1-D Gaussian taps of width k with sigma = (k - 1) / 4."""
    if k < 3 or k % 2 == 0:
        raise DataError(f"blur kernel must be odd and >= 3, got {k}", code="bad-kernel")
    sigma = (k - 1) / 4.0
    r = (k - 1) // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _blur_axis(data: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    """Correlate one spatial axis with taps ``w`` under replicate padding."""
    r = (len(w) - 1) // 2
    pad = [(0, 0)] * data.ndim
    pad[axis] = (r, r)
    padded = np.pad(data, pad, mode="edge")
    out = np.zeros_like(data)
    index = [slice(None)] * data.ndim
    n = data.shape[axis]
    for tap, weight in enumerate(w):
        index[axis] = slice(tap, tap + n)
        out += weight * padded[tuple(index)]
    return out


def _blur_block(data: np.ndarray, k: int, h_axis: int, w_axis: int) -> np.ndarray:
    w = gaussian_kernel1d(k)
    smoothed = _blur_axis(_blur_axis(data.astype(np.float64), w, h_axis), w, w_axis)
    return np.clip(np.rint(smoothed), 0, 255).astype(np.uint8)


def gaussian_blur(frame: np.ndarray, k: int) -> np.ndarray:
    """Blur one frame with a k x k separable Gaussian, replicate borders.

    Computed in float64 and rounded half-to-even back to uint8.
    """
    frame = validate_frame(frame)
    return _blur_block(frame, k, h_axis=0, w_axis=1)


def blur_clip(clip: Clip, k: int) -> Clip:
    """Apply :func:`gaussian_blur` to every frame of a clip."""
    return clip.with_data(_blur_block(clip.data, k, h_axis=1, w_axis=2))


def perturb_clip(clip: Clip, spec: PerturbSpec, key: PermutationKey | None = None) -> Clip:
    """Apply the ROI-family perturbation to a whole, already ROI-assembled clip.

    One key shuffles every frame (pixel- or patch-level per the spec), then
    the optional blur runs. Method "roi" is a passthrough. Baseline methods
    (noise, bdct, le, instahide) live in :mod:`pulseveil.baselines`.
    """
    if spec.method not in ("roi", "roi_sh", "roi_sh_b", "roi_sh_patch"):
        raise DataError(
            f"perturb_clip handles ROI-family methods only, got {spec.method!r}",
            code="shape-mismatch",
        )
    if clip.data.dtype != np.uint8 or (clip.height, clip.width) != (ROI_SIDE, ROI_SIDE):
        raise DataError(
            f"clip must be uint8 {ROI_SIDE}x{ROI_SIDE}, got {clip.data.dtype} "
            f"{clip.height}x{clip.width}",
            code="size-mismatch",
        )
    if spec.method == "roi":
        return clip

    if key is None:
        raise DataError("shuffling methods need a key", code="size-mismatch")
    p = spec.patch_size if spec.method == "roi_sh_patch" else 1
    if p == 1:
        if key.n != ROI_PIXELS:
            raise DataError(f"key covers {key.n} positions, need {ROI_PIXELS}", code="size-mismatch")
        flat = clip.data.reshape(len(clip), ROI_PIXELS, 3)
        data = flat[:, key.perm, :].reshape(clip.data.shape)
    else:
        data = np.stack([shuffle_patches(f, p, key) for f in clip.data])

    out = clip.with_data(data)
    blur_k = spec.blur_kernel
    if spec.method == "roi_sh_b" and blur_k is None:
        blur_k = 3
    if blur_k is not None:
        out = blur_clip(out, blur_k)
    return out


def log10_keyspace(n: int) -> float:
    """log10(n!) by exact summation of log10 k, k = 2..n."""
    if n < 1:
        raise DataError(f"key domain size must be >= 1, got {n}", code="shape-mismatch")
    if n == 1:
        return 0.0
    return float(np.log10(np.arange(2, n + 1, dtype=np.float64)).sum())


def patch_keyspace(p: int) -> float:
    """log10 of the patch-shuffle key space, (64/P)^2 factorial."""
    if p < 1 or ROI_SIDE % p != 0:
        raise DataError(f"patch size must divide {ROI_SIDE}, got {p}", code="bad-patch-size")
    return log10_keyspace((ROI_SIDE // p) ** 2)


def save_key(key: PermutationKey, path: str | Path, include_perm: bool = False) -> None:
    """Write a key file; seeded keys store the compact seed recipe by default."""
    doc: dict = {"version": 1, "n": key.n}
    if key.seed is not None and key.algorithm == KEYGEN_ALGORITHM and not include_perm:
        doc["seed"] = str(key.seed)
        doc["algorithm"] = key.algorithm
    else:
        doc["perm"] = [int(v) for v in key.perm]
    Path(path).write_text(json.dumps(doc) + "\n")


def load_key(path: str | Path) -> PermutationKey:
    """Read a key file written by :func:`save_key` (seed or explicit form)."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"key file not found: {path}", code="missing-file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"key file {path} is not valid JSON: {exc}", code="decode-failure") from None
    if doc.get("version") != 1:
        raise DataError(f"unsupported key file version {doc.get('version')}", code="decode-failure")
    n = int(doc["n"])
    if "perm" in doc:
        return PermutationKey(n=n, perm=np.asarray(doc["perm"], dtype=np.int64))
    algorithm = doc.get("algorithm")
    if algorithm != KEYGEN_ALGORITHM:
        raise DataError(f"unknown key algorithm {algorithm!r}", code="decode-failure")
    return keygen(int(doc["seed"]), n)


def describe_keyspace(n: int) -> str:
    return f"log10({n}!) = {log10_keyspace(n):.4f}"


def stirling_log10_factorial(n: int) -> float:
    """Stirling cross-check for log10(n!), used only by diagnostics/tests."""
    if n <= 1:
        return 0.0
    return (n * math.log(n) - n + 0.5 * math.log(2 * math.pi * n)) / math.log(10)
