"""Shared domain types and their invariants.

Frames are plain numpy arrays of shape (H, W, 3): row-major, channel-last,
R,G,B order, dtype uint8. That pixel-order convention is normative for the
whole package; every permutation and file format depends on it. The types
below wrap frames with the metadata the pipeline needs (frame rate, keys,
signal sampling) and validate their invariants on construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DataError, NumericError

RGB_CHANNELS = 3

# Landmark convention: 0-indexed iBUG-68 (jaw 0-16, brows 17-26, nose 27-35,
# eyes 36-47, mouth 48-67).
LANDMARK_COUNT = 68

PERTURB_METHODS = (
    "roi",
    "roi_sh",
    "roi_sh_b",
    "roi_sh_patch",
    "noise",
    "bdct",
    "le",
    "instahide",
)


def validate_frame(frame: np.ndarray) -> np.ndarray:
    """Check that ``frame`` is a (H, W, 3) uint8 array with H, W >= 1."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != RGB_CHANNELS:
        raise DataError(
            f"frame must have shape (H, W, 3), got {frame.shape}", code="shape-mismatch"
        )
    if frame.shape[0] < 1 or frame.shape[1] < 1:
        raise DataError("frame has no pixels", code="empty-input")
    if frame.dtype != np.uint8:
        raise DataError(f"frame dtype must be uint8, got {frame.dtype}", code="shape-mismatch")
    return frame


def make_frame(height: int, width: int, data: Sequence[int] | np.ndarray) -> np.ndarray:
    """Build a (height, width, 3) uint8 frame from flat row-major intensities."""
    flat = np.asarray(data)
    if flat.size != height * width * RGB_CHANNELS:
        raise DataError(
            f"frame data has {flat.size} values, expected "
            f"{height}x{width}x{RGB_CHANNELS} = {height * width * RGB_CHANNELS}",
            code="shape-mismatch",
        )
    if flat.size and (np.min(flat) < 0 or np.max(flat) > 255):
        raise DataError("frame intensities must lie in [0, 255]", code="shape-mismatch")
    return validate_frame(flat.reshape(height, width, RGB_CHANNELS).astype(np.uint8))


@dataclass(frozen=True)
class Clip:
    """An ordered stack of same-shaped frames plus frame-rate metadata.

    ``data`` has shape (T, H, W, 3) and dtype uint8, or float32 for
    real-valued perturbed clips (InstaHide output). Instances are immutable:
    the pixel buffer is marked read-only so clips can be shared freely
    between workers.
    """

    data: np.ndarray
    fps: float
    source_id: str = ""
    window_index: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 4 or data.shape[3] != RGB_CHANNELS:
            raise DataError(
                f"clip must have shape (T, H, W, 3), got {data.shape}", code="shape-mismatch"
            )
        if data.shape[0] < 1:
            raise DataError("clip has no frames", code="empty-clip")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise DataError("clip frames have no pixels", code="shape-mismatch")
        if data.dtype not in (np.uint8, np.float32):
            raise DataError(
                f"clip dtype must be uint8 or float32, got {data.dtype}", code="shape-mismatch"
            )
        if data.dtype == np.float32 and not np.all(np.isfinite(data)):
            raise DataError("float clip contains non-finite values", code="shape-mismatch")
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}", code="non-positive-fps")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def frame(self, i: int) -> np.ndarray:
        return self.data[i]

    def with_data(self, data: np.ndarray) -> "Clip":
        return replace(self, data=data)


def clip_from_frames(
    frames: Sequence[np.ndarray],
    fps: float,
    source_id: str = "",
    window_index: int | None = None,
) -> Clip:
    """Stack individual frames into a Clip, rejecting mixed shapes."""
    if len(frames) == 0:
        raise DataError("clip has no frames", code="empty-clip")
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DataError(f"frames have mixed shapes: {sorted(shapes)}", code="shape-mismatch")
    for f in frames:
        validate_frame(f)
    return Clip(np.stack(frames), fps=fps, source_id=source_id, window_index=window_index)


def validate_clip(clip: Clip) -> Clip:
    """Re-check every Clip invariant; returns the clip unchanged if valid."""
    if not isinstance(clip, Clip):
        raise DataError(f"expected Clip, got {type(clip).__name__}", code="shape-mismatch")
    # Construction already validates; re-run for clips whose buffer may have
    # been swapped out from under the dataclass.
    Clip(clip.data, fps=clip.fps, source_id=clip.source_id, window_index=clip.window_index)
    return clip


@dataclass(frozen=True)
class LandmarkSet:
    """68 (x, y) facial landmark coordinates for one frame, iBUG-68 indexed."""

    points: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (LANDMARK_COUNT, 2):
            raise DataError(
                f"landmark set needs exactly {LANDMARK_COUNT} (x, y) points, "
                f"got shape {pts.shape}",
                code="wrong-point-count",
            )
        if not np.all(np.isfinite(pts)):
            raise DataError("landmark coordinates must be finite", code="wrong-point-count")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def out_of_bounds(self, width: int, height: int) -> np.ndarray:
        """Boolean mask of points outside [0, width) x [0, height)."""
        x, y = self.points[:, 0], self.points[:, 1]
        return (x < 0) | (x >= width) | (y < 0) | (y >= height)


@dataclass(frozen=True)
class PermutationKey:
    """An explicit bijection over ``n`` positions, optionally with its seed recipe.

    ``perm`` maps output position i to input position perm[i]. Keys made by
    :func:`pulseveil.perturb.keygen` carry (seed, algorithm) provenance so
    they can be stored compactly and regenerated bit-exactly.
    """

    n: int
    perm: np.ndarray
    seed: int | None = None
    algorithm: str | None = None

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if perm.shape != (self.n,):
            raise DataError(
                f"permutation has length {perm.size}, expected n={self.n}",
                code="shape-mismatch",
            )
        if not np.array_equal(np.sort(perm), np.arange(self.n)):
            raise DataError("perm is not a bijection on [0, n)", code="shape-mismatch")
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    def inverse(self) -> np.ndarray:
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.perm] = np.arange(self.n)
        return inv


@dataclass(frozen=True)
class PpgTrace:
    """A uniformly sampled scalar signal with sampling rate and start offset."""

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise DataError(f"trace must be 1-D, got shape {samples.shape}", code="shape-mismatch")
        if not np.all(np.isfinite(samples)):
            raise DataError("trace contains non-finite values", code="shape-mismatch")
        if not self.fs > 0:
            raise DataError(f"fs must be positive, got {self.fs}", code="non-positive-fps")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs


@dataclass(frozen=True)
class KeyPolicy:
    """How shuffle keys are assigned to samples.

    mode "fixed" reuses one key everywhere; "pool" draws from m keys derived
    from the master seed; "unbounded" derives a fresh key per sample index.
    """

    mode: str
    master_seed: int
    pool_size: int = 1

    def __post_init__(self):
        if self.mode not in ("fixed", "pool", "unbounded"):
            raise DataError(f"unknown key policy mode {self.mode!r}", code="shape-mismatch")
        if self.mode == "pool" and self.pool_size < 1:
            raise DataError("key pool needs at least one key", code="shape-mismatch")


@dataclass(frozen=True)
class PerturbSpec:
    """Which perturbation to apply and with what parameters.

    ``patch_size`` 1 means pixel-level shuffling; 2/4/8 shuffle P x P patches.
    ``blur_kernel`` is the odd Gaussian kernel width, or None for no blur.
    """

    method: str
    patch_size: int = 1
    blur_kernel: int | None = None
    key_policy: KeyPolicy | None = None
    noise_var: float = 0.5
    mix_count: int = 2

    def __post_init__(self):
        if self.method not in PERTURB_METHODS:
            raise DataError(f"unknown perturbation method {self.method!r}", code="shape-mismatch")
        if self.patch_size not in (1, 2, 4, 8) or 64 % self.patch_size != 0:
            raise DataError(
                f"patch size must divide 64, got {self.patch_size}", code="bad-patch-size"
            )
        if self.blur_kernel is not None and (self.blur_kernel < 3 or self.blur_kernel % 2 == 0):
            raise DataError(
                f"blur kernel must be odd and >= 3, got {self.blur_kernel}", code="bad-kernel"
            )
        if self.noise_var < 0:
            raise DataError("noise variance must be >= 0", code="shape-mismatch")


@dataclass
class HrReport:
    """Per-video heart-rate estimates plus corpus-level aggregates."""

    per_video: list = field(default_factory=list)
    mae: float = 0.0
    rmse: float = 0.0
    pearson_r: float | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for entry in self.per_video:
            for key in ("pred_hr", "gt_hr"):
                hr = entry[key]
                if not 0 < hr < 300:
                    raise NumericError(
                        f"{key}={hr} for video {entry.get('id')} outside (0, 300) bpm",
                        code="hr-out-of-range",
                    )
        if self.mae < 0 or self.rmse < self.mae:
            raise NumericError(
                f"aggregates violate rmse >= mae >= 0: mae={self.mae}, rmse={self.rmse}",
                code="hr-out-of-range",
            )
        if self.pearson_r is not None and not -1 <= self.pearson_r <= 1:
            raise NumericError(f"pearson r={self.pearson_r} outside [-1, 1]", code="hr-out-of-range")

    def to_json(self) -> dict:
        return {
            "per_video": self.per_video,
            "mae": self.mae,
            "rmse": self.rmse,
            "pearson_r": self.pearson_r,
            "config": self.config,
        }
