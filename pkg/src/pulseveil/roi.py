"""Composite ROI assembly: cheeks plus forehead, resized to 64x64.

Landmarks follow the 0-indexed iBUG-68 convention. The three skin regions
are axis-aligned boxes derived from them:

  cheek_a   x in [x1, x31],  y in [y29, y33]
  cheek_b   x in [x35, x15], y in [y29, y33]
  forehead  x in [x19, x24], bottom = min(y of 17..26) - 2,
            top = bottom - 0.6 * (y33 - y27)

Fractional box edges round outward (floor mins, ceil maxes) and are clamped
to the frame. The taller cheek is downsized to the shorter one's height,
cheeks concatenate side by side (cheek_a on the left), the forehead is
resized to the cheek-composite width and stacked on top, and the composite
is resized to 64x64.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DataError
from .model import Clip, LandmarkSet, validate_frame

ROI_SIZE = 64


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with corner-aligned sampling, rounded back to uint8."""
    img = validate_frame(img)
    if out_h < 1 or out_w < 1:
        raise DataError(f"output size {out_h}x{out_w} is empty", code="empty-input")
    in_h, in_w = img.shape[:2]
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()

    # source coordinate of output index i is (i * (in - 1)) / (out - 1);
    # multiply-then-divide keeps ties bit-stable across implementations
    ys = np.arange(out_h) * (in_h - 1) / (out_h - 1) if out_h > 1 else np.zeros(1)
    xs = np.arange(out_w) * (in_w - 1) / (out_w - 1) if out_w > 1 else np.zeros(1)
    y0 = np.minimum(ys.astype(np.int64), in_h - 2) if in_h > 1 else np.zeros(out_h, dtype=np.int64)
    x0 = np.minimum(xs.astype(np.int64), in_w - 2) if in_w > 1 else np.zeros(out_w, dtype=np.int64)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)

    src = img.astype(np.float64)
    top = (1.0 - fx) * src[y0][:, x0] + fx * src[y0][:, x1]
    bottom = (1.0 - fx) * src[y1][:, x0] + fx * src[y1][:, x1]
    val = (1.0 - fy) * top + fy * bottom
    return np.clip(np.rint(val), 0, 255).astype(np.uint8)


def region_boxes(lm: LandmarkSet, frame_h: int, frame_w: int) -> dict[str, tuple[int, int, int, int]]:
    """Pixel boxes (x0, x1, y0, y1), end-exclusive, clamped to the frame."""
    pts = lm.points
    x = pts[:, 0]
    y = pts[:, 1]

    cheek_y0, cheek_y1 = y[29], y[33]
    forehead_bottom = float(np.min(y[17:27])) - 2.0
    forehead_top = forehead_bottom - 0.6 * (y[33] - y[27])

    raw = {
        "cheek_a": (x[1], x[31], cheek_y0, cheek_y1),
        "cheek_b": (x[35], x[15], cheek_y0, cheek_y1),
        "forehead": (x[19], x[24], forehead_top, forehead_bottom),
    }
    boxes = {}
    for name, (x0, x1, y0, y1) in raw.items():
        ix0 = max(0, min(frame_w, math.floor(x0)))
        ix1 = max(0, min(frame_w, math.ceil(x1)))
        iy0 = max(0, min(frame_h, math.floor(y0)))
        iy1 = max(0, min(frame_h, math.ceil(y1)))
        boxes[name] = (ix0, ix1, iy0, iy1)
    return boxes


def extract_regions(frame: np.ndarray, lm: LandmarkSet) -> dict[str, np.ndarray]:
    """Crop the two cheeks and the forehead from one frame."""
    frame = validate_frame(frame)
    h, w = frame.shape[:2]
    crops = {}
    for name, (x0, x1, y0, y1) in region_boxes(lm, h, w).items():
        if x1 - x0 < 2 or y1 - y0 < 2:
            raise DataError(
                f"{name} region degenerates to {x1 - x0}x{y1 - y0} px after clamping",
                code="degenerate-region",
            )
        crops[name] = frame[y0:y1, x0:x1]
    return crops


def assemble_roi(regions: dict[str, np.ndarray]) -> np.ndarray:
    """Stitch cheek and forehead crops into the 64x64 composite ROI."""
    for name in ("cheek_a", "cheek_b", "forehead"):
        if name not in regions:
            raise DataError(f"missing region {name!r}", code="degenerate-region")
        r = validate_frame(regions[name])
        if r.shape[0] < 2 or r.shape[1] < 2:
            raise DataError(
                f"{name} region {r.shape[0]}x{r.shape[1]} is too small",
                code="degenerate-region",
            )
    cheek_a, cheek_b = regions["cheek_a"], regions["cheek_b"]
    target_h = min(cheek_a.shape[0], cheek_b.shape[0])
    if cheek_a.shape[0] > target_h:
        cheek_a = bilinear_resize(cheek_a, target_h, cheek_a.shape[1])
    if cheek_b.shape[0] > target_h:
        cheek_b = bilinear_resize(cheek_b, target_h, cheek_b.shape[1])
    cheeks = np.concatenate([cheek_a, cheek_b], axis=1)

    forehead = regions["forehead"]
    forehead = bilinear_resize(forehead, forehead.shape[0], cheeks.shape[1])
    composite = np.concatenate([forehead, cheeks], axis=0)
    return bilinear_resize(composite, ROI_SIZE, ROI_SIZE)


def roi_frame(frame: np.ndarray, lm: LandmarkSet) -> np.ndarray:
    return assemble_roi(extract_regions(frame, lm))


def roi_clip(clip: Clip, landmarks: Sequence[LandmarkSet]) -> Clip:
    """Assemble the ROI for every frame of a clip."""
    if len(landmarks) != len(clip):
        raise DataError(
            f"{len(landmarks)} landmark sets for {len(clip)} frames",
            code="frame-count-mismatch",
        )
    frames = np.stack([roi_frame(clip.frame(i), landmarks[i]) for i in range(len(clip))])
    return clip.with_data(frames)
