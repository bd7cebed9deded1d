"""Classical mean-trace rPPG estimators: CHROM and POS.

Both algorithms reduce each frame to its spatial mean color before any
further processing, so they are exactly invariant to keyed pixel shuffling:
a permutation of pixel positions cannot change the per-channel mean. To
make that invariance hold to the last bit, uint8 clips are accumulated with
integer sums and divided once in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import DataError, NumericError
from .model import Clip, PpgTrace

BAND_HZ = (0.7, 4.0)

CHROM_MIN_FRAMES = 64


@dataclass(frozen=True)
class RgbTraces:
    """Per-frame spatial mean intensity of each color channel."""

    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    fps: float

    def __post_init__(self):
        if not (len(self.r) == len(self.g) == len(self.b)):
            raise DataError("channel traces differ in length", code="length-mismatch")
        if min(self.r.min(), self.g.min(), self.b.min()) < 0:
            raise NumericError("mean traces must be non-negative", code="zero-channel")


def mean_traces(clip: Clip) -> RgbTraces:
    """Spatial mean per channel per frame.

    uint8 data is summed in int64 so the result is bit-identical under any
    permutation of pixel positions; float clips accumulate in float64.
    """
    if len(clip) < 1:
        raise DataError("clip has no frames", code="empty-clip")
    t = len(clip)
    flat = clip.data.reshape(t, -1, 3)
    npix = flat.shape[1]
    if clip.data.dtype == np.uint8:
        sums = flat.sum(axis=1, dtype=np.int64).astype(np.float64)
    else:
        sums = flat.sum(axis=1, dtype=np.float64)
    means = sums / npix
    return RgbTraces(r=means[:, 0], g=means[:, 1], b=means[:, 2], fps=clip.fps)


def bandpass(signal: PpgTrace, lo: float = BAND_HZ[0], hi: float = BAND_HZ[1]) -> PpgTrace:
    """Zero-phase 2nd-order Butterworth band-pass (applied forward and backward)."""
    if not signal.fs > 2 * hi:
        raise NumericError(
            f"sampling rate {signal.fs} Hz cannot carry a {hi} Hz band edge",
            code="fs-too-low",
        )
    n = len(signal)
    if n < 12:
        raise DataError(f"signal of {n} samples is too short to filter", code="too-short")
    b, a = butter(2, [lo, hi], btype="bandpass", fs=signal.fs)
    padlen = min(3 * max(len(a), len(b)), n - 1)
    filtered = filtfilt(b, a, signal.samples, padlen=padlen)
    return PpgTrace(samples=filtered, fs=signal.fs, t0=signal.t0)


def _normalized_traces(traces: RgbTraces) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = [traces.r.mean(), traces.g.mean(), traces.b.mean()]
    if min(mu) <= 0:
        raise NumericError("a channel mean is zero; cannot normalize", code="zero-channel")
    return traces.r / mu[0], traces.g / mu[1], traces.b / mu[2]


def chrom(clip: Clip) -> PpgTrace:
    """CHROM: fixed chrominance projections of mean-normalized color traces.

    X = 3Rn - 2Gn and Y = 1.5Rn + Gn - 1.5Bn are band-passed, then combined
    as S = X - (sigma_X / sigma_Y) Y and mean-centered. A zero sigma_Y
    (constant chrominance) degrades gracefully to S = X.
    """
    if len(clip) < CHROM_MIN_FRAMES:
        raise DataError(
            f"chrom needs at least {CHROM_MIN_FRAMES} frames, got {len(clip)}",
            code="too-short",
        )
    traces = mean_traces(clip)
    rn, gn, bn = _normalized_traces(traces)
    x = 3.0 * rn - 2.0 * gn
    y = 1.5 * rn + gn - 1.5 * bn
    fs = clip.fps
    xf = bandpass(PpgTrace(samples=x, fs=fs)).samples
    yf = bandpass(PpgTrace(samples=y, fs=fs)).samples
    sy = yf.std()
    alpha = xf.std() / sy if sy > 0 else 0.0
    s = xf - alpha * yf
    return PpgTrace(samples=s - s.mean(), fs=fs)


def pos(clip: Clip) -> PpgTrace:
    """POS: projection onto the plane orthogonal to skin tone, overlap-added.

    Windows of ceil(1.6 * fps) frames slide one frame at a time. Per window
    the temporally normalized traces form S1 = Gn - Bn and
    S2 = Gn + Bn - 2Rn; h = S1 + (sigma_S1 / sigma_S2) S2 is mean-centered
    and accumulated into the output at the window's position.
    """
    fs = clip.fps
    window = math.ceil(1.6 * fs)
    n = len(clip)
    if n < window:
        raise DataError(
            f"pos needs at least {window} frames at {fs} fps, got {n}", code="too-short"
        )
    traces = mean_traces(clip)
    rgb = np.stack([traces.r, traces.g, traces.b])

    out = np.zeros(n)
    for end in range(window - 1, n):
        start = end - window + 1
        c = rgb[:, start : end + 1]
        mu = c.mean(axis=1)
        if np.min(mu) <= 0:
            raise NumericError("a window channel mean is zero", code="zero-channel")
        cn = c / mu[:, None]
        s1 = cn[1] - cn[2]
        s2 = cn[1] + cn[2] - 2.0 * cn[0]
        sigma2 = s2.std()
        alpha = s1.std() / sigma2 if sigma2 > 0 else 0.0
        h = s1 + alpha * s2
        out[start : end + 1] += h - h.mean()
    return PpgTrace(samples=out, fs=fs)


ESTIMATORS = {"chrom": chrom, "pos": pos}


def get_estimator(name: str):
    try:
        return ESTIMATORS[name]
    except KeyError:
        raise DataError(f"unknown estimator {name!r}", code="decode-failure") from None
