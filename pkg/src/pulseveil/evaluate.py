"""Heart-rate extraction (Welch peak), corpus metrics, and smooth-L1 distance.

Welch parameters are pinned for a fine frequency grid: Hann segments of
min(256, len) samples with 50% overlap, zero-padded to
max(2048, next_pow2(4 * seg_len)) points. At 30 fps that puts one PSD bin
at 60 * 30 / 2048 = 0.88 bpm.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import welch

from .errors import DataError, NumericError
from .model import PpgTrace

HR_BAND_HZ = (0.7, 4.0)
WELCH_MIN_SAMPLES = 32
SMOOTH_L1_BETA = 0.3

# Peak-to-median PSD ratio below which an in-band peak is not trusted.
LOW_CONFIDENCE_RATIO = 3.0


def _next_pow2(x: int) -> int:
    return 1 if x <= 1 else 1 << (x - 1).bit_length()


def welch_psd(signal: PpgTrace) -> tuple[np.ndarray, np.ndarray]:
    """Averaged Hann-windowed, zero-padded periodogram of the trace."""
    n = len(signal)
    if n < WELCH_MIN_SAMPLES:
        raise DataError(
            f"need at least {WELCH_MIN_SAMPLES} samples for a PSD, got {n}", code="too-short"
        )
    seg_len = min(256, n)
    nfft = max(2048, _next_pow2(4 * seg_len))
    # two-sided spectrum sliced to [0, fs/2]: sided-ness must not rescale
    # the DC bin relative to its neighbors
    freqs, power = welch(
        signal.samples,
        fs=signal.fs,
        window="hann",
        nperseg=seg_len,
        noverlap=seg_len // 2,
        nfft=nfft,
        detrend=False,
        return_onesided=False,
    )
    half = nfft // 2 + 1
    return np.abs(freqs[:half]), power[:half]


def hr_peak(signal: PpgTrace, band: tuple[float, float] = HR_BAND_HZ) -> tuple[float, bool]:
    """Heart rate as 60x the in-band PSD peak, with a low-confidence flag.

    The flag trips when the in-band peak rises less than 3x above the
    in-band median power (peak buried in noise) or when the spectrum's
    global maximum lies outside the band (the in-band peak is forced).
    """
    freqs, power = welch_psd(signal)
    mask = (freqs >= band[0]) & (freqs <= band[1])
    if not mask.any():
        raise NumericError(f"band {band} contains no PSD bins", code="fs-too-low")
    in_band = power[mask]
    peak_idx = int(np.argmax(in_band))
    peak = in_band[peak_idx]
    median = float(np.median(in_band))
    buried = bool(peak < LOW_CONFIDENCE_RATIO * median)
    forced = bool(np.max(power) > peak)
    hr = 60.0 * float(freqs[mask][peak_idx])
    return hr, buried or forced


def estimate_hr(signal: PpgTrace, band: tuple[float, float] = HR_BAND_HZ) -> float:
    return hr_peak(signal, band)[0]


def hr_metrics(pred: np.ndarray, gt: np.ndarray) -> tuple[float, float, float | None]:
    """MAE, RMSE and Pearson R between predicted and ground-truth bpm values.

    R is None (undefined) when either sequence has zero variance or fewer
    than two entries.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 1 or pred.size == 0:
        raise DataError(
            f"prediction/ground-truth shapes {pred.shape} vs {gt.shape} unusable",
            code="length-mismatch",
        )
    diff = pred - gt
    mae = float(np.abs(diff).mean())
    rmse = float(np.sqrt((diff * diff).mean()))
    r: float | None = None
    if pred.size >= 2 and pred.std() > 0 and gt.std() > 0:
        r = float(min(1.0, max(-1.0, np.corrcoef(pred, gt)[0, 1])))
    return mae, rmse, r


def smooth_l1(pred, gt, beta: float = SMOOTH_L1_BETA) -> float:
    """Piecewise quadratic/absolute distance, mean-reduced over elements.

    Elementwise 0.5 * d^2 / beta for |d| < beta, else |d| - beta / 2.
    """
    p = pred.samples if isinstance(pred, PpgTrace) else np.asarray(pred, dtype=np.float64)
    g = gt.samples if isinstance(gt, PpgTrace) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise DataError(f"shapes {p.shape} vs {g.shape} differ", code="length-mismatch")
    d = np.abs(p - g)
    per_element = np.where(d < beta, 0.5 * d * d / beta, d - 0.5 * beta)
    return float(per_element.mean())


def smooth_l1_grad(pred, gt, beta: float = SMOOTH_L1_BETA) -> np.ndarray:
    """Gradient of :func:`smooth_l1` with respect to the predictions."""
    p = pred.samples if isinstance(pred, PpgTrace) else np.asarray(pred, dtype=np.float64)
    g = gt.samples if isinstance(gt, PpgTrace) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise DataError(f"shapes {p.shape} vs {g.shape} differ", code="length-mismatch")
    d = p - g
    elementwise = np.where(np.abs(d) < beta, d / beta, np.sign(d))
    return elementwise / p.size
