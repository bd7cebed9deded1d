"""Competing privacy perturbations, implemented as seeded clip transforms.

Four baselines, each pinned to its simplest faithful reading so classical
estimators can run on the outputs:

  noise      i.i.d. Gaussian noise of variance 0.5 in the [0, 1] domain
  bdct       8x8 block DCT, cross-block permutation of the 64 coefficient
             channels, inverse DCT
  le         per-4x4-block pixel permutation, per-position channel
             permutation and intensity reversal (invertible with the key)
  instahide  weighted mix of two clips in [-1, 1] plus random sign flips
             (k = 2 mixing; real-valued float32 output)

Unlike keyed shuffling, none of these preserves per-frame channel means on
nonconstant input; noise and instahide are not invertible at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import DataError
from .model import Clip, PermutationKey
from .perturb import SplitMix64, keygen

BDCT_BLOCK = 8
LE_BLOCK = 4

NOISE_VARIANCE = 0.5

# All 6 orderings of (R, G, B); index 0 is the identity.
CHANNEL_PERMS = np.asarray(sorted(permutations(range(3))), dtype=np.int64)


def add_gaussian_noise(clip: Clip, variance: float = NOISE_VARIANCE, seed: int = 0) -> Clip:
    """Add seeded i.i.d. normal noise in the normalized [0, 1] intensity domain."""
    if variance < 0:
        raise DataError(f"variance must be >= 0, got {variance}", code="shape-mismatch")
    if clip.data.dtype != np.uint8:
        raise DataError("noise baseline expects a uint8 clip", code="shape-mismatch")
    if variance == 0:
        return clip
    rng = np.random.default_rng(seed)
    x = clip.data.astype(np.float64) / 255.0
    noisy = np.clip(x + rng.normal(0.0, np.sqrt(variance), size=x.shape), 0.0, 1.0)
    return clip.with_data(np.rint(noisy * 255.0).astype(np.uint8))


def _dct_matrix(n: int) -> np.ndarray:
    # Orthonormal DCT-II basis: row k, column j.
    j = np.arange(n)
    k = j[:, None]
    m = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


_DCT8 = _dct_matrix(BDCT_BLOCK)


def block_dct(channel: np.ndarray) -> np.ndarray:
    """Orthonormal 8x8 block DCT-II of a single-channel image (float64 out)."""
    h, w = channel.shape
    if h % BDCT_BLOCK or w % BDCT_BLOCK:
        raise DataError(f"image {h}x{w} not divisible into 8x8 blocks", code="bad-dims")
    bh, bw = h // BDCT_BLOCK, w // BDCT_BLOCK
    blocks = channel.astype(np.float64).reshape(bh, BDCT_BLOCK, bw, BDCT_BLOCK)
    # per block: C = D B D^T
    return np.einsum("ku,iujw,vw->ikjv", _DCT8, blocks, _DCT8).reshape(h, w)


def block_idct(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`block_dct`, still float64."""
    h, w = coeffs.shape
    if h % BDCT_BLOCK or w % BDCT_BLOCK:
        raise DataError(f"image {h}x{w} not divisible into 8x8 blocks", code="bad-dims")
    bh, bw = h // BDCT_BLOCK, w // BDCT_BLOCK
    blocks = coeffs.reshape(bh, BDCT_BLOCK, bw, BDCT_BLOCK)
    # per block: B = D^T C D
    return np.einsum("ku,ikjv,vw->iujw", _DCT8, blocks, _DCT8).reshape(h, w)


def bdct_mask(frame: np.ndarray, key: PermutationKey) -> np.ndarray:
    """Permute the 64 cross-block DCT coefficient channels of each color plane.

    Pixels are level-shifted by -128 before the transform (JPEG convention)
    and shifted back after the inverse, so relocated DC energy stays inside
    the 8-bit range instead of saturating it.
    """
    if key.n != BDCT_BLOCK * BDCT_BLOCK:
        raise DataError(f"bdct key must cover 64 positions, got {key.n}", code="size-mismatch")
    h, w = frame.shape[:2]
    if h % BDCT_BLOCK or w % BDCT_BLOCK:
        raise DataError(f"frame {h}x{w} not divisible into 8x8 blocks", code="bad-dims")
    out = np.empty_like(frame)
    bh, bw = h // BDCT_BLOCK, w // BDCT_BLOCK
    for c in range(3):
        coeffs = block_dct(frame[:, :, c].astype(np.float64) - 128.0)
        grid = coeffs.reshape(bh, BDCT_BLOCK, bw, BDCT_BLOCK).transpose(0, 2, 1, 3)
        flat = grid.reshape(bh, bw, 64)
        shuffled = flat[:, :, key.perm]
        back = shuffled.reshape(bh, bw, BDCT_BLOCK, BDCT_BLOCK).transpose(0, 2, 1, 3)
        out[:, :, c] = np.clip(np.rint(block_idct(back.reshape(h, w)) + 128.0), 0, 255)
    return out


def bdct_mask_clip(clip: Clip, key: PermutationKey) -> Clip:
    return clip.with_data(np.stack([bdct_mask(f, key) for f in clip.data]))


@dataclass(frozen=True)
class LeKeyMaterial:
    """Key material for the block-encryption baseline, shared by all blocks.

    pixel_perm permutes the 16 positions of a 4x4 block; channel_perm picks
    one of the 6 RGB orderings per position; invert_mask reverses intensity
    (v -> 255 - v) at flagged positions.
    """

    pixel_perm: np.ndarray
    channel_perm: np.ndarray
    invert_mask: np.ndarray

    def __post_init__(self):
        n = LE_BLOCK * LE_BLOCK
        if (
            self.pixel_perm.shape != (n,)
            or self.channel_perm.shape != (n,)
            or self.invert_mask.shape != (n,)
        ):
            raise DataError("LE key material has wrong shapes", code="size-mismatch")

    @classmethod
    def identity(cls) -> "LeKeyMaterial":
        n = LE_BLOCK * LE_BLOCK
        return cls(
            pixel_perm=np.arange(n, dtype=np.int64),
            channel_perm=np.zeros(n, dtype=np.int64),
            invert_mask=np.zeros(n, dtype=bool),
        )

    @classmethod
    def from_seed(cls, seed: int) -> "LeKeyMaterial":
        n = LE_BLOCK * LE_BLOCK
        perm = keygen(seed, n).perm
        rng = SplitMix64(seed ^ 0xA5A5A5A5A5A5A5A5)
        channel_perm = np.asarray([rng.next_u64() % 6 for _ in range(n)], dtype=np.int64)
        invert_mask = np.asarray([rng.next_u64() & 1 for _ in range(n)], dtype=bool)
        return cls(pixel_perm=perm, channel_perm=channel_perm, invert_mask=invert_mask)


def _le_blocks(frame: np.ndarray) -> tuple[np.ndarray, int, int]:
    h, w = frame.shape[:2]
    if h % LE_BLOCK or w % LE_BLOCK:
        raise DataError(f"frame {h}x{w} not divisible into 4x4 blocks", code="bad-dims")
    bh, bw = h // LE_BLOCK, w // LE_BLOCK
    grid = frame.reshape(bh, LE_BLOCK, bw, LE_BLOCK, 3).transpose(0, 2, 1, 3, 4)
    return grid.reshape(bh * bw, LE_BLOCK * LE_BLOCK, 3), bh, bw


def _le_unblocks(blocks: np.ndarray, bh: int, bw: int) -> np.ndarray:
    grid = blocks.reshape(bh, bw, LE_BLOCK, LE_BLOCK, 3).transpose(0, 2, 1, 3, 4)
    return grid.reshape(bh * LE_BLOCK, bw * LE_BLOCK, 3)


def le_encrypt(frame: np.ndarray, km: LeKeyMaterial) -> np.ndarray:
    """Blockwise pixel permutation, channel permutation, and keyed reversal."""
    blocks, bh, bw = _le_blocks(frame)
    out = blocks[:, km.pixel_perm, :]
    for pos in range(LE_BLOCK * LE_BLOCK):
        out[:, pos, :] = out[:, pos, CHANNEL_PERMS[km.channel_perm[pos]]]
    out[:, km.invert_mask, :] = 255 - out[:, km.invert_mask, :]
    return _le_unblocks(out, bh, bw)


def le_decrypt(frame: np.ndarray, km: LeKeyMaterial) -> np.ndarray:
    """Exact inverse of :func:`le_encrypt` for the same key material."""
    blocks, bh, bw = _le_blocks(frame)
    work = blocks.copy()
    work[:, km.invert_mask, :] = 255 - work[:, km.invert_mask, :]
    for pos in range(LE_BLOCK * LE_BLOCK):
        inv = np.argsort(CHANNEL_PERMS[km.channel_perm[pos]])
        work[:, pos, :] = work[:, pos, inv]
    undone = np.empty_like(work)
    undone[:, km.pixel_perm, :] = work
    return _le_unblocks(undone, bh, bw)


def le_encrypt_clip(clip: Clip, km: LeKeyMaterial) -> Clip:
    return clip.with_data(np.stack([le_encrypt(f, km) for f in clip.data]))


def instahide_mix(
    clip_a: Clip,
    clip_b: Clip,
    lam: tuple[float, float] = (0.5, 0.5),
    sign_seed: int = 0,
    flip: bool = True,
) -> Clip:
    """Mix two clips in the [-1, 1] domain and randomly flip element signs.

    One seeded sign mask covers the whole (T, H, W, C) sample tensor. The
    result stays real-valued (float32 clip), as the mix is not meant to be
    re-quantized.
    """
    if clip_a.data.shape != clip_b.data.shape:
        raise DataError(
            f"clip shapes differ: {clip_a.data.shape} vs {clip_b.data.shape}",
            code="shape-mismatch",
        )
    l1, l2 = lam
    if l1 < 0 or l2 < 0 or abs(l1 + l2 - 1.0) > 1e-9:
        raise DataError(f"weights {lam} must be non-negative and sum to 1", code="shape-mismatch")

    def to_signed(c: Clip) -> np.ndarray:
        if c.data.dtype == np.uint8:
            return c.data.astype(np.float64) / 127.5 - 1.0
        return c.data.astype(np.float64)

    mixed = l1 * to_signed(clip_a) + l2 * to_signed(clip_b)
    if flip:
        rng = np.random.default_rng(sign_seed)
        signs = rng.integers(0, 2, size=mixed.shape).astype(np.float64) * 2.0 - 1.0
        mixed = mixed * signs
    return Clip(
        mixed.astype(np.float32),
        fps=clip_a.fps,
        source_id=clip_a.source_id,
        window_index=clip_a.window_index,
    )


def instahide_to_u8(clip: Clip) -> Clip:
    """Map a [-1, 1] float clip back onto the [0, 255] scale for estimation."""
    if clip.data.dtype != np.float32:
        raise DataError("expected a float32 instahide clip", code="shape-mismatch")
    data = np.clip((clip.data.astype(np.float64) + 1.0) * 127.5, 0, 255)
    return clip.with_data(np.rint(data).astype(np.uint8))
