"""Acceptance suite: one test per release criterion, one printed verdict each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
The quantitative checks run on the synthetic corpus (heart rates 48-180 bpm,
300 frames at 30 fps, noise sigma 2) so everything is reproducible offline.
"""

import hashlib
import json
import time

import numpy as np
import pytest

from pulseveil.cli import main as cli_main
from pulseveil.estimators import chrom, pos
from pulseveil.evaluate import estimate_hr, smooth_l1, smooth_l1_grad
from pulseveil.ingest import window_count
from pulseveil.model import Clip, PerturbSpec
from pulseveil.perturb import (
    keygen,
    log10_keyspace,
    perturb_clip,
    shuffle_pixels,
    unshuffle_pixels,
)
from pulseveil.synth import synthesize_clip

CORPUS_HRS = (48, 60, 72, 90, 120, 150, 180)
FPS = 30.0
BETA = 0.3


def verdict(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[acceptance] {status} {name}"
    if detail:
        line += f" ({detail})"
    print(line)


@pytest.fixture(scope="module")
def corpus():
    return [
        synthesize_clip(hr=hr, fps=FPS, frames=300, noise_sigma=2.0, seed=i)
        for i, hr in enumerate(CORPUS_HRS)
    ]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    for i, hr in enumerate(CORPUS_HRS):
        assert cli_main([
            "synth", "--hr", str(hr), "--frames", "300", "--noise-sigma", "2.0",
            "--seed", str(i), "--out", str(root / f"v{hr:03d}"),
        ]) == 0
    return root


def test_shuffle_invariance_keystone():
    """chrom/pos on RoI+Sh bit-identical to RoI; channel sums exact; < 30 s."""
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    ok = True
    for trial in range(100):
        hr = float(rng.uniform(45, 185))
        clip, _ = synthesize_clip(
            hr=hr, fps=FPS, frames=128, noise_sigma=float(rng.uniform(0, 2)),
            seed=int(rng.integers(0, 2**31)),
        )
        key = keygen(int(rng.integers(0, 2**63)), 4096)
        shuffled = perturb_clip(clip, PerturbSpec(method="roi_sh"), key)
        sums_equal = np.array_equal(
            clip.data.reshape(128, -1, 3).sum(axis=1, dtype=np.int64),
            shuffled.data.reshape(128, -1, 3).sum(axis=1, dtype=np.int64),
        )
        chrom_equal = np.array_equal(chrom(clip).samples, chrom(shuffled).samples)
        pos_equal = np.array_equal(pos(clip).samples, pos(shuffled).samples)
        if not (sums_equal and chrom_equal and pos_equal):
            ok = False
            break
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 30.0
    verdict("shuffle invariance (100 clips, bit-exact)", ok, f"{elapsed:.1f}s")
    assert ok


def test_blur_impact_bound(corpus):
    """|HR(RoI+Sh+B) - HR(RoI)| <= 1 bpm for chrom and pos at k = 3."""
    worst = 0.0
    for i, (clip, _) in enumerate(corpus):
        key = keygen(500 + i, 4096)
        blurred = perturb_clip(clip, PerturbSpec(method="roi_sh_b", blur_kernel=3), key)
        for estimator in (chrom, pos):
            delta = abs(estimate_hr(estimator(blurred)) - estimate_hr(estimator(clip)))
            worst = max(worst, delta)
    ok = worst <= 1.0
    verdict("blur impact bound (<= 1 bpm)", ok, f"worst {worst:.3f} bpm")
    assert ok


def test_hr_recovery(corpus):
    """chrom and pos MAE <= 2 bpm against the known synthetic rates; < 2 min."""
    start = time.monotonic()
    errors = {"chrom": [], "pos": []}
    for (clip, _), hr in zip(corpus, CORPUS_HRS):
        errors["chrom"].append(abs(estimate_hr(chrom(clip)) - hr))
        errors["pos"].append(abs(estimate_hr(pos(clip)) - hr))
    mae_chrom = float(np.mean(errors["chrom"]))
    mae_pos = float(np.mean(errors["pos"]))
    elapsed = time.monotonic() - start
    ok = mae_chrom <= 2.0 and mae_pos <= 2.0 and elapsed < 120.0
    verdict(
        "HR recovery (MAE <= 2 bpm)", ok,
        f"chrom {mae_chrom:.3f}, pos {mae_pos:.3f} bpm, {elapsed:.1f}s",
    )
    assert ok


def test_table3_qualitative_ordering(corpus_dir, tmp_path):
    """One benchmark invocation; roi+sh+b(U) MAE strictly below every baseline."""
    report_path = tmp_path / "table3.json"
    code = cli_main([
        "benchmark", "--root", str(corpus_dir), "--master-seed", "424242",
        "--methods", "roi+sh+b,noise,bdct,le,instahide",
        "--estimator", "chrom", "--report", str(report_path),
    ])
    doc = json.loads(report_path.read_text())
    ours = doc["methods"]["roi+sh+b"]["mae"]
    baselines = {m: doc["methods"][m]["mae"] for m in ("noise", "bdct", "le", "instahide")}
    ok = code == 0 and all(ours < mae for mae in baselines.values())
    detail = f"ours {ours:.2f} vs " + ", ".join(f"{m} {v:.2f}" for m, v in baselines.items())
    verdict("Table-3 qualitative ordering", ok, detail)
    assert ok


def test_keyspace_accounting(capsys):
    """CLI keyspace values and the strict pixel > 2x2 > 4x4 > 8x8 ordering."""
    values = {}
    for n in (4096, 1024, 64):
        assert cli_main(["keyspace", "--n", str(n)]) == 0
        values[n] = float(capsys.readouterr().out.strip())
    ordering = [log10_keyspace((64 // p) ** 2) for p in (1, 2, 4, 8)]
    ok = (
        abs(values[4096] - 13019.6) <= 0.1
        and abs(values[1024] - 2639.7) <= 0.1
        and abs(values[64] - 89.10) <= 0.01
        and all(a > b for a, b in zip(ordering, ordering[1:]))
    )
    with capsys.disabled():
        verdict(
            "key-space accounting", ok,
            f"log10(4096!) = {values[4096]:.1f}, monotone {[round(v, 1) for v in ordering]}",
        )
    assert ok


def test_round_trip_security_contract():
    """1000 random frame/key pairs: exact inverse; wrong key leaves > 99% differing."""
    rng = np.random.default_rng(77)
    frames = rng.integers(0, 256, size=(1000, 64, 64, 3)).astype(np.uint8)
    ok = True
    wrong_key_diffs = []
    for i in range(1000):
        key = keygen(i, 4096)
        shuffled = frames[i].reshape(4096, 3)[key.perm].reshape(64, 64, 3)
        restored = unshuffle_pixels(shuffled, key)
        if not np.array_equal(restored, frames[i]):
            ok = False
            break
        if i < 200:
            wrong = unshuffle_pixels(shuffled, keygen(i + 1_000_000, 4096))
            wrong_key_diffs.append(np.any(wrong != frames[i], axis=2).mean())
    min_diff = min(wrong_key_diffs)
    ok = ok and min_diff > 0.99
    verdict("round-trip security contract", ok, f"min wrong-key diff {min_diff:.4f}")
    assert ok
    # spot check the public shuffle path matches the vectorized one used above
    key = keygen(5, 4096)
    assert np.array_equal(
        shuffle_pixels(frames[0], key),
        frames[0].reshape(4096, 3)[key.perm].reshape(64, 64, 3),
    )


def test_windowing_count_formula():
    """floor((t - T) / stride) + 1 over 1000 random (t, stride); defaults pinned."""
    from pulseveil.ingest import WINDOW_FRAMES, WINDOW_STRIDE

    rng = np.random.default_rng(99)
    ok = WINDOW_FRAMES == 128 and WINDOW_STRIDE == 8
    for _ in range(1000):
        t = int(rng.integers(1, 2000))
        window = int(rng.integers(1, 300))
        stride = int(rng.integers(1, 50))
        expected = (t - window) // stride + 1 if t >= window else 0
        if window_count(t, window, stride) != expected:
            ok = False
            break
    verdict("windowing count formula (1000 trials)", ok)
    assert ok


def test_smooth_l1_contract():
    """Values, continuity and finite-difference gradients at the probe points."""
    probes = {0.0: 0.0, BETA / 2: 0.0375, BETA: BETA / 2, 2 * BETA: 0.45}
    ok = True
    for delta, expected in probes.items():
        if abs(smooth_l1(np.array([delta]), np.array([0.0]), BETA) - expected) > 1e-12:
            ok = False
    # continuity: both branch formulas agree at |d| = beta
    quad = 0.5 * BETA**2 / BETA
    lin = BETA - BETA / 2
    ok = ok and abs(quad - lin) < 1e-15
    # gradient vs central differences, including just off the knee
    h = 1e-6
    for delta in [0.0, BETA / 2, BETA, 2 * BETA, BETA * (1 - 1e-3), BETA * (1 + 1e-3)]:
        pred, gt = np.array([delta]), np.array([0.0])
        fd = (smooth_l1(pred + h, gt, BETA) - smooth_l1(pred - h, gt, BETA)) / (2 * h)
        if abs(fd - smooth_l1_grad(pred, gt, BETA)[0]) > 1e-6:
            ok = False
    verdict("smooth-L1 value/continuity/gradient", ok)
    assert ok


def test_replay_determinism(tmp_path):
    """Replaying run.json reproduces byte-identical artifacts with jobs 1 and 4."""
    gt_root = tmp_path / "gt"
    pred_root = tmp_path / "pred"
    for hr, seed in [(66, 1), (102, 2)]:
        cli_main(["synth", "--hr", str(hr), "--frames", "160", "--noise-sigma", "1.0",
                  "--seed", str(seed), "--out", str(gt_root / f"v{hr:03d}")])
        cli_main(["perturb", "--in", str(gt_root / f"v{hr:03d}"), "--method", "roi+sh+b",
                  "--master-seed", "31", "--key-policy", "unbounded", "--emit-clip",
                  "--out", str(pred_root / f"v{hr:03d}")])

    def digest_tree(root):
        out = {}
        for p in sorted(root.rglob("*")):
            if p.is_file() and p.name != "run.json":
                out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
        return out

    # perturb replay
    replayed = tmp_path / "replayed_perturb"
    code1 = cli_main(["replay", "--run", str(pred_root / "v066" / "run.json"),
                      "--out", str(replayed)])
    perturb_same = digest_tree(pred_root / "v066") == digest_tree(replayed)

    # evaluate with jobs 1, then replay with jobs 4
    report1 = tmp_path / "report1.json"
    cli_main(["evaluate", "--pred-root", str(pred_root), "--gt-root", str(gt_root),
              "--report", str(report1), "--jobs", "1"])
    report4 = tmp_path / "report4.json"
    code2 = cli_main(["replay", "--run", str(tmp_path / "report1.run.json"),
                      "--out", str(report4), "--jobs", "4"])
    eval_same = report1.read_bytes() == report4.read_bytes()

    ok = code1 == 0 and code2 == 0 and perturb_same and eval_same
    verdict("run.json replay determinism (jobs 1 vs 4)", ok)
    assert ok
