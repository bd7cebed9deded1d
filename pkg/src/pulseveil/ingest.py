"""Dataset loading, PPG alignment, and evaluation windowing.

Video directory layout:

    <root>/<video_id>/frames/NNNNNN.png     lexicographic frame order
    <root>/<video_id>/landmarks.jsonl       {"frame": i, "points": [[x, y] * 68]}
    <root>/<video_id>/ppg.csv               header "t_s,value"
    <root>/<video_id>/manifest.json         {"fps": 30}

Adapters convert PURE's native JSON and UBFC's ground-truth text into this
layout; video container decoding is out of scope (frames arrive as images).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError
from .model import Clip, LandmarkSet, PpgTrace, clip_from_frames

WINDOW_FRAMES = 128
WINDOW_STRIDE = 8

DEFAULT_FPS = 30.0


@dataclass(frozen=True)
class DatasetEntry:
    video_id: str
    frames_dir: Path
    landmarks_path: Path | None
    ppg_path: Path | None
    fps: float


def write_frame_png(path: str | Path, frame: np.ndarray) -> None:
    Image.fromarray(frame, mode="RGB").save(str(path), format="PNG")


def read_frame_png(path: str | Path) -> np.ndarray:
    try:
        with Image.open(str(path)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot decode frame {path}: {exc}", code="decode-failure") from None


def read_manifest_fps(video_dir: str | Path) -> float | None:
    manifest = Path(video_dir) / "manifest.json"
    if not manifest.exists():
        return None
    doc = json.loads(manifest.read_text())
    return float(doc["fps"]) if "fps" in doc else None


def load_frames(frames_dir: str | Path, fps: float | None = None, source_id: str = "") -> Clip:
    """Load a frame directory into a Clip, frames in filename order.

    fps comes from the explicit argument, else the sibling manifest.json,
    else the 30 fps default.
    """
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise DataError(f"frame directory not found: {frames_dir}", code="missing-dir")
    files = sorted(p for p in frames_dir.iterdir() if p.is_file())
    if not files:
        raise DataError(f"no frames in {frames_dir}", code="empty-clip")
    frames = [read_frame_png(p) for p in files]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DataError(
            f"frames in {frames_dir} have mixed shapes: {sorted(shapes)}", code="shape-mismatch"
        )
    if fps is None:
        fps = read_manifest_fps(frames_dir.parent) or DEFAULT_FPS
    return clip_from_frames(frames, fps=fps, source_id=source_id or frames_dir.parent.name)


def count_frames(frames_dir: str | Path) -> int:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise DataError(f"frame directory not found: {frames_dir}", code="missing-dir")
    return sum(1 for p in frames_dir.iterdir() if p.is_file())


def load_landmarks(path: str | Path, expected_frames: int | None = None) -> list[LandmarkSet]:
    """Read one landmark record per frame from a JSONL file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"landmark file not found: {path}", code="missing-dir")
    sets: list[LandmarkSet] = []
    for lineno, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno + 1}: bad JSON: {exc}", code="decode-failure") from None
        points = doc.get("points", [])
        if len(points) != 68:
            raise DataError(
                f"{path}:{lineno + 1}: record has {len(points)} points, need 68",
                code="wrong-point-count",
            )
        sets.append(LandmarkSet(points=np.asarray(points, dtype=np.float64),
                                frame_index=int(doc.get("frame", len(sets)))))
    if expected_frames is not None and len(sets) != expected_frames:
        raise DataError(
            f"{len(sets)} landmark records for {expected_frames} frames",
            code="frame-count-mismatch",
        )
    return sets


def load_ppg(path: str | Path) -> PpgTrace:
    """Read a t_s,value CSV; sampling rate is inferred from the time stamps."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"ppg file not found: {path}", code="missing-dir")
    times, values = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["t_s"]))
            values.append(float(row["value"]))
    if len(values) < 2:
        raise DataError(f"ppg file {path} has fewer than 2 samples", code="too-short")
    times_arr = np.asarray(times)
    steps = np.diff(times_arr)
    if steps.min() <= 0:
        raise DataError(f"ppg time stamps in {path} are not increasing", code="decode-failure")
    fs = 1.0 / float(np.median(steps))
    return PpgTrace(samples=np.asarray(values), fs=fs, t0=times_arr[0])


def write_ppg(path: str | Path, trace: PpgTrace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "value"])
        for t, v in zip(trace.times(), trace.samples):
            writer.writerow([f"{t:.12g}", f"{v:.12g}"])


def align_ppg(ppg: PpgTrace, fps: float, t: int) -> PpgTrace:
    """Resample the PPG onto the frame clock by linear interpolation.

    Output sample i is the trace value at time i / fps, so the result has
    length t and sampling rate fps. When the source rate is an integer
    multiple of fps this picks every (fs/fps)-th sample exactly.
    """
    if t < 1:
        raise DataError("need at least one frame time", code="empty-clip")
    if not fps > 0:
        raise DataError(f"fps must be positive, got {fps}", code="non-positive-fps")
    frame_times = np.arange(t) / fps
    src_times = ppg.times()
    eps = 1e-9
    if frame_times[0] < src_times[0] - eps or frame_times[-1] > src_times[-1] + eps:
        raise DataError(
            f"video span [0, {frame_times[-1]:.3f}] s exceeds PPG span "
            f"[{src_times[0]:.3f}, {src_times[-1]:.3f}] s",
            code="insufficient-coverage",
        )
    samples = np.interp(frame_times, src_times, ppg.samples)
    return PpgTrace(samples=samples, fs=fps)


def window_clips(
    clip: Clip,
    gt: PpgTrace,
    window: int = WINDOW_FRAMES,
    stride: int = WINDOW_STRIDE,
) -> list[tuple[Clip, PpgTrace]]:
    """Slice a clip (and its aligned ground truth) into fixed-length windows.

    Windows start at 0, stride, 2*stride, ...; incomplete tails are dropped,
    so the count is floor((t - window) / stride) + 1.
    """
    t = len(clip)
    if len(gt) != t:
        raise DataError(
            f"ground truth has {len(gt)} samples for {t} frames", code="length-mismatch"
        )
    if window < 1 or stride < 1:
        raise DataError("window and stride must be >= 1", code="shape-mismatch")
    if t < window:
        raise DataError(f"clip of {t} frames is shorter than window {window}", code="clip-too-short")
    count = (t - window) // stride + 1
    pairs = []
    for w in range(count):
        start = w * stride
        sub = Clip(
            clip.data[start : start + window],
            fps=clip.fps,
            source_id=clip.source_id,
            window_index=w,
        )
        trace = PpgTrace(
            samples=gt.samples[start : start + window], fs=gt.fs, t0=start / clip.fps
        )
        pairs.append((sub, trace))
    return pairs


def window_count(t: int, window: int, stride: int) -> int:
    if t < window:
        return 0
    return (t - window) // stride + 1


def load_video(video_dir: str | Path, fps: float | None = None) -> DatasetEntry:
    """Describe a video directory without decoding its frames."""
    video_dir = Path(video_dir)
    frames_dir = video_dir / "frames"
    if not frames_dir.is_dir():
        raise DataError(f"{video_dir} has no frames/ directory", code="missing-dir")
    landmarks = video_dir / "landmarks.jsonl"
    ppg = video_dir / "ppg.csv"
    if fps is None:
        fps = read_manifest_fps(video_dir) or DEFAULT_FPS
    return DatasetEntry(
        video_id=video_dir.name,
        frames_dir=frames_dir,
        landmarks_path=landmarks if landmarks.exists() else None,
        ppg_path=ppg if ppg.exists() else None,
        fps=fps,
    )


def list_videos(root: str | Path) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root not found: {root}", code="missing-dir")
    return sorted(p for p in root.iterdir() if (p / "frames").is_dir())


def aligned_gt_for_video(video_dir: str | Path) -> tuple[PpgTrace, int, float]:
    """Ground-truth PPG aligned to the video's frame clock, plus (t, fps)."""
    entry = load_video(video_dir)
    if entry.ppg_path is None:
        raise DataError(f"{video_dir} has no ppg.csv", code="missing-dir")
    t = count_frames(entry.frames_dir)
    if t < 1:
        raise DataError(f"no frames in {entry.frames_dir}", code="empty-clip")
    raw = load_ppg(entry.ppg_path)
    return align_ppg(raw, fps=entry.fps, t=t), t, entry.fps


def convert_pure_video(
    images_dir: str | Path, record_json: str | Path, out_dir: str | Path, fps: float = DEFAULT_FPS
) -> Path:
    """Convert one PURE recording (image folder + JSON record) to the layout.

    The record's /FullPackage entries carry the pulse waveform with
    nanosecond timestamps; image timestamps define frame order.
    """
    images_dir, out_dir = Path(images_dir), Path(out_dir)
    doc = json.loads(Path(record_json).read_text())
    waveform = doc.get("/FullPackage", doc.get("FullPackage"))
    if not waveform:
        raise DataError(f"{record_json} has no /FullPackage waveform", code="decode-failure")
    frames_out = out_dir / "frames"
    frames_out.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in images_dir.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise DataError(f"no PNG frames in {images_dir}", code="empty-clip")
    for i, src in enumerate(files):
        (frames_out / f"{i:06d}.png").write_bytes(src.read_bytes())

    t0_ns = waveform[0]["Timestamp"]
    with open(out_dir / "ppg.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "value"])
        for entry in waveform:
            writer.writerow(
                [f"{(entry['Timestamp'] - t0_ns) / 1e9:.9g}", entry["Value"]["waveform"]]
            )
    (out_dir / "manifest.json").write_text(json.dumps({"fps": fps}) + "\n")
    return out_dir


def convert_ubfc_video(
    images_dir: str | Path, gt_txt: str | Path, out_dir: str | Path, fps: float = DEFAULT_FPS
) -> Path:
    """Convert one UBFC recording (pre-extracted frames + ground_truth.txt).

    ground_truth.txt holds three whitespace-separated rows: PPG trace, HR
    trace, and sample timestamps in seconds.
    """
    images_dir, out_dir = Path(images_dir), Path(out_dir)
    rows = [r for r in Path(gt_txt).read_text().splitlines() if r.strip()]
    if len(rows) < 3:
        raise DataError(f"{gt_txt} should have 3 rows, found {len(rows)}", code="decode-failure")
    values = [float(v) for v in rows[0].split()]
    times = [float(v) for v in rows[2].split()]
    if len(values) != len(times):
        raise DataError(
            f"{gt_txt}: {len(values)} ppg values vs {len(times)} time stamps",
            code="length-mismatch",
        )
    frames_out = out_dir / "frames"
    frames_out.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in images_dir.iterdir() if p.is_file())
    if not files:
        raise DataError(f"no frames in {images_dir}", code="empty-clip")
    for i, src in enumerate(files):
        (frames_out / f"{i:06d}{src.suffix.lower()}").write_bytes(src.read_bytes())
    t0 = times[0]
    with open(out_dir / "ppg.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "value"])
        for t, v in zip(times, values):
            writer.writerow([f"{t - t0:.9g}", f"{v:.12g}"])
    (out_dir / "manifest.json").write_text(json.dumps({"fps": fps}) + "\n")
    return out_dir


def write_video_dir(
    out_dir: str | Path, clip: Clip, gt: PpgTrace | None = None
) -> Path:
    """Write a clip (and optional ground truth) as a dataset-layout folder."""
    out_dir = Path(out_dir)
    frames_out = out_dir / "frames"
    frames_out.mkdir(parents=True, exist_ok=True)
    if clip.data.dtype != np.uint8:
        raise DataError("only uint8 clips can be written as PNG frames", code="shape-mismatch")
    for i in range(len(clip)):
        write_frame_png(frames_out / f"{i:06d}.png", clip.frame(i))
    if gt is not None:
        write_ppg(out_dir / "ppg.csv", gt)
    (out_dir / "manifest.json").write_text(json.dumps({"fps": clip.fps}) + "\n")
    return out_dir
