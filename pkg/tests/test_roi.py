import numpy as np
import pytest

from pulseveil.errors import DataError
from pulseveil.model import Clip, LandmarkSet
from pulseveil.roi import assemble_roi, bilinear_resize, extract_regions, roi_clip, roi_frame

RED = (200, 0, 0)
GREEN = (0, 200, 0)
BLUE = (0, 0, 200)


def ref_resize(img, oh, ow):
    """Brute-force corner-aligned bilinear resampler (independent oracle)."""
    ih, iw = img.shape[:2]
    out = np.zeros((oh, ow, 3))
    for y in range(oh):
        for x in range(ow):
            sy = y * (ih - 1) / (oh - 1) if oh > 1 else 0.0
            sx = x * (iw - 1) / (ow - 1) if ow > 1 else 0.0
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, ih - 1), min(x0 + 1, iw - 1)
            fy, fx = sy - y0, sx - x0
            top = (1 - fx) * img[y0, x0] + fx * img[y0, x1]
            bottom = (1 - fx) * img[y1, x0] + fx * img[y1, x1]
            out[y, x] = (1 - fy) * top + fy * bottom
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def face_landmarks():
    """A synthetic, frontal iBUG-68 layout inside a 140x120 frame."""
    pts = np.full((68, 2), 60.0)
    pts[1] = [20, 95]
    pts[15] = [100, 95]
    for i in range(17, 27):
        pts[i] = [30 + 5 * (i - 17), 52]
    pts[19] = [30, 52]
    pts[21] = [55, 50]  # highest brow point: forehead bottom lands at 48
    pts[24] = [85, 52]
    pts[27] = [60, 60]
    pts[29] = [60, 72]
    pts[31] = [50, 88]
    pts[33] = [60, 85]
    pts[35] = [70, 88]
    return LandmarkSet(points=pts)


# boxes implied by face_landmarks(), recomputed here by hand from the
# region definitions: (x0, x1, y0, y1), end-exclusive
CHEEK_A_BOX = (20, 50, 72, 85)
CHEEK_B_BOX = (70, 100, 72, 85)
FOREHEAD_BOX = (30, 85, 33, 48)


class TestBilinearResize:
    def test_constant_input_stays_constant(self):
        img = np.full((7, 5, 3), 100, dtype=np.uint8)
        for oh, ow in [(3, 3), (14, 10), (64, 64), (1, 9)]:
            out = bilinear_resize(img, oh, ow)
            assert out.shape == (oh, ow, 3)
            assert np.all(out == 100)

    def test_identity_resize(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(9, 11, 3)).astype(np.uint8)
        assert np.array_equal(bilinear_resize(img, 9, 11), img)

    def test_checkerboard_upsample_matches_oracle(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[0, 1] = img[1, 0] = 255
        out = bilinear_resize(img, 4, 4)
        assert np.array_equal(out, ref_resize(img, 4, 4))
        # corners keep their source values; the interior interpolates
        assert out[0, 0, 0] == 0 and out[0, 3, 0] == 255
        assert 0 < out[1, 1, 0] < 255

    @pytest.mark.parametrize("shape,target", [((10, 8), (5, 4)), ((3, 7), (9, 2)), ((6, 6), (13, 13))])
    def test_random_images_match_oracle(self, shape, target):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(*shape, 3)).astype(np.uint8)
        assert np.array_equal(bilinear_resize(img, *target), ref_resize(img, *target))

    def test_empty_output_rejected(self):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        with pytest.raises(DataError) as exc:
            bilinear_resize(img, 0, 4)
        assert exc.value.code == "empty-input"


class TestExtractRegions:
    def test_painted_rectangles_come_back_solid(self):
        lm = face_landmarks()
        frame = np.full((140, 120, 3), 17, dtype=np.uint8)
        for (x0, x1, y0, y1), color in [
            (CHEEK_A_BOX, RED),
            (CHEEK_B_BOX, GREEN),
            (FOREHEAD_BOX, BLUE),
        ]:
            frame[y0:y1, x0:x1] = color
        crops = extract_regions(frame, lm)
        assert np.all(crops["cheek_a"] == RED)
        assert np.all(crops["cheek_b"] == GREEN)
        assert np.all(crops["forehead"] == BLUE)
        assert crops["cheek_a"].shape == (13, 30, 3)
        assert crops["cheek_b"].shape == (13, 30, 3)
        assert crops["forehead"].shape == (15, 55, 3)

    def test_uniform_frame_gives_uniform_crops(self):
        frame = np.full((140, 120, 3), 90, dtype=np.uint8)
        crops = extract_regions(frame, face_landmarks())
        for crop in crops.values():
            assert np.all(crop == 90)

    def test_landmarks_outside_frame_degenerate(self):
        lm = face_landmarks()
        shifted = LandmarkSet(points=lm.points + 1000.0)
        frame = np.zeros((140, 120, 3), dtype=np.uint8)
        with pytest.raises(DataError) as exc:
            extract_regions(frame, shifted)
        assert exc.value.code == "degenerate-region"

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        frame = rng.integers(0, 256, size=(140, 120, 3)).astype(np.uint8)
        lm = face_landmarks()
        a = extract_regions(frame, lm)
        b = extract_regions(frame, lm)
        for name in a:
            assert np.array_equal(a[name], b[name])


class TestAssembleRoi:
    def test_output_is_always_64x64(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            regions = {
                "cheek_a": rng.integers(0, 256, size=(rng.integers(5, 40), rng.integers(5, 40), 3)).astype(np.uint8),
                "cheek_b": rng.integers(0, 256, size=(rng.integers(5, 40), rng.integers(5, 40), 3)).astype(np.uint8),
                "forehead": rng.integers(0, 256, size=(rng.integers(5, 30), rng.integers(5, 60), 3)).astype(np.uint8),
            }
            assert assemble_roi(regions).shape == (64, 64, 3)

    def test_taller_cheek_is_downsized(self):
        # distinct-color bands expose the geometry: 20 px cheek_a vs 30 px
        # cheek_b means cheek_b shrinks, never cheek_a growing
        regions = {
            "cheek_a": np.full((20, 30, 3), RED, dtype=np.uint8),
            "cheek_b": np.full((30, 25, 3), GREEN, dtype=np.uint8),
            "forehead": np.full((10, 40, 3), BLUE, dtype=np.uint8),
        }
        out = assemble_roi(regions)
        # composite is 30 rows of forehead+cheeks scaled to 64: seam at 64*10/30
        seam_y = 64 * 10 / 30
        seam_x = 64 * 30 / 55
        assert tuple(out[int(seam_y // 2), 32]) == BLUE
        assert tuple(out[int((seam_y + 64) // 2), int(seam_x // 2)]) == RED
        assert tuple(out[int((seam_y + 64) // 2), int((seam_x + 64) // 2)]) == GREEN

    def test_uniform_regions_give_uniform_output(self):
        regions = {
            name: np.full((h, w, 3), 123, dtype=np.uint8)
            for name, (h, w) in [("cheek_a", (12, 20)), ("cheek_b", (18, 22)), ("forehead", (9, 30))]
        }
        out = assemble_roi(regions)
        assert out.shape == (64, 64, 3)
        assert np.all(out == 123)

    def test_solid_color_composite_stays_solid(self):
        regions = {
            name: np.full((h, w, 3), (44, 99, 188), dtype=np.uint8)
            for name, (h, w) in [("cheek_a", (20, 30)), ("cheek_b", (30, 25)), ("forehead", (10, 40))]
        }
        out = assemble_roi(regions)
        values = {tuple(px) for px in out.reshape(-1, 3)}
        assert values == {(44, 99, 188)}

    def test_tiny_region_rejected(self):
        regions = {
            "cheek_a": np.full((1, 30, 3), 10, dtype=np.uint8),
            "cheek_b": np.full((30, 25, 3), 10, dtype=np.uint8),
            "forehead": np.full((10, 40, 3), 10, dtype=np.uint8),
        }
        with pytest.raises(DataError) as exc:
            assemble_roi(regions)
        assert exc.value.code == "degenerate-region"


class TestRoiClip:
    def test_per_frame_assembly(self):
        lm = face_landmarks()
        rng = np.random.default_rng(4)
        data = rng.integers(0, 256, size=(3, 140, 120, 3)).astype(np.uint8)
        clip = Clip(data, fps=30.0)
        out = roi_clip(clip, [lm, lm, lm])
        assert out.data.shape == (3, 64, 64, 3)
        for i in range(3):
            assert np.array_equal(out.frame(i), roi_frame(data[i], lm))

    def test_landmark_count_mismatch(self):
        lm = face_landmarks()
        clip = Clip(np.zeros((3, 140, 120, 3), dtype=np.uint8), fps=30.0)
        with pytest.raises(DataError) as exc:
            roi_clip(clip, [lm, lm])
        assert exc.value.code == "frame-count-mismatch"
