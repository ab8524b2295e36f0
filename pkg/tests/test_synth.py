import math

import numpy as np
import pytest

from dogblob import add_noise, render_disk, render_scene
from dogblob.synth import read_truth_csv, write_truth_csv


class TestRenderScene:
    def test_zero_spheres_black_image(self):
        scene = render_scene(64, 64, 0, (3.0, 5.0), seed=1)
        assert np.all(scene.image == 0.0)
        assert scene.truths == ()

    def test_single_sphere_profile(self):
        scene = render_scene(64, 64, 1, (10.0, 10.0), seed=2)
        t = scene.truths[0]
        assert t.r == 10.0
        cy, cx = int(round(t.y)), int(round(t.x))
        assert scene.image[cy, cx] == scene.image.max()
        assert scene.image.max() <= 1.0
        # zero outside the rim plus a one-pixel antialiasing band
        yy, xx = np.mgrid[: scene.image.shape[0], : scene.image.shape[1]]
        d = np.hypot(yy - t.y, xx - t.x)
        assert np.all(scene.image[d > t.r + 1.0] == 0.0)
        assert scene.image[cy, cx] > 0.9

    def test_deterministic_regeneration(self):
        a = render_scene(200, 200, 15, (3.0, 9.0), seed=42)
        b = render_scene(200, 200, 15, (3.0, 9.0), seed=42)
        assert np.array_equal(a.image, b.image)
        assert a.truths == b.truths
        c = render_scene(200, 200, 15, (3.0, 9.0), seed=43)
        assert not np.array_equal(a.image, c.image)

    def test_truths_inside_bounds(self):
        scene = render_scene(150, 100, 20, (2.0, 8.0), seed=3)
        for t in scene.truths:
            assert t.r + 1 <= t.x <= 149 - t.r - 1
            assert t.r + 1 <= t.y <= 99 - t.r - 1

    def test_non_overlap_separation(self):
        scene = render_scene(300, 300, 25, (4.0, 10.0), seed=4)
        ts = scene.truths
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                d = math.hypot(ts[i].x - ts[j].x, ts[i].y - ts[j].y)
                assert d > ts[i].r + ts[j].r + 2

    def test_allow_overlap_packs_tightly(self):
        scene = render_scene(80, 80, 60, (6.0, 12.0), seed=5, allow_overlap=True)
        assert len(scene.truths) == 60

    def test_impossible_packing_raises(self):
        with pytest.raises(RuntimeError, match="could not place"):
            render_scene(64, 64, 50, (10.0, 10.0), seed=6)

    def test_radius_too_large_rejected(self):
        with pytest.raises(ValueError):
            render_scene(32, 32, 1, (20.0, 20.0), seed=7)


class TestRenderDisk:
    def test_flat_interior_and_sharp_rim(self):
        img = render_disk(64, 64, 32.0, 32.0, 10.0)
        assert img[32, 32] == 1.0
        assert img[32, 32 + 5] == 1.0
        yy, xx = np.mgrid[:64, :64]
        d = np.hypot(yy - 32.0, xx - 32.0)
        assert np.all(img[d > 11.0] == 0.0)
        rim = img[(d > 9.0) & (d < 11.0)]
        assert ((rim > 0.0) & (rim < 1.0)).any()


class TestAddNoise:
    def test_large_poisson_scale_approaches_identity(self):
        scene = render_scene(128, 128, 10, (4.0, 9.0), seed=8)
        noisy = add_noise(scene, poisson_scale=1e6, gaussian_sigma=0.0, seed=9)
        mask = scene.image > 0.05
        rel = np.abs(noisy.image[mask] - scene.image[mask]) / scene.image[mask]
        assert rel.mean() < 0.01

    def test_zero_image_stays_zero_without_read_noise(self):
        scene = render_scene(32, 32, 0, (3.0, 4.0), seed=10)
        noisy = add_noise(scene, poisson_scale=255.0, gaussian_sigma=0.0, seed=11)
        assert np.all(noisy.image == 0.0)

    def test_clamped_gaussian_mean_matches_closed_form(self):
        # clamp(N(0, s), >=0) has mean s / sqrt(2*pi)
        scene = render_scene(256, 256, 0, (3.0, 4.0), seed=12)
        s = 0.05
        noisy = add_noise(scene, poisson_scale=1e9, gaussian_sigma=s, seed=13)
        expected = s / math.sqrt(2 * math.pi)
        assert noisy.image.mean() == pytest.approx(expected, rel=0.02)
        assert noisy.image.min() >= 0.0

    def test_deterministic_in_seed(self):
        scene = render_scene(64, 64, 5, (4.0, 8.0), seed=14)
        a = add_noise(scene, seed=15)
        b = add_noise(scene, seed=15)
        c = add_noise(scene, seed=16)
        assert np.array_equal(a.image, b.image)
        assert not np.array_equal(a.image, c.image)

    def test_records_noise_params(self):
        scene = render_scene(32, 32, 1, (4.0, 4.0), seed=17)
        noisy = add_noise(scene, poisson_scale=100.0, gaussian_sigma=0.02, seed=18)
        assert noisy.noise_params == {"poisson_scale": 100.0, "gaussian_sigma": 0.02}
        assert scene.noise_params is None

    def test_parameter_validation(self):
        scene = render_scene(32, 32, 0, (3.0, 4.0), seed=19)
        with pytest.raises(ValueError):
            add_noise(scene, poisson_scale=0.0)
        with pytest.raises(ValueError):
            add_noise(scene, gaussian_sigma=-1.0)


class TestTruthCsv:
    def test_round_trip_with_seed_header(self, tmp_path):
        scene = render_scene(100, 100, 7, (3.0, 8.0), seed=20)
        p = tmp_path / "truth.csv"
        write_truth_csv(p, scene)
        text = p.read_text()
        assert text.startswith("# seed=20\n")
        assert "x,y,r" in text
        back = read_truth_csv(p)
        assert back == scene.truths
