import numpy as np
import pytest
from scipy import ndimage

from dogblob import build_kernel_bank, build_ladder, convolve_bank, fft_forward_plan


@pytest.fixture(scope="module")
def small_bank():
    return build_kernel_bank(build_ladder(1.0, 4.0, 3))


class TestConvolveBank:
    def test_constant_image_all_levels_constant(self, small_bank):
        img = np.full((33, 47), 0.42, dtype=np.float32)
        for backend in ("direct", "fft"):
            stack = convolve_bank(img, small_bank, backend)
            assert stack.n_levels == 4
            assert np.allclose(stack.levels, 0.42, atol=1e-5), backend

    def test_impulse_reproduces_kernel(self):
        bank = build_kernel_bank(build_ladder(1.0, 2.0, 1))
        img = np.zeros((41, 41), dtype=np.float32)
        img[20, 20] = 1.0
        r = int(bank.radii[0])
        c = bank.max_width // 2
        expected = bank.kernels[0, c - r : c + r + 1, c - r : c + r + 1]
        for backend in ("direct", "fft"):
            stack = convolve_bank(img, bank, backend, dtype=np.float64)
            got = stack.levels[0, 20 - r : 20 + r + 1, 20 - r : 20 + r + 1]
            assert np.allclose(got, expected, atol=1e-12), backend

    def test_backend_equivalence_float32(self, small_bank):
        rng = np.random.default_rng(21)
        img = rng.random((64, 64)).astype(np.float32)
        direct = convolve_bank(img, small_bank, "direct")
        fft = convolve_bank(img, small_bank, "fft")
        assert direct.levels.dtype == np.float32
        assert np.abs(direct.levels - fft.levels).max() < 1e-4

    def test_backend_equivalence_float64(self, small_bank):
        rng = np.random.default_rng(22)
        img = rng.random((64, 64))
        direct = convolve_bank(img, small_bank, "direct", dtype=np.float64)
        fft = convolve_bank(img, small_bank, "fft", dtype=np.float64)
        assert np.abs(direct.levels - fft.levels).max() < 1e-9

    def test_matches_scipy_reflect_convolution(self, small_bank):
        # independent implementation of the same boundary and kernel semantics
        rng = np.random.default_rng(23)
        img = rng.random((40, 40))
        stack = convolve_bank(img, small_bank, "direct", dtype=np.float64)
        for i in range(small_bank.ladder.n_levels)[:2]:
            r = int(small_bank.radii[i])
            c = small_bank.max_width // 2
            kernel = small_bank.kernels[i, c - r : c + r + 1, c - r : c + r + 1]
            ref = ndimage.correlate(img, kernel, mode="reflect")
            assert np.abs(stack.levels[i] - ref).max() < 1e-12

    def test_linearity(self, small_bank):
        rng = np.random.default_rng(24)
        a, b = 1.7, -0.6
        img1 = rng.random((32, 32))
        img2 = rng.random((32, 32))
        s1 = convolve_bank(img1, small_bank, "fft", dtype=np.float64).levels
        s2 = convolve_bank(img2, small_bank, "fft", dtype=np.float64).levels
        s12 = convolve_bank(a * img1 + b * img2, small_bank, "fft", dtype=np.float64).levels
        assert np.abs(s12 - (a * s1 + b * s2)).max() < 1e-10

    def test_kernel_wider_than_image_still_matches(self):
        # periodic symmetric extension must stay exact when the kernel
        # footprint exceeds the transform period
        bank = build_kernel_bank(build_ladder(5.0, 10.0, 1))
        rng = np.random.default_rng(25)
        img = rng.random((32, 32))
        direct = convolve_bank(img, bank, "direct", dtype=np.float64)
        fft = convolve_bank(img, bank, "fft", dtype=np.float64)
        assert np.abs(direct.levels - fft.levels).max() < 1e-9
        r = int(bank.radii[1])
        c = bank.max_width // 2
        kernel = bank.kernels[1, c - r : c + r + 1, c - r : c + r + 1]
        ref = ndimage.correlate(img, kernel, mode="reflect")
        assert np.abs(fft.levels[1] - ref).max() < 1e-9

    def test_rejects_unknown_backend(self, small_bank):
        with pytest.raises(ValueError, match="backend"):
            convolve_bank(np.ones((4, 4)), small_bank, "gpu")

    def test_rejects_empty_image(self, small_bank):
        with pytest.raises(ValueError):
            convolve_bank(np.ones((0, 4)), small_bank, "fft")

    def test_stack_element_cap(self, small_bank):
        img = np.ones((64, 64), dtype=np.float32)
        with pytest.raises(ValueError, match="cap"):
            convolve_bank(img, small_bank, "fft", stack_element_cap=1000)


class TestFftPlan:
    def test_padded_size_covers_linear_convolution(self):
        plan = fft_forward_plan(1000, 1000, 21)
        assert plan.padded_shape[0] >= 1000 + 21 - 1
        assert plan.padded_shape[1] >= 1000 + 21 - 1

    def test_dc_bin_equals_kernel_sum(self, small_bank):
        plan = fft_forward_plan(64, 64, small_bank.max_width)
        spectra = plan.kernel_spectra(small_bank, np.float64)
        for i in range(small_bank.ladder.n_levels):
            assert spectra[i][0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_spectra_cached_per_bank(self, small_bank):
        plan = fft_forward_plan(64, 64, small_bank.max_width)
        first = plan.kernel_spectra(small_bank)
        second = plan.kernel_spectra(small_bank)
        assert first is second  # one allocation, reused across images

    def test_shared_plan_reused_across_images(self, small_bank):
        rng = np.random.default_rng(31)
        plan = fft_forward_plan(48, 48, small_bank.max_width)
        outs = [
            convolve_bank(rng.random((48, 48)).astype(np.float32), small_bank, "fft", plan=plan)
            for _ in range(3)
        ]
        assert len(plan._spectra) == 1
        for out in outs:
            assert out.levels.shape == (4, 48, 48)

    def test_plan_shape_mismatch_rejected(self, small_bank):
        plan = fft_forward_plan(48, 48, small_bank.max_width)
        with pytest.raises(ValueError, match="plan"):
            convolve_bank(np.ones((32, 32)), small_bank, "fft", plan=plan)

    def test_concurrent_convolutions_share_plan_safely(self, small_bank):
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(32)
        img = rng.random((48, 48)).astype(np.float32)
        plan = fft_forward_plan(48, 48, small_bank.max_width)
        with ThreadPoolExecutor(4) as pool:
            results = list(
                pool.map(
                    lambda _: convolve_bank(img, small_bank, "fft", plan=plan).levels,
                    range(8),
                )
            )
        for r in results[1:]:
            assert np.array_equal(r, results[0])
