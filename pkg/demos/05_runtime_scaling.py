"""Why the FFT backend exists: runtime vs max_sigma.

Direct spatial convolution costs O(H * W * width^2) per level, so doubling
the largest sigma roughly quadruples its bill. The FFT backend's transform
size is fixed by the image alone, so its cost is flat in max_sigma and only
creeps up with the number of scales. Past small kernels there is no contest.
"""

from dogblob import DetectionParams, render_scene, sweep_max_sigma, sweep_n_bin

img = render_scene(384, 384, 25, (3.0, 12.0), seed=5).image
fixed = DetectionParams(min_sigma=1.0, n_bin=8, prune=False)

print("max_sigma sweep at n_bin=8, 384x384 (median ms of 3 runs):")
print(f"{'max_sigma':>10} {'direct':>10} {'fft':>10}")
sweep = (4.0, 8.0, 16.0, 24.0)
direct = sweep_max_sigma("direct", sweep, fixed, img, reps=3)
fft = sweep_max_sigma("fft", sweep, fixed, img, reps=3)
for d, f in zip(direct, fft):
    print(f"{d.max_sigma:10.0f} {d.median_ms:10.1f} {f.median_ms:10.1f}")

print("\nn_bin sweep at max_sigma=8 (median ms of 3 runs):")
print(f"{'n_bin':>10} {'direct':>10} {'fft':>10}")
fixed_sig = DetectionParams(min_sigma=1.0, max_sigma=8.0, prune=False)
dn = sweep_n_bin("direct", (4, 8, 16), fixed_sig, img, reps=3)
fn = sweep_n_bin("fft", (4, 8, 16), fixed_sig, img, reps=3)
for d, f in zip(dn, fn):
    print(f"{d.n_bin:10d} {d.median_ms:10.1f} {f.median_ms:10.1f}")

print("\n(benchmarks are single-run medians; run single-tenant for stable numbers)")
