"""End-to-end detection: scene in, circles and a size distribution out.

Renders a ground-truthed droplet scene, runs the full pipeline, and compares
the recovered radius histogram with the true one. The volume weights are what
downstream consumers care about: unburnt fuel scales with r^3.
"""

from pathlib import Path

import numpy as np

from dogblob import (
    DetectionParams,
    Detector,
    add_noise,
    match_voc,
    render_scene,
)
from dogblob.detector import write_blobset_json, write_histogram_csv

out_dir = Path(__file__).resolve().parent / "output"
out_dir.mkdir(exist_ok=True)

scene = add_noise(render_scene(1000, 1000, 100, (4.0, 20.0), seed=123), seed=124)

params = DetectionParams(min_sigma=2.5, max_sigma=15.0, n_bin=25, backend="fft")
det = Detector(params)
result = det.run(scene.image)

print(f"detected {len(result.blobs)} blobs (truth: {len(scene.truths)})")
for stage, ms in result.timings_ms.items():
    print(f"  {stage:>14}: {ms:8.1f}")

report = match_voc(result.blobs, scene.truths, iou_threshold=0.5)
print(f"precision={report.precision:.3f} recall={report.recall:.3f} "
      f"(tp={report.tp} fp={report.fp} fn={report.fn})")

print("\nstrongest 5 detections:")
for b in result.blobs.blobs[:5]:
    print(f"  ({b.x:4d},{b.y:4d}) r={b.radius:5.2f}px response={b.response:.3f}")

hist = result.histogram
true_radii = np.array([t.r for t in scene.truths])
step = hist.bin_centers[1] - hist.bin_centers[0]
print(f"\n{'bin r (px)':>10} {'count':>6} {'true':>6} {'volume':>12}")
for center, count, vol in zip(hist.bin_centers, hist.counts, hist.volume_weights):
    true_n = int(np.sum(np.abs(true_radii - center) <= 0.5 * step))
    print(f"{center:10.2f} {count:6d} {true_n:6d} {vol:12.1f}")
print(
    "(each detection is labeled with the lower scale of its DoG pair, so counts\n"
    " sit up to one bin below the true radius; sizes remain comparable across frames)"
)

write_blobset_json(out_dir / "03_blobs.json", result.blobs, image_name="demo_scene")
write_histogram_csv(out_dir / "03_histogram.csv", hist)
print(f"\nwrote {out_dir}/03_blobs.json and 03_histogram.csv")
