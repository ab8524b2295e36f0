"""The analysis service: post a frame, read back circles and timings.

Starts the HTTP service in-process, submits one synthetic frame the way an
acquisition loop would, and prints the response. The same bytes through the
CLI produce the identical blob list; the service adds the histogram and a
per-stage timing breakdown for monitoring.
"""

import json
import threading
import urllib.request
from pathlib import Path

from dogblob import DetectionParams, add_noise, images, render_scene
from dogblob.service import ServiceConfig, make_server

out_dir = Path(__file__).resolve().parent / "output"
out_dir.mkdir(exist_ok=True)

params = DetectionParams(min_sigma=2.5, max_sigma=15.0, n_bin=25)
server = make_server(ServiceConfig(host="127.0.0.1", port=0, params=params, workers=1))
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address[:2]
base = f"http://{host}:{port}"
print(f"service up at {base}")

with urllib.request.urlopen(f"{base}/healthz", timeout=10) as resp:
    print("health:", json.loads(resp.read())["status"])

frame = add_noise(render_scene(1000, 1000, 100, (4.0, 20.0), seed=9), seed=10)
frame_path = out_dir / "06_frame.png"
images.save_image(frame_path, frame.image)

req = urllib.request.Request(
    f"{base}/detect?name={frame_path.name}",
    data=frame_path.read_bytes(),
    headers={"Content-Type": "image/png"},
    method="POST",
)
with urllib.request.urlopen(req, timeout=120) as resp:
    doc = json.loads(resp.read())

print(f"\n{len(doc['blobs'])} blobs detected (truth: {len(frame.truths)})")
print("stage timings (ms):", doc["timing_ms"])
counts = doc["histogram"]["count"]
centers = doc["histogram"]["bin_center_px"]
busiest = max(range(len(counts)), key=counts.__getitem__)
print(f"busiest size bin: r~{centers[busiest]:.1f}px with {counts[busiest]} droplets")

# per-request overrides: a stricter threshold prunes weak candidates
req = urllib.request.Request(
    f"{base}/detect?threshold=0.3",
    data=frame_path.read_bytes(),
    headers={"Content-Type": "image/png"},
    method="POST",
)
with urllib.request.urlopen(req, timeout=120) as resp:
    strict = json.loads(resp.read())
print(f"with threshold=0.3: {len(strict['blobs'])} blobs")

server.shutdown()
server.server_close()
print("service stopped")
