"""Synthetic droplet scenes with ground truth for evaluation.

Scenes contain rendered spheres (shading follows the spherical cap profile
v(d) = sqrt(1 - (d/r)^2), antialiased at the rim by subpixel area coverage)
plus optional shot and read noise: Poisson sampling of the photon count
followed by additive Gaussian noise, which mirrors a camera's noise chain.
Everything is deterministic in the seed so scenes can be regenerated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GroundTruthCircle",
    "Scene",
    "render_disk",
    "render_scene",
    "add_noise",
    "write_truth_csv",
    "read_truth_csv",
]

SUPERSAMPLE = 4  # subpixel grid per axis for rim antialiasing
PLACEMENT_ATTEMPTS = 2000  # per sphere, when overlap is disallowed


@dataclass(frozen=True)
class GroundTruthCircle:
    x: float
    y: float
    r: float


@dataclass(frozen=True)
class Scene:
    image: np.ndarray = field(repr=False)
    truths: tuple[GroundTruthCircle, ...]
    seed: int
    noise_params: dict | None = None


def _subpixel_offsets() -> np.ndarray:
    # pixel center at integer coordinate; samples cover [-0.5, 0.5)
    return (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5


def _paint_sphere(img: np.ndarray, cx: float, cy: float, r: float, peak: float) -> None:
    h, w = img.shape
    y0 = max(int(np.floor(cy - r - 1)), 0)
    y1 = min(int(np.ceil(cy + r + 1)) + 1, h)
    x0 = max(int(np.floor(cx - r - 1)), 0)
    x1 = min(int(np.ceil(cx + r + 1)) + 1, w)
    if y0 >= y1 or x0 >= x1:
        return
    off = _subpixel_offsets()
    ys = (np.arange(y0, y1)[:, None] + off[None, :]).reshape(-1)  # (ny*S,)
    xs = (np.arange(x0, x1)[:, None] + off[None, :]).reshape(-1)
    dy2 = (ys - cy) ** 2
    dx2 = (xs - cx) ** 2
    d2 = dy2[:, None] + dx2[None, :]
    prof = peak * np.sqrt(np.clip(1.0 - d2 / (r * r), 0.0, None))
    ny, nx = y1 - y0, x1 - x0
    patch = prof.reshape(ny, SUPERSAMPLE, nx, SUPERSAMPLE).mean(axis=(1, 3))
    np.maximum(img[y0:y1, x0:x1], patch.astype(img.dtype), out=img[y0:y1, x0:x1])


def render_disk(
    width: int, height: int, cx: float, cy: float, r: float
) -> np.ndarray:
    """Flat unit-intensity disk, antialiased at the rim by area coverage."""
    img = np.zeros((height, width), dtype=np.float32)
    off = _subpixel_offsets()
    y0 = max(int(np.floor(cy - r - 1)), 0)
    y1 = min(int(np.ceil(cy + r + 1)) + 1, height)
    x0 = max(int(np.floor(cx - r - 1)), 0)
    x1 = min(int(np.ceil(cx + r + 1)) + 1, width)
    ys = (np.arange(y0, y1)[:, None] + off[None, :]).reshape(-1)
    xs = (np.arange(x0, x1)[:, None] + off[None, :]).reshape(-1)
    d2 = (ys - cy)[:, None] ** 2 + (xs - cx)[None, :] ** 2
    inside = (d2 <= r * r).astype(np.float32)
    ny, nx = y1 - y0, x1 - x0
    img[y0:y1, x0:x1] = inside.reshape(ny, SUPERSAMPLE, nx, SUPERSAMPLE).mean(axis=(1, 3))
    return img


def render_scene(
    width: int,
    height: int,
    n_spheres: int,
    r_range: tuple[float, float],
    seed: int,
    allow_overlap: bool = False,
    peak: float = 1.0,
) -> Scene:
    """Render a noise-free scene of shaded spheres with known circles.

    When allow_overlap is false, centers are rejection-sampled until every
    pair is separated by more than r_i + r_j + 2 pixels; placement failure
    after a bounded number of attempts raises rather than looping forever.
    """
    r_min, r_max = r_range
    if r_min <= 0 or r_max < r_min:
        raise ValueError(f"bad radius range {r_range}")
    if n_spheres < 0:
        raise ValueError("n_spheres must be >= 0")
    if min(width, height) < 2 * r_max + 3:
        raise ValueError(f"radius {r_max} cannot fit inside {width}x{height}")

    rng = np.random.default_rng(seed)
    img = np.zeros((height, width), dtype=np.float32)
    placed: list[GroundTruthCircle] = []
    for i in range(n_spheres):
        for _ in range(PLACEMENT_ATTEMPTS):
            r = float(rng.uniform(r_min, r_max))
            # keep the full antialiased footprint inside the frame
            cx = float(rng.uniform(r + 1, width - 1 - r - 1))
            cy = float(rng.uniform(r + 1, height - 1 - r - 1))
            if allow_overlap or all(
                np.hypot(cx - t.x, cy - t.y) > r + t.r + 2 for t in placed
            ):
                placed.append(GroundTruthCircle(x=cx, y=cy, r=r))
                break
        else:
            raise RuntimeError(
                f"could not place sphere {i + 1}/{n_spheres} without overlap "
                f"after {PLACEMENT_ATTEMPTS} attempts"
            )
    for t in placed:
        _paint_sphere(img, t.x, t.y, t.r, peak)
    return Scene(image=img, truths=tuple(placed), seed=seed, noise_params=None)


def add_noise(
    scene: Scene,
    poisson_scale: float = 255.0,
    gaussian_sigma: float = 0.01,
    seed: int = 0,
) -> Scene:
    """Apply shot noise then read noise, clamped at zero.

    Each pixel v becomes Poisson(poisson_scale * v) / poisson_scale plus
    Normal(0, gaussian_sigma). poisson_scale is the photon count per unit
    intensity, so large values approach the noise-free image.
    """
    if poisson_scale <= 0:
        raise ValueError("poisson_scale must be > 0")
    if gaussian_sigma < 0:
        raise ValueError("gaussian_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    lam = np.clip(scene.image.astype(np.float64), 0, None) * poisson_scale
    noisy = rng.poisson(lam).astype(np.float64) / poisson_scale
    if gaussian_sigma > 0:
        noisy += rng.normal(0.0, gaussian_sigma, size=noisy.shape)
    noisy = np.clip(noisy, 0.0, None).astype(np.float32)
    return replace(
        scene,
        image=noisy,
        noise_params={"poisson_scale": float(poisson_scale), "gaussian_sigma": float(gaussian_sigma)},
    )


def write_truth_csv(path, scene: Scene) -> None:
    with open(path, "w") as f:
        f.write(f"# seed={scene.seed}\n")
        f.write("x,y,r\n")
        for t in scene.truths:
            f.write(f"{t.x!r},{t.y!r},{t.r!r}\n")


def read_truth_csv(path) -> tuple[GroundTruthCircle, ...]:
    truths = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x,"):
                continue
            x, y, r = (float(v) for v in line.split(","))
            truths.append(GroundTruthCircle(x=x, y=y, r=r))
    return tuple(truths)
