"""Difference-of-Gaussians blob detection pipeline.

Stages: adjacent scale differencing with sigma normalization, 3-D max-filter
extrema extraction with a response threshold, overlap coalescing, and radius
histogramming. A blob of radius r responds most strongly at sigma = r / sqrt(2),
so detected scales map to radii through that relation.

Sign convention: slices are sigma_i * (L_i - L_{i+1}), narrower minus wider,
which is positive at the center of bright blobs on dark backgrounds. Bright
blobs therefore show up as maxima above the positive threshold and dark blobs
on light backgrounds are not reported.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field, replace, asdict

import numpy as np
from scipy import ndimage

from . import images
from .convolve import FftPlan, ScaleStack, convolve_bank, fft_forward_plan
from .scale_space import SigmaLadder, build_kernel_bank, build_ladder

__all__ = [
    "DoGStack",
    "Blob",
    "BlobSet",
    "RadiusHistogram",
    "DetectionParams",
    "DetectResult",
    "Detector",
    "dog_stack",
    "find_extrema",
    "prune_overlaps",
    "normalized_overlap",
    "histogram",
    "detect",
    "log_reference_response",
    "blobset_to_doc",
    "blobset_from_doc",
    "write_blobset_json",
    "read_blobset_json",
    "histogram_to_doc",
    "write_histogram_csv",
]

RADIUS_PER_SIGMA = math.sqrt(2.0)


@dataclass(frozen=True)
class DoGStack:
    """Sigma-scaled adjacent differences; slices[i] = sigmas[i] * (L_i - L_{i+1})."""

    slices: np.ndarray = field(repr=False)  # (n_bin, height, width)
    sigmas: np.ndarray = field(repr=False)  # the n_bin lower scales

    @property
    def n_slices(self) -> int:
        return self.slices.shape[0]


@dataclass(frozen=True)
class Blob:
    """One detected circle: integer-grid center, selected scale, DoG response."""

    x: int
    y: int
    sigma: float
    radius: float
    response: float
    at_scale_boundary: bool = False


@dataclass(frozen=True)
class DetectionParams:
    min_sigma: float = 1.0
    max_sigma: float = 10.0
    n_bin: int = 18
    truncate: float = 5.0
    threshold: float = 0.1
    overlap: float = 0.5
    neighborhood: int = 3
    backend: str = "fft"
    preprocess: bool = True
    smooth_sigma: float = 1.0
    saturation: float = 0.0035
    prune: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BlobSet:
    blobs: tuple[Blob, ...]
    source_shape: tuple[int, int]  # (width, height)
    params: DetectionParams

    def __len__(self) -> int:
        return len(self.blobs)


@dataclass(frozen=True)
class RadiusHistogram:
    """Blob counts and cubic volume weights per ladder radius bin."""

    bin_centers: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    volume_weights: np.ndarray = field(repr=False)


def dog_stack(stack: ScaleStack, ladder: SigmaLadder) -> DoGStack:
    """Adjacent differences scaled by the lower sigma of each pair."""
    if stack.n_levels != ladder.n_levels:
        raise ValueError(
            f"stack has {stack.n_levels} levels, ladder expects {ladder.n_levels}"
        )
    lower = ladder.sigmas[:-1]
    diffs = stack.levels[:-1] - stack.levels[1:]
    slices = diffs * lower[:, None, None].astype(stack.levels.dtype)
    return DoGStack(slices=slices, sigmas=lower)


def _coalesce_plateaus(mask_slice: np.ndarray, values: np.ndarray):
    """Merge connected equal-valued maxima in one slice to their centroid.

    The max-filter equality test flags every voxel of a flat plateau; adjacent
    flagged voxels necessarily share one value, so each 8-connected component
    is a single detection at the component centroid (rounded to the grid).
    """
    labels, n = ndimage.label(mask_slice, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return []
    out = []
    centroids = ndimage.center_of_mass(mask_slice, labels, range(1, n + 1))
    for lab, (cy, cx) in enumerate(centroids, start=1):
        ys, xs = np.nonzero(labels == lab)
        y = int(round(cy))
        x = int(round(cx))
        out.append((x, y, float(values[ys[0], xs[0]])))
    return out


def find_extrema(
    dog: DoGStack,
    threshold: float = 0.1,
    neighborhood: int = 3,
    source_shape: tuple[int, int] | None = None,
    params: DetectionParams | None = None,
) -> BlobSet:
    """Report voxels equal to the max of their n x n x n block and above threshold.

    Boundaries are padded with -inf so missing neighbors never disqualify a
    voxel. Blobs found in the first or last scale slice carry
    at_scale_boundary=True as a hint to widen the ladder.
    """
    if neighborhood < 1 or neighborhood % 2 == 0:
        raise ValueError(f"neighborhood must be odd and >= 1, got {neighborhood}")
    data = dog.slices
    filt = ndimage.maximum_filter(data, size=neighborhood, mode="constant", cval=-np.inf)
    mask = (data == filt) & (data > threshold)

    n_slices = dog.n_slices
    blobs = []
    for i in range(n_slices):
        if not mask[i].any():
            continue
        sigma = float(dog.sigmas[i])
        boundary = i == 0 or i == n_slices - 1
        for x, y, value in _coalesce_plateaus(mask[i], data[i]):
            blobs.append(
                Blob(
                    x=x,
                    y=y,
                    sigma=sigma,
                    radius=RADIUS_PER_SIGMA * sigma,
                    response=value,
                    at_scale_boundary=boundary,
                )
            )
    h, w = data.shape[1], data.shape[2]
    shape = source_shape if source_shape is not None else (w, h)
    return BlobSet(blobs=_sort_blobs(blobs), source_shape=shape, params=params or DetectionParams())


def _sort_blobs(blobs) -> tuple[Blob, ...]:
    # descending response, ties broken by (y, x, sigma) for determinism
    return tuple(sorted(blobs, key=lambda b: (-b.response, b.y, b.x, b.sigma)))


def disk_intersection_area(x1, y1, r1, x2, y2, r2) -> float:
    """Exact area of the intersection of two disks (circular lens formula)."""
    d = math.hypot(x2 - x1, y2 - y1)
    if d >= r1 + r2:
        return 0.0
    rmin = min(r1, r2)
    if d <= abs(r1 - r2):
        return math.pi * rmin * rmin
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
    s = 0.5 * math.sqrt(
        (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    )
    return a1 + a2 - s


def normalized_overlap(b1: Blob, b2: Blob) -> float:
    """Disk intersection area divided by the smaller disk's area."""
    inter = disk_intersection_area(b1.x, b1.y, b1.radius, b2.x, b2.y, b2.radius)
    rmin = min(b1.radius, b2.radius)
    if rmin <= 0:
        return 0.0
    return inter / (math.pi * rmin * rmin)


def _overlap_matrix(blobs) -> np.ndarray:
    xs = np.array([b.x for b in blobs], dtype=np.float64)
    ys = np.array([b.y for b in blobs], dtype=np.float64)
    rs = np.array([b.radius for b in blobs], dtype=np.float64)
    n = len(blobs)
    d = np.hypot(xs[:, None] - xs[None, :], ys[:, None] - ys[None, :])
    r1 = rs[:, None]
    r2 = rs[None, :]
    rmin = np.minimum(r1, r2)
    rmax = np.maximum(r1, r2)
    out = np.zeros((n, n))
    contained = d <= rmax - rmin
    out[contained] = 1.0
    partial = (~contained) & (d < r1 + r2) & (d > 0)
    if partial.any():
        dd = d[partial]
        p1 = np.broadcast_to(r1, d.shape)[partial]
        p2 = np.broadcast_to(r2, d.shape)[partial]
        a1 = p1 * p1 * np.arccos(np.clip((dd * dd + p1 * p1 - p2 * p2) / (2 * dd * p1), -1, 1))
        a2 = p2 * p2 * np.arccos(np.clip((dd * dd + p2 * p2 - p1 * p1) / (2 * dd * p2), -1, 1))
        s = 0.5 * np.sqrt(
            np.clip((-dd + p1 + p2) * (dd + p1 - p2) * (dd - p1 + p2) * (dd + p1 + p2), 0, None)
        )
        rm = np.minimum(p1, p2)
        out[partial] = (a1 + a2 - s) / (np.pi * rm * rm)
    np.fill_diagonal(out, 0.0)
    return out


def prune_overlaps(blobset: BlobSet, overlap_threshold: float = 0.5) -> BlobSet:
    """Coalesce blob pairs whose normalized overlap exceeds the threshold.

    Pairs are visited in descending-response order; the stronger blob keeps
    its center and response and the merged radius is the mean of the two.
    Passes repeat until no pair exceeds the threshold.
    """
    if not 0.0 <= overlap_threshold <= 1.0:
        raise ValueError(f"overlap threshold must be in [0, 1], got {overlap_threshold}")
    blobs = list(_sort_blobs(blobset.blobs))
    while len(blobs) > 1:
        ov = _overlap_matrix(blobs)
        iu = np.triu_indices(len(blobs), k=1)
        over = ov[iu] > overlap_threshold
        if not over.any():
            break
        # first offending pair in (i, j) order of the response-sorted list
        k = int(np.argmax(over))
        i, j = int(iu[0][k]), int(iu[1][k])
        strong, weak = blobs[i], blobs[j]
        new_radius = 0.5 * (strong.radius + weak.radius)
        merged = replace(
            strong,
            radius=new_radius,
            sigma=new_radius / RADIUS_PER_SIGMA,  # keep radius = sqrt(2) * sigma
            at_scale_boundary=strong.at_scale_boundary or weak.at_scale_boundary,
        )
        del blobs[j]
        blobs[i] = merged
        blobs = list(_sort_blobs(blobs))
    return BlobSet(blobs=tuple(blobs), source_shape=blobset.source_shape, params=blobset.params)


def histogram(blobset: BlobSet, ladder: SigmaLadder) -> RadiusHistogram:
    """Assign each blob to the nearest ladder radius bin (ties to the smaller).

    Bin centers are sqrt(2) * sigma_i for every ladder scale; volume weights
    accumulate (4/3) * pi * r^3 of the blobs landing in each bin.
    """
    centers = RADIUS_PER_SIGMA * ladder.sigmas
    counts = np.zeros(centers.size, dtype=np.int64)
    volumes = np.zeros(centers.size, dtype=np.float64)
    if len(blobset.blobs) > 0:
        radii = np.array([b.radius for b in blobset.blobs])
        midpoints = 0.5 * (centers[:-1] + centers[1:])
        # side="left": a radius exactly on a midpoint joins the lower bin
        idx = np.searchsorted(midpoints, radii, side="left")
        np.add.at(counts, idx, 1)
        np.add.at(volumes, idx, (4.0 / 3.0) * np.pi * radii**3)
    return RadiusHistogram(bin_centers=centers, counts=counts, volume_weights=volumes)


@dataclass(frozen=True)
class DetectResult:
    blobs: BlobSet
    histogram: RadiusHistogram
    timings_ms: dict


class Detector:
    """Reusable detection pipeline for a fixed parameter set.

    Holds the ladder, kernel bank, and per-shape FFT plans; all are immutable
    or append-only caches, so one Detector may serve many images concurrently.
    """

    def __init__(self, params: DetectionParams):
        self.params = params
        self.ladder = build_ladder(params.min_sigma, params.max_sigma, params.n_bin)
        self.bank = build_kernel_bank(self.ladder, params.truncate)
        self._plans: dict[tuple[int, int], FftPlan] = {}
        self._plan_lock = threading.Lock()

    def plan_for(self, shape: tuple[int, int]) -> FftPlan:
        plan = self._plans.get(shape)
        if plan is None:
            with self._plan_lock:
                plan = self._plans.get(shape)
                if plan is None:
                    plan = fft_forward_plan(shape[1], shape[0], self.bank.max_width)
                    self._plans[shape] = plan
        return plan

    def run(self, img: np.ndarray, dtype=np.float32) -> DetectResult:
        """Full pipeline with per-stage wall-clock timings in milliseconds."""
        p = self.params
        timings: dict[str, float] = {}

        t0 = time.perf_counter()
        if p.preprocess:
            img = images.preprocess(img, p.smooth_sigma, p.saturation)
        timings["preprocess_ms"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        plan = self.plan_for(img.shape) if p.backend == "fft" else None
        stack = convolve_bank(img, self.bank, backend=p.backend, dtype=dtype, plan=plan)
        timings["convolve_ms"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        dog = dog_stack(stack, self.ladder)
        shape = (img.shape[1], img.shape[0])
        blobs = find_extrema(dog, p.threshold, p.neighborhood, source_shape=shape, params=p)
        timings["extrema_ms"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        if p.prune:
            blobs = prune_overlaps(blobs, p.overlap)
        timings["prune_ms"] = (time.perf_counter() - t0) * 1e3

        hist = histogram(blobs, self.ladder)
        return DetectResult(blobs=blobs, histogram=hist, timings_ms=timings)


def detect(img: np.ndarray, params: DetectionParams) -> tuple[BlobSet, RadiusHistogram]:
    """One-shot detection; build a Detector directly to amortize setup."""
    result = Detector(params).run(img)
    return result.blobs, result.histogram


def log_reference_response(img: np.ndarray, sigma: float) -> np.ndarray:
    """Scale-normalized Laplacian-of-Gaussian response, the validation oracle.

    sigma^2 * Laplacian(G_sigma * img) via 5-point finite differences on the
    smoothed image with reflect boundary. Negative at the center of bright
    blobs; its magnitude there peaks when sigma matches radius / sqrt(2).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    img = np.asarray(img, dtype=np.float64)
    smoothed = ndimage.gaussian_filter(img, sigma, mode="reflect", truncate=5.0)
    padded = np.pad(smoothed, 1, mode="symmetric")
    lap = (
        padded[:-2, 1:-1]
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
        - 4.0 * padded[1:-1, 1:-1]
    )
    return sigma * sigma * lap


# --- serialization -----------------------------------------------------------


def blobset_to_doc(blobset: BlobSet, image_name: str = "image") -> dict:
    return {
        "image": image_name,
        "params": blobset.params.to_dict(),
        "blobs": [
            {
                "x": b.x,
                "y": b.y,
                "sigma": b.sigma,
                "radius": b.radius,
                "response": b.response,
                "at_scale_boundary": b.at_scale_boundary,
            }
            for b in blobset.blobs
        ],
    }


def blobset_from_doc(doc: dict) -> BlobSet:
    params = DetectionParams(**doc.get("params", {}))
    blobs = tuple(
        Blob(
            x=int(b["x"]),
            y=int(b["y"]),
            sigma=float(b["sigma"]),
            radius=float(b["radius"]),
            response=float(b["response"]),
            at_scale_boundary=bool(b.get("at_scale_boundary", False)),
        )
        for b in doc.get("blobs", [])
    )
    shape = tuple(doc.get("source_shape", (0, 0)))
    return BlobSet(blobs=blobs, source_shape=shape, params=params)


def write_blobset_json(path, blobset: BlobSet, image_name: str = "image") -> None:
    with open(path, "w") as f:
        json.dump(blobset_to_doc(blobset, image_name), f, indent=2)
        f.write("\n")


def read_blobset_json(path) -> BlobSet:
    with open(path) as f:
        return blobset_from_doc(json.load(f))


def histogram_to_doc(hist: RadiusHistogram) -> dict:
    return {
        "bin_center_px": [float(c) for c in hist.bin_centers],
        "count": [int(c) for c in hist.counts],
        "volume_weight": [float(v) for v in hist.volume_weights],
    }


def write_histogram_csv(path, hist: RadiusHistogram) -> None:
    with open(path, "w") as f:
        f.write("bin_center_px,count,volume_weight\n")
        for c, n, v in zip(hist.bin_centers, hist.counts, hist.volume_weights):
            f.write(f"{float(c)!r},{int(n)},{float(v)!r}\n")
