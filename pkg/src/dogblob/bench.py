"""Runtime-scaling benchmarks for the convolution backends.

Each record times the detection core (convolve, difference, extrema) on one
parameter point, excluding scene generation, kernel-bank construction, disk
I/O, and overlap pruning, so the two backends are compared on the work that
actually differs between them. Warmup runs populate plan caches and are not
counted. Medians over the timed repetitions are reported because desk
machines share their cores with other tenants; run benchmarks single-tenant.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass

import numpy as np

from .convolve import convolve_bank, fft_forward_plan
from .detector import DetectionParams, dog_stack, find_extrema
from .scale_space import build_kernel_bank, build_ladder

__all__ = ["BenchRecord", "time_detection_core", "sweep_n_bin", "sweep_max_sigma",
           "write_bench_csv"]


@dataclass(frozen=True)
class BenchRecord:
    backend: str
    n_bin: int
    max_sigma: float
    width: int
    height: int
    warmup_runs: int
    timed_runs: int
    median_ms: float
    p10_ms: float
    p90_ms: float
    hardware: str


def _hardware_descriptor() -> str:
    return f"{platform.machine()}/{platform.processor() or 'unknown'}/py{platform.python_version()}"


def time_detection_core(
    img: np.ndarray,
    params: DetectionParams,
    reps: int,
    warmup: int = 1,
) -> BenchRecord:
    """Median/percentile wall time of convolve -> dog -> extrema."""
    if reps < 3:
        raise ValueError(f"timed_runs must be >= 3, got {reps}")
    if warmup < 1:
        raise ValueError(f"warmup must be >= 1, got {warmup}")
    ladder = build_ladder(params.min_sigma, params.max_sigma, params.n_bin)
    bank = build_kernel_bank(ladder, params.truncate)
    plan = None
    if params.backend == "fft":
        plan = fft_forward_plan(img.shape[1], img.shape[0], bank.max_width)
        plan.kernel_spectra(bank)  # spectra are amortized state, not per-image work

    def run_once() -> float:
        t0 = time.perf_counter()
        stack = convolve_bank(img, bank, backend=params.backend, plan=plan)
        dog = dog_stack(stack, ladder)
        find_extrema(dog, params.threshold, params.neighborhood)
        return (time.perf_counter() - t0) * 1e3

    for _ in range(warmup):
        run_once()
    times = np.array([run_once() for _ in range(reps)])
    return BenchRecord(
        backend=params.backend,
        n_bin=params.n_bin,
        max_sigma=params.max_sigma,
        width=img.shape[1],
        height=img.shape[0],
        warmup_runs=warmup,
        timed_runs=reps,
        median_ms=float(np.median(times)),
        p10_ms=float(np.percentile(times, 10)),
        p90_ms=float(np.percentile(times, 90)),
        hardware=_hardware_descriptor(),
    )


def sweep_n_bin(
    backend: str,
    n_bins,
    fixed: DetectionParams,
    img: np.ndarray,
    reps: int = 3,
    warmup: int = 1,
) -> list[BenchRecord]:
    """One record per ladder density at fixed sigma range and image."""
    records = []
    for n_bin in n_bins:
        params = DetectionParams(
            min_sigma=fixed.min_sigma,
            max_sigma=fixed.max_sigma,
            n_bin=int(n_bin),
            truncate=fixed.truncate,
            threshold=fixed.threshold,
            neighborhood=fixed.neighborhood,
            backend=backend,
            prune=False,
        )
        records.append(time_detection_core(img, params, reps, warmup))
    return records


def sweep_max_sigma(
    backend: str,
    max_sigmas,
    fixed: DetectionParams,
    img: np.ndarray,
    reps: int = 3,
    warmup: int = 1,
) -> list[BenchRecord]:
    """One record per kernel-width ceiling at fixed ladder density and image."""
    records = []
    for max_sigma in max_sigmas:
        params = DetectionParams(
            min_sigma=fixed.min_sigma,
            max_sigma=float(max_sigma),
            n_bin=fixed.n_bin,
            truncate=fixed.truncate,
            threshold=fixed.threshold,
            neighborhood=fixed.neighborhood,
            backend=backend,
            prune=False,
        )
        records.append(time_detection_core(img, params, reps, warmup))
    return records


def write_bench_csv(path, records) -> None:
    with open(path, "w") as f:
        f.write(
            "backend,n_bin,max_sigma,width,height,warmup_runs,timed_runs,"
            "median_ms,p10_ms,p90_ms,hardware\n"
        )
        for r in records:
            f.write(
                f"{r.backend},{r.n_bin},{r.max_sigma!r},{r.width},{r.height},"
                f"{r.warmup_runs},{r.timed_runs},{r.median_ms!r},{r.p10_ms!r},"
                f"{r.p90_ms!r},{r.hardware}\n"
            )
