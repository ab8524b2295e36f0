"""Scale-space Difference-of-Gaussians droplet detector.

Detects bright circular blobs in grayscale imagery across a ladder of scales,
with interchangeable direct-spatial and FFT convolution backends, a synthetic
scene generator with ground truth, VOC-style evaluation, runtime benchmarks,
and an HTTP analysis service for online per-frame use.
"""

from .images import (
    contrast_stretch,
    load_image,
    preprocess,
    read_raw,
    save_image,
    smooth,
    write_raw,
)
from .scale_space import KernelBank, SigmaLadder, build_kernel_bank, build_ladder
from .convolve import BACKENDS, FftPlan, ScaleStack, convolve_bank, fft_forward_plan
from .detector import (
    Blob,
    BlobSet,
    DetectionParams,
    DetectResult,
    Detector,
    DoGStack,
    RadiusHistogram,
    detect,
    dog_stack,
    find_extrema,
    histogram,
    log_reference_response,
    normalized_overlap,
    prune_overlaps,
)
from .synth import GroundTruthCircle, Scene, add_noise, render_disk, render_scene
from .evaluate import EvalReport, ParityStats, box_iou, match_voc, parity
from .bench import BenchRecord, sweep_max_sigma, sweep_n_bin

__version__ = "0.1.0"

__all__ = [
    "load_image",
    "save_image",
    "read_raw",
    "write_raw",
    "contrast_stretch",
    "smooth",
    "preprocess",
    "SigmaLadder",
    "KernelBank",
    "build_ladder",
    "build_kernel_bank",
    "ScaleStack",
    "FftPlan",
    "BACKENDS",
    "convolve_bank",
    "fft_forward_plan",
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
    "GroundTruthCircle",
    "Scene",
    "render_disk",
    "render_scene",
    "add_noise",
    "EvalReport",
    "ParityStats",
    "box_iou",
    "match_voc",
    "parity",
    "BenchRecord",
    "sweep_n_bin",
    "sweep_max_sigma",
    "__version__",
]
