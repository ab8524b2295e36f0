"""Sigma ladder and Gaussian kernel bank construction.

The detector samples scale space on an arithmetic ladder of n_bin + 1
standard deviations from min_sigma to max_sigma. Each scale gets an isotropic
2-D Gaussian sampled on the integer grid out to `truncate` standard
deviations and normalized to unit sum; all kernels in a bank are zero-padded
to the width of the largest so both convolution backends consume identical
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SigmaLadder", "KernelBank", "build_ladder", "build_kernel_bank"]

# widest kernel a bank will materialize; guards pathological sigma/truncate
DEFAULT_MAX_WIDTH_CAP = 4097


@dataclass(frozen=True)
class SigmaLadder:
    """Arithmetic progression of n_bin + 1 scales from min_sigma to max_sigma."""

    min_sigma: float
    max_sigma: float
    n_bin: int
    sigmas: np.ndarray = field(repr=False)
    delta_sigma: float

    @property
    def n_levels(self) -> int:
        return self.n_bin + 1


@dataclass(frozen=True)
class KernelBank:
    """Discretized Gaussian family over a ladder, padded to a common width.

    kernels has shape (n_bin + 1, max_width, max_width); radii[i] is the true
    support radius ceil(truncate * sigma_i) of kernel i inside its zero frame.
    """

    ladder: SigmaLadder
    truncate: float
    kernels: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    max_width: int


def build_ladder(min_sigma: float, max_sigma: float, n_bin: int) -> SigmaLadder:
    """Build the scale ladder sigma_i = min_sigma + i * delta, delta = (max-min)/n_bin."""
    if not min_sigma > 0:
        raise ValueError(f"min_sigma must be > 0, got {min_sigma}")
    if max_sigma < min_sigma:
        raise ValueError(f"max_sigma {max_sigma} < min_sigma {min_sigma}")
    if n_bin < 1:
        raise ValueError(f"n_bin must be >= 1, got {n_bin}")
    if max_sigma == min_sigma:
        # a flat ladder admits no adjacent difference, so no scale can be selected
        raise ValueError("degenerate ladder: max_sigma == min_sigma")
    sigmas = np.linspace(min_sigma, max_sigma, n_bin + 1)
    delta = (max_sigma - min_sigma) / n_bin
    return SigmaLadder(
        min_sigma=float(min_sigma),
        max_sigma=float(max_sigma),
        n_bin=int(n_bin),
        sigmas=sigmas,
        delta_sigma=float(delta),
    )


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Unit-sum isotropic Gaussian sampled on the (2*radius+1)^2 integer grid."""
    coords = np.arange(-radius, radius + 1, dtype=np.float64)
    g1 = np.exp(-(coords * coords) / (2.0 * sigma * sigma))
    k = np.outer(g1, g1)
    return k / k.sum()


def build_kernel_bank(
    ladder: SigmaLadder,
    truncate: float = 5.0,
    max_width_cap: int = DEFAULT_MAX_WIDTH_CAP,
) -> KernelBank:
    """Sample one Gaussian per ladder scale and pad all to a common width.

    radius_i = ceil(truncate * sigma_i) so the support always covers the
    requested number of standard deviations; width_i = 2 * radius_i + 1 keeps
    each Gaussian centered on its kernel midpoint.
    """
    if not truncate > 0:
        raise ValueError(f"truncate must be > 0, got {truncate}")
    radii = np.array([math.ceil(truncate * s) for s in ladder.sigmas], dtype=np.int64)
    max_radius = int(radii.max())
    max_width = 2 * max_radius + 1
    if max_width > max_width_cap:
        raise ValueError(
            f"kernel width {max_width} exceeds cap {max_width_cap} "
            f"(max_sigma={ladder.max_sigma}, truncate={truncate})"
        )
    kernels = np.zeros((ladder.n_levels, max_width, max_width), dtype=np.float64)
    for i, (sigma, radius) in enumerate(zip(ladder.sigmas, radii)):
        k = gaussian_kernel(float(sigma), int(radius))
        lo = max_radius - int(radius)
        hi = max_radius + int(radius) + 1
        kernels[i, lo:hi, lo:hi] = k
    kernels.setflags(write=False)
    radii.setflags(write=False)
    return KernelBank(
        ladder=ladder,
        truncate=float(truncate),
        kernels=kernels,
        radii=radii,
        max_width=max_width,
    )
