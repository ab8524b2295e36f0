"""The sigma ladder and the padded Gaussian kernel bank.

A detector that recognizes radii from r_min to r_max needs scales from
r_min/sqrt(2) to r_max/sqrt(2). The bank samples one Gaussian per ladder
step, truncated at five standard deviations, and zero-pads everything to the
width of the largest kernel so both convolution backends see identical input.
"""

import math

import numpy as np

from dogblob import build_kernel_bank, build_ladder

r_min, r_max = 3.0, 20.0
ladder = build_ladder(r_min / math.sqrt(2), r_max / math.sqrt(2), n_bin=12)
bank = build_kernel_bank(ladder, truncate=5.0)

print(f"ladder: {ladder.n_levels} scales, delta_sigma={ladder.delta_sigma:.3f}")
print(f"bank:   max_width={bank.max_width} (every kernel stored at this width)\n")

print(f"{'sigma':>7} {'radius_px':>9} {'width':>6} {'kernel sum':>11} {'center value':>13}")
c = bank.max_width // 2
for sigma, radius, kernel in zip(ladder.sigmas, bank.radii, bank.kernels):
    print(
        f"{sigma:7.3f} {int(radius):9d} {2 * int(radius) + 1:6d} "
        f"{kernel.sum():11.6f} {kernel[c, c]:13.6g}"
    )

wide = bank.kernels[-1]
print(f"\nwidest kernel: {wide.shape[0]}x{wide.shape[1]}, "
      f"mass within its support: {wide.sum():.9f}")
print("90-degree rotation symmetric:", np.allclose(wide, np.rot90(wide)))
