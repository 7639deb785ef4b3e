"""
Direct vs FFT correlation backends
==================================

Both backends compute the same score volume.  The spatial-domain backend is
the transparent reference; the frequency-domain one is the fast path.  At
tiny sizes the direct form can win on overhead, at the full working size
the FFT is the only practical choice.
"""
import time

import numpy as np

from bevloc.raster import Grid, GridSpec
from bevloc.solver import RotationStack, angle_grid, correlate_direct, correlate_fft

rng = np.random.default_rng(0)
print(f"{'tile':>6} {'obs':>5} {'K':>5} {'direct_ms':>11} {'fft_ms':>9} {'max_diff':>10}")
for tile_size, obs_size, k in ((16, 8, 4), (64, 32, 16), (128, 64, 64), (256, 128, 256)):
    stack = RotationStack(rng.standard_normal((2, k, obs_size, obs_size), dtype=np.float32),
                          angle_grid(k))
    tile = Grid(GridSpec(tile_size, tile_size, 0.5),
                (rng.random((2, tile_size, tile_size)) < 0.3).astype(np.float32))

    start = time.perf_counter()
    vol_d = correlate_direct(stack, tile)
    direct_ms = (time.perf_counter() - start) * 1000

    start = time.perf_counter()
    vol_f = correlate_fft(stack, tile)
    fft_ms = (time.perf_counter() - start) * 1000

    diff = float(np.abs(vol_d.data - vol_f.data).max())
    print(f"{tile_size:>6} {obs_size:>5} {k:>5} {direct_ms:>11.1f} {fft_ms:>9.1f} {diff:>10.2e}")
