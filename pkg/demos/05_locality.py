"""Exploratory: thick tori Z^2 x C_2n approaching Z^3 (q = 2).

This uses r = 2, below the range r >= 3 that the locality result covers.
It is a quick, low-statistics run; see the acceptance test for the full one.
"""
import numpy as np

from rclocality.critical import locality_table
from rclocality.sampler import ChainConfig

rows = locality_table(3, 2, 2.0, [1, 2], [8, 16, 24],
                      ChainConfig("swendsen_wang", sweeps=1500, burn_in=100, seed=3),
                      coarse_grid=np.arange(0.33, 0.501, 0.01), fine_points=7)
for r in rows:
    label = "Z^3 proxy" if r.n is None else f"n={r.n} (thickness {r.thickness})"
    print(f"{label:22s} p_c_hat={r.p_c_hat:.4f} +- {r.ci:.4f}")
