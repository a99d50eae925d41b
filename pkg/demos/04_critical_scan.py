"""Locate the square-lattice Ising point from wrapping-probability crossings.

Small sizes and short chains, so expect agreement to a couple of percent
with the self-dual value p = sqrt(2)/(1+sqrt(2)).
"""
import numpy as np

from rclocality.critical import LatticeFamily, refine_scan
from rclocality.sampler import ChainConfig

est = refine_scan(LatticeFamily(2, 2), [8, 16, 24], 2.0, np.arange(0.52, 0.651, 0.02),
                  ChainConfig("swendsen_wang", sweeps=1500, burn_in=100, seed=1), fine_points=7)
for N, c in sorted(est.curves.items()):
    i = np.argmin(abs(c.p - est.p_c_hat))
    print(f"N={N:3d}  wrap({c.p[i]:.4f}) = {c.mean[i]:.3f} +- {c.stderr[i]:.3f}")
print(f"p_c ~ {est.p_c_hat:.4f} +- {est.ci_halfwidth:.4f}   (self-dual {np.sqrt(2) / (1 + np.sqrt(2)):.4f})")
print(f"beta_c ~ {est.beta_c_hat:.4f}")
