"""Finite-size estimates of the critical point from wrapping-probability crossings.

For every size ``N`` of a lattice family and every ``p`` on a grid, a chain
estimates ``R_N(p)``: the probability that some cluster winds around an
unbounded axis (averaged over those axes).  ``R_N`` is smoothed by weighted
isotonic regression, and each pair of sizes yields the ``p`` where the two
curves cross.  The estimate is the median pairwise crossing; its half-width
is the larger of the crossing spread and the propagated statistical error.

Each ``(size, p)`` cell is an independent chain with its own random stream
(chain index = cell index), so results do not depend on the worker count.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, isotonic_regression

from .exact import RcParams, couple_params
from .lattice import AxisSpec, InvalidSpecError, Lattice, OPEN, PERIODIC
from .observables import Wrapping
from .sampler import CHAYES_MACHTA, SWENDSEN_WANG, ChainConfig, sample_series
from .stats import EstimatorResult, binned_stats

WRAPPING_CROSSING = "wrapping_crossing"


class InconclusiveScanError(RuntimeError):
    """No crossing inside the grid; ``curves`` holds the measured data."""

    def __init__(self, message, curves=None):
        super().__init__(message)
        self.curves = curves


@dataclass(frozen=True)
class LatticeFamily:
    """``r`` periodic axes of length ``N`` times ``d - r`` transverse axes.

    ``thickness=None`` makes the transverse axes length ``N`` as well (the
    full torus).  With ``open_transverse`` the transverse axes are open boxes
    ``{0..thickness}`` (slabs).  Wrapping is measured along the first ``r``
    axes only.
    """

    d: int
    r: int
    thickness: int | None = None
    open_transverse: bool = False

    def __post_init__(self):
        if not 0 < self.r <= self.d:
            raise InvalidSpecError(f"need 0 < r <= d, got r={self.r}, d={self.d}")
        if self.open_transverse and self.thickness is None:
            raise InvalidSpecError("a slab needs a finite thickness")

    def lattice(self, N: int) -> Lattice:
        if self.open_transverse:
            trans = [AxisSpec(self.thickness + 1, OPEN)] * (self.d - self.r)
        else:
            t = N if self.thickness is None else self.thickness
            trans = [AxisSpec(t, PERIODIC)] * (self.d - self.r)
        return Lattice([AxisSpec(N, PERIODIC)] * self.r + trans)

    @property
    def wrap_axes(self) -> tuple:
        return tuple(range(self.r))

    def label(self) -> str:
        if self.thickness is None:
            return f"torus_d{self.d}"
        kind = "slab" if self.open_transverse else "thick"
        return f"{kind}_d{self.d}_r{self.r}_t{self.thickness}"


@dataclass
class Curve:
    N: int
    p: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    smoothed: np.ndarray = field(default=None)

    def monotone_violations(self) -> np.ndarray:
        """Size of each downward step in the raw curve, in units of its combined error."""
        drop = self.mean[:-1] - self.mean[1:]
        err = np.hypot(self.stderr[:-1], self.stderr[1:])
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(drop > 0, drop / np.maximum(err, 1e-300), 0.0)
        return z


@dataclass
class PcEstimate:
    p_c_hat: float
    ci_halfwidth: float
    method: str
    sizes: list
    q: float
    crossings: list
    curves: dict
    beta_c_hat: float | None = None
    beta_ci: float | None = None

    def summary(self) -> dict:
        return {"p_c_hat": self.p_c_hat, "ci": self.ci_halfwidth, "beta_c_hat": self.beta_c_hat,
                "beta_ci": self.beta_ci, "method": self.method, "sizes": list(self.sizes), "q": self.q}


def _cell(args):
    family, N, q, p, chain = args
    lat = family.lattice(N)
    obs = [Wrapping(a) for a in family.wrap_axes]
    series = sample_series(lat, RcParams(p, q), chain, obs)
    return binned_stats(series.mean(axis=1))


def _default_algorithm(q: float) -> str:
    return SWENDSEN_WANG if q == int(q) and q >= 2 else CHAYES_MACHTA


def measure_curves(family: LatticeFamily, sizes: Sequence[int], q: float, p_grid: Sequence[float],
                   chain: ChainConfig, workers: int = 1, cell_offset: int = 0) -> dict:
    """Wrapping-probability curves ``{N: Curve}``; cell ``k`` uses chain index ``cell_offset + k``."""
    p_grid = np.asarray(sorted(p_grid), dtype=float)
    jobs = []
    for i, N in enumerate(sizes):
        for j, p in enumerate(p_grid):
            c = replace(chain, chain_index=cell_offset + i * len(p_grid) + j)
            jobs.append((family, int(N), float(q), float(p), c))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cell, jobs))
    else:
        results = [_cell(j) for j in jobs]
    curves = {}
    for i, N in enumerate(sizes):
        rs = results[i * len(p_grid):(i + 1) * len(p_grid)]
        mean = np.array([r.mean for r in rs])
        err = np.array([r.stderr for r in rs])
        curves[int(N)] = Curve(int(N), p_grid, mean, err, _smooth(mean, err))
    return curves


def _root_of_difference(p, ya, yb, lo, hi):
    fa = PchipInterpolator(p, ya)
    fb = PchipInterpolator(p, yb)
    g = lambda x: fb(x) - fa(x)
    glo, ghi = g(lo), g(hi)
    if glo > 0 or ghi <= 0:
        return None
    if glo == 0:
        return float(lo)
    return float(brentq(g, lo, hi, xtol=1e-12))


def pair_crossing(a: Curve, b: Curve, replicas: int = 200) -> tuple[float, float]:
    """Crossing of two curves (``b`` the larger size) and its statistical error.

    Both smoothed curves are interpolated by monotone cubics and the first
    upward sign change of their difference is located.  The error is the
    spread of the crossing over Gaussian replicas of the raw data (a fixed
    internal seed keeps it deterministic).
    """
    p = a.p
    diff_s = b.smoothed - a.smoothed
    idx = [i for i in range(len(p) - 1) if diff_s[i] <= 0 < diff_s[i + 1]]
    if not idx:
        raise InconclusiveScanError(f"curves for N={a.N} and N={b.N} do not cross inside the grid")
    i = idx[0]
    x = _root_of_difference(p, a.smoothed, b.smoothed, p[i], p[i + 1])
    rng = np.random.default_rng(0)
    lo, hi = p[max(i - 1, 0)], p[min(i + 2, len(p) - 1)]
    xs = []
    for _ in range(replicas):
        ya = _smooth(a.mean + rng.standard_normal(len(p)) * a.stderr, a.stderr)
        yb = _smooth(b.mean + rng.standard_normal(len(p)) * b.stderr, b.stderr)
        r = _root_of_difference(p, ya, yb, lo, hi)
        if r is not None:
            xs.append(r)
    if len(xs) < replicas // 2:
        # crossing unstable under resampling: fall back to the bracket width
        return x, float(hi - lo) / 2
    return x, float(np.std(xs))


def _smooth(mean, err):
    w = 1.0 / np.maximum(err, 1e-4) ** 2
    return np.asarray(isotonic_regression(mean, weights=w, increasing=True).x)


def estimate_from_curves(curves: Mapping[int, Curve], q: float) -> PcEstimate:
    sizes = sorted(curves)
    if len(sizes) < 3:
        raise ValueError("need at least three sizes")
    crossings = []
    errs = []
    for a, b in itertools.combinations(sizes, 2):
        x, e = pair_crossing(curves[a], curves[b])
        crossings.append((a, b, x, e))
        errs.append(e)
    xs = np.array([c[2] for c in crossings])
    p_hat = float(np.median(xs))
    spread = float(xs.max() - xs.min()) / 2.0
    stat = float(np.sqrt(np.mean(np.square(errs))))
    ci = max(spread, stat)
    est = PcEstimate(p_hat, ci, WRAPPING_CROSSING, sizes, q, crossings, dict(curves))
    if q == int(q) and q >= 2:
        est.beta_c_hat = couple_params(q, p=p_hat)
        est.beta_ci = (q - 1) / q / (1 - p_hat) * ci
    return est


def scan_pc(family: LatticeFamily, sizes: Sequence[int], q: float, p_grid=None, chain: ChainConfig | None = None,
            workers: int = 1, beta_grid=None, cell_offset: int = 0) -> PcEstimate:
    """Wrapping-crossing estimate of ``p_c`` (and ``beta_c`` for integer ``q``).

    Pass either ``p_grid`` or, for integer ``q``, ``beta_grid``; the latter is
    mapped to ``p`` and scanned identically.
    """
    if len(sizes) < 3:
        raise ValueError("need at least three sizes")
    if (p_grid is None) == (beta_grid is None):
        raise ValueError("give exactly one of p_grid and beta_grid")
    if beta_grid is not None:
        p_grid = [couple_params(q, beta=b) for b in beta_grid]
    if chain is None:
        chain = ChainConfig(_default_algorithm(q))
    curves = measure_curves(family, sizes, q, p_grid, chain, workers, cell_offset)
    try:
        return estimate_from_curves(curves, q)
    except InconclusiveScanError as exc:
        exc.curves = curves
        raise


def refine_scan(family: LatticeFamily, sizes: Sequence[int], q: float, coarse_grid: Sequence[float],
                chain: ChainConfig, fine_points: int = 9, workers: int = 1, cell_offset: int = 0) -> PcEstimate:
    """Coarse scan to bracket the crossing, then a fine grid over +-2 coarse steps."""
    coarse = scan_pc(family, sizes, q, coarse_grid, chain, workers, cell_offset=cell_offset)
    h = float(np.median(np.diff(sorted(coarse_grid))))
    lo = max(coarse.p_c_hat - 2 * h, 1e-6)
    hi = min(coarse.p_c_hat + 2 * h, 1 - 1e-6)
    fine = np.linspace(lo, hi, fine_points)
    n_coarse = len(sizes) * len(coarse_grid)
    return scan_pc(family, sizes, q, fine, chain, workers, cell_offset=cell_offset + n_coarse)


@dataclass
class LocalityRow:
    n: int | None  # None for the full-torus proxy
    p_c_hat: float
    ci: float
    N_used: list
    estimate: PcEstimate = field(repr=False)

    @property
    def thickness(self):
        return None if self.n is None else 2 * self.n


def locality_table(d: int, r: int, q: float, thicknesses: Sequence[int], N_schedule: Sequence[int],
                   chain: ChainConfig, coarse_grid: Sequence[float], fine_points: int = 9,
                   workers: int = 1) -> list[LocalityRow]:
    """One thick-torus estimate per ``n`` (transverse sides ``2n``), then the full torus.

    Rows come in increasing ``n``; the last row (``n=None``) uses ``N^d`` tori.
    """
    ns = sorted(int(n) for n in thicknesses)
    if not ns or ns[0] < 1:
        raise InvalidSpecError("thicknesses must be positive integers")
    if min(N_schedule) < 4 * max(ns):
        raise InvalidSpecError(f"N schedule needs min(N) >= 4 max(n) = {4 * max(ns)}")
    rows = []
    families = [(n, LatticeFamily(d, r, 2 * n)) for n in ns] + [(None, LatticeFamily(d, r, None))]
    cells_per_row = len(N_schedule) * (len(coarse_grid) + fine_points)
    for k, (n, fam) in enumerate(families):
        est = refine_scan(fam, N_schedule, q, coarse_grid, chain, fine_points, workers,
                          cell_offset=k * cells_per_row)
        rows.append(LocalityRow(n, est.p_c_hat, est.ci_halfwidth, list(N_schedule), est))
    return rows


def curves_csv(est: PcEstimate) -> str:
    lines = ["N,p,wrap_mean,wrap_stderr,wrap_smoothed"]
    for N in est.sizes:
        c = est.curves[N]
        for p, m, s, sm in zip(c.p, c.mean, c.stderr, c.smoothed):
            lines.append(f"{N},{p:.17g},{m:.17g},{s:.17g},{sm:.17g}")
    return "\n".join(lines) + "\n"


def summary_csv(est: PcEstimate) -> str:
    beta = "" if est.beta_c_hat is None else f"{est.beta_c_hat:.17g}"
    bci = "" if est.beta_ci is None else f"{est.beta_ci:.17g}"
    lines = ["p_c_hat,ci,beta_c_hat,beta_ci,q,sizes",
             f"{est.p_c_hat:.17g},{est.ci_halfwidth:.17g},{beta},{bci},{est.q:g},{' '.join(map(str, est.sizes))}",
             "", "N_a,N_b,crossing,stat_error"]
    for a, b, x, e in est.crossings:
        lines.append(f"{a},{b},{x:.17g},{e:.17g}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ decay fits

@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    chi2_red: float
    rate_stderr: float

    @property
    def rate_ci(self) -> float:
        """95% half-width."""
        return 1.96 * self.rate_stderr

    @property
    def decaying(self) -> bool:
        return self.rate > max(2.0 * self.rate_stderr, 1e-12)


def decay_fit(distances, values, stderr=None) -> DecayFit:
    """Fit ``value ~ exp(intercept - rate * distance)`` by weighted least squares on logs."""
    x = np.asarray(distances, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 4 or len(y) != len(x):
        raise ValueError("need at least four (distance, value) points")
    if np.any(y <= 0):
        raise ValueError("values must be positive for a log fit")
    s = np.zeros_like(y) if stderr is None else np.asarray(stderr, dtype=float)
    sl = s / y
    weighted = np.all(sl > 0)
    w = 1.0 / sl ** 2 if weighted else np.ones_like(y)
    A = np.stack([np.ones_like(x), -x], axis=1)
    ly = np.log(y)
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    a, c = cov @ (A.T @ (w * ly))
    resid = ly - A @ np.array([a, c])
    dof = len(x) - 2
    chi2 = float(np.sum(w * resid ** 2) / dof)
    if not weighted:
        # unit weights: scale the covariance by the residual variance
        cov = cov * chi2
    return DecayFit(float(c), float(a), chi2, float(math.sqrt(max(cov[1, 1], 0.0))))
