"""Finite-volume checks of the infrared bound on even tori.

For zero-sum ``v`` the bound reads::

    sum_{x,y} v_x v_y <s_x . s_y>  <=  (q-1)/(2 beta) sum_{x,y} v_x v_y G(x - y)

with ``G`` the zero-mode-free torus Green function.  Correlations on a torus
are translation invariant, so only ``C(D) = <s_0 . s_D>`` is stored and both
sides reduce to sums against the autocorrelation of ``v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .exact import FREE, MAX_SPIN_STATES, PottsParams, potts_table
from .greens import GreenTable, green_quadratic_form, torus_green
from .lattice import InvalidSpecError, Lattice
from .sampler import ChainConfig, sw_correlation_samples
from .stats import binned_stats

EXACT = "exact"
MONTE_CARLO = "monte_carlo"
DEFAULT_TOLERANCE = 1e-9
ZERO_SUM_TOL = 1e-12


def check_irb_torus(lat: Lattice):
    """Fully periodic, every side even and at least 4."""
    if not isinstance(lat, Lattice) or not lat.fully_periodic:
        raise InvalidSpecError("the infrared bound is checked on fully periodic lattices only")
    for L in lat.shape:
        if L % 2:
            raise InvalidSpecError(f"torus sides have to be even, got {L}")
        if L < 4:
            raise InvalidSpecError(f"side {L} is too short (sides of length 2 are excluded)")


def make_locality_vector(lat: Lattice, E) -> np.ndarray:
    """``v_x = 1/|T| - 1[x in E]/|E|``."""
    E = np.unique(np.asarray(list(E), dtype=np.int64))
    if E.size == 0:
        raise ValueError("E must be nonempty")
    if E[0] < 0 or E[-1] >= lat.num_vertices:
        raise IndexError("E contains a vertex outside the lattice")
    v = np.full(lat.num_vertices, 1.0 / lat.num_vertices)
    v[E] -= 1.0 / len(E)
    return v


def random_zero_sum(n: int, rng) -> np.ndarray:
    v = rng.standard_normal(n)
    return v - v.mean()


@dataclass
class Correlations:
    """``<s_0 . s_D>`` for every displacement; MC sources keep per-sample rows."""

    shape: tuple
    values: np.ndarray
    source: str
    samples: np.ndarray | None = field(default=None, repr=False)


def exact_correlations(lat: Lattice, params: PottsParams, max_states: int = MAX_SPIN_STATES) -> Correlations:
    if params.bc != FREE:
        raise ValueError("torus correlations use periodic (free) boundary conditions")
    tab = potts_table(lat, params, rows=[0], max_states=max_states)
    return Correlations(lat.shape, tab.corr[0].reshape(lat.shape), EXACT)


def mc_correlations(lat: Lattice, params: PottsParams, chain: ChainConfig) -> Correlations:
    if chain.algorithm != "swendsen_wang":
        raise ValueError("spin correlations are sampled with swendsen_wang")
    samples = sw_correlation_samples(lat, params, chain)
    return Correlations(lat.shape, samples.mean(axis=0).reshape(lat.shape), MONTE_CARLO, samples)


def _autocorrelation(v: np.ndarray, shape) -> np.ndarray:
    """``A(D) = sum_x v_x v_{x+D}``."""
    f = np.fft.fftn(v.reshape(shape))
    return np.fft.ifftn(np.abs(f) ** 2).real.reshape(-1)


def spin_quadratic_form(corr: Correlations, v) -> tuple[float, float]:
    """``sum v_x v_y <s_x . s_y>`` and its statistical error (0 when exact)."""
    a = _autocorrelation(np.asarray(v, dtype=float), corr.shape)
    lhs = float(corr.values.reshape(-1) @ a)
    if corr.samples is None:
        return lhs, 0.0
    res = binned_stats(corr.samples @ a)
    return lhs, res.stderr


@dataclass(frozen=True)
class IrbReport:
    lhs: float
    rhs: float
    lhs_error: float
    source: str
    tolerance: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -(self.tolerance + 3.0 * self.lhs_error)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "error": self.lhs_error,
                "source": self.source, "pass": self.passed}


def check_infrared_bound(lat: Lattice, params: PottsParams, v, corr: Correlations,
                         tolerance: float = DEFAULT_TOLERANCE, green: GreenTable | None = None) -> IrbReport:
    check_irb_torus(lat)
    if params.beta <= 0:
        raise ValueError("the bound needs beta > 0")
    v = np.asarray(v, dtype=float)
    if v.shape != (lat.num_vertices,):
        raise ValueError("vector does not match the lattice")
    if abs(v.sum()) > ZERO_SUM_TOL * max(1.0, np.abs(v).sum()):
        raise ValueError(f"v must sum to zero (sum = {v.sum():.3g})")
    if tuple(corr.shape) != tuple(lat.shape):
        raise ValueError("correlations were computed on a different lattice")
    G = torus_green(lat) if green is None else green
    lhs, err = spin_quadratic_form(corr, v)
    rhs = (params.q - 1) / (2.0 * params.beta) * green_quadratic_form(G, v)
    return IrbReport(lhs, rhs, err, corr.source, tolerance)


def compute_stu(lat: Lattice, params: PottsParams, E, corr: Correlations,
                green: GreenTable | None = None) -> tuple[float, float, float]:
    """The three averages ``S`` (over E x E), ``T`` (over the torus) and ``U`` (Green over E x E)."""
    check_irb_torus(lat)
    E = np.unique(np.asarray(list(E), dtype=np.int64))
    if E.size == 0:
        raise ValueError("E must be nonempty")
    G = torus_green(lat) if green is None else green
    c = lat.all_coords()[E]
    shape = np.array(lat.shape)
    disp = (c[None, :, :] - c[:, None, :]) % shape
    idx = tuple(disp.transpose(2, 0, 1))
    S = float(corr.values[idx].mean())
    T = float(corr.values.mean())
    U = float(G.values[idx].mean())
    return S, T, U


@dataclass(frozen=True)
class IrbRecord:
    lattice: str
    q: int
    beta: float
    v_id: str
    report: IrbReport


def irb_records_csv(records: Iterable[IrbRecord]) -> str:
    lines = ["lattice,q,beta,v_id,lhs,rhs,slack,error,source,pass"]
    for r in records:
        rep = r.report
        lines.append(f"{r.lattice},{r.q},{r.beta:.17g},{r.v_id},{rep.lhs:.17g},{rep.rhs:.17g},"
                     f"{rep.slack:.17g},{rep.lhs_error:.17g},{rep.source},{int(rep.passed)}")
    return "\n".join(lines) + "\n"


def irb_summary(records: Iterable[IrbRecord]) -> str:
    records = list(records)
    n_pass = sum(r.report.passed for r in records)
    worst = min(records, key=lambda r: r.report.slack + 3 * r.report.lhs_error) if records else None
    out = f"{n_pass}/{len(records)} checks passed"
    if worst is not None:
        out += (f"; tightest: {worst.lattice} q={worst.q} beta={worst.beta:g} v={worst.v_id} "
                f"slack={worst.report.slack:.3e} (error {worst.report.lhs_error:.1e})")
    return out
