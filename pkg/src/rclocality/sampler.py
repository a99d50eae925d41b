"""Cluster Monte Carlo for random-cluster and Potts measures.

Three dynamics are available:

``swendsen_wang``
    Edwards-Sokal bond/recolour moves; integer ``q >= 2``.
``chayes_machta``
    Each cluster is activated with probability ``1/q`` and every edge inside
    the active set is resampled at density ``p``; real ``q >= 1``.
``heat_bath``
    Systematic single-edge resampling from the conditional law; real ``q >= 1``.

Boundary conditions use a ghost vertex.  A wired random-cluster boundary is
fused to the ghost permanently; a monochromatic Potts boundary becomes one
ghost edge per ambient edge leaving the graph, with the ghost frozen at
colour ``b``.  Fully periodic lattices have no ghost.

Random numbers come from a PCG64 stream per chain, derived from
``(master seed, chain index)`` with :class:`numpy.random.SeedSequence`, so a
chain's output never depends on how chains are scheduled.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from . import observables as obs_mod
from .exact import FREE, MONOCHROMATIC, WIRED, PottsParams, RcParams, couple_params
from .lattice import Graph, Lattice, default_boundary, default_external
from .observables import TwoPointSpin, Wrapping, TruncatedTwoPoint
from .stats import EstimatorResult, binned_stats

SWENDSEN_WANG = "swendsen_wang"
CHAYES_MACHTA = "chayes_machta"
HEAT_BATH = "heat_bath"
ALGORITHMS = {SWENDSEN_WANG: K.ALG_SW, CHAYES_MACHTA: K.ALG_CM, HEAT_BATH: K.ALG_HB}


class UnsupportedAlgorithmError(ValueError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    algorithm: str = SWENDSEN_WANG
    sweeps: int = 10_000
    burn_in: int = 1_000
    seed: int = 0
    stride: int = 1
    chain_index: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise UnsupportedAlgorithmError(f"unknown algorithm {self.algorithm!r}")
        if self.sweeps <= 0:
            raise ValueError("sweeps must be positive (no samples after burn-in otherwise)")
        if self.burn_in < 0 or self.stride < 1:
            raise ValueError("burn_in must be >= 0 and stride >= 1")

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed, self.chain_index)


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) % 2 ** 64, spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ModelGraph:
    """Flat arrays handed to the kernels (ghost, frozen links, ghost edges included)."""

    n: int
    n_total: int
    eu: np.ndarray
    ev: np.ndarray
    eaxis: np.ndarray
    frozen: np.ndarray
    ghost: int
    dim: int
    indptr: np.ndarray = field(repr=False)
    nbr: np.ndarray = field(repr=False)
    eid: np.ndarray = field(repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.eu)


def model_graph(g: Graph, frozen=(), ghost_edges=()) -> ModelGraph:
    n = g.num_vertices
    frozen = np.unique(np.asarray(list(frozen), dtype=np.int64))
    ghost_edges = np.asarray(list(ghost_edges), dtype=np.int64)
    has_ghost = frozen.size > 0 or ghost_edges.size > 0
    ghost = n if has_ghost else -1
    eu = np.concatenate([g.edges[:, 0], ghost_edges]).astype(np.int64)
    ev = np.concatenate([g.edges[:, 1], np.full(len(ghost_edges), n)]).astype(np.int64)
    eaxis = np.concatenate([g.edge_axis, np.full(len(ghost_edges), -1)]).astype(np.int64)
    n_total = n + 1 if has_ghost else n
    # adjacency with edge ids; frozen links carry id -1 (always open)
    src = np.concatenate([eu, ev, frozen, np.full(len(frozen), ghost)])
    dst = np.concatenate([ev, eu, np.full(len(frozen), ghost), frozen])
    ids = np.concatenate([np.arange(len(eu)), np.arange(len(eu)), -np.ones(2 * len(frozen), dtype=np.int64)])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n_total + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    dim = g.dim if isinstance(g, Lattice) else 1
    return ModelGraph(n, n_total, eu, ev, eaxis, frozen, ghost, dim, np.cumsum(indptr),
                      dst[order].astype(np.int64), ids[order].astype(np.int64))


@dataclass(frozen=True)
class _Model:
    p: float
    q: float
    b: int
    mg: ModelGraph


def _resolve(g: Graph, params, boundary=None, boundary_edges=None) -> _Model:
    """Translate random-cluster or Potts parameters into a ghost-augmented model."""
    if isinstance(params, PottsParams):
        p = couple_params(params.q, beta=params.beta)
        if params.bc == MONOCHROMATIC:
            xs = default_external(g) if boundary_edges is None else boundary_edges
            return _Model(p, float(params.q), int(params.b), model_graph(g, ghost_edges=xs))
        return _Model(p, float(params.q), 0, model_graph(g))
    if isinstance(params, RcParams):
        if params.bc == WIRED:
            bnd = default_boundary(g) if boundary is None else boundary
            return _Model(params.p, float(params.q), 0, model_graph(g, frozen=bnd))
        return _Model(params.p, float(params.q), 0, model_graph(g))
    raise TypeError(f"unsupported parameters {params!r}")


def _check_algorithm(algorithm: str, q: float):
    if algorithm == SWENDSEN_WANG and (q != int(q) or q < 2):
        raise UnsupportedAlgorithmError(f"Swendsen-Wang needs integer q >= 2, got q={q}")
    if algorithm in (CHAYES_MACHTA, HEAT_BATH) and q < 1:
        raise UnsupportedAlgorithmError(f"{algorithm} needs q >= 1, got q={q}")


def initial_spins(mg: ModelGraph, q: int, b: int, rng) -> np.ndarray:
    spins = rng.integers(0, q, size=mg.n_total).astype(np.int64)
    if mg.ghost >= 0:
        spins[mg.ghost] = b
        spins[mg.frozen] = b
    return spins


# ------------------------------------------------------------------ single steps

def sw_step(g: Graph, sigma, params, rng, boundary=None, boundary_edges=None):
    """One Swendsen-Wang update; returns ``(new spins, bond configuration)``.

    ``sigma`` covers the vertices of ``g``.  The bond configuration covers the
    edges of ``g`` followed by any ghost edges.
    """
    model = _resolve(g, params, boundary, boundary_edges)
    _check_algorithm(SWENDSEN_WANG, model.q)
    mg = model.mg
    q = int(model.q)
    sigma = np.asarray(sigma, dtype=np.int64)
    if sigma.shape != (g.num_vertices,) or sigma.min() < 0 or sigma.max() >= q:
        raise ValueError("spin configuration does not match the graph or q")
    spins = np.empty(mg.n_total, dtype=np.int64)
    spins[:mg.n] = sigma
    if mg.ghost >= 0:
        spins[mg.ghost] = model.b
        spins[mg.frozen] = model.b
    omega = np.zeros(mg.num_edges, dtype=np.bool_)
    K.sw_bond_phase(rng, mg.eu, mg.ev, spins, model.p, omega)
    parent, size = np.empty(mg.n_total, np.int64), np.empty(mg.n_total, np.int64)
    dummy_off, dummy_wrap = np.zeros((mg.n_total, 1), np.int64), np.zeros((mg.n_total, 1), np.bool_)
    acc = np.zeros(1, np.int64)
    K.label(mg.n_total, mg.eu, mg.ev, mg.eaxis, omega, mg.frozen, mg.ghost, False,
            parent, size, dummy_off, dummy_wrap, acc, acc)
    K.sw_recolor(rng, mg.n_total, mg.ghost, model.b, q, parent,
                 np.empty(mg.n_total, np.int64), np.empty(mg.n_total, np.int64), spins)
    return spins[:mg.n].copy(), omega


def cm_step(g: Graph, omega, params, rng, boundary=None, boundary_edges=None) -> np.ndarray:
    """One Chayes-Machta update of the bond configuration."""
    model = _resolve(g, params, boundary, boundary_edges)
    _check_algorithm(CHAYES_MACHTA, model.q)
    mg = model.mg
    omega = np.array(omega, dtype=np.bool_)
    if omega.shape != (mg.num_edges,):
        raise ValueError("configuration does not match the edge list")
    parent, size = np.empty(mg.n_total, np.int64), np.empty(mg.n_total, np.int64)
    off, wrap, acc = np.zeros((mg.n_total, 1), np.int64), np.zeros((mg.n_total, 1), np.bool_), np.zeros(1, np.int64)
    K.label(mg.n_total, mg.eu, mg.ev, mg.eaxis, omega, mg.frozen, mg.ghost, False,
            parent, size, off, wrap, acc, acc)
    K.cm_update(rng, mg.n_total, mg.eu, mg.ev, model.q, model.p, parent,
                np.empty(mg.n_total, np.int64), np.empty(mg.n_total, np.int64), omega)
    return omega


def heat_bath_step(g: Graph, omega, params, rng, edge: int, boundary=None, boundary_edges=None) -> np.ndarray:
    """Resample edge ``edge`` from its law given the rest of the configuration."""
    model = _resolve(g, params, boundary, boundary_edges)
    _check_algorithm(HEAT_BATH, model.q)
    mg = model.mg
    omega = np.array(omega, dtype=np.bool_)
    if omega.shape != (mg.num_edges,):
        raise ValueError("configuration does not match the edge list")
    if not 0 <= edge < mg.num_edges:
        raise IndexError(f"edge {edge} out of range")
    K.hb_update(rng, edge, mg.eu, mg.ev, model.q, model.p, mg.indptr, mg.nbr, mg.eid, omega,
                np.zeros(mg.n_total, np.int64), np.empty(mg.n_total, np.int64), 1)
    return omega


# ------------------------------------------------------------------ chains

def sample_series(g: Graph, params, chain: ChainConfig, observables: Sequence,
                  boundary=None, boundary_edges=None) -> np.ndarray:
    """Raw measurement series, shape ``(sweeps // stride, len(observables))``."""
    model = _resolve(g, params, boundary, boundary_edges)
    _check_algorithm(chain.algorithm, model.q)
    mg = model.mg
    observables = list(observables)
    _validate_observables(g, mg, chain.algorithm, observables)
    codes = np.empty(len(observables), dtype=np.int64)
    args = np.zeros((len(observables), 2), dtype=np.int64)
    for i, o in enumerate(observables):
        codes[i], args[i, 0], args[i, 1] = obs_mod.encode(o)
    track = isinstance(g, Lattice) and any(isinstance(o, (Wrapping, TruncatedTwoPoint)) for o in observables)
    n_meas = chain.sweeps // chain.stride
    if n_meas == 0:
        raise ValueError("no measurements: sweeps < stride")
    rng = chain.rng()
    qi = max(int(model.q), 1)
    spins = initial_spins(mg, qi, model.b, rng) if chain.algorithm == SWENDSEN_WANG else np.zeros(mg.n_total, np.int64)
    omega = np.zeros(mg.num_edges, dtype=np.bool_)
    out = np.empty((n_meas, len(observables)), dtype=np.float64)
    K.run_chain_kernel(ALGORITHMS[chain.algorithm], rng, mg.n, mg.n_total, mg.eu, mg.ev, mg.eaxis,
                       mg.frozen, mg.ghost, model.b, model.q, model.p, mg.dim, spins, omega,
                       mg.indptr, mg.nbr, mg.eid, chain.burn_in, n_meas, chain.stride, track,
                       codes, args, out)
    return out


def _validate_observables(g, mg, algorithm, observables):
    for o in observables:
        if isinstance(o, obs_mod.Configuration):
            if mg.num_edges > 52:
                raise ValueError("configuration index needs at most 52 edges")
            continue
        if isinstance(o, TwoPointSpin) and algorithm != SWENDSEN_WANG:
            raise ValueError("spin observables need the swendsen_wang algorithm")
        if isinstance(o, Wrapping):
            if not isinstance(g, Lattice) or not 0 <= o.axis < g.dim:
                raise ValueError(f"wrapping axis {o.axis} does not exist")
            if mg.ghost >= 0:
                raise ValueError("wrapping is undefined with a boundary ghost")
        for v in (getattr(o, "x", None), getattr(o, "y", None), getattr(o, "origin", None)):
            if v is not None and not 0 <= v < g.num_vertices:
                raise IndexError(f"vertex {v} out of range in {o!r}")


def run_chain(g: Graph, params, chain: ChainConfig, observables: Sequence, boundary=None,
              boundary_edges=None, series_dir: str | os.PathLike | None = None) -> list[EstimatorResult]:
    """Run one chain and return a binned estimate per observable.

    With ``series_dir`` the raw series are also written, one value per line.
    """
    series = sample_series(g, params, chain, observables, boundary, boundary_edges)
    if series_dir is not None:
        write_series(series_dir, g, params, chain, observables, series)
    return [binned_stats(series[:, i]) for i in range(series.shape[1])]


def series_filename(g: Graph, params, chain: ChainConfig, observable) -> str:
    lat = g.spec_string() if isinstance(g, Lattice) else f"graph{g.num_vertices}v{g.num_edges}e"
    if isinstance(params, PottsParams):
        par = f"q{params.q}_beta{params.beta:.6f}"
    else:
        par = f"q{params.q:g}_p{params.p:.6f}"
    return f"{lat}_{par}_seed{chain.seed}_chain{chain.chain_index}_{obs_mod.name(observable)}.txt"


def write_series(directory, g, params, chain, observables, series):
    os.makedirs(directory, exist_ok=True)
    for i, o in enumerate(observables):
        path = os.path.join(directory, series_filename(g, params, chain, o))
        np.savetxt(path, series[:, i], fmt="%.17g")


def torus_shift_table(lat: Lattice) -> np.ndarray:
    """``shift[x, D]`` = vertex ``x + D`` on a fully periodic lattice."""
    c = lat.all_coords()
    shape = np.array(lat.shape)
    summed = (c[:, None, :] + c[None, :, :]) % shape
    return np.ravel_multi_index(tuple(summed.transpose(2, 0, 1)), lat.shape).astype(np.int64)


def sw_correlation_samples(lat: Lattice, params: PottsParams, chain: ChainConfig) -> np.ndarray:
    """Per-sample translation-averaged ``<s_0 . s_D>`` on a torus, shape ``(samples, |V|)``."""
    if not lat.fully_periodic:
        raise ValueError("translation averaging needs a fully periodic lattice")
    if params.bc != FREE:
        raise ValueError("torus correlations use free (periodic) boundary conditions")
    q = int(params.q)
    p = couple_params(q, beta=params.beta)
    rng = chain.rng()
    spins = rng.integers(0, q, size=lat.num_vertices).astype(np.int64)
    n_meas = chain.sweeps // chain.stride
    out = np.empty((n_meas, lat.num_vertices))
    K.sw_correlation_chain(rng, lat.num_vertices, np.ascontiguousarray(lat.edges[:, 0]),
                           np.ascontiguousarray(lat.edges[:, 1]), float(q), p, spins,
                           torus_shift_table(lat), chain.burn_in, n_meas, chain.stride, out)
    return out
