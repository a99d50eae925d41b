"""Exact random-cluster and Potts measures on small graphs by brute-force enumeration.

Spins are colour indices ``0..q-1``; only the dot rule matters::

    a . b = 1 if a == b else -1/(q-1)

so the simplex embedding of the colours is never built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels as K
from .lattice import Graph, default_boundary, default_external
from .observables import Magnetization, TwoPointSpin

FREE = "free"
WIRED = "wired"
MONOCHROMATIC = "monochromatic"

MAX_EDGES = 24
MAX_SPIN_STATES = 2 ** 20


class CapacityError(RuntimeError):
    """Enumeration would exceed a configured size cap."""

    def __init__(self, message, cap):
        super().__init__(message)
        self.cap = cap


@dataclass(frozen=True)
class RcParams:
    p: float
    q: float
    bc: str = FREE

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.bc not in (FREE, WIRED):
            raise ValueError(f"random-cluster bc must be 'free' or 'wired', got {self.bc!r}")


@dataclass(frozen=True)
class PottsParams:
    beta: float
    q: int
    bc: str = FREE
    b: int = 0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"Potts q must be an integer >= 2, got {self.q}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.bc not in (FREE, MONOCHROMATIC):
            raise ValueError(f"Potts bc must be 'free' or 'monochromatic', got {self.bc!r}")
        if not 0 <= self.b < self.q:
            raise ValueError(f"boundary colour {self.b} outside 0..{self.q - 1}")


def couple_params(q: float, p: float | None = None, beta: float | None = None) -> float:
    """Map ``p -> beta = -((q-1)/q) log(1-p)`` or, given ``beta``, the inverse.

    ``p = 1`` maps to ``math.inf`` and ``beta = inf`` back to 1.
    """
    if (p is None) == (beta is None):
        raise ValueError("give exactly one of p and beta")
    if q <= 1:
        raise ValueError("the Potts coupling needs q > 1")
    c = (q - 1.0) / q
    if p is not None:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        if p == 1.0:
            return math.inf
        return -c * math.log1p(-p)
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if math.isinf(beta):
        return 1.0
    return -math.expm1(-beta / c)


def dot(a: int, b: int, q: int) -> float:
    return 1.0 if a == b else -1.0 / (q - 1)


def _edge_arrays(g: Graph):
    e = g.edges
    return np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1])


def _check_boundary(g: Graph, boundary) -> np.ndarray:
    bnd = np.unique(np.asarray(list(boundary) if boundary is not None else [], dtype=np.int64))
    if bnd.size and (bnd[0] < 0 or bnd[-1] >= g.num_vertices):
        raise ValueError("boundary set is not a subset of the vertices")
    return bnd


def _rc_boundary(g: Graph, bc: str, boundary) -> np.ndarray:
    if bc == FREE:
        return np.zeros(0, dtype=np.int64)
    if boundary is None:
        boundary = default_boundary(g)
    return _check_boundary(g, boundary)


def cluster_count(g: Graph, omega, boundary=None) -> int:
    """Number of open clusters; with ``boundary`` the touching clusters count once."""
    omega = np.asarray(omega, dtype=bool)
    if omega.shape != (g.num_edges,):
        raise ValueError("configuration does not match the edge list")
    bnd = _check_boundary(g, boundary)
    n = g.num_vertices
    wired = bnd.size > 0
    parent = np.arange(n + 1 if wired else n)
    size = np.ones_like(parent)
    if wired:
        for f in bnd:
            K.union(parent, size, n, f)
    for (u, v), o in zip(g.edges, omega):
        if o:
            K.union(parent, size, u, v)
    return int(np.sum(parent == np.arange(len(parent))))


@dataclass
class RcTable:
    """Probability of every edge configuration; index bit ``e`` is edge ``e``."""

    graph: Graph
    params: RcParams
    boundary: np.ndarray
    probs: np.ndarray
    num_open: np.ndarray
    num_clusters: np.ndarray

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges

    def configuration(self, index: int) -> np.ndarray:
        return (index >> np.arange(self.num_edges)) & 1 == 1

    def edge_marginals(self) -> np.ndarray:
        idx = np.arange(len(self.probs))
        return np.array([self.probs[(idx >> e) & 1 == 1].sum() for e in range(self.num_edges)])

    def edge_covariance(self, e: int, f: int) -> float:
        idx = np.arange(len(self.probs))
        a = (idx >> e) & 1
        b = (idx >> f) & 1
        return float(self.probs @ (a * b) - (self.probs @ a) * (self.probs @ b))

    def connection_mask(self, x: int, y: int) -> np.ndarray:
        """Boolean mask of the configurations in which ``x`` and ``y`` are connected."""
        n = self.graph.num_vertices
        if not (0 <= x < n and 0 <= y < n):
            raise IndexError("vertex out of range")
        if x == y or (self.boundary.size and x in self.boundary and y in self.boundary):
            return np.ones(len(self.probs), dtype=np.bool_)
        eu, ev = _edge_arrays(self.graph)
        hit = np.empty(len(self.probs), dtype=np.bool_)
        K.enumerate_connected(n, eu, ev, self.boundary, x, y, hit)
        return hit

    def connection(self, x: int, y: int) -> float:
        mask = self.connection_mask(x, y)
        return 1.0 if mask.all() else float(self.probs[mask].sum())

    def reweighted(self, p: float, q: float) -> "RcTable":
        """Same graph and boundary at new ``(p, q)``, without re-enumerating."""
        params = RcParams(p, q, self.params.bc)
        return RcTable(self.graph, params, self.boundary, _weights(self.num_open, self.num_clusters, params),
                       self.num_open, self.num_clusters)


def rc_distribution(g: Graph, params: RcParams, boundary=None, max_edges: int = MAX_EDGES) -> RcTable:
    """Enumerate ``(p/(1-p))^|w| q^k(w)`` over every edge subset of ``g``.

    ``boundary`` (local vertex ids) is used for wired bc; by default it is the
    vertex boundary of a subgraph and empty for a full lattice, where wired
    and free coincide.
    """
    m = g.num_edges
    if m > max_edges:
        raise CapacityError(f"{m} edges exceed the enumeration cap of {max_edges}", max_edges)
    bnd = _rc_boundary(g, params.bc, boundary)
    eu, ev = _edge_arrays(g)
    nopen = np.empty(1 << m, dtype=np.int64)
    ncl = np.empty(1 << m, dtype=np.int64)
    K.enumerate_rc(g.num_vertices, eu, ev, bnd, nopen, ncl)
    return RcTable(g, params, bnd, _weights(nopen, ncl, params), nopen, ncl)


def _weights(nopen, ncl, params: RcParams) -> np.ndarray:
    p, q = params.p, params.q
    if p == 0.0:
        return (nopen == 0).astype(float)
    if p == 1.0:
        return (nopen == nopen.max()).astype(float)
    logw = nopen * (math.log(p) - math.log1p(-p)) + ncl * math.log(q)
    return np.exp(logw - logsumexp(logw))


def rc_connection(g: Graph, params: RcParams, x: int, y: int, boundary=None,
                  max_edges: int = MAX_EDGES) -> float:
    return rc_distribution(g, params, boundary, max_edges).connection(x, y)


def potts_energy(g: Graph, sigma, params: PottsParams, boundary_edges=None) -> float:
    """``H = -sum_edges s_x.s_y - sum_boundary_edges s_x.b``.

    ``boundary_edges`` lists, with multiplicity, the vertices carrying an edge
    to the outside; it is only used for monochromatic bc.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    if sigma.shape != (g.num_vertices,):
        raise ValueError("spin configuration does not match the vertex count")
    q = params.q
    if sigma.size and (sigma.min() < 0 or sigma.max() >= q):
        raise ValueError(f"spin colours must lie in 0..{q - 1}")
    other = -1.0 / (q - 1)
    eq = sigma[g.edges[:, 0]] == sigma[g.edges[:, 1]]
    h = -float(np.where(eq, 1.0, other).sum())
    if params.bc == MONOCHROMATIC:
        if boundary_edges is None:
            boundary_edges = default_external(g)
        xs = np.asarray(boundary_edges, dtype=np.int64)
        h -= float(np.where(sigma[xs] == params.b, 1.0, other).sum())
    return h


@dataclass
class PottsTable:
    """Exact single- and two-site statistics of a Potts measure."""

    params: PottsParams
    rows: np.ndarray
    corr: np.ndarray        # <s_x . s_y> for x in rows, all y
    magnetization: np.ndarray  # <s_x . b>
    log_z: float

    def two_point(self, x: int, y: int) -> float:
        hit = np.flatnonzero(self.rows == x)
        if hit.size:
            return float(self.corr[hit[0], y])
        hit = np.flatnonzero(self.rows == y)
        if hit.size:
            return float(self.corr[hit[0], x])
        raise KeyError(f"neither {x} nor {y} was enumerated as a row")


def potts_table(g: Graph, params: PottsParams, rows: Sequence[int] | None = None,
                boundary_edges=None, max_states: int = MAX_SPIN_STATES) -> PottsTable:
    """Exact ``<s_x . s_y>`` for ``x`` in ``rows`` (default: all vertices)."""
    n, q = g.num_vertices, int(params.q)
    if q ** n > max_states:
        raise CapacityError(f"{q}^{n} spin states exceed the cap of {max_states}", max_states)
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    ext = np.zeros(n, dtype=np.float64)
    if params.bc == MONOCHROMATIC:
        if boundary_edges is None:
            boundary_edges = default_external(g)
        np.add.at(ext, np.asarray(boundary_edges, dtype=np.int64), 1.0)
    eu, ev = _edge_arrays(g)
    peq = np.empty((len(rows), n))
    pb = np.empty(n)
    log_z = K.enumerate_potts(n, eu, ev, ext, q, float(params.beta), int(params.b), rows, peq, pb)
    to_dot = lambda P: (q * P - 1.0) / (q - 1.0)
    return PottsTable(params, rows, to_dot(peq), to_dot(pb), float(log_z))


def potts_expectation(g: Graph, params: PottsParams, observable, boundary_edges=None,
                      max_states: int = MAX_SPIN_STATES) -> float:
    """Exact ``<s_x . s_y>`` (:class:`TwoPointSpin`) or ``<s_x . b>`` (:class:`Magnetization`)."""
    if isinstance(observable, TwoPointSpin):
        x, y = observable.x, observable.y
        if x == y:
            return 1.0
        return potts_table(g, params, [x], boundary_edges, max_states).two_point(x, y)
    if isinstance(observable, Magnetization):
        if params.bc != MONOCHROMATIC:
            raise ValueError("magnetization <s_x . b> needs monochromatic boundary conditions")
        t = potts_table(g, params, [], boundary_edges, max_states)
        x = 0 if observable.x is None else observable.x
        return float(t.magnetization[x])
    raise TypeError(f"unsupported observable {observable!r}")
