"""Finite hypercubic graphs: tori, thick tori, slabs, balls and vertex boundaries.

Vertices are linearised row-major over the axes in declaration order, so the
last axis varies fastest.  Every lattice edge is stored *forward*: for an edge
``(u, v)`` along axis ``a`` we have ``coords(v) = coords(u) + e_a`` (mod the
axis length on periodic axes).  Samplers rely on this orientation for wrapping
detection.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PERIODIC = "periodic"
OPEN = "open"


class InvalidSpecError(ValueError):
    """A lattice or model specification violates a precondition."""


@dataclass(frozen=True)
class AxisSpec:
    length: int
    wrap: str = PERIODIC

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise InvalidSpecError(f"axis length must be a positive integer, got {self.length!r}")
        if self.wrap not in (PERIODIC, OPEN):
            raise InvalidSpecError(f"axis wrap must be 'periodic' or 'open', got {self.wrap!r}")

    def to_dict(self) -> dict:
        return {"length": int(self.length), "wrap": self.wrap}

    @classmethod
    def from_dict(cls, rec) -> "AxisSpec":
        if isinstance(rec, AxisSpec):
            return rec
        if isinstance(rec, (tuple, list)):
            return cls(int(rec[0]), rec[1] if len(rec) > 1 else PERIODIC)
        return cls(int(rec["length"]), rec.get("wrap", PERIODIC))


class Graph:
    """Simple undirected graph on vertices ``0..num_vertices-1``.

    ``edges`` is an ``(m, 2)`` integer array.  ``edge_axis`` records the lattice
    axis of each edge (``-1`` when the edge carries no lattice displacement).
    """

    def __init__(self, num_vertices: int, edges, edge_axis=None):
        self.num_vertices = int(num_vertices)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= self.num_vertices):
            raise InvalidSpecError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise InvalidSpecError("self-loops are not allowed")
        self.edges = e
        self.edges.setflags(write=False)
        if edge_axis is None:
            edge_axis = np.full(len(e), -1, dtype=np.int64)
        self.edge_axis = np.asarray(edge_axis, dtype=np.int64)
        self.edge_axis.setflags(write=False)
        self._csr = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def _adjacency_csr(self):
        if self._csr is None:
            n = self.num_vertices
            src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            self._csr = (np.cumsum(indptr), dst)
        return self._csr

    def neighbors(self, v: int) -> set:
        if not 0 <= v < self.num_vertices:
            raise IndexError(f"vertex {v} out of range [0, {self.num_vertices})")
        indptr, idx = self._adjacency_csr()
        return set(int(u) for u in idx[indptr[v]:indptr[v + 1]])

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def distances_from(self, source: int) -> np.ndarray:
        """Graph distances from ``source`` (``-1`` for unreachable vertices)."""
        if not 0 <= source < self.num_vertices:
            raise IndexError(f"vertex {source} out of range")
        indptr, idx = self._adjacency_csr()
        dist = np.full(self.num_vertices, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y in idx[indptr[x]:indptr[x + 1]]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def __repr__(self):
        return f"{type(self).__name__}(num_vertices={self.num_vertices}, num_edges={self.num_edges})"


class Lattice(Graph):
    """Product of cycles and paths built from a list of :class:`AxisSpec`.

    Length-2 periodic axes would produce a forward and a backward edge between
    the same pair; they are collapsed into one edge, so the graph stays simple.
    Length-1 axes contribute no edges.
    """

    def __init__(self, axes: Sequence[AxisSpec]):
        axes = tuple(AxisSpec.from_dict(a) for a in axes)
        if not axes:
            raise InvalidSpecError("a lattice needs at least one axis")
        self.axes = axes
        self.shape = tuple(a.length for a in axes)
        n = int(np.prod(self.shape))
        coords = np.indices(self.shape).reshape(len(axes), -1).T
        ids = np.arange(n).reshape(self.shape)
        us, vs, ax = [], [], []
        for a, spec in enumerate(axes):
            L = spec.length
            if L == 1:
                continue
            fwd = np.roll(ids, -1, axis=a).reshape(-1)
            x = coords[:, a]
            if spec.wrap == OPEN or L == 2:
                keep = x < L - 1
            else:
                keep = np.ones(n, dtype=bool)
            u = np.arange(n)[keep]
            us.append(u)
            vs.append(fwd[keep])
            ax.append(np.full(len(u), a))
        if us:
            u = np.concatenate(us)
            v = np.concatenate(vs)
            axis = np.concatenate(ax)
            order = np.lexsort((axis, u))
            edges = np.stack([u[order], v[order]], axis=1)
            axis = axis[order]
        else:
            edges = np.zeros((0, 2), dtype=np.int64)
            axis = np.zeros(0, dtype=np.int64)
        super().__init__(n, edges, axis)
        self._coords = coords
        self._coords.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def fully_periodic(self) -> bool:
        return all(a.wrap == PERIODIC for a in self.axes)

    def coords(self, v: int) -> tuple:
        if not 0 <= v < self.num_vertices:
            raise IndexError(f"vertex {v} out of range [0, {self.num_vertices})")
        return tuple(int(c) for c in self._coords[v])

    def all_coords(self) -> np.ndarray:
        return self._coords

    def index(self, coords: Sequence[int]) -> int:
        c = []
        for x, a in zip(coords, self.axes):
            if a.wrap == PERIODIC:
                x = x % a.length
            elif not 0 <= x < a.length:
                raise IndexError(f"coordinate {x} outside open axis of length {a.length}")
            c.append(int(x))
        if len(c) != self.dim:
            raise IndexError("coordinate dimension mismatch")
        return int(np.ravel_multi_index(c, self.shape))

    def translate(self, v: int, shift: Sequence[int]) -> int:
        return self.index([x + s for x, s in zip(self.coords(v), shift)])

    def spec_string(self) -> str:
        return "x".join(f"{a.length}{'p' if a.wrap == PERIODIC else 'o'}" for a in self.axes)

    def __repr__(self):
        return f"Lattice({self.spec_string()})"


def build_lattice(spec: Iterable) -> Lattice:
    """Build a lattice from axis specs (``AxisSpec``, ``(length, wrap)`` or dicts)."""
    return Lattice(list(spec))


def torus(*sides: int) -> Lattice:
    return Lattice([AxisSpec(L, PERIODIC) for L in sides])


def thick_torus(d: int, r: int, N: int, thickness: int | None) -> Lattice:
    """``r`` periodic axes of length ``N`` times ``d - r`` periodic axes of length ``thickness``.

    ``thickness=None`` gives the full ``N^d`` torus.
    """
    if not 0 < r <= d:
        raise InvalidSpecError(f"need 0 < r <= d, got r={r}, d={d}")
    t = N if thickness is None else thickness
    return Lattice([AxisSpec(N)] * r + [AxisSpec(t)] * (d - r))


def slab(d: int, r: int, N: int, n: int) -> Lattice:
    """``(Z/NZ)^r`` times the open box ``{0..n}^(d-r)``."""
    if not 0 < r <= d:
        raise InvalidSpecError(f"need 0 < r <= d, got r={r}, d={d}")
    return Lattice([AxisSpec(N)] * r + [AxisSpec(n + 1, OPEN)] * (d - r))


def neighbors(lat: Graph, v: int) -> set:
    return lat.neighbors(v)


def boundary_vertices(lat: Graph, sub) -> set:
    """Vertices of ``sub`` having at least one neighbour outside ``sub``."""
    sub = set(int(v) for v in sub)
    for v in sub:
        if not 0 <= v < lat.num_vertices:
            raise IndexError(f"vertex {v} out of range")
    indptr, idx = lat._adjacency_csr()
    return {v for v in sub if any(int(u) not in sub for u in idx[indptr[v]:indptr[v + 1]])}


class Subgraph(Graph):
    """Induced subgraph of an ambient graph, relabelled to local ids ``0..k-1``.

    ``vertices[i]`` is the ambient id of local vertex ``i``; ``boundary`` holds
    ambient ids.  ``external`` lists, with multiplicity, the local endpoint of
    every ambient edge leaving the subgraph (the edges that feel a boundary
    condition in the Potts Hamiltonian).
    """

    def __init__(self, ambient: Graph, vertices):
        verts = np.array(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        if verts.size and (verts[0] < 0 or verts[-1] >= ambient.num_vertices):
            raise IndexError("subgraph vertex out of range")
        local = {int(v): i for i, v in enumerate(verts)}
        e = ambient.edges
        inside = np.isin(e[:, 0], verts) & np.isin(e[:, 1], verts)
        local_edges = np.array([[local[int(a)], local[int(b)]] for a, b in e[inside]],
                               dtype=np.int64).reshape(-1, 2)
        super().__init__(len(verts), local_edges, ambient.edge_axis[inside])
        self.ambient = ambient
        self.vertices = verts
        self._local = local
        self.boundary = frozenset(boundary_vertices(ambient, verts))
        leaving = np.isin(e[:, 0], verts) ^ np.isin(e[:, 1], verts)
        ext = [local[int(a)] if int(a) in local else local[int(b)] for a, b in e[leaving]]
        self.external = np.array(sorted(ext), dtype=np.int64)

    def local(self, v: int) -> int:
        return self._local[int(v)]

    @property
    def boundary_local(self) -> np.ndarray:
        return np.array(sorted(self._local[v] for v in self.boundary), dtype=np.int64)

    def __repr__(self):
        return (f"Subgraph(num_vertices={self.num_vertices}, num_edges={self.num_edges}, "
                f"boundary={len(self.boundary)})")


# The spec-level name for balls; any induced subgraph behaves the same way.
BallSubgraph = Subgraph


def ball(lat: Graph, center: int, R: int) -> Subgraph:
    """Induced subgraph on ``{v : dist(center, v) <= R}``."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    dist = lat.distances_from(center)
    return Subgraph(lat, np.flatnonzero((dist >= 0) & (dist <= R)))


def default_boundary(g: Graph) -> np.ndarray:
    """Wired boundary of ``g`` in its own labels: ``∂`` for subgraphs, empty otherwise."""
    if isinstance(g, Subgraph):
        return g.boundary_local
    return np.zeros(0, dtype=np.int64)


def default_external(g: Graph) -> np.ndarray:
    if isinstance(g, Subgraph):
        return g.external
    return np.zeros(0, dtype=np.int64)
