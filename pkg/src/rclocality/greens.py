"""Simple-random-walk Green functions on even tori, thick slabs and Z^d.

On a torus with sides ``L_j`` the zero mode is removed::

    G(D) = 1/|T| * sum_{k != 0} cos(k.D) / (1 - phi(k)),   k_j = 2 pi m_j / L_j,

so every row sums to zero and ``G - P G = delta_0 - 1/|T|`` with ``P`` the
walk's transition operator.  Infinite directions are integrated.  Two rules
are offered for that integral:

``bessel`` (default)
    ``1/(1-phi) = int_0^inf exp(-t(1-phi)) dt`` turns each continuous axis into
    a scaled Bessel factor ``ive(D_j, t/d)`` and each periodic axis into a
    finite mode sum; the remaining 1-D integral goes to adaptive quadrature.
``midpoint``
    Midpoint rule on ``[-pi, pi]^r`` (no node at ``k = 0``), refined by node
    doubling until two levels agree to the tolerance.  Convergence is only
    first order because of the ``|k|^-2`` singularity.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .lattice import InvalidSpecError, Lattice, PERIODIC

MAX_MODES = 2 ** 20
MAX_DIRECT = 4096


class DivergentIntegralError(ValueError):
    """The walk is recurrent (fewer than three infinite directions)."""


def char_fn(k) -> float | np.ndarray:
    """``phi(k) = (1/d) sum_j cos k_j`` along the last axis of ``k``."""
    return np.mean(np.cos(np.asarray(k, dtype=float)), axis=-1)


def _check_sides(sides) -> tuple:
    sides = tuple(int(L) for L in sides)
    if not sides:
        raise InvalidSpecError("need at least one axis")
    for L in sides:
        if L < 2 or L % 2:
            raise InvalidSpecError(f"torus sides must be even and >= 2, got {L}")
    return sides


def _sides_of(spec) -> tuple:
    if isinstance(spec, Lattice):
        if not spec.fully_periodic:
            raise InvalidSpecError("the torus Green function needs a fully periodic lattice")
        return _check_sides(spec.shape)
    return _check_sides(spec)


def _multiplier(sides) -> np.ndarray:
    """``1/(1 - phi(k))`` on the dual torus with the zero mode set to 0."""
    grids = np.meshgrid(*[2 * np.pi * np.arange(L) / L for L in sides], indexing="ij")
    phi = sum(np.cos(g) for g in grids) / len(sides)
    with np.errstate(divide="ignore"):
        mult = 1.0 / (1.0 - phi)
    mult.flat[0] = 0.0
    return mult


@dataclass
class GreenTable:
    """``G(D)`` for every displacement ``D`` (indices taken modulo the sides)."""

    sides: tuple
    values: np.ndarray
    method: str = "fft"

    def value(self, delta: Sequence[int]) -> float:
        idx = tuple(int(x) % L for x, L in zip(delta, self.sides))
        return float(self.values[idx])

    def __call__(self, delta):
        return self.value(delta)

    @property
    def size(self) -> int:
        return int(np.prod(self.sides))

    def to_text(self) -> str:
        lines = ["# torus Green function, sides " + "x".join(map(str, self.sides)) + " periodic",
                 "# " + " ".join(f"d{j}" for j in range(len(self.sides))) + " value"]
        for idx in itertools.product(*[range(L) for L in self.sides]):
            lines.append(" ".join(map(str, idx)) + f" {self.values[idx]:.17g}")
        return "\n".join(lines) + "\n"


def torus_green(spec, method: str = "fft", max_modes: int = MAX_MODES) -> GreenTable:
    """Green table of an all-even torus (``spec`` is a lattice or a list of sides)."""
    sides = _sides_of(spec)
    size = int(np.prod(sides))
    if size > max_modes:
        raise InvalidSpecError(f"{size} modes exceed the cap of {max_modes}; use torus_green_at")
    mult = _multiplier(sides)
    if method == "fft":
        z = np.fft.ifftn(mult)
        if np.abs(z.imag).max() > 1e-12:
            raise ArithmeticError("imaginary residue in the torus Green function")
        return GreenTable(sides, np.ascontiguousarray(z.real), "fft")
    if method == "direct":
        if size > MAX_DIRECT:
            raise InvalidSpecError(f"direct mode sums are limited to {MAX_DIRECT} modes")
        ks = np.stack(np.meshgrid(*[2 * np.pi * np.arange(L) / L for L in sides], indexing="ij"), -1)
        ks = ks.reshape(-1, len(sides))
        ds = np.stack(np.meshgrid(*[np.arange(L) for L in sides], indexing="ij"), -1).reshape(-1, len(sides))
        phase = ds @ ks.T
        m = mult.reshape(-1)
        re = np.cos(phase) @ m / size
        im = np.sin(phase) @ m / size
        if np.abs(im).max() > 1e-12:
            raise ArithmeticError("imaginary residue in the torus Green function")
        return GreenTable(sides, re.reshape(sides), "direct")
    raise ValueError(f"unknown method {method!r}")


def torus_green_at(sides, delta, chunk: int = 2 ** 20) -> float:
    """Single-displacement mode sum, for tori too large for a full table."""
    sides = _check_sides(sides)
    delta = np.asarray(delta, dtype=float)
    size = int(np.prod(sides))
    # split the first axis into blocks, build the rest in full
    rest = sides[1:]
    per_row = int(np.prod(rest)) if rest else 1
    rows = max(1, chunk // per_row)
    grids_rest = np.meshgrid(*[2 * np.pi * np.arange(L) / L for L in rest], indexing="ij") if rest else []
    cos_rest = sum(np.cos(g) for g in grids_rest) if rest else 0.0
    phase_rest = sum(g * dj for g, dj in zip(grids_rest, delta[1:])) if rest else 0.0
    total = 0.0
    L0 = sides[0]
    for start in range(0, L0, rows):
        m0 = np.arange(start, min(L0, start + rows))
        k0 = 2 * np.pi * m0 / L0
        phi = (np.cos(k0)[:, None] + np.ravel(cos_rest)[None, :]) / len(sides)
        ph = k0[:, None] * delta[0] + np.ravel(phase_rest)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.cos(ph) / (1.0 - phi)
        if start == 0:
            term[0, 0] = 0.0
        total += term.sum()
    return float(total / size)


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 16
    rule: str = "bessel"
    levels: int = 4
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError("need at least 8 nodes per axis")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.levels < 1:
            raise ValueError("need at least one refinement level")
        if self.rule not in ("bessel", "midpoint"):
            raise ValueError(f"unknown rule {self.rule!r}")


def slab_green(r: int, transverse: Sequence[int], delta: Sequence[int],
               quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Green function of ``Z^r x prod_j (Z/L_j Z)`` at displacement ``delta``.

    ``delta`` lists the ``r`` infinite coordinates first, then the transverse
    ones.  Needs ``r >= 3``; no zero mode is removed because the walk is
    transient.
    """
    if r < 3:
        raise DivergentIntegralError(f"the walk on Z^{r} x torus is recurrent (r={r} < 3)")
    transverse = tuple(int(L) for L in transverse)
    if any(L < 1 for L in transverse):
        raise InvalidSpecError("transverse sides must be positive")
    d = r + len(transverse)
    delta = tuple(int(x) for x in delta)
    if len(delta) != d:
        raise ValueError(f"displacement must have {d} components")
    if quad.rule == "bessel":
        return _slab_bessel(r, transverse, delta, quad.tolerance)
    return midpoint_levels(r, transverse, delta, quad)[-1]


def zd_green(d: int, delta: Sequence[int], quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Green function of the simple random walk on ``Z^d``, ``(I - P) G = delta_0``."""
    if d < 3:
        raise DivergentIntegralError(f"the walk on Z^{d} is recurrent")
    return slab_green(d, (), delta, quad)


def _slab_bessel(r, transverse, delta, tol) -> float:
    d = r + len(transverse)
    cont = [abs(x) for x in delta[:r]]
    modes = [(np.cos(2 * np.pi * np.arange(L) * dj / L), np.cos(2 * np.pi * np.arange(L) / L) - 1.0, L)
             for L, dj in zip(transverse, delta[r:])]

    def f(t):
        s = t / d
        val = 1.0
        for n in cont:
            val *= _ive(n, s)
        for phase, shift, L in modes:
            val *= float(np.dot(phase, np.exp(s * shift))) / L
        return val

    # t = e^u spreads the t^(-r/2) tail over a finite u-range
    g = lambda u: math.exp(u) * f(math.exp(u))
    lo, hi = -40.0, 40.0
    cuts = [lo, -5.0, 0.0, 3.0, 6.0, 10.0, 15.0, 25.0, hi]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(g, a, b, epsabs=tol / 10, epsrel=1e-13, limit=400)
        total += val
    # beyond hi: f ~ prod(1/L) (2 pi t/d)^(-r/2)
    t_hi = math.exp(hi)
    tail = np.prod([1.0 / L for L in transverse]) * (2 * math.pi / d) ** (-r / 2) * t_hi ** (1 - r / 2) / (r / 2 - 1)
    return float(total + tail)


def _ive(n, s):
    if s < 1e8:
        return special.ive(n, s)
    # large-argument expansion; scipy's ive loses accuracy far out
    mu = 4.0 * n * n
    return (1.0 - (mu - 1) / (8 * s) + (mu - 1) * (mu - 9) / (128 * s * s)) / math.sqrt(2 * math.pi * s)


def _midpoint_once(r, transverse, delta, M) -> float:
    d = r + len(transverse)
    k = -np.pi + (np.arange(M) + 0.5) * 2 * np.pi / M
    # transverse modes: cos sum and phase
    if transverse:
        tg = np.meshgrid(*[2 * np.pi * np.arange(L) / L for L in transverse], indexing="ij")
        t_cos = np.ravel(sum(np.cos(g) for g in tg))
        t_ph = np.ravel(sum(g * dj for g, dj in zip(tg, delta[r:])))
    else:
        t_cos = np.zeros(1)
        t_ph = np.zeros(1)
    # all but the first continuous axis in full
    rest = np.meshgrid(*([k] * (r - 1)), indexing="ij")
    r_cos = np.ravel(sum(np.cos(g) for g in rest))
    r_ph = np.ravel(sum(g * dj for g, dj in zip(rest, delta[1:r])))
    inner_cos = (r_cos[:, None] + t_cos[None, :]).ravel()
    inner_ph = (r_ph[:, None] + t_ph[None, :]).ravel()
    total = 0.0
    for k0 in k:
        phi = (math.cos(k0) + inner_cos) / d
        total += float(np.sum(np.cos(k0 * delta[0] + inner_ph) / (1.0 - phi)))
    n_trans = int(np.prod(transverse)) if transverse else 1
    return total / (M ** r * n_trans)


def midpoint_levels(r, transverse, delta, quad: QuadratureSpec) -> list:
    """Midpoint estimates for ``nodes * 2**i``, stopping once two levels agree."""
    vals = []
    M = quad.nodes
    for _ in range(quad.levels):
        vals.append(_midpoint_once(r, tuple(transverse), tuple(delta), M))
        if len(vals) >= 2 and abs(vals[-1] - vals[-2]) < quad.tolerance:
            break
        M *= 2
    return vals


def green_quadratic_form(G, v, coords=None) -> float:
    """``sum_{x,y} v_x v_y G(x - y)``.

    ``G`` is a :class:`GreenTable` (``v`` indexed like its vertices) or a
    callable of a displacement, in which case ``coords[x]`` gives the position
    of vertex ``x``.
    """
    v = np.asarray(v, dtype=float)
    if isinstance(G, GreenTable):
        if v.size != G.size:
            raise ValueError(f"vector of length {v.size} does not match {G.size} vertices")
        vv = v.reshape(G.sides)
        conv = np.fft.ifftn(np.fft.fftn(vv) * np.fft.fftn(G.values)).real
        return float(np.sum(vv * conv))
    if coords is None:
        raise ValueError("a callable Green function needs vertex coordinates")
    coords = np.asarray(coords)
    if len(coords) != v.size:
        raise ValueError("coordinates do not match the vector")
    total = 0.0
    nz = np.flatnonzero(v)
    for x in nz:
        for y in nz:
            total += v[x] * v[y] * G(tuple(coords[x] - coords[y]))
    return float(total)
