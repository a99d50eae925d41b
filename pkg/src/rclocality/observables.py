"""Observables measured by the samplers (and, for spins, computed exactly).

Finite-volume conventions:

* ``Magnetization``: with a boundary ghost it is ``mean_x s_x . b`` for spin
  chains and the fraction of vertices joined to the boundary for bond chains.
  Without a ghost it is the Potts order parameter ``(q max_a n_a/|V| - 1)/(q-1)``
  or the largest-cluster fraction.
* ``TruncatedTwoPoint``: ``x`` and ``origin`` share a cluster that neither
  winds around a periodic axis nor touches the boundary (a proxy for
  "connected but not to infinity").
* ``MeanClusterFraction``: ``sum_C |C|^2 / |V|^2``, the chance that two
  uniform vertices are connected.
"""
from dataclasses import dataclass

from . import _kernels as K


@dataclass(frozen=True)
class Connect:
    x: int
    y: int


@dataclass(frozen=True)
class TwoPointSpin:
    x: int
    y: int


@dataclass(frozen=True)
class Wrapping:
    axis: int


@dataclass(frozen=True)
class Magnetization:
    x: int | None = None


@dataclass(frozen=True)
class TruncatedTwoPoint:
    x: int
    origin: int = 0


@dataclass(frozen=True)
class MeanClusterFraction:
    pass


@dataclass(frozen=True)
class Configuration:
    """Index of the edge configuration (bit ``e`` = edge ``e``); validation aid."""


def encode(obs):
    """Kernel code and two integer arguments for an observable."""
    if isinstance(obs, Connect):
        return K.OBS_CONNECT, obs.x, obs.y
    if isinstance(obs, TwoPointSpin):
        return K.OBS_TWO_POINT_SPIN, obs.x, obs.y
    if isinstance(obs, Wrapping):
        return K.OBS_WRAPPING, obs.axis, 0
    if isinstance(obs, Magnetization):
        return K.OBS_MAGNETIZATION, 0, 0
    if isinstance(obs, TruncatedTwoPoint):
        return K.OBS_TRUNCATED, obs.x, obs.origin
    if isinstance(obs, MeanClusterFraction):
        return K.OBS_CLUSTER_FRACTION, 0, 0
    if isinstance(obs, Configuration):
        return K.OBS_CONFIGURATION, 0, 0
    raise TypeError(f"unknown observable {obs!r}")


def name(obs) -> str:
    if isinstance(obs, (Connect, TwoPointSpin)):
        return f"{type(obs).__name__.lower()}_{obs.x}_{obs.y}"
    if isinstance(obs, Wrapping):
        return f"wrapping_{obs.axis}"
    if isinstance(obs, TruncatedTwoPoint):
        return f"truncated_{obs.x}_{obs.origin}"
    return type(obs).__name__.lower()
