import numpy as np
import pytest

from rclocality.exact import MONOCHROMATIC, WIRED, PottsParams, RcParams, couple_params, potts_expectation, rc_distribution
from rclocality.io import corpus_graph
from rclocality.lattice import Graph, ball, torus
from rclocality.observables import (Configuration, Connect, Magnetization, MeanClusterFraction, TruncatedTwoPoint,
                                    TwoPointSpin, Wrapping)
from rclocality.sampler import (CHAYES_MACHTA, HEAT_BATH, SWENDSEN_WANG, ChainConfig, UnsupportedAlgorithmError,
                                cm_step, heat_bath_step, make_rng, run_chain, sample_series, series_filename,
                                sw_step)
from rclocality.stats import binned_stats

EDGE = Graph(2, [(0, 1)])


def within(res, exact, k=3.0):
    return abs(res.mean - exact) <= k * res.stderr + 1e-12


def test_sw_limits():
    g = corpus_graph("ladder2x4")
    rng = make_rng(1)
    # p = 1: a monochromatic state is a single cluster and stays monochromatic
    s, w = sw_step(g, np.full(g.num_vertices, 2), PottsParams(np.inf, 3), rng)
    assert len(set(s.tolist())) == 1 and w.all()
    # from a random state every step only merges clusters, so it is absorbed quickly
    sigma = rng.integers(0, 3, g.num_vertices)
    for _ in range(100):
        sigma, w = sw_step(g, sigma, PottsParams(np.inf, 3), rng)
    assert len(set(sigma.tolist())) == 1 and w.all()
    s, w = sw_step(g, sigma, PottsParams(0.0, 3), rng)
    assert not w.any()


def test_sw_independent_colours_at_beta_zero():
    g = corpus_graph("k4")
    rng = make_rng(2)
    counts = np.zeros((4, 3))
    sigma = np.zeros(4, dtype=np.int64)
    for _ in range(30000):
        sigma, _ = sw_step(g, sigma, PottsParams(0.0, 3), rng)
        counts[np.arange(4), sigma] += 1
    freq = counts / 30000
    assert np.all(np.abs(freq - 1 / 3) < 4 * np.sqrt(2 / 9 / 30000))


def test_edwards_sokal_consistency():
    g = torus(4, 4)
    rng = make_rng(3)
    sigma = rng.integers(0, 3, g.num_vertices)
    for _ in range(50):
        s, w = sw_step(g, sigma, PottsParams(0.6, 3), rng)
        u, v = g.edges[w].T
        # open edges were monochromatic before recolouring and stay monochromatic after
        assert np.all(sigma[u] == sigma[v])
        assert np.all(s[u] == s[v])
        sigma = s


def test_sw_monochromatic_boundary_forces_colour():
    g = ball(torus(5, 5), 12, 1)
    rng = make_rng(4)
    s, _ = sw_step(g, np.zeros(g.num_vertices, np.int64), PottsParams(np.inf, 3, MONOCHROMATIC, 2), rng)
    assert np.all(s == 2)


def test_sw_rejects_noninteger_q():
    with pytest.raises(UnsupportedAlgorithmError):
        sample_series(EDGE, RcParams(0.5, 1.5), ChainConfig(SWENDSEN_WANG, sweeps=10), [Connect(0, 1)])
    with pytest.raises(UnsupportedAlgorithmError):
        sample_series(EDGE, RcParams(0.5, 0.5), ChainConfig(CHAYES_MACHTA, sweeps=10), [Connect(0, 1)])
    with pytest.raises(UnsupportedAlgorithmError):
        ChainConfig("metropolis")


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(sweeps=0)
    with pytest.raises(ValueError):
        ChainConfig(stride=0)


def test_heat_bath_q1_ignores_connectivity():
    g = corpus_graph("triangle")
    rng = make_rng(5)
    n = 40000
    opened = 0
    omega = np.array([True, True, False])
    for _ in range(n):
        w = heat_bath_step(g, omega, RcParams(0.3, 1.0), rng, 2)
        opened += w[2]
    assert abs(opened / n - 0.3) < 4 * np.sqrt(0.21 / n)


def test_heat_bath_single_edge():
    rng = make_rng(6)
    n = 60000
    hits = sum(heat_bath_step(EDGE, [False], RcParams(0.5, 2.0), rng, 0)[0] for _ in range(n))
    assert abs(hits / n - 1 / 3) < 4 * np.sqrt(2 / 9 / n)


def test_heat_bath_cycle_marginal():
    g = Graph(8, [(i, (i + 1) % 8) for i in range(8)])
    params = RcParams(0.6, 2.0)
    marg = rc_distribution(g, params).edge_marginals()[0]
    series = sample_series(g, params, ChainConfig(HEAT_BATH, sweeps=100_000, burn_in=100, seed=7), [Configuration()])
    res = binned_stats(series[:, 0].astype(np.int64) & 1)
    assert within(res, marg)


def test_cm_q1_is_independent_resampling():
    g = corpus_graph("square")
    rng = make_rng(8)
    omega = np.zeros(4, bool)
    tot = np.zeros(4)
    n = 20000
    for _ in range(n):
        omega = cm_step(g, omega, RcParams(0.35, 1.0), rng)
        tot += omega
    assert np.all(np.abs(tot / n - 0.35) < 4 * np.sqrt(0.35 * 0.65 / n))


def test_cm_rejects_small_q():
    with pytest.raises(UnsupportedAlgorithmError):
        cm_step(EDGE, [False], RcParams(0.5, 0.7), make_rng(0))


def test_cm_and_sw_bond_density_agree():
    g = torus(4, 4)
    params = RcParams(0.5, 2.0)
    obs = [MeanClusterFraction()]
    a = run_chain(g, params, ChainConfig(SWENDSEN_WANG, sweeps=40000, burn_in=500, seed=9), obs)[0]
    b = run_chain(g, params, ChainConfig(CHAYES_MACHTA, sweeps=40000, burn_in=500, seed=9), obs)[0]
    assert abs(a.mean - b.mean) < 3 * np.hypot(a.stderr, b.stderr)


def test_cm_real_q_configurations():
    g = corpus_graph("bowtie")
    params = RcParams(0.55, 1.5)
    exact = rc_distribution(g, params).probs
    series = sample_series(g, params, ChainConfig(CHAYES_MACHTA, sweeps=200_000, burn_in=100, seed=10),
                           [Configuration()])
    idx = series[:, 0].astype(np.int64)
    for c in range(len(exact)):
        assert within(binned_stats((idx == c).astype(float)), exact[c], k=4.0)


def test_sw_two_point_3x3():
    lat = torus(3, 3)
    params = PottsParams(0.4, 2)
    exact = potts_expectation(lat, params, TwoPointSpin(0, 4))
    res = run_chain(lat, params, ChainConfig(SWENDSEN_WANG, sweeps=100_000, burn_in=500, seed=11),
                    [TwoPointSpin(0, 4), Connect(0, 4)])
    assert within(res[0], exact)
    assert within(res[1], exact)


def test_wired_ball_connection():
    g = ball(torus(7, 7), 24, 2)
    params = RcParams(0.5, 2.0, WIRED)
    exact = rc_distribution(g, params).connection(0, 6)
    res = run_chain(g, params, ChainConfig(CHAYES_MACHTA, sweeps=100_000, burn_in=200, seed=12), [Connect(0, 6)])
    assert within(res[0], exact)


def test_monochromatic_magnetization():
    g = ball(torus(5, 5), 12, 1)
    params = PottsParams(0.5, 3, MONOCHROMATIC, 1)
    exact_mean = np.mean([potts_expectation(g, params, Magnetization(x)) for x in range(g.num_vertices)])
    res = run_chain(g, params, ChainConfig(SWENDSEN_WANG, sweeps=100_000, burn_in=200, seed=13), [Magnetization()])
    assert 0 < exact_mean < 1
    assert within(res[0], exact_mean)


def test_determinism_and_streams():
    lat = torus(6, 6)
    params = RcParams(0.5, 2.0)
    obs = [Wrapping(0), Connect(0, 21), TruncatedTwoPoint(3)]
    c = ChainConfig(SWENDSEN_WANG, sweeps=500, burn_in=10, seed=99)
    a = sample_series(lat, params, c, obs)
    b = sample_series(lat, params, c, obs)
    assert np.array_equal(a, b)
    other = sample_series(lat, params, ChainConfig(SWENDSEN_WANG, sweeps=500, burn_in=10, seed=99, chain_index=1), obs)
    assert not np.array_equal(a, other)
    assert set(np.unique(a[:, 0])) <= {0.0, 1.0}


def test_stride():
    lat = torus(4, 4)
    s = sample_series(lat, RcParams(0.5, 2.0), ChainConfig(SWENDSEN_WANG, sweeps=100, stride=7, seed=1), [Wrapping(1)])
    assert s.shape == (14, 1)


def test_wrapping_validation():
    with pytest.raises(ValueError):
        sample_series(torus(4, 4), RcParams(0.5, 2.0), ChainConfig(sweeps=10), [Wrapping(2)])
    with pytest.raises(ValueError):
        sample_series(corpus_graph("square"), RcParams(0.5, 2.0), ChainConfig(sweeps=10), [Wrapping(0)])


def test_wrapping_limits():
    lat = torus(8, 8)
    lo = run_chain(lat, RcParams(0.0, 2.0), ChainConfig(CHAYES_MACHTA, sweeps=50, burn_in=0, seed=1), [Wrapping(0)])[0]
    hi = run_chain(lat, RcParams(1.0, 2.0), ChainConfig(CHAYES_MACHTA, sweeps=50, burn_in=100, seed=1), [Wrapping(0)])[0]
    assert lo.mean == 0.0 and hi.mean == 1.0


def test_series_files(tmp_path):
    lat = torus(4, 4)
    params = RcParams(0.4, 1.0)
    c = ChainConfig(CHAYES_MACHTA, sweeps=64, seed=3)
    res = run_chain(lat, params, c, [Connect(0, 5)], series_dir=tmp_path)
    path = tmp_path / series_filename(lat, params, c, Connect(0, 5))
    data = np.loadtxt(path)
    assert data.shape == (64,)
    assert data.mean() == pytest.approx(res[0].mean)
    assert "4px4p" in path.name and "seed3" in path.name and "p0.400000" in path.name


def test_beta_params_match_rc_params():
    lat = torus(4, 4)
    beta = 0.3
    p = couple_params(2, beta=beta)
    c = ChainConfig(SWENDSEN_WANG, sweeps=300, seed=5)
    a = sample_series(lat, PottsParams(beta, 2), c, [Connect(0, 5)])
    b = sample_series(lat, RcParams(p, 2.0), c, [Connect(0, 5)])
    assert np.array_equal(a, b)
