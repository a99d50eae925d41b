import numpy as np
import pytest

from rclocality.exact import PottsParams
from rclocality.greens import green_quadratic_form, torus_green
from rclocality.irb import (EXACT, IrbRecord, IrbReport, check_infrared_bound, compute_stu, exact_correlations,
                            irb_records_csv, irb_summary, make_locality_vector, mc_correlations, random_zero_sum,
                            spin_quadratic_form)
from rclocality.lattice import InvalidSpecError, build_lattice, torus
from rclocality.sampler import ChainConfig


@pytest.fixture(scope="module")
def lat():
    return torus(4, 4)


@pytest.fixture(scope="module")
def corr03(lat):
    return exact_correlations(lat, PottsParams(0.3, 2))


def test_locality_vector_examples(lat):
    E = [0, 1, 2, 3]
    v = make_locality_vector(lat, E)
    assert np.allclose(v[E], -3 / 16) and np.allclose(np.delete(v, E), 1 / 16)
    assert abs(v.sum()) < 1e-15
    assert np.allclose(make_locality_vector(lat, range(16)), 0.0)
    v1 = make_locality_vector(lat, [5])
    assert v1[5] == pytest.approx(1 / 16 - 1) and np.allclose(np.delete(v1, 5), 1 / 16)
    with pytest.raises(ValueError):
        make_locality_vector(lat, [])


def test_stu_consistency(lat, corr03):
    params = PottsParams(0.3, 2)
    E = [0, 1, 5, 10]
    S, T, U = compute_stu(lat, params, E, corr03)
    v = make_locality_vector(lat, E)
    rep = check_infrared_bound(lat, params, v, corr03)
    assert rep.lhs == pytest.approx(S - T, abs=1e-12)
    assert rep.rhs == pytest.approx((params.q - 1) / (2 * params.beta) * U, abs=1e-12)
    assert S - T <= (params.q - 1) / (2 * params.beta) * U


def test_stu_two_site_example(lat, corr03):
    S, T, U = compute_stu(lat, PottsParams(0.3, 2), [0, lat.index((1, 0))], corr03)
    assert S - T <= U / (2 * 0.3)


def test_small_beta_limit(lat):
    corr = exact_correlations(lat, PottsParams(1e-6, 2))
    E = [0, 3, 7]
    S, T, _ = compute_stu(lat, PottsParams(1e-6, 2), E, corr)
    assert S == pytest.approx(1 / 3, abs=1e-5)
    assert T == pytest.approx(1 / 16, abs=1e-5)


def test_exact_bound_over_beta_grid(lat):
    rng = np.random.default_rng(7)
    vs = [random_zero_sum(16, rng) for _ in range(100)]
    G = torus_green(lat)
    for beta in np.linspace(0.1, 1.0, 10):
        params = PottsParams(beta, 2)
        corr = exact_correlations(lat, params)
        for v in vs:
            rep = check_infrared_bound(lat, params, v, corr, green=G)
            assert rep.slack >= -1e-9 and rep.passed and rep.source == EXACT


def test_bound_on_4x6():
    lat = torus(4, 6)
    rng = np.random.default_rng(8)
    # 2^24 colourings: fits once the cap is raised
    params = PottsParams(0.6, 2)
    corr = exact_correlations(lat, params, max_states=2 ** 24)
    for _ in range(20):
        assert check_infrared_bound(lat, params, random_zero_sum(24, rng), corr).passed


def test_preconditions(lat, corr03):
    params = PottsParams(0.3, 2)
    v = np.zeros(16)
    v[0] = 0.1
    with pytest.raises(ValueError):
        check_infrared_bound(lat, params, v, corr03)
    with pytest.raises(InvalidSpecError):
        check_infrared_bound(build_lattice([(6, "periodic"), (3, "periodic")]), params, np.zeros(18), corr03)
    with pytest.raises(InvalidSpecError):
        check_infrared_bound(torus(4, 2), params, np.zeros(8), corr03)
    with pytest.raises(InvalidSpecError):
        check_infrared_bound(build_lattice([(4, "periodic"), (4, "open")]), params, np.zeros(16), corr03)
    with pytest.raises(ValueError):
        check_infrared_bound(lat, PottsParams(0.0, 2), np.zeros(16), corr03)


def test_spin_form_matches_double_sum(lat, corr03):
    rng = np.random.default_rng(1)
    v = rng.standard_normal(16)
    c = lat.all_coords()
    brute = sum(v[x] * v[y] * corr03.values[tuple((c[y] - c[x]) % 4)] for x in range(16) for y in range(16))
    assert spin_quadratic_form(corr03, v)[0] == pytest.approx(brute, abs=1e-12)


def test_monte_carlo_source():
    lat = torus(6, 4)
    params = PottsParams(0.35, 2)
    corr = mc_correlations(lat, params, ChainConfig(sweeps=20000, burn_in=500, seed=3))
    assert corr.values.reshape(-1)[0] == pytest.approx(1.0)
    rng = np.random.default_rng(2)
    reps = [check_infrared_bound(lat, params, random_zero_sum(24, rng), corr) for _ in range(20)]
    assert all(r.passed for r in reps)
    assert all(r.lhs_error > 0 for r in reps)


def test_report_rule():
    r = IrbReport(lhs=1.0, rhs=0.9, lhs_error=0.05, source="monte_carlo", tolerance=1e-9)
    assert r.slack == pytest.approx(-0.1) and r.passed
    assert not IrbReport(1.0, 0.9, 0.0, EXACT, 1e-9).passed


def test_records_csv(lat, corr03):
    params = PottsParams(0.3, 2)
    rep = check_infrared_bound(lat, params, make_locality_vector(lat, [0, 1]), corr03)
    text = irb_records_csv([IrbRecord("4px4p", 2, 0.3, "loc0", rep)])
    header, row = text.strip().splitlines()
    assert header == "lattice,q,beta,v_id,lhs,rhs,slack,error,source,pass"
    assert row.startswith("4px4p,2,0.29999999999999999,loc0,") and row.endswith(",exact,1")
    assert irb_summary([IrbRecord("4px4p", 2, 0.3, "loc0", rep)]).startswith("1/1 checks passed")


def test_green_quadratic_form_is_rhs_scale(lat):
    v = make_locality_vector(lat, [0, 5])
    assert green_quadratic_form(torus_green(lat), v) > 0
