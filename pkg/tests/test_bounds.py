import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from conftest import random_spd
from soqo.bounds import (
    BoundReport,
    bound_report,
    cr_bounds,
    fi_regret_lower,
    framework_cr,
    ftm_regret_lower,
    interpolation_expected_cost,
    lai_cr_upper,
    lai_expected_cost,
    lai_gamma_cr_smalllambda,
    lai_gamma_cr_upper,
    lai_gamma_regret_upper,
    robd_cr,
    robd_regret_lower,
    schedule_framework_cr,
    schedule_regularizer_extremes,
    static_optimal_expected_cost,
    w_function,
)
from soqo.environments import IncrementSpec, TraceSpec, generate_batch
from soqo.errors import DimensionMismatch, InvalidParameter
from soqo.montecarlo import scenario_expected_cost
from soqo.policies import total_costs
from soqo.schedules import fi_schedule, lai_gamma_schedule, lai_schedule, robd_matrix, robd_regularizer
from soqo.spectral import as_spectral, decompose, fixed_point_eigvals

# mpmath, 30 digits
LG_REGRET_1 = 0.103005664791649141367431139061
GOLDEN = 1.61803398874989484820458683437
CR_001 = 10.51249219725039286384860607416
FTM_100 = 19.0983005625052575897706582817


def mc_costs(policy, A, spec, N):
    v = generate_batch(spec, range(N))
    return total_costs(policy, A, v, spec.start)


def mean_se(x):
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


def test_lai_expected_cost_examples():
    assert lai_expected_cost([1.0, 2.0], np.zeros((2, 2)), 5) == (0.0, 0.0)
    exact, upper = lai_expected_cost([1.0], 1.0, 1)
    assert exact == 0.25
    assert upper == pytest.approx(0.5 * (1 - 0.381966011250105151795), abs=1e-15)
    with pytest.raises(DimensionMismatch):
        lai_expected_cost([1.0, 2.0], np.eye(3), 2)


def test_lai_expected_cost_monte_carlo():
    spec = TraceSpec(dim=1, horizon=1, seed=13)
    m, se = mean_se(mc_costs("lai", [1.0], spec, 20000))
    assert abs(m - 0.25) <= 3 * se


@given(st.integers(1, 5), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_exact_below_upper(d, T, seed):
    rng = np.random.default_rng(seed)
    A = decompose(random_spd(rng, d))
    S = random_spd(rng, d)
    exact, upper = lai_expected_cost(A, S, T)
    assert exact <= upper + 1e-12


@given(st.integers(1, 4), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_two_cost_expansions_agree(d, T, seed):
    """Trace-form LAI cost equals the covariance-propagation cost of the same schedule."""
    rng = np.random.default_rng(seed)
    A = decompose(random_spd(rng, d))
    S = random_spd(rng, d)
    exact, _ = lai_expected_cost(A, S, T)
    assert abs(exact - interpolation_expected_cost(lai_schedule(A, T), S)) <= 1e-10 * (1 + exact)


@pytest.mark.parametrize("policy,sched", [("fi:0.3", lambda: fi_schedule([2.0], [0.3], 7)),
                                          ("lai-gamma:0.5", lambda: lai_gamma_schedule([2.0], 7, 0.5))])
def test_interpolation_cost_matches_enumeration(policy, sched):
    assert abs(interpolation_expected_cost(sched(), 1.0) - scenario_expected_cost(policy, 2.0, 1.0, 7)) < 1e-12


def test_w_function_examples():
    assert w_function(1.0, 0.5) == pytest.approx(2 / 3, abs=1e-15)
    cL = float(fixed_point_eigvals(1.0))
    assert w_function(1.0, cL) == pytest.approx(1 - cL, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.01, 0.3, 1.0, 3.0])
def test_w_minimizer_is_fixed_point(alpha):
    res = minimize_scalar(lambda c: w_function(alpha, c), bounds=(1e-9, 1 - 1e-9), method="bounded",
                          options={"xatol": 1e-13})
    assert abs(res.x - fixed_point_eigvals(alpha)) <= 1e-8
    assert res.fun == pytest.approx(1 - fixed_point_eigvals(alpha), abs=1e-12)


def test_fi_lower_at_fixed_point_is_vacuous():
    A = as_spectral([0.3, 1.0])
    c = fixed_point_eigvals(A.eigvals)
    corr = c.max() ** 2 / (1 - c.max() ** 2) * 2 / 2
    assert fi_regret_lower(A, np.eye(2), c, 50) == pytest.approx(-corr, abs=1e-14)
    with pytest.raises(InvalidParameter):
        fi_regret_lower(A, np.eye(2), [0.0, 0.5], 5)


def test_fi_lower_bound_below_exact_regret():
    A = as_spectral([0.3, 1.0, 2.5])
    for c in ([0.2, 0.5, 0.4], [0.7, 0.3, 0.1], [0.5, 0.5, 0.5]):
        for T in (5, 50, 200):
            regret = interpolation_expected_cost(fi_schedule(A, c, T), np.eye(3)) - lai_expected_cost(A, np.eye(3), T)[0]
            assert regret >= fi_regret_lower(A, np.eye(3), c, T) - 1e-10


def test_robd_lower_examples():
    assert robd_regret_lower([0.7, 0.7], np.eye(2), 100) <= 0
    A = as_spectral([0.3, 1.0])
    b100 = robd_regret_lower(A, np.eye(2), 100)
    # the constant correction dominates until T is a few hundred; the bound is
    # affine with positive slope, so it turns positive for long horizons
    assert b100 < 0 < robd_regret_lower(A, np.eye(2), 400)
    c = robd_matrix(A).rho[0]
    corr = c.max() ** 2 / (1 - c.max() ** 2) * 2 / 2
    assert robd_regret_lower(A, np.eye(2), 200) - 2 * b100 == pytest.approx(corr, abs=1e-12)


def test_robd_lower_vs_monte_carlo():
    A = as_spectral([0.3, 1.0])
    spec = TraceSpec(dim=2, horizon=100, seed=21)
    v = generate_batch(spec, range(1000))
    reg = total_costs("robd", A, v) - total_costs("lai", A, v)
    m, se = mean_se(reg)
    assert m - 3 * se > 0 and m >= robd_regret_lower(A, np.eye(2), 100) - 3 * se


def test_lai_gamma_regret_examples():
    assert lai_gamma_regret_upper([1.0, 2.0], 1.0, 0.0) == 0.0
    assert lai_gamma_regret_upper([1.0], 1.0, 1.0) == pytest.approx(LG_REGRET_1, abs=1e-15)
    A = as_spectral([0.5, 2.0])
    assert lai_gamma_regret_upper(A, 1.0, 0.5, "dim_sum") > lai_gamma_regret_upper(A, 1.0, 0.5)
    with pytest.raises(InvalidParameter):
        lai_gamma_regret_upper(A, 1.0, 0.5, "max")


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_lai_gamma_regret_bound_exact_soundness(gamma):
    # isotropic covariance sigma_c^2 = 1 in every coordinate
    for lams in ([0.3, 1.0], [1.0], [0.01, 0.5, 4.0]):
        A = as_spectral(lams)
        S = np.eye(A.dim)
        for T in (1, 10, 100, 400):
            regret = interpolation_expected_cost(lai_gamma_schedule(A, T, gamma), S) - lai_expected_cost(A, S, T)[0]
            assert -1e-12 <= regret <= lai_gamma_regret_upper(A, float(np.trace(S)), gamma) + 1e-12


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_lai_gamma_regret_bound_monte_carlo(gamma):
    A = as_spectral([0.3, 1.0])
    bound = lai_gamma_regret_upper(A, 2.0, gamma)
    for T in (25, 50, 100):
        v = generate_batch(TraceSpec(dim=2, horizon=T, seed=T), range(1000))
        m, se = mean_se(total_costs(f"lai-gamma:{gamma}", A, v) - total_costs("lai", A, v))
        assert m <= bound + 3 * se


def test_cr_examples():
    rep = cr_bounds([1.0, 4.0])
    assert rep.robd_cr == pytest.approx(GOLDEN, abs=1e-15)
    assert rep.lai_cr_upper == 2.0
    lam = 0.25
    assert cr_bounds([lam, lam]).lai1_cr_smalllambda == pytest.approx(1 + 1 / math.sqrt(lam), abs=1e-15)
    assert lai_gamma_cr_upper([0.01, 0.01], 1.0) == pytest.approx(CR_001, abs=1e-12)
    second = (2 / 0.01) / (math.sqrt(401) + 1)
    assert second == pytest.approx(9.5124921972503929, abs=1e-12)


def test_lai_gamma_cr_interpolates():
    A = as_spectral([0.05, 0.4])
    assert lai_gamma_cr_upper(A, 0.0) == pytest.approx(lai_cr_upper(0.05), rel=1e-12) or \
        lai_gamma_cr_upper(A, 0.0) >= lai_cr_upper(0.05) - 1e-12
    vals = [lai_gamma_cr_upper(A, g) for g in (0.0, 0.25, 0.5, 1.0)]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    assert lai_gamma_cr_smalllambda(A, 1.0) == pytest.approx(1 + math.sqrt(8 / 0.05), rel=1e-12)


@pytest.mark.parametrize("m", [0.01, 0.1, 1.0])
def test_framework_recovers_lai(m):
    A = as_spectral([m, 3 * m, 10.0])
    sched = lai_schedule(A, 60)
    a, b = schedule_regularizer_extremes(sched)
    assert a.min() == 0.0
    bmax = b.max()
    lmax = A.lambda_max
    assert bmax <= (math.sqrt(lmax**2 + 4 * lmax) - lmax) / 2 + 1e-12 < 1 + 1e-12
    assert schedule_framework_cr(sched) == pytest.approx(lai_cr_upper(m), rel=1e-12)


@pytest.mark.parametrize("m", [0.01, 0.1, 1.0, 7.0])
def test_framework_recovers_robd(m):
    mu = robd_regularizer(m)
    assert framework_cr(m, 1.0, 1.0, mu, mu) == pytest.approx(robd_cr(m), abs=1e-12)


def test_framework_limits_and_errors():
    # zero regularizer: the second branch is all that remains
    assert framework_cr(2.0, 1.0, 1.0, 0.0, 0.0) == 1.5
    # equal, growing regularizers: the second branch vanishes, the first takes over
    for a in (1e3, 1e6):
        assert framework_cr(1.0, 1.0, 1.0, a, a) == pytest.approx(1 + a, rel=1e-15)
    for args in ((0, 1, 1, 0, 0), (1, 1, 0.5, 0, 0), (1, 1, 1, 2, 1), (1, 1, 1, -1, 0)):
        with pytest.raises(InvalidParameter):
            framework_cr(*args)


def test_ftm_bound():
    assert ftm_regret_lower(1.0, 0.0, 100) == 0.0
    assert ftm_regret_lower(1.0, 1.0, 100) == pytest.approx(FTM_100, abs=1e-12)
    A = as_spectral([0.3, 1.0])
    v = generate_batch(TraceSpec(dim=2, horizon=100, seed=5), range(1000))
    m, se = mean_se(total_costs("ftm", A, v) - total_costs("lai", A, v))
    assert m >= ftm_regret_lower(A.lambda_max, 2.0, 100) - 3 * se


@pytest.mark.parametrize("family", ["normal", "laplace", "lognormal_sym"])
def test_optimality_sandwich(family):
    A1 = as_spectral([1.0])
    spec = TraceSpec(dim=1, horizon=30, increments=IncrementSpec(family), seed=31)
    v = generate_batch(spec, range(4000))
    costs = {p: total_costs(p, A1, v) for p in ("offline-opt", "lai", "fi:0.25", "fi:0.6", "static-opt")}
    assert np.all(costs["offline-opt"] <= costs["lai"] + 1e-9)
    m_lai, se_lai = mean_se(costs["lai"])
    for fi in ("fi:0.25", "fi:0.6"):
        m, se = mean_se(costs[fi] - costs["lai"])
        assert m >= -3 * se
        m2, se2 = mean_se(costs["static-opt"] - costs[fi])
        assert m2 >= -3 * se2


def test_static_cost_closed_form_monte_carlo():
    for T in (1, 10):
        v = generate_batch(TraceSpec(dim=1, horizon=T, seed=T), range(20000))
        m, se = mean_se(total_costs("static-opt", [1.0], v))
        assert abs(m - static_optimal_expected_cost(1.0, 1.0, T)) <= 3 * se


def test_bound_report():
    rep = bound_report([0.3, 1.0], Sigma=np.eye(2), T=50, gamma=0.5)
    d = rep.to_dict()
    assert set(d) == set(BoundReport.__dataclass_fields__)
    assert all(math.isfinite(x) for x in d.values())
    for k in ("robd_cr", "lai_cr_upper", "lai_gamma_cr_upper", "lai1_cr_smalllambda", "framework_cr"):
        assert d[k] >= 1
    assert json.loads(rep.to_json()) == d
    assert set(cr_bounds([1.0]).to_dict()) == {"robd_cr", "lai_cr_upper", "lai1_cr_smalllambda"}
