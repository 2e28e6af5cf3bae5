import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_spd
from soqo.errors import EigvalOutOfRange, GammaOutOfRange, InvalidParameter
from soqo.schedules import (
    eigen_gap_bound,
    fi_schedule,
    gamma_offset,
    lai_gamma_schedule,
    lai_schedule,
    make_schedule,
    robd_matrix,
    robd_regularizer,
)
from soqo.spectral import as_spectral, decompose, fixed_point_eigvals

# mpmath, 30 digits
LAM_L_1 = 0.381966011250105151795413165634
MU2_03 = 0.417890834580027361089233798399
ROBD_03_1 = (0.582109165419972638910766201601, 0.413583601748378270616376194065)


def test_lai_hand_iteration():
    s = lai_schedule([1.0], 3)
    np.testing.assert_allclose(s.rho[:, 0], [1 / 2.6, 0.4, 0.5], rtol=0, atol=1e-15)
    assert lai_schedule([1.0], 1).rho[0, 0] == 0.5


def test_lai_long_horizon_reaches_fixed_point():
    s = lai_schedule([1.0], 200)
    gap = s.rho[0, 0] - LAM_L_1
    assert 0 <= gap <= 1e-12
    assert gap <= (1 - LAM_L_1) * 0.5 ** 400 + 1e-16


def test_lai_gamma_endpoints():
    A = as_spectral([0.2, 1.0, 4.0])
    np.testing.assert_allclose(lai_gamma_schedule(A, 30, 0.0).rho, lai_schedule(A, 30).rho, rtol=0, atol=1e-14)
    s1 = lai_gamma_schedule([1.0], 10, 1.0)
    np.testing.assert_allclose(s1.rho, LAM_L_1, rtol=0, atol=1e-15)


@given(st.integers(1, 6), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_lai_gamma_one_is_fixed_point(d, T, seed):
    A = decompose(random_spd(np.random.default_rng(seed), d))
    s = lai_gamma_schedule(A, T, 1.0)
    np.testing.assert_allclose(s.rho, np.tile(fixed_point_eigvals(A.eigvals), (T, 1)), rtol=0, atol=1e-14)


def test_lai_gamma_rejects_bad_gamma():
    for g in (-0.1, 1.1, float("nan")):
        with pytest.raises(GammaOutOfRange):
            lai_gamma_schedule([1.0], 3, g)


def test_robd_examples():
    assert abs(robd_matrix([1.0]).rho[0, 0] - LAM_L_1) < 1e-15
    assert abs(robd_regularizer(0.3) - MU2_03) < 1e-15
    np.testing.assert_allclose(robd_matrix([0.3, 1.0]).rho[0], ROBD_03_1, rtol=0, atol=1e-15)


@given(st.lists(st.floats(0.01, 50.0), min_size=1, max_size=6))
def test_robd_min_direction_is_fixed_point(lams):
    A = as_spectral(lams)
    rho = robd_matrix(A).rho[0]
    i = int(np.argmin(A.eigvals))
    assert abs(rho[i] - fixed_point_eigvals(A.eigvals[i])) < 1e-13


def test_fi_schedule():
    A = as_spectral([0.3, 1.0])
    np.testing.assert_array_equal(fi_schedule(A, fixed_point_eigvals(A.eigvals), 4).rho, lai_gamma_schedule(A, 4, 1.0).rho)
    np.testing.assert_array_equal(fi_schedule(A, robd_matrix(A).rho[0], 4).rho, robd_matrix(A, 4).rho)
    np.testing.assert_array_equal(fi_schedule([1.0], [0.5], 3).rho, 0.5)
    for bad in ([0.0, 0.5], [0.5, 1.0], [np.nan, 0.5]):
        with pytest.raises(EigvalOutOfRange):
            fi_schedule(A, bad, 3)


def test_eigen_gap_bound_examples():
    np.testing.assert_array_equal(eigen_gap_bound([1.0], 5, 0.0, 3), [0.0])
    assert abs(eigen_gap_bound([1.0], 5, 1.0, 5)[0] - 0.154508497187473712051146708591) < 1e-15
    lai, lg = lai_schedule([1.0], 5), lai_gamma_schedule([1.0], 5, 1.0)
    for t in range(1, 6):
        gap = lai.at(t) - lg.at(t)
        assert np.all(gap <= eigen_gap_bound([1.0], 5, 1.0, t) + 1e-15)
    assert abs((lai.at(5) - lg.at(5))[0] - 0.118033988749894848204586834366) < 1e-15


@given(st.integers(1, 6), st.integers(1, 120), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_schedule_invariants(d, T, gamma, seed):
    A = decompose(random_spd(np.random.default_rng(seed), d, lo=0.01, hi=10.0))
    lamL = fixed_point_eigvals(A.eigvals)
    lai = lai_schedule(A, T)
    lg = lai_gamma_schedule(A, T, gamma)
    lg1 = lai_gamma_schedule(A, T, 1.0)
    for s in (lai, lg):
        assert np.all((s.rho > 0) & (s.rho < 1))
        assert s.recursion_residual() <= 1e-12
        assert np.all(s.rho >= lamL - 1e-15)
        assert np.all(np.diff(s.rho, axis=0) >= -1e-15)
    # gamma sandwich
    assert np.all(lg1.rho <= lg.rho + 1e-15) and np.all(lg.rho <= lai.rho + 1e-15)
    # contraction identity
    if T > 1:
        lhs = lai.rho[:-1] - lamL
        rhs = (lai.rho[1:] - lamL) * lai.rho[:-1] * lamL
        assert np.max(np.abs(lhs - rhs)) <= 1e-12
    # geometric gap
    t = np.arange(1, T + 1)[:, None]
    assert np.all(lai.rho - lamL <= (1 - lamL) * lai.rho[-1] ** (2 * (T - t + 1)) + 1e-15)


def test_gamma_offset_small_lambda_accuracy():
    # (1 + 4/lam)^(1/2) evaluated directly loses nothing at this scale; compare
    lam = 1e-8
    direct = lam / 2 * (np.sqrt(1 + 4 / lam) - 1)
    assert abs(gamma_offset(lam, 1.0) - direct) <= 1e-12 * direct


def test_schedule_accessors():
    s = lai_schedule([0.5, 2.0], 4)
    assert s.horizon == 4 and s.dim == 2
    np.testing.assert_allclose(s.matrix(4), np.diag(1 / np.array([1.5, 3.0])))
    assert list(s.rows())[0][:2] == (1, 0) and len(list(s.rows())) == 8
    with pytest.raises(IndexError):
        s.at(0)
    assert lai_gamma_schedule([1.0], 2, 0.5).label() == "lai-gamma:0.5"
    assert make_schedule("fi", [1.0], 2, C_eigvals=[0.3]).kind == "fi"
    with pytest.raises(InvalidParameter):
        make_schedule("nope", [1.0], 2)
    with pytest.raises(InvalidParameter):
        lai_schedule([1.0], 0)
