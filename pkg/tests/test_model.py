import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optosync import _kernels as _k
from optosync.model import (DomainError, MeanState, SystemParams, build_drift_matrix,
                            build_noise_matrix, check_covariance, label_swap_permutation,
                            mean_field_rhs, min_physical_eigenvalue, param_matrix,
                            symplectic_form, vacuum_covariance)

from oracles import fd_jacobian, fluctuation_rhs, printed_drift_matrix


def random_point(rng):
    params = SystemParams(omega1=1.0, omega2=rng.uniform(0.9, 1.1), delta1=rng.uniform(0.5, 1.5),
                          delta2=rng.uniform(0.5, 1.5), g=rng.uniform(0, 0.01), E=rng.uniform(0, 30),
                          kappa=rng.uniform(0.01, 0.3), gamma=rng.uniform(0.001, 0.01),
                          mu=rng.uniform(0, 0.01), lam=rng.uniform(0, 0.2), n_b=rng.uniform(0, 2))
    z = rng.normal(scale=50, size=4) + 1j * rng.normal(scale=50, size=4)
    return params, MeanState.from_array(z)


def test_drift_matches_linearized_fluctuation_jacobian():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p, s = random_point(rng)
        state = s.to_array()
        J = fd_jacobian(lambda u: fluctuation_rhs(p, state, u), np.zeros(8), h=1e-3)
        S = build_drift_matrix(p, s)
        assert np.all(np.abs(S - J) <= 1e-6 * (1 + np.abs(J)))


def test_drift_is_jacobian_of_mean_field():
    # the fluctuation equations are the linearization of the mean-field flow
    rng = np.random.default_rng(2)
    for _ in range(20):
        p, s = random_point(rng)

        def f(u):
            z = (u[0::2] + 1j * u[1::2]) / math.sqrt(2)
            d = mean_field_rhs(p, z)
            out = np.empty(8)
            out[0::2], out[1::2] = math.sqrt(2) * d.real, math.sqrt(2) * d.imag
            return out

        z = s.to_array()
        u0 = np.empty(8)
        u0[0::2], u0[1::2] = math.sqrt(2) * z.real, math.sqrt(2) * z.imag
        J = fd_jacobian(f, u0, h=1e-4)
        assert np.allclose(build_drift_matrix(p, s), J, rtol=1e-6, atol=1e-6)


def test_drift_matches_transcribed_matrix():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p, s = random_point(rng)
        assert np.array_equal(build_drift_matrix(p, s), printed_drift_matrix(p, *s.to_array()))


def test_fig2_entries():
    p = SystemParams.fig2(mu=0.004, lam=0.16)
    S = build_drift_matrix(p, MeanState(1 + 2j, 0j, 0.5 + 0j, 0j))
    assert S[0, 0] == -0.15
    assert S[0, 1] == pytest.approx(-(1 + 2 * 0.004 * 0.5))
    assert S[0, 3] == 0.16 and S[1, 2] == -0.16
    assert S[4, 7] == -0.004 and S[5, 6] == 0.004
    assert S[5, 0] == pytest.approx(0.008) and S[5, 1] == pytest.approx(0.016)


def test_label_swap_symmetry():
    rng = np.random.default_rng(4)
    P = label_swap_permutation()
    for _ in range(20):
        p, s = random_point(rng)
        S = build_drift_matrix(p, s)
        S_sw = build_drift_matrix(p.swapped(), s.swapped())
        assert np.allclose(P @ S @ P.T, S_sw, atol=1e-14)
        assert np.allclose(mean_field_rhs(p.swapped(), s.swapped()),
                           mean_field_rhs(p, s)[[1, 0, 3, 2]], atol=1e-12)


def test_noise_matrix():
    N = build_noise_matrix(SystemParams(kappa=0.15, gamma=0.005, n_b=1.0))
    assert np.allclose(np.diag(N), [0.15] * 4 + [0.015] * 4)
    assert np.count_nonzero(N - np.diag(np.diag(N))) == 0
    N0 = build_noise_matrix(SystemParams(kappa=0.15, gamma=0.005, n_b=0.0))
    assert np.allclose(np.diag(N0)[4:], 0.005)


def test_noise_scaling_in_n_b():
    for nb in (0.0, 0.5, 3.0):
        N = build_noise_matrix(SystemParams(gamma=0.01, n_b=nb))
        assert N[4, 4] == pytest.approx(0.01 * (2 * nb + 1))


def test_vacuum_is_fixed_point_of_decoupled_blocks():
    p = SystemParams(g=0.0, mu=0.0, lam=0.0, E=0.0)
    S = build_drift_matrix(p, MeanState())
    N = build_noise_matrix(p)
    C = vacuum_covariance()
    assert np.allclose(S @ C + C @ S.T + N, 0.0, atol=1e-15)


def test_steady_state_root_has_zero_rhs():
    from scipy.optimize import root
    p = SystemParams.fig2(E=2.0)

    def f(u):
        z = u[0::2] + 1j * u[1::2]
        d = mean_field_rhs(p, z)
        return np.concatenate([d.real, d.imag])

    sol = root(f, np.zeros(8), tol=1e-14)
    assert sol.success
    z = sol.x[0::2] + 1j * sol.x[1::2]
    assert np.max(np.abs(mean_field_rhs(p, z))) < 1e-10


def test_zero_field_rhs():
    p = SystemParams(omega1=1.0, omega2=0.0, delta1=0.0, delta2=0.0, g=0.0, E=0.0, kappa=0.0,
                     gamma=0.0)
    assert np.allclose(mean_field_rhs(p, MeanState()), 0.0)


def test_kernels_agree_with_numpy_reference():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p, s = random_point(rng)
        P = param_matrix(p)[0]
        y = _k.to_real(s.to_array()[None, :])[0]
        out = np.empty(8)
        _k.mean_rhs(P, y, out)
        ref = mean_field_rhs(p, s)
        assert np.allclose(out[0::2] + 1j * out[1::2], ref, rtol=1e-13, atol=1e-12)
        S = np.empty((8, 8))
        _k.drift(P, y, S)
        assert np.allclose(S, build_drift_matrix(p, s), rtol=1e-13, atol=1e-14)


def test_symplectic_form_and_physicality():
    om = symplectic_form()
    assert np.allclose(om, -om.T)
    assert om[4, 5] == 1 and om[5, 4] == -1
    assert min_physical_eigenvalue(vacuum_covariance()) == pytest.approx(0.0, abs=1e-14)
    check_covariance(vacuum_covariance())
    with pytest.raises(DomainError):
        check_covariance(0.4 * np.eye(8))
    bad = vacuum_covariance()
    bad[0, 1] = 0.1
    with pytest.raises(DomainError, match="symmetric"):
        check_covariance(bad)


@pytest.mark.parametrize("field,value", [("kappa", -0.1), ("gamma", -1.0), ("n_b", -1.0),
                                         ("g", float("nan")), ("E", float("inf")), ("omega1", 0.0)])
def test_params_domain(field, value):
    with pytest.raises(DomainError):
        SystemParams(**{field: value})


def test_state_domain_and_roundtrip():
    with pytest.raises(DomainError):
        MeanState(A1=complex(float("nan"), 0))
    s = MeanState.initial(math.pi / 2, 2.0)
    assert s.B1 == pytest.approx(2j) and s.B2 == 2.0 and s.A1 == 0
    assert MeanState.from_array(s.to_array()) == s
    p = SystemParams.fig2()
    assert SystemParams.from_dict(p.to_dict()) == p
    with pytest.raises(DomainError, match="unknown"):
        SystemParams.from_dict({"kapa": 0.1})


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0, 0.2), st.floats(0, 0.01))
def test_drift_trace_is_damping_only(re_b, im_b, lam, mu):
    # couplings and the mean field only move energy around: the trace is set by the losses
    p = SystemParams.fig2(lam=lam, mu=mu)
    S = build_drift_matrix(p, MeanState(1 + 1j, 2 - 1j, complex(re_b, im_b), 3j))
    assert np.trace(S) == pytest.approx(-4 * p.kappa - 4 * p.gamma)
