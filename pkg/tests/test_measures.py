import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optosync.dynamics import IntegratorConfig, Trajectory, evolve
from optosync.measures import (PhaseUndefinedError, UnphysicalCovarianceError, mechanical_errors,
                               measure_series, phase_error, rotate_covariance, sc_prime, sp_prime,
                               time_average)
from optosync.model import (MeanState, SystemParams, min_physical_eigenvalue, symplectic_form,
                            vacuum_covariance)


def random_physical_cov(rng, n=8):
    # Williamson form: symplectic congruence of a thermal diagonal
    om = symplectic_form(n // 2)
    H = rng.normal(size=(n, n))
    H = H + H.T
    from scipy.linalg import expm
    Ssym = expm(0.3 * om @ H)  # exp of a Hamiltonian matrix is symplectic
    nu = 0.5 + rng.exponential(size=n // 2)
    D = np.diag(np.repeat(nu, 2))
    C = Ssym @ D @ Ssym.T
    return 0.5 * (C + C.T)


def test_theta_trivial_cases():
    t = np.linspace(0, 1, 11)
    ones = np.ones_like(t, dtype=complex)
    assert np.all(phase_error(times=t, B1=ones, B2=ones).theta == 0)
    ph = phase_error(times=t, B1=1j * ones, B2=ones)
    assert np.allclose(ph.theta, math.pi / 2)


def test_theta_synthetic_rotation_unwraps():
    t = np.arange(0, 100.0 + 1e-9, 0.1)
    ph = phase_error(times=t, B1=np.exp(1.005j * t), B2=np.exp(1j * t))
    assert ph.theta[-1] == pytest.approx(0.5, abs=1e-9)
    assert np.all(np.abs(np.diff(ph.phi1)) < math.pi)
    assert np.all(np.abs(np.diff(ph.theta)) < 0.01)


def test_theta_floor_error():
    t = np.array([0.0, 1.0, 2.0])
    with pytest.raises(PhaseUndefinedError, match="phase undefined at t=1"):
        phase_error(times=t, B1=np.array([1, 0, 1], dtype=complex), B2=np.ones(3, dtype=complex))


def test_sc_prime_examples():
    assert sc_prime(vacuum_covariance()) == pytest.approx(1.0)
    C = vacuum_covariance()
    C[4:, 4:] = np.eye(4)
    assert sc_prime(C) == pytest.approx(0.5)
    D = vacuum_covariance()
    D[4, 4] = D[6, 6] = D[4, 6] = D[6, 4] = 0.7
    D[5, 5] = D[7, 7] = D[5, 7] = D[7, 5] = 0.3
    with pytest.raises(UnphysicalCovarianceError, match="unphysical covariance"):
        sc_prime(D)


def test_sp_prime_examples():
    assert sp_prime(vacuum_covariance()) == pytest.approx(1.0)
    C = vacuum_covariance()
    C[4:, 4:] *= 2
    assert sp_prime(C) == pytest.approx(0.5)
    D = vacuum_covariance()
    D[5, 5] = D[7, 7] = D[5, 7] = D[7, 5] = 0.4
    with pytest.raises(UnphysicalCovarianceError):
        sp_prime(D)
    assert sp_prime(vacuum_covariance(), prefactor=2.0) == pytest.approx(4.0)


def test_rotation_examples():
    rng = np.random.default_rng(0)
    C = random_physical_cov(rng)
    assert np.allclose(rotate_covariance(C, np.ones(4, dtype=complex)), C, atol=1e-15)
    block = np.diag([2.0, 3.0, 1, 1, 1, 1, 1, 1])
    rot = rotate_covariance(block, np.array([1j, 1, 1, 1]))
    assert np.allclose(rot[:2, :2], np.diag([3.0, 2.0]))


def test_rotation_preserves_spectrum_and_physicality():
    rng = np.random.default_rng(7)
    for _ in range(100):
        C = random_physical_cov(rng)
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        R = rotate_covariance(C, z)
        assert np.array_equal(R, R.T)
        assert np.trace(R) == pytest.approx(np.trace(C), rel=1e-12)
        ev, ev_r = np.linalg.eigvalsh(C), np.linalg.eigvalsh(R)
        assert np.max(np.abs(ev - ev_r)) <= 1e-12 * max(1.0, np.max(np.abs(ev)))
        assert min_physical_eigenvalue(R) >= -1e-9


def test_rotation_floor():
    with pytest.raises(PhaseUndefinedError):
        rotate_covariance(vacuum_covariance(), np.array([0, 1, 1, 1], dtype=complex))
    # the lenient mode leaves an empty cavity unrotated
    out = rotate_covariance(vacuum_covariance(), np.array([0, 1, 1, 1], dtype=complex), strict=False)
    assert np.allclose(out, vacuum_covariance())


def test_time_average():
    t = np.linspace(0, 10, 101)
    assert time_average(t, np.full_like(t, 3.5)) == pytest.approx(3.5)
    t = np.arange(0, 2 * math.pi + 1e-12, 1e-3)
    t[-1] = 2 * math.pi
    assert abs(time_average(t, np.sin(t), T=2 * math.pi)) < 1e-6
    # window start between samples
    t = np.linspace(0, 10, 11)
    assert time_average(t, t, T=10.0, t_skip=2.5) == pytest.approx(6.25)
    with pytest.raises(ValueError):
        time_average(t, t, T=5.0, t_skip=5.0)
    with pytest.raises(ValueError):
        time_average(t, t, T=20.0)


def test_mechanical_errors_use_mean_only():
    means = np.array([[1j, 2, 3 + 1j, 1 - 1j]])
    q, p = mechanical_errors(means)
    assert q[0] == pytest.approx(2.0) and p[0] == pytest.approx(2.0)


def test_series_on_locked_run():
    p = SystemParams.fig2(mu=0.004, lam=0.16)
    traj = evolve(p, MeanState.initial(math.pi / 2), vacuum_covariance(),
                  IntegratorConfig(t_end=2000.0, sample_every=10))
    ms = measure_series(traj)
    assert np.all((ms.sc_prime > 0) & (ms.sc_prime <= 1 + 1e-12))
    assert np.all(np.abs(np.diff(ms.theta)) < math.pi)
    assert ms.sp_prime[0] == pytest.approx(1.0)
    # mean-only errors ignore the covariance
    no_cov = Trajectory(times=traj.times, means=traj.means)
    ms2 = measure_series(no_cov)
    assert np.array_equal(ms2.mean_q_minus, ms.mean_q_minus)
    assert np.all(np.isnan(ms2.sc_prime))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.5, 5.0))
def test_sc_prime_bounded_on_thermal_states(v1, v2):
    C = np.diag([0.5] * 4 + [v1, v1, v2, v2])
    assert 0 < sc_prime(C) <= 1.0
