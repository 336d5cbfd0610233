"""First-order error signals and second-order synchronization measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DomainError, MeanState

__all__ = [
    "PhaseUndefinedError",
    "UnphysicalCovarianceError",
    "PhaseSeries",
    "MeasureSeries",
    "phase_error",
    "mechanical_errors",
    "sc_prime",
    "rotate_covariance",
    "sp_prime",
    "time_average",
    "measure_series",
]

AMPLITUDE_FLOOR = 1e-12


class PhaseUndefinedError(DomainError):
    pass


class UnphysicalCovarianceError(DomainError):
    pass


@dataclass
class PhaseSeries:
    times: np.ndarray
    theta: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray


@dataclass
class MeasureSeries:
    times: np.ndarray
    theta: np.ndarray
    sc_prime: np.ndarray
    sp_prime: np.ndarray
    mean_q_minus: np.ndarray
    mean_p_minus: np.ndarray


def _check_floor(amps, times, floor):
    low = np.abs(amps) <= floor
    if np.any(low):
        k = np.argmax(np.any(low, axis=tuple(range(1, low.ndim))) if low.ndim > 1 else low)
        t = times[k] if times is not None else k
        raise PhaseUndefinedError(f"phase undefined at t={t:.6g}: amplitude below {floor:g}")


def phase_error(traj=None, *, times=None, B1=None, B2=None,
                amplitude_floor: float = AMPLITUDE_FLOOR) -> PhaseSeries:
    """Unwrapped mechanical phases and their difference ``theta = phi1 - phi2``.

    Either pass a trajectory or the series ``times``, ``B1``, ``B2``.  Phases
    come from the two-argument arctangent and are unwrapped along time, so the
    sampling must resolve half a mechanical period.
    """
    if traj is not None:
        times, B1, B2 = traj.times, traj.means[:, 2], traj.means[:, 3]
    times = np.asarray(times, dtype=float)
    B1 = np.asarray(B1, dtype=complex)
    B2 = np.asarray(B2, dtype=complex)
    _check_floor(np.stack([B1, B2], axis=-1), times, amplitude_floor)
    phi1 = np.unwrap(np.arctan2(B1.imag, B1.real))
    phi2 = np.unwrap(np.arctan2(B2.imag, B2.real))
    return PhaseSeries(times=times, theta=phi1 - phi2, phi1=phi1, phi2=phi2)


def mechanical_errors(means) -> tuple[np.ndarray, np.ndarray]:
    """Mean error quadratures ``<q_->``, ``<p_->`` from the mean field only.

    With ``<q_j> = sqrt(2) Re B_j`` and ``<p_j> = sqrt(2) Im B_j`` the
    ``1/sqrt(2)`` of the error operators cancels.
    """
    means = np.asarray(means, dtype=complex)
    d = means[..., 2] - means[..., 3]
    return d.real.copy(), d.imag.copy()


def sc_prime(cov) -> np.ndarray | float:
    """Complete-synchronization measure ``1 / <dq_-^2 + dp_-^2>``."""
    c = np.asarray(cov, dtype=float)
    den = 0.5 * (c[..., 4, 4] + c[..., 6, 6] - 2.0 * c[..., 4, 6]) \
        + 0.5 * (c[..., 5, 5] + c[..., 7, 7] - 2.0 * c[..., 5, 7])
    if np.any(~(den > 0)):
        raise UnphysicalCovarianceError("unphysical covariance: error variance is not positive")
    out = 1.0 / den
    return float(out) if out.ndim == 0 else out


def _rotation(phases) -> np.ndarray:
    """Block-diagonal rotation taking each mode into the frame of its mean phase."""
    phases = np.asarray(phases, dtype=float)
    c, s = np.cos(phases), np.sin(phases)
    R = np.zeros(phases.shape[:-1] + (8, 8))
    for m in range(4):
        i = 2 * m
        R[..., i, i] = c[..., m]
        R[..., i, i + 1] = s[..., m]
        R[..., i + 1, i] = -s[..., m]
        R[..., i + 1, i + 1] = c[..., m]
    return R


def rotate_covariance(cov, mean, amplitude_floor: float = AMPLITUDE_FLOOR,
                      strict: bool = True) -> np.ndarray:
    """Covariance seen in the frame co-rotating with every mode's mean phase.

    Each mode ``o`` is replaced by ``o exp(-i arg<o>)``; on quadratures this is
    the orthogonal congruence ``R C R^T`` with a 2x2 rotation per mode.
    Accepts stacks: ``cov`` (..., 8, 8) with ``mean`` (..., 4).

    With ``strict=False`` an empty cavity (amplitude below the floor) is left
    unrotated instead of raising; the mechanical block, and hence ``sp_prime``,
    does not depend on the optical rotation.
    """
    z = mean.to_array() if isinstance(mean, MeanState) else np.asarray(mean, dtype=complex)
    low = np.abs(z) <= amplitude_floor
    if np.any(low if strict else low[..., 2:]):
        raise PhaseUndefinedError(f"phase undefined: a mode amplitude is below {amplitude_floor:g}")
    R = _rotation(np.where(low, 0.0, np.angle(z)))
    c = np.asarray(cov, dtype=float)
    out = R @ c @ np.swapaxes(R, -1, -2)
    # keep exact symmetry
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def sp_prime(cov_rot, prefactor: float = 0.5) -> np.ndarray | float:
    """Phase-synchronization measure from a co-rotating covariance.

    ``prefactor / [ (C'66 + C'88 - 2 C'68) / 2 ]`` (1-based indices); the
    default prefactor 1/2 gives 1 on the vacuum.
    """
    c = np.asarray(cov_rot, dtype=float)
    inner = 0.5 * (c[..., 5, 5] + c[..., 7, 7] - 2.0 * c[..., 5, 7])
    if np.any(~(inner > 0)):
        raise UnphysicalCovarianceError("unphysical covariance: phase-error variance is not positive")
    out = prefactor / inner
    return float(out) if out.ndim == 0 else out


def time_average(times, values, T: float | None = None, t_skip: float = 0.0) -> float:
    """Trapezoidal mean of ``values`` over ``[t_skip, T]``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if T is None:
        T = times[-1] if len(times) else 0.0
    if not (0.0 <= t_skip < T):
        raise DomainError(f"empty averaging window [{t_skip}, {T}]")
    if len(times) < 2 or times[0] > t_skip + 1e-9 * max(T, 1.0) or times[-1] < T - 1e-9 * max(T, 1.0):
        raise DomainError(f"series does not cover [{t_skip}, {T}]")
    grid = times[(times > t_skip) & (times < T)]
    tt = np.concatenate([[t_skip], grid, [T]])
    vv = np.interp(tt, times, values)
    return float(np.trapezoid(vv, tt) / (T - t_skip))


def measure_series(traj, sp_prefactor: float = 0.5,
                   amplitude_floor: float = AMPLITUDE_FLOOR) -> MeasureSeries:
    """All scalar series of a trajectory; the covariance ones need ``traj.covs``."""
    ph = phase_error(traj, amplitude_floor=amplitude_floor)
    qm, pm = mechanical_errors(traj.means)
    if traj.covs is not None:
        sc = sc_prime(traj.covs)
        sp = sp_prime(rotate_covariance(traj.covs, traj.means, amplitude_floor, strict=False),
                      sp_prefactor)
    else:
        sc = np.full(len(traj.times), math.nan)
        sp = np.full(len(traj.times), math.nan)
    return MeasureSeries(times=traj.times, theta=ph.theta, sc_prime=np.atleast_1d(sc),
                         sp_prime=np.atleast_1d(sp), mean_q_minus=qm, mean_p_minus=pm)
