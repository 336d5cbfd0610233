"""Joint integration of the mean-field equations and the fluctuation covariance.

The covariance obeys ``dC/dt = S C + C S^T + N`` with ``S`` rebuilt from the
current mean field at every stage evaluation, so both parts advance in one
fused Runge-Kutta step.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as _k
from .model import (
    DomainError,
    MeanState,
    SystemParams,
    _drift,
    _mean_rhs,
    _noise_diag,
    param_arrays,
    param_matrix,
)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "IntegrationError",
    "evolve",
    "integrate_batch",
    "convergence_order",
    "decaying_oscillator_probe",
    "attractor_report",
]

DEFAULT_DT = 2.0 * math.pi / 1000.0


class IntegrationError(RuntimeError):
    """Adaptive step control failed (step size underflow)."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    t_end: float = 2000.0
    sample_every: int = 10
    method: str = "rk4"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    overflow_guard: float = 1e12

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise DomainError(f"t_end must be > 0, got {self.t_end}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise DomainError(f"sample_every must be an integer >= 1, got {self.sample_every}")
        object.__setattr__(self, "sample_every", int(self.sample_every))
        if self.method not in ("rk4", "dopri5"):
            raise DomainError(f"method must be 'rk4' or 'dopri5', got {self.method!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be > 0")
        if not self.overflow_guard > 0:
            raise DomainError("overflow_guard must be > 0")

    def replace(self, **changes) -> "IntegratorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Trajectory:
    times: np.ndarray
    means: np.ndarray  # (m, 4) complex: A1, A2, B1, B2
    covs: Optional[np.ndarray] = None  # (m, 8, 8)
    terminated_early: bool = False
    reason: str = ""
    params: Optional[SystemParams] = None
    config: Optional[IntegratorConfig] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def mean_state(self, k: int) -> MeanState:
        return MeanState.from_array(self.means[k])


# --------------------------------------------------------------------------

def _make_rhs(p: dict, with_cov: bool):
    noise = _noise_diag(p)
    idx = np.arange(8)

    def rhs(z, C):
        dz = _mean_rhs(p, z)
        if not with_cov:
            return dz, None
        M = _drift(p, z) @ C
        dC = M + np.swapaxes(M, -1, -2)
        dC[..., idx, idx] += noise
        return dz, dC

    return rhs


def _rk4_step(rhs, z, C, h):
    k1z, k1c = rhs(z, C)
    if C is None:
        k2z, _ = rhs(z + 0.5 * h * k1z, None)
        k3z, _ = rhs(z + 0.5 * h * k2z, None)
        k4z, _ = rhs(z + h * k3z, None)
        return z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z), None
    k2z, k2c = rhs(z + 0.5 * h * k1z, C + 0.5 * h * k1c)
    k3z, k3c = rhs(z + 0.5 * h * k2z, C + 0.5 * h * k2c)
    k4z, k4c = rhs(z + h * k3z, C + h * k3c)
    znew = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    Cnew = C + (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
    return znew, Cnew


# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def _dopri_step(rhs, z, C, h):
    kz, kc = [], []
    for i in range(7):
        zi, Ci = z, C
        for a, dz_, dc_ in zip(_DP_A[i], kz, kc):
            if a:
                zi = zi + (h * a) * dz_
                if C is not None:
                    Ci = Ci + (h * a) * dc_
        dz, dc = rhs(zi, Ci)
        kz.append(dz)
        kc.append(dc)
    z5 = z + h * sum(b * k for b, k in zip(_DP_B5, kz) if b)
    ez = h * sum((b5 - b4) * k for b5, b4, k in zip(_DP_B5, _DP_B4, kz))
    if C is None:
        return z5, None, ez, None
    C5 = C + h * sum(b * k for b, k in zip(_DP_B5, kc) if b)
    ec = h * sum((b5 - b4) * k for b5, b4, k in zip(_DP_B5, _DP_B4, kc))
    return z5, C5, ez, ec


def _row_bad(z, C, guard):
    bad = ~np.all(np.isfinite(z), axis=-1) | np.any(np.abs(z) > guard, axis=-1)
    if C is not None:
        flat = C.reshape(C.shape[0], -1)
        bad |= ~np.all(np.isfinite(flat), axis=-1) | np.any(np.abs(flat) > guard, axis=-1)
    return bad


def integrate_batch(params, z0, C0, cfg: IntegratorConfig, observer: Optional[Callable] = None,
                    store: bool = True):
    """Integrate a batch of independent systems.

    ``params`` is a list of SystemParams (or a single one shared by all rows),
    ``z0`` has shape (n, 4) and ``C0`` shape (n, 8, 8) or is None.  ``observer``
    is called as ``observer(t, z, C)`` at every sample instant.  Rows that
    diverge are frozen at their last finite state.

    Returns ``(times, zs, Cs, diverged_at)`` where ``diverged_at`` holds the
    divergence time per row (NaN for rows that stayed bounded).
    """
    z = np.array(z0, dtype=complex, copy=True)
    if z.ndim != 2 or z.shape[1] != 4:
        raise DomainError(f"z0 must have shape (n, 4), got {z.shape}")
    n = z.shape[0]
    if isinstance(params, SystemParams):
        params = [params] * n
    if len(params) != n:
        raise DomainError("need one SystemParams per batch row")
    p = param_arrays(params)
    with_cov = C0 is not None
    C = None
    if with_cov:
        C = np.array(C0, dtype=float, copy=True)
        if C.shape != (n, 8, 8):
            raise DomainError(f"C0 must have shape (n, 8, 8), got {C.shape}")
        if not np.array_equal(C, np.swapaxes(C, -1, -2)):
            raise DomainError("initial covariance is not symmetric")
    rhs = _make_rhs(p, with_cov)
    diverged_at = np.full(n, np.nan)

    times, zs, Cs = [], [], []

    def record(t):
        if store:
            times.append(t)
            zs.append(z.copy())
            if with_cov:
                Cs.append(C.copy())
        if observer is not None:
            observer(t, z, C)

    def accept(t, znew, Cnew):
        nonlocal z, C
        bad = _row_bad(znew, Cnew, cfg.overflow_guard)
        fresh = bad & np.isnan(diverged_at)
        diverged_at[fresh] = t
        keep = np.isnan(diverged_at)
        if keep.all():
            z, C = znew, Cnew
            return
        z = np.where(keep[:, None], znew, z)
        if with_cov:
            C = np.where(keep[:, None, None], Cnew, C)

    record(0.0)
    if cfg.method == "rk4":
        P = param_matrix(params)
        Y = _k.to_real(z)
        Cw = C if with_cov else np.zeros((n, 8, 8))
        nsteps = max(1, int(round(cfg.t_end / cfg.dt)))
        h = cfg.t_end / nsteps
        done = 0
        while done < nsteps:
            chunk = min(cfg.sample_every, nsteps - done)
            _k.advance(P, Y, Cw, with_cov, chunk, h, done * h, cfg.overflow_guard, diverged_at)
            done += chunk
            z = _k.to_complex(Y)
            record(done * h)
    else:
        with np.errstate(all="ignore"):
            _adaptive_loop(rhs, cfg, lambda: (z, C), accept, record)

    if not store:
        return None, None, None, diverged_at
    return (np.array(times), np.stack(zs), np.stack(Cs) if with_cov else None, diverged_at)


def _adaptive_loop(rhs, cfg, current, accept, record):
    t = 0.0
    h = cfg.dt
    sample_dt = cfg.dt * cfg.sample_every
    next_sample = min(sample_dt, cfg.t_end)
    h_min = 1e-12 * max(cfg.t_end, 1.0)
    while t < cfg.t_end:
        z, C = current()
        step = min(h, next_sample - t)
        z5, C5, ez, ec = _dopri_step(rhs, z, C, step)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(z), np.abs(z5))
        err = np.max(np.abs(ez) / scale)
        if C is not None:
            scale_c = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(C), np.abs(C5))
            err = max(err, np.max(np.abs(ec) / scale_c))
        if not np.isfinite(err):
            err = np.inf
        if err <= 1.0:
            t = next_sample if step == next_sample - t else t + step
            accept(t, z5, C5)
            if t >= next_sample:
                record(t)
                next_sample = min(next_sample + sample_dt, cfg.t_end)
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            h = h * fac if step >= h else max(h, step * fac)
        else:
            fac = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            h = step * fac
        if h < h_min:
            raise IntegrationError(f"step size underflow at t={t:.6g} (h={h:.3e})")


def evolve(params: SystemParams, init_mean, init_cov=None,
           cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate one system from ``init_mean`` (and ``init_cov`` if given).

    Divergence beyond ``cfg.overflow_guard`` ends the trajectory early; the
    samples up to that point are kept and ``reason`` names the time.
    """
    z0 = (init_mean.to_array() if isinstance(init_mean, MeanState)
          else np.asarray(init_mean, dtype=complex))[None, :]
    if not np.all(np.isfinite(z0)):
        raise DomainError("initial mean state is not finite")
    C0 = None if init_cov is None else np.asarray(init_cov, dtype=float)[None, :, :]
    times, zs, Cs, div = integrate_batch([params], z0, C0, cfg)
    traj = Trajectory(times=times, means=zs[:, 0], covs=None if Cs is None else Cs[:, 0],
                      params=params, config=cfg)
    if np.isfinite(div[0]):
        keep = times < div[0]
        traj.times = times[keep]
        traj.means = traj.means[keep]
        if traj.covs is not None:
            traj.covs = traj.covs[keep]
        traj.terminated_early = True
        traj.reason = f"divergence at t={div[0]:.6g}"
    return traj


# --------------------------------------------------------------------------
# integrator qualification

def decaying_oscillator_probe(kappa: float = 0.15, delta: float = 1.0):
    """Decoupled cavity with ``A1(t) = exp((-kappa + i delta) t)``."""
    params = SystemParams(omega1=1.0, omega2=1.0, delta1=delta, delta2=delta, g=0.0, E=0.0,
                          kappa=kappa, gamma=0.0, mu=0.0, lam=0.0, n_b=0.0)
    init = MeanState(1.0 + 0j, 0j, 0j, 0j)

    def exact(t):
        return np.exp((-kappa + 1j * delta) * t)

    return params, init, exact


def convergence_order(probe=None, dts=(0.4, 0.2, 0.1, 0.05), t_end: float = 10.0,
                      method: str = "rk4"):
    """Measure the global order of the integrator on a probe with known solution.

    Returns ``(order, errors)``: the least-squares log-log slope of the final
    error of ``A1`` against ``dt`` and the errors themselves.  The slope is NaN
    when every error vanishes.
    """
    params, init, exact = probe if probe is not None else decaying_oscillator_probe()
    errors = []
    for dt in dts:
        cfg = IntegratorConfig(dt=dt, t_end=t_end, sample_every=10**9, method=method)
        traj = evolve(params, init, None, cfg)
        errors.append(abs(traj.means[-1, 0] - exact(traj.times[-1])))
    errors = np.array(errors)
    if np.all(errors == 0):
        return float("nan"), errors
    slope = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    return float(slope), errors


# --------------------------------------------------------------------------
# attractor diagnostics for drive calibration

def _peak_values(x: np.ndarray) -> np.ndarray:
    """Local maxima of a sampled signal, refined by a parabola through three samples."""
    k = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1
    a, b, c = x[k - 1], x[k], x[k + 1]
    den = a - 2 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den != 0, 0.5 * (a - c) / den, 0.0)
    return b - 0.25 * (a - c) * off


def attractor_report(params: SystemParams, cfg: IntegratorConfig = IntegratorConfig(),
                     init=None, window: float = 0.5, periodic_tol: float = 1e-3,
                     still_tol: float = 1e-8) -> dict:
    """Classify the long-time mean-field motion started from ``init``.

    Over the last ``window`` fraction of the run the successive maxima of
    ``Re B_j`` are compared.  Their relative spread is below ``periodic_tol``
    on a limit cycle; an oscillation that vanishes or shrinks marks a fixed
    point, monotonically drifting maxima a transient that has not settled
    within the horizon, and anything else is irregular (flagged chaotic).
    """
    if not 0 < window < 1:
        raise DomainError("window must lie in (0, 1)")
    init = MeanState.initial(0.0, 1.0) if init is None else init
    traj = evolve(params, init, None, cfg.replace(sample_every=min(cfg.sample_every, 5)))
    report = {"E": params.E, "divergent": traj.terminated_early, "bounded": not traj.terminated_early,
              "attractor": "divergent", "chaotic": False, "peak_spread": None, "mean_amplitude": None}
    if traj.terminated_early:
        report["reason"] = traj.reason
        return report
    keep = traj.times >= traj.times[-1] * (1 - window)
    spreads, amps, kinds = [], [], []
    for j in (2, 3):
        x = traj.means[keep, j].real
        amp = float(np.mean(np.abs(traj.means[keep, j])))
        amps.append(amp)
        if np.ptp(x) <= still_tol * (1 + amp):
            kinds.append("fixed-point")
            spreads.append(0.0)
            continue
        pk = _peak_values(x)
        if len(pk) < 3:
            kinds.append("irregular")
            spreads.append(math.inf)
            continue
        spread = float(np.ptp(pk) / np.mean(np.abs(pk)))
        spreads.append(spread)
        if spread < periodic_tol:
            kinds.append("limit-cycle")
        elif np.ptp(x[-len(x) // 10:]) < 0.5 * np.ptp(x[:len(x) // 10]):
            # shrinking oscillation: still relaxing onto a fixed point
            kinds.append("fixed-point")
        elif np.all(np.diff(pk) > 0) or np.all(np.diff(pk) < 0):
            kinds.append("transient")
        else:
            kinds.append("irregular")
    for attractor in ("irregular", "transient", "limit-cycle", "fixed-point"):
        if attractor in kinds:
            break
    report.update(attractor=attractor, chaotic=attractor == "irregular",
                  peak_spread=max(spreads), mean_amplitude=amps)
    return report
