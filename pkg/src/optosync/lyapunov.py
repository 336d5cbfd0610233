"""Largest Lyapunov exponent of the phase error and switch-logic classification.

The estimator follows two trajectories, a reference and a clone whose
mechanical phase ``arg B1`` is offset by ``delta0``.  After every
renormalization interval the growth of the phase-error deviation is recorded
and the clone is pulled back so that its phase-error deviation is ``delta0``
again, keeping the direction of the full mean-field deviation.  The component
of that deviation along the flow (a pure time shift, which is neutral on any
attractor) is removed before rescaling; otherwise it would be amplified
without bound whenever the phase error itself contracts.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as _k
from .dynamics import IntegratorConfig
from .model import DivergenceError, DomainError, MeanState, SystemParams, param_matrix

__all__ = [
    "LyapunovConfig",
    "LyapunovResult",
    "LogicResult",
    "benettin",
    "classify",
    "largest_lyapunov",
    "lyapunov_batch",
    "scalar_probe_exponent",
    "classify_logic",
    "gate_from_table",
]

SYNC, NO_SYNC, MARGINAL = "sync", "no-sync", "marginal"
COLLAPSE_FLOOR = 1e-300


@dataclass(frozen=True)
class LyapunovConfig:
    delta0: float = 1e-6
    renorm_interval: float = 20.0 * math.pi
    t_transient: float = 500.0
    t_total: float = 5000.0
    theta0: float = math.pi / 2
    beta: float = 1.0
    # finite-time estimates of a neutral phase scatter around zero at the
    # ~1/t_total level; anything this close to zero is not contraction
    neutral_tol: float = 5e-4

    def __post_init__(self):
        if not self.delta0 > 0:
            raise DomainError(f"delta0 must be > 0, got {self.delta0}")
        if not self.renorm_interval > 0:
            raise DomainError(f"renorm_interval must be > 0, got {self.renorm_interval}")
        if not (self.t_total > self.t_transient >= 0):
            raise DomainError("need t_total > t_transient >= 0")
        if self.t_total - self.t_transient < self.renorm_interval:
            raise DomainError("accumulation window shorter than one renormalization interval")
        if not self.neutral_tol >= 0:
            raise DomainError("neutral_tol must be >= 0")
        if not self.beta > 0:
            raise DomainError("beta must be > 0")

    def replace(self, **changes) -> "LyapunovConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class LyapunovResult:
    exponent: float
    stderr: float
    classification: str
    n_segments: int = 0
    collapsed: bool = False
    config: Optional[LyapunovConfig] = field(default=None, repr=False)
    rates: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"exponent": self.exponent, "stderr": self.stderr,
             "classification": self.classification, "n_segments": self.n_segments,
             "collapsed": self.collapsed}
        if self.config is not None:
            d["config"] = self.config.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def classify(exponent: float, stderr: float, neutral_tol: float = 0.0) -> str:
    """Sign test with a two-standard-error dead band.

    ``sync`` needs a significantly negative exponent below ``-neutral_tol``;
    an exponent at or above ``-neutral_tol`` (a neutral or growing phase error)
    is ``no-sync``; a negative but insignificant estimate is ``marginal``.
    """
    if not math.isfinite(exponent):
        return MARGINAL
    if exponent + 2.0 * stderr < 0.0 and exponent < -neutral_tol:
        return SYNC
    if exponent - 2.0 * stderr > 0.0 or exponent >= -neutral_tol:
        return NO_SYNC
    return MARGINAL


def benettin(advance: Callable, observe: Callable, perturb: Callable, ref0: np.ndarray,
             cfg: LyapunovConfig, flow: Optional[Callable] = None):
    """Two-trajectory renormalization estimate, vectorized over rows of ``ref0``.

    ``advance(ref, clone, duration)`` moves both state arrays forward in place
    and returns a boolean mask of rows that stayed bounded.
    ``observe(ref, clone)`` gives the scalar deviation per row,
    ``perturb(ref, delta)`` a fresh clone, and ``flow(ref)`` (optional) the
    local vector field whose component is projected out of the deviation.

    Returns ``(exponent, stderr, n_segments, collapsed, alive, rates)``.
    """
    ref = np.array(ref0, dtype=float, copy=True)
    clone = perturb(ref, cfg.delta0)
    n = ref.shape[0]
    tau = cfg.renorm_interval
    nseg = int(math.floor(cfg.t_total / tau + 1e-9))
    first = int(math.ceil(cfg.t_transient / tau - 1e-9))
    rates = np.full((n, max(nseg - first, 0)), np.nan)
    collapsed = np.zeros(n, dtype=bool)
    alive = np.ones(n, dtype=bool)
    d0 = cfg.delta0
    for k in range(nseg):
        alive &= advance(ref, clone, tau)
        dev = np.abs(observe(ref, clone))
        low = ~(dev > COLLAPSE_FLOOR)
        collapsed |= low & alive
        if k >= first:
            rates[:, k - first] = np.log(np.maximum(dev, COLLAPSE_FLOOR) / d0) / tau
        d = clone - ref
        if flow is not None:
            f = flow(ref)
            ff = np.einsum("ij,ij->i", f, f)
            coef = np.where(ff > 0, np.einsum("ij,ij->i", d, f) / np.where(ff > 0, ff, 1.0), 0.0)
            d = d - coef[:, None] * f
        trial = ref + d
        proj = np.abs(observe(ref, trial))
        ok = (proj > COLLAPSE_FLOOR) & np.all(np.isfinite(d), axis=1)
        scale = np.where(ok, d0 / np.where(ok, proj, 1.0), 0.0)
        new_clone = ref + scale[:, None] * d
        if not ok.all():
            fresh = perturb(ref, d0)
            new_clone[~ok] = fresh[~ok]
        clone[:] = new_clone
    m = rates.shape[1]
    with np.errstate(invalid="ignore"):
        exponent = rates.mean(axis=1) if m else np.full(n, np.nan)
        stderr = rates.std(axis=1, ddof=1) / math.sqrt(m) if m > 1 else np.full(n, np.inf)
    exponent = np.where(alive, exponent, np.nan)
    stderr = np.where(alive, stderr, np.nan)
    return exponent, stderr, m, collapsed, alive, rates


# --------------------------------------------------------------------------
# the optomechanical pair

def _theta_dev(ref, clone):
    b1r = ref[:, 4] + 1j * ref[:, 5]
    b2r = ref[:, 6] + 1j * ref[:, 7]
    b1c = clone[:, 4] + 1j * clone[:, 5]
    b2c = clone[:, 6] + 1j * clone[:, 7]
    return np.angle(b1c * np.conj(b2c) * np.conj(b1r * np.conj(b2r)))


def _rotate_b1(ref, delta):
    out = ref.copy()
    b1 = (ref[:, 4] + 1j * ref[:, 5]) * complex(math.cos(delta), math.sin(delta))
    out[:, 4] = b1.real
    out[:, 5] = b1.imag
    return out


def lyapunov_batch(params: list, inits: list, cfg: LyapunovConfig = LyapunovConfig(),
                   integrator: IntegratorConfig = IntegratorConfig()):
    """Phase-error exponent for many independent parameter points at once.

    Returns a list of LyapunovResult; rows whose reference or clone diverge
    come back with NaN exponent and ``classification == "divergent"``.
    """
    n = len(params)
    if len(inits) != n:
        raise DomainError("need one initial state per parameter point")
    P = param_matrix(params)
    P2 = np.concatenate([P, P])
    ref0 = _k.to_real(np.stack([s.to_array() if isinstance(s, MeanState) else np.asarray(s, complex)
                                for s in inits]))
    nsteps = max(1, int(round(cfg.renorm_interval / integrator.dt)))
    h = cfg.renorm_interval / nsteps
    dummy_c = np.zeros((2 * n, 8, 8))
    div = np.full(2 * n, np.nan)
    clock = [0.0]

    def advance(ref, clone, duration):
        Y = np.concatenate([ref, clone])
        _k.advance(P2, Y, dummy_c, False, nsteps, h, clock[0], integrator.overflow_guard, div)
        clock[0] += duration
        ref[:] = Y[:n]
        clone[:] = Y[n:]
        return np.isnan(div[:n]) & np.isnan(div[n:])

    flow_out = np.empty(8)

    def flow(ref):
        f = np.empty_like(ref)
        for r in range(n):
            _k.mean_rhs(P[r], ref[r], flow_out)
            f[r] = flow_out
        return f

    exp_, se, m, collapsed, alive, rates = benettin(advance, _theta_dev, _rotate_b1, ref0, cfg, flow)
    out = []
    for r in range(n):
        if not alive[r]:
            cls = "divergent"
        elif collapsed[r]:
            cls = SYNC
        else:
            cls = classify(float(exp_[r]), float(se[r]), cfg.neutral_tol)
        out.append(LyapunovResult(exponent=float(exp_[r]), stderr=float(se[r]), classification=cls,
                                  n_segments=m, collapsed=bool(collapsed[r]), config=cfg,
                                  rates=rates[r]))
    return out


def largest_lyapunov(params: SystemParams, init: MeanState | None = None,
                     cfg: LyapunovConfig = LyapunovConfig(),
                     integrator: IntegratorConfig = IntegratorConfig()) -> LyapunovResult:
    """Largest Lyapunov exponent of the phase error ``theta`` for one parameter point.

    ``init`` defaults to empty cavities with mechanical phase error
    ``cfg.theta0`` and amplitude ``cfg.beta``.
    """
    if init is None:
        init = MeanState.initial(cfg.theta0, cfg.beta)
    res = lyapunov_batch([params], [init], cfg, integrator)[0]
    if res.classification == "divergent":
        raise DivergenceError("reference trajectory diverged during the Lyapunov estimate")
    return res


def scalar_probe_exponent(a, cfg: LyapunovConfig = LyapunovConfig(), dt: float = 0.01):
    """Run the estimator harness on ``dx/dt = a x`` (RK4 steps of size ``dt``).

    ``a`` may be a sequence; returns the list of LyapunovResult.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    nsteps = max(1, int(round(cfg.renorm_interval / dt)))
    h = cfg.renorm_interval / nsteps

    def advance(ref, clone, duration):
        for arr in (ref, clone):
            x = arr[:, 0]
            for _ in range(nsteps):
                k1 = a * x
                k2 = a * (x + 0.5 * h * k1)
                k3 = a * (x + 0.5 * h * k2)
                k4 = a * (x + h * k3)
                x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            arr[:, 0] = x
        return np.ones(len(a), dtype=bool)

    def observe(ref, clone):
        return clone[:, 0] - ref[:, 0]

    def perturb(ref, delta):
        return ref + delta

    ref0 = np.zeros((len(a), 1))
    exp_, se, m, collapsed, alive, rates = benettin(advance, observe, perturb, ref0, cfg)
    return [LyapunovResult(float(e), float(s), classify(float(e), float(s), cfg.neutral_tol),
                           n_segments=m, config=cfg, rates=r)
            for e, s, r in zip(exp_, se, rates)]


# --------------------------------------------------------------------------
# switch logic

GATES = {
    (False, False, False, True): "AND",
    (False, True, True, True): "OR",
    (False, True, True, False): "XOR",
}
CORNERS = ("open-open", "open-closed", "closed-open", "closed-closed")


def gate_from_table(table) -> str:
    """Gate name for a truth table ordered (0,0), (0,lam_on), (mu_on,0), (mu_on,lam_on)."""
    return GATES.get(tuple(bool(v) for v in table), "none")


@dataclass
class LogicResult:
    mu_on: float
    lambda_on: float
    corners: list  # (mu, lambda) per corner
    results: list  # LyapunovResult per corner
    table: tuple  # classification strings
    gate: str
    offending: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mu_on": self.mu_on, "lambda_on": self.lambda_on, "gate": self.gate,
            "offending": self.offending,
            "corners": [{"mu": m, "lambda": l, "classification": c, **r.to_dict()}
                        for (m, l), c, r in zip(self.corners, self.table, self.results)],
        }


def classify_logic(params_base: SystemParams, mu_on: float, lambda_on: float,
                   cfg: LyapunovConfig = LyapunovConfig(),
                   integrator: IntegratorConfig = IntegratorConfig(),
                   init: MeanState | None = None) -> LogicResult:
    """Lyapunov classification of the four switch settings and the matching gate."""
    if mu_on < 0 or lambda_on < 0:
        raise DomainError("switch-on couplings must be >= 0")
    corners = [(0.0, 0.0), (0.0, float(lambda_on)), (float(mu_on), 0.0),
               (float(mu_on), float(lambda_on))]
    if init is None:
        init = MeanState.initial(cfg.theta0, cfg.beta)
    if mu_on == 0 and lambda_on == 0:
        res = largest_lyapunov(params_base.replace(mu=0.0, lam=0.0), init, cfg, integrator)
        results = [res] * 4
    else:
        results = lyapunov_batch([params_base.replace(mu=m, lam=l) for m, l in corners],
                                 [init] * 4, cfg, integrator)
    table = tuple(r.classification for r in results)
    offending = [c for c, t in zip(CORNERS, table) if t not in (SYNC, NO_SYNC)]
    if mu_on == 0 and lambda_on == 0:
        # all four corners are the same point: no switch to speak of
        gate = "none"
    elif offending:
        gate = "indeterminate"
    else:
        gate = gate_from_table([t == SYNC for t in table])
    return LogicResult(mu_on=float(mu_on), lambda_on=float(lambda_on), corners=corners,
                       results=results, table=table, gate=gate, offending=offending)
