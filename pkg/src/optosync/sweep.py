"""(mu, lambda) grid sweeps and switch-logic region search."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as _k
from .dynamics import IntegratorConfig, integrate_batch
from .lyapunov import NO_SYNC, SYNC, GATES, LyapunovConfig, lyapunov_batch
from .measures import AMPLITUDE_FLOOR
from .model import DomainError, MeanState, SystemParams, vacuum_covariance

__all__ = ["GridSpec", "SweepField", "sweep_lyapunov", "sweep_sp_bar", "find_logic_regions",
           "smooth_sync_map"]

OK, DIVERGENT, MARGINAL = "ok", "divergent", "marginal"


@dataclass(frozen=True)
class GridSpec:
    mu_min: float = 0.0
    mu_max: float = 0.01
    mu_steps: int = 26
    lambda_min: float = 0.0
    lambda_max: float = 0.2
    lambda_steps: int = 41

    def __post_init__(self):
        for lo, hi, n, name in ((self.mu_min, self.mu_max, self.mu_steps, "mu"),
                                (self.lambda_min, self.lambda_max, self.lambda_steps, "lambda")):
            if not (math.isfinite(lo) and math.isfinite(hi)) or not (hi >= lo >= 0):
                raise DomainError(f"{name} range must satisfy max >= min >= 0, got [{lo}, {hi}]")
            if int(n) != n or n < 1:
                raise DomainError(f"{name}_steps must be an integer >= 1, got {n}")
            if n == 1 and hi != lo:
                raise DomainError(f"{name}_steps == 1 needs {name}_min == {name}_max")
        object.__setattr__(self, "mu_steps", int(self.mu_steps))
        object.__setattr__(self, "lambda_steps", int(self.lambda_steps))

    @staticmethod
    def _axis(lo, hi, n):
        # k/(n-1) is the same correctly rounded rational on refined grids, so
        # coincident points get bitwise-identical coordinates
        if n == 1:
            return np.array([lo])
        return np.array([lo + (hi - lo) * (k / (n - 1)) for k in range(n)])

    @property
    def mus(self) -> np.ndarray:
        return self._axis(self.mu_min, self.mu_max, self.mu_steps)

    @property
    def lambdas(self) -> np.ndarray:
        return self._axis(self.lambda_min, self.lambda_max, self.lambda_steps)

    @property
    def shape(self):
        return (self.mu_steps, self.lambda_steps)

    def cells(self):
        """(i, j, mu, lambda) in row-major order."""
        mus, lams = self.mus, self.lambdas
        return [(i, j, float(mus[i]), float(lams[j]))
                for i in range(self.mu_steps) for j in range(self.lambda_steps)]

    def refined(self, factor: int = 2) -> "GridSpec":
        return dataclasses.replace(self, mu_steps=(self.mu_steps - 1) * factor + 1,
                                   lambda_steps=(self.lambda_steps - 1) * factor + 1)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SweepField:
    grid: GridSpec
    values: np.ndarray
    kind: str  # "lyapunov" | "sp_bar"
    status: np.ndarray  # "ok" | "divergent" | "marginal"
    stderr: Optional[np.ndarray] = None
    classification: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != self.grid.shape or self.status.shape != self.grid.shape:
            raise DomainError("field arrays do not match the grid shape")

    def failed_cells(self):
        return [(float(self.grid.mus[i]), float(self.grid.lambdas[j]))
                for i, j in zip(*np.nonzero(self.status == DIVERGENT))]


# --------------------------------------------------------------------------

def _chunks(n, workers):
    workers = max(1, min(int(workers), n))
    bounds = np.linspace(0, n, workers + 1).round().astype(int)
    return [(bounds[k], bounds[k + 1]) for k in range(workers) if bounds[k + 1] > bounds[k]]


def _map_chunks(fn, args_list, workers):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def _lyapunov_chunk(params, cfg, integrator):
    init = MeanState.initial(cfg.theta0, cfg.beta)
    res = lyapunov_batch(params, [init] * len(params), cfg, integrator)
    return [(r.exponent, r.stderr, r.classification) for r in res]


def sweep_lyapunov(base: SystemParams, grid: GridSpec, cfg: LyapunovConfig = LyapunovConfig(),
                   integrator: IntegratorConfig = IntegratorConfig(), workers: int = 1) -> SweepField:
    """Phase-error Lyapunov exponent on every grid cell.

    Cells are independent; each worker gets a contiguous block of cells and
    results are written back by index, so the field does not depend on
    ``workers``.  Divergent cells are recorded in ``status``.
    """
    cells = grid.cells()
    params = [base.replace(mu=mu, lam=lam) for _, _, mu, lam in cells]
    jobs = [(params[a:b], cfg, integrator) for a, b in _chunks(len(cells), workers)]
    flat = [r for chunk in _map_chunks(_lyapunov_chunk, jobs, workers) for r in chunk]
    values = np.full(grid.shape, np.nan)
    stderr = np.full(grid.shape, np.nan)
    status = np.full(grid.shape, OK, dtype=object)
    cls = np.full(grid.shape, "", dtype=object)
    for (i, j, _, _), (e, s, c) in zip(cells, flat):
        values[i, j] = e
        stderr[i, j] = s
        cls[i, j] = c
        if c == "divergent":
            status[i, j] = DIVERGENT
        elif c not in (SYNC, NO_SYNC):
            status[i, j] = MARGINAL
    meta = {"base_params": base.to_dict(), "lyapunov": cfg.to_dict(),
            "integrator": integrator.to_dict(), "grid": grid.to_dict()}
    return SweepField(grid=grid, values=values, kind="lyapunov", status=status, stderr=stderr,
                      classification=cls, meta=meta)


class _SpAccumulator:
    """Running trapezoid of S_p' over [t_skip, T] for a batch of rows."""

    def __init__(self, n, T, t_skip, prefactor, floor):
        self.T, self.t_skip, self.prefactor, self.floor = T, t_skip, prefactor, floor
        self.integral = np.zeros(n)
        self.prev_t = None
        self.prev_v = None
        self.bad = np.zeros(n, dtype=bool)

    def __call__(self, t, z, C):
        inner = np.empty(len(z))
        _k.phase_momentum_variance(z, C, self.floor, inner)
        bad = ~(inner > 0)
        self.bad |= bad
        v = np.where(bad, np.nan, self.prefactor / np.where(bad, 1.0, inner))
        if self.prev_t is not None:
            lo, hi = max(self.prev_t, self.t_skip), min(t, self.T)
            if hi > lo:
                span = t - self.prev_t
                vlo = self.prev_v + (v - self.prev_v) * ((lo - self.prev_t) / span)
                vhi = self.prev_v + (v - self.prev_v) * ((hi - self.prev_t) / span)
                self.integral += 0.5 * (vlo + vhi) * (hi - lo)
        self.prev_t, self.prev_v = t, v


def _sp_bar_chunk(params, T, integrator, theta0, beta, prefactor, t_skip):
    n = len(params)
    z0 = np.stack([MeanState.initial(theta0, beta).to_array()] * n)
    C0 = np.stack([vacuum_covariance()] * n)
    acc = _SpAccumulator(n, T, t_skip, prefactor, AMPLITUDE_FLOOR)
    _, _, _, div = integrate_batch(params, z0, C0, integrator.replace(t_end=T), observer=acc,
                                   store=False)
    values = acc.integral / (T - t_skip)
    failed = np.isfinite(div) | acc.bad
    return [(float(v) if not f else math.nan, bool(f)) for v, f in zip(values, failed)]


def sweep_sp_bar(base: SystemParams, grid: GridSpec, T: float = 2000.0,
                 integrator: IntegratorConfig = IntegratorConfig(), workers: int = 1,
                 theta0: float = math.pi / 2, beta: float = 1.0, sp_prefactor: float = 0.5,
                 t_skip: float = 0.0) -> SweepField:
    """Time-averaged S_p' over ``[t_skip, T]`` on every grid cell, from vacuum fluctuations."""
    if not (0 <= t_skip < T):
        raise DomainError("need 0 <= t_skip < T")
    cells = grid.cells()
    params = [base.replace(mu=mu, lam=lam) for _, _, mu, lam in cells]
    jobs = [(params[a:b], T, integrator, theta0, beta, sp_prefactor, t_skip)
            for a, b in _chunks(len(cells), workers)]
    flat = [r for chunk in _map_chunks(_sp_bar_chunk, jobs, workers) for r in chunk]
    values = np.full(grid.shape, np.nan)
    status = np.full(grid.shape, OK, dtype=object)
    for (i, j, _, _), (v, failed) in zip(cells, flat):
        values[i, j] = v
        if failed:
            status[i, j] = DIVERGENT
    meta = {"base_params": base.to_dict(), "integrator": integrator.replace(t_end=T).to_dict(),
            "grid": grid.to_dict(), "T": T, "t_skip": t_skip, "theta0": theta0, "beta": beta,
            "sp_prefactor": sp_prefactor}
    return SweepField(grid=grid, values=values, kind="sp_bar", status=status, meta=meta)


# --------------------------------------------------------------------------
# logic regions

def smooth_sync_map(sync: np.ndarray) -> np.ndarray:
    """Remove isolated cells from a sync map (1 sync, 0 no-sync, -1 unknown).

    A known cell whose every known 8-neighbour disagrees is flipped; an unknown
    cell takes the strict majority of its known neighbours, if there is one.
    """
    sync = np.asarray(sync, dtype=int)
    out = sync.copy()
    nm, nl = sync.shape
    for i in range(nm):
        for j in range(nl):
            nb = [sync[a, b] for a in range(max(i - 1, 0), min(i + 2, nm))
                  for b in range(max(j - 1, 0), min(j + 2, nl)) if (a, b) != (i, j)]
            known = [v for v in nb if v >= 0]
            if not known:
                continue
            ones = sum(known)
            zeros = len(known) - ones
            if sync[i, j] >= 0:
                if all(v != sync[i, j] for v in known):
                    out[i, j] = 1 - sync[i, j]
            elif ones != zeros:
                out[i, j] = int(ones > zeros)
    return out


def find_logic_regions(field: SweepField, gate: str = "AND", smooth: bool = True):
    """Cells ``(mu_on, lambda_on)`` whose four-corner truth table matches ``gate``.

    Corners come from the same field: the zero row/column supply the
    switch-open settings.  Returns a sorted list of ``(mu, lambda)`` tuples.
    """
    if field.kind != "lyapunov" or field.classification is None:
        raise DomainError("logic regions need a Lyapunov field")
    gate = gate.upper()
    patterns = [k for k, v in GATES.items() if v == gate]
    if not patterns:
        raise DomainError(f"unknown gate {gate!r}; choose AND, OR or XOR")
    pattern = patterns[0]
    mus, lams = field.grid.mus, field.grid.lambdas
    if mus[0] != 0.0 or lams[0] != 0.0:
        raise DomainError("grid must contain the mu = 0 row and the lambda = 0 column")
    sync = np.where(field.classification == SYNC, 1,
                    np.where(field.classification == NO_SYNC, 0, -1))
    if smooth:
        sync = smooth_sync_map(sync)
    found = []
    for i in range(1, len(mus)):
        for j in range(1, len(lams)):
            table = (sync[0, 0], sync[0, j], sync[i, 0], sync[i, j])
            if min(table) < 0:
                continue
            if tuple(bool(v) for v in table) == pattern:
                found.append((float(mus[i]), float(lams[j])))
    return found
