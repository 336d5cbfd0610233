"""Two optomechanical cavities coupled by a phonon tunnel and an optical fiber.

All quantities are dimensionless, measured in units of the first mechanical
frequency ``omega1``.  Quadratures follow ``x = (a + a^dag)/sqrt(2)``,
``y = i(a^dag - a)/sqrt(2)`` (``q``, ``p`` likewise for the mechanics) and the
fluctuation vector is ordered ``(dx1, dy1, dx2, dy2, dq1, dp1, dq2, dp2)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "DivergenceError",
    "SystemParams",
    "MeanState",
    "QUADRATURES",
    "mean_field_rhs",
    "build_drift_matrix",
    "build_noise_matrix",
    "symplectic_form",
    "vacuum_covariance",
    "min_physical_eigenvalue",
    "check_covariance",
    "label_swap_permutation",
]

QUADRATURES = ("x1", "y1", "x2", "y2", "q1", "p1", "q2", "p2")


class DomainError(ValueError):
    """Invalid or non-finite input to a model operation."""


class DivergenceError(RuntimeError):
    """The mean field left the bounded region guarded by the integrator."""


@dataclass(frozen=True)
class SystemParams:
    omega1: float = 1.0
    omega2: float = 1.005
    delta1: float = 1.0
    delta2: float = 1.005
    g: float = 0.004
    E: float = 20.0
    kappa: float = 0.15
    gamma: float = 0.005
    mu: float = 0.0
    lam: float = 0.0
    n_b: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or isinstance(v, bool):
                raise DomainError(f"{f.name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise DomainError(f"{f.name} must be finite, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        for name in ("kappa", "gamma", "n_b", "g", "E", "mu", "lam"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.omega1 <= 0:
            raise DomainError(f"omega1 must be > 0 (it is the frequency unit), got {self.omega1}")

    @classmethod
    def fig2(cls, **overrides) -> "SystemParams":
        """Parameter point of the published sweeps; ``E`` is our calibrated drive."""
        base = dict(omega1=1.0, omega2=1.005, delta1=1.0, delta2=1.005, g=0.004,
                    E=20.0, kappa=0.15, gamma=0.005, mu=0.0, lam=0.0, n_b=0.0)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def swapped(self) -> "SystemParams":
        """Exchange the labels of the two systems."""
        return self.replace(omega1=self.omega2, omega2=self.omega1,
                            delta1=self.delta2, delta2=self.delta1)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass(frozen=True)
class MeanState:
    """Expectation values of the four mode amplitudes."""

    A1: complex = 0j
    A2: complex = 0j
    B1: complex = 0j
    B2: complex = 0j

    def __post_init__(self):
        for name in ("A1", "A2", "B1", "B2"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise DomainError(f"{name} is not finite: {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def initial(cls, theta0: float = 0.0, beta: float = 1.0) -> "MeanState":
        """Empty cavities and mechanical amplitudes ``beta`` with phase error ``theta0``."""
        return cls(0j, 0j, beta * complex(math.cos(theta0), math.sin(theta0)), complex(beta))

    def to_array(self) -> np.ndarray:
        return np.array([self.A1, self.A2, self.B1, self.B2], dtype=complex)

    @classmethod
    def from_array(cls, z) -> "MeanState":
        z = np.asarray(z, dtype=complex)
        if z.shape != (4,):
            raise DomainError(f"mean state needs 4 complex amplitudes, got shape {z.shape}")
        return cls(*z)

    def swapped(self) -> "MeanState":
        return MeanState(self.A2, self.A1, self.B2, self.B1)


# --------------------------------------------------------------------------
# batched kernels; ``p`` holds parameter arrays broadcastable against the batch

def param_arrays(params) -> dict:
    """Stack one or several SystemParams into a dict of float arrays of shape (n,)."""
    if isinstance(params, SystemParams):
        params = [params]
    return {f.name: np.array([getattr(p, f.name) for p in params], dtype=float)
            for f in dataclasses.fields(SystemParams)}


def param_matrix(params) -> np.ndarray:
    """Parameter rows of shape (n, 11) in field order, for the compiled kernels."""
    if isinstance(params, SystemParams):
        params = [params]
    names = [f.name for f in dataclasses.fields(SystemParams)]
    return np.array([[getattr(p, k) for k in names] for p in params], dtype=float)


def _mean_rhs(p: dict, z: np.ndarray) -> np.ndarray:
    A1, A2, B1, B2 = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    g, kappa, gamma = p["g"], p["kappa"], p["gamma"]
    out = np.empty_like(z)
    out[..., 0] = (-kappa + 1j * (p["delta1"] + 2.0 * g * B1.real)) * A1 + p["E"] - 1j * p["lam"] * A2
    out[..., 1] = (-kappa + 1j * (p["delta2"] + 2.0 * g * B2.real)) * A2 + p["E"] - 1j * p["lam"] * A1
    out[..., 2] = (-gamma - 1j * p["omega1"]) * B1 + 1j * g * (A1.real**2 + A1.imag**2) + 1j * p["mu"] * B2
    out[..., 3] = (-gamma - 1j * p["omega2"]) * B2 + 1j * g * (A2.real**2 + A2.imag**2) + 1j * p["mu"] * B1
    return out


def _drift(p: dict, z: np.ndarray) -> np.ndarray:
    n = z.shape[:-1]
    S = np.zeros(n + (8, 8))
    g, kappa, gamma, mu, lam = p["g"], p["kappa"], p["gamma"], p["mu"], p["lam"]
    A1, A2, B1, B2 = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    d1 = p["delta1"] + 2.0 * g * B1.real
    d2 = p["delta2"] + 2.0 * g * B2.real
    # optical block, system 1
    S[..., 0, 0] = -kappa
    S[..., 0, 1] = -d1
    S[..., 0, 3] = lam
    S[..., 0, 4] = -2.0 * g * A1.imag
    S[..., 1, 0] = d1
    S[..., 1, 1] = -kappa
    S[..., 1, 2] = -lam
    S[..., 1, 4] = 2.0 * g * A1.real
    # optical block, system 2
    S[..., 2, 1] = lam
    S[..., 2, 2] = -kappa
    S[..., 2, 3] = -d2
    S[..., 2, 6] = -2.0 * g * A2.imag
    S[..., 3, 0] = -lam
    S[..., 3, 2] = d2
    S[..., 3, 3] = -kappa
    S[..., 3, 6] = 2.0 * g * A2.real
    # mechanics
    S[..., 4, 4] = -gamma
    S[..., 4, 5] = p["omega1"]
    S[..., 4, 7] = -mu
    S[..., 5, 0] = 2.0 * g * A1.real
    S[..., 5, 1] = 2.0 * g * A1.imag
    S[..., 5, 4] = -p["omega1"]
    S[..., 5, 5] = -gamma
    S[..., 5, 6] = mu
    S[..., 6, 5] = -mu
    S[..., 6, 6] = -gamma
    S[..., 6, 7] = p["omega2"]
    S[..., 7, 2] = 2.0 * g * A2.real
    S[..., 7, 3] = 2.0 * g * A2.imag
    S[..., 7, 4] = mu
    S[..., 7, 6] = -p["omega2"]
    S[..., 7, 7] = -gamma
    return S


def _noise_diag(p: dict) -> np.ndarray:
    opt = p["kappa"]
    mech = p["gamma"] * (2.0 * p["n_b"] + 1.0)
    return np.stack([opt, opt, opt, opt, mech, mech, mech, mech], axis=-1)


# --------------------------------------------------------------------------
# public single-point API

def _state_array(state) -> np.ndarray:
    if isinstance(state, MeanState):
        return state.to_array()
    z = np.asarray(state, dtype=complex)
    if z.shape != (4,):
        raise DomainError(f"mean state needs 4 complex amplitudes, got shape {z.shape}")
    for name, v in zip(("A1", "A2", "B1", "B2"), z):
        if not np.isfinite(v):
            raise DomainError(f"{name} is not finite: {v!r}")
    return z


def mean_field_rhs(params: SystemParams, state) -> np.ndarray:
    """Time derivative ``(dA1, dA2, dB1, dB2)`` of the mean amplitudes."""
    z = _state_array(state)
    return _mean_rhs(param_arrays(params), z[None, :])[0]


def build_drift_matrix(params: SystemParams, state) -> np.ndarray:
    """8x8 drift matrix ``S`` of the linearized fluctuations around ``state``."""
    z = _state_array(state)
    return _drift(param_arrays(params), z[None, :])[0]


def build_noise_matrix(params: SystemParams) -> np.ndarray:
    """Diagonal bath correlation matrix ``N``.

    The symmetrized vacuum input of a cavity gives quadrature white noise of
    intensity 1/2, entering with amplitude ``sqrt(2 kappa)``; the thermal
    mechanical bath carries ``(2 n_b + 1)/2``.
    """
    return np.diag(_noise_diag(param_arrays(params))[0])


def symplectic_form(n_modes: int = 4) -> np.ndarray:
    """Block-diagonal ``Omega`` with ``[[0, 1], [-1, 0]]`` per (coordinate, momentum) pair."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def vacuum_covariance(n: int = 8) -> np.ndarray:
    return 0.5 * np.eye(n)


def min_physical_eigenvalue(c: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of the Hermitian matrix ``C + (i/2) Omega``.

    Works on stacks of covariance matrices.
    """
    c = np.asarray(c, dtype=float)
    omega = symplectic_form(c.shape[-1] // 2)
    return np.linalg.eigvalsh(c + 0.5j * omega)[..., 0]


def check_covariance(c, tol_phys: float = 1e-9) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[-2:] != (8, 8):
        raise DomainError(f"covariance must be 8x8, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise DomainError("covariance has non-finite entries")
    if not np.array_equal(c, np.swapaxes(c, -1, -2)):
        raise DomainError("covariance is not symmetric")
    lo = min_physical_eigenvalue(c)
    if np.any(lo < -tol_phys):
        raise DomainError(f"covariance violates the uncertainty relation (min eigenvalue {np.min(lo):.3e})")
    return c


def label_swap_permutation() -> np.ndarray:
    """Permutation matrix exchanging system 1 and system 2 quadratures."""
    order = [2, 3, 0, 1, 6, 7, 4, 5]
    return np.eye(8)[order]
