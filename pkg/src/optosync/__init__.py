"""Quantum synchronization of two coupled optomechanical systems."""

from .dynamics import (IntegrationError, IntegratorConfig, Trajectory, attractor_report,
                       convergence_order, decaying_oscillator_probe, evolve)
from .lyapunov import (LogicResult, LyapunovConfig, LyapunovResult, classify_logic,
                       largest_lyapunov, scalar_probe_exponent)
from .measures import (MeasureSeries, PhaseUndefinedError, UnphysicalCovarianceError,
                       measure_series, phase_error, rotate_covariance, sc_prime, sp_prime,
                       time_average)
from .model import (DivergenceError, DomainError, MeanState, SystemParams, build_drift_matrix,
                    build_noise_matrix, check_covariance, mean_field_rhs, min_physical_eigenvalue,
                    symplectic_form, vacuum_covariance)
from .sweep import GridSpec, SweepField, find_logic_regions, sweep_lyapunov, sweep_sp_bar

__version__ = "0.1.0"
