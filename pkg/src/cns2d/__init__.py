"""Pseudo-spectral simulator for the 2D chemotaxis-Navier-Stokes system on a torus."""
from .spectral import Grid, GridMismatch, is_hermitian
from .system import (BumpSpec, State, StateDerivative, SystemOperator, SystemParams,
                     initial_data, mollify_state, potential, rhs)
from .diagnostics import (DiagnosticsRecord, check_inequality_ww7, compute_record,
                          gronwall_budget, hs_energy, interpolation_check_abc,
                          residual_identity_deltac, residual_identity_www)
from .integrator import BlowUp, IntegratorConfig, Trajectory, cfl_dt, run, step

__all__ = [
    "Grid", "GridMismatch", "is_hermitian",
    "BumpSpec", "State", "StateDerivative", "SystemOperator", "SystemParams",
    "initial_data", "mollify_state", "potential", "rhs",
    "DiagnosticsRecord", "check_inequality_ww7", "compute_record", "gronwall_budget",
    "hs_energy", "interpolation_check_abc", "residual_identity_deltac", "residual_identity_www",
    "BlowUp", "IntegratorConfig", "Trajectory", "cfl_dt", "run", "step",
]
