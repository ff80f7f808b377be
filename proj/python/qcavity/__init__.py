"""Variational cavity solvers for the transverse-field Ising model."""

from ._core import (
    ConfigError,
    Instance,
    InstanceError,
    SizeError,
    ansatz_observables,
    chain,
    exact_ground_state,
    gs_solve,
    homog_scan,
    mf_solve,
    rrg,
    run,
    ss_solve,
)

__all__ = [
    "ConfigError",
    "Instance",
    "InstanceError",
    "SizeError",
    "ansatz_observables",
    "chain",
    "exact_ground_state",
    "gs_solve",
    "homog_scan",
    "mf_solve",
    "rrg",
    "run",
    "ss_solve",
]
