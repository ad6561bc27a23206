"""Finite-difference micromagnetics for voltage-driven skyrmion devices."""

from .fields import (effective_field, energy_terms, h_anis, h_demag, h_dmi, h_exchange,
                     h_zeeman, total_energy)
from .llg import DEFAULT_DT, DT_MAX, Integrator, llg_step_rk4, relax, stable_dt
from .params import MU0, DeviceGeometry, MagState, MaterialParams
from .state import (avg_mz, device_state, init_skyrmion, read_snapshot_csv,
                    topological_charge, write_snapshot_csv)

__all__ = [
    "MU0", "DEFAULT_DT", "DT_MAX",
    "DeviceGeometry", "MagState", "MaterialParams", "Integrator",
    "h_exchange", "h_dmi", "h_anis", "h_demag", "h_zeeman", "effective_field",
    "energy_terms", "total_energy",
    "llg_step_rk4", "relax", "stable_dt",
    "init_skyrmion", "device_state", "avg_mz", "topological_charge",
    "write_snapshot_csv", "read_snapshot_csv",
]
