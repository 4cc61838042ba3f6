"""Pulse-level simulator for transmon qubits coupled by tunable buses."""

from .device import (
    CouplingSpec,
    DeviceSpec,
    ModeSpec,
    OperatorMatrix,
    build_hamiltonian,
    coupling_at,
    drive_operator,
)
from .presets import get_preset

__all__ = [
    "CouplingSpec",
    "DeviceSpec",
    "ModeSpec",
    "OperatorMatrix",
    "build_hamiltonian",
    "coupling_at",
    "drive_operator",
    "get_preset",
]
