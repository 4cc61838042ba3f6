"""Device model: anharmonic modes, qubit-bus couplings, and operator assembly.

All frequencies are linear frequencies in GHz (hbar = 1); the 2*pi factor is
applied inside the propagator.  Mode ordering is the order in which modes are
listed in the DeviceSpec; bare kets are flattened row-major in that order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

SPARSE_DIM = 512  # dense below, CSR at or above


class DeviceError(ValueError):
    pass


@dataclass(frozen=True)
class ModeSpec:
    name: str
    kind: str  # "qubit" or "bus"
    frequency: float  # GHz (idle frequency for a bus)
    anharmonicity: float  # GHz, negative for transmons
    levels: int = 3

    def __post_init__(self):
        if self.kind not in ("qubit", "bus"):
            raise DeviceError(f"mode {self.name!r}: kind must be 'qubit' or 'bus'")
        if not self.frequency > 0:
            raise DeviceError(f"mode {self.name!r}: frequency must be > 0")
        if not self.anharmonicity < 0:
            raise DeviceError(f"mode {self.name!r}: anharmonicity must be < 0")
        if self.levels < 3:
            raise DeviceError(f"mode {self.name!r}: levels must be >= 3")

    @property
    def tunable(self) -> bool:
        return self.kind == "bus"


@dataclass(frozen=True)
class CouplingSpec:
    a: str
    b: str
    strength: float  # GHz, pinned at reference_frequency
    reference_frequency: float = 5.5
    scaling: str = "sqrt-product"  # or "constant"

    def __post_init__(self):
        if self.a == self.b:
            raise DeviceError("coupling endpoints must be distinct")
        if not self.strength > 0:
            raise DeviceError("coupling strength must be > 0")
        if self.scaling not in ("sqrt-product", "constant"):
            raise DeviceError(f"unknown coupling scaling {self.scaling!r}")
        if self.scaling == "sqrt-product" and not self.reference_frequency > 0:
            raise DeviceError("reference_frequency must be > 0")


def coupling_at(coupling: CouplingSpec, freq_a: float, freq_b: float) -> float:
    """Coupling strength evaluated at the given endpoint frequencies."""
    if freq_a <= 0 or freq_b <= 0:
        raise DeviceError("coupling frequencies must be > 0")
    if coupling.scaling == "constant":
        return coupling.strength
    return coupling.strength * np.sqrt(freq_a * freq_b) / coupling.reference_frequency


@dataclass(frozen=True)
class DeviceSpec:
    modes: tuple[ModeSpec, ...]
    couplings: tuple[CouplingSpec, ...]
    name: str = "device"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        names = [m.name for m in self.modes]
        if len(set(names)) != len(names):
            raise DeviceError("mode names must be unique")
        kinds = {m.name: m.kind for m in self.modes}
        for c in self.couplings:
            for end in (c.a, c.b):
                if end not in kinds:
                    raise DeviceError(f"coupling endpoint {end!r} is not a device mode")
            n_bus = (kinds[c.a] == "bus") + (kinds[c.b] == "bus")
            if n_bus != 1:
                raise DeviceError(
                    f"coupling ({c.a}, {c.b}) must join exactly one qubit and one bus"
                )

    # -- mode bookkeeping ---------------------------------------------------

    @property
    def mode_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes)

    @property
    def qubits(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes if m.kind == "qubit")

    @property
    def buses(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes if m.kind == "bus")

    def mode(self, name: str) -> ModeSpec:
        for m in self.modes:
            if m.name == name:
                return m
        raise DeviceError(f"unknown mode {name!r}")

    def mode_index(self, name: str) -> int:
        for i, m in enumerate(self.modes):
            if m.name == name:
                return i
        raise DeviceError(f"unknown mode {name!r}")

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(m.levels for m in self.modes)

    @property
    def dim(self) -> int:
        return int(np.prod(self.levels))

    # -- bare-ket indexing --------------------------------------------------

    def bare_index(self, occupation: Sequence[int]) -> int:
        """Row-major flat index of a bare occupation ket in canonical order."""
        if len(occupation) != len(self.modes):
            raise DeviceError("occupation length must match number of modes")
        idx = 0
        for n, mode in zip(occupation, self.modes):
            if not 0 <= n < mode.levels:
                raise DeviceError(
                    f"occupation {n} out of range for mode {mode.name!r}"
                )
            idx = idx * mode.levels + n
        return idx

    def occupation_of(self, index: int) -> tuple[int, ...]:
        """Inverse of bare_index."""
        if not 0 <= index < self.dim:
            raise DeviceError("bare index out of range")
        occ = []
        for mode in reversed(self.modes):
            occ.append(index % mode.levels)
            index //= mode.levels
        return tuple(reversed(occ))

    def qubit_ket(self, qubit_occupation: Mapping[str, int] | Sequence[int]) -> tuple[int, ...]:
        """Full-device occupation with buses in their ground state."""
        if not isinstance(qubit_occupation, Mapping):
            qubit_occupation = dict(zip(self.qubits, qubit_occupation))
        occ = []
        for m in self.modes:
            occ.append(int(qubit_occupation.get(m.name, 0)) if m.kind == "qubit" else 0)
        return tuple(occ)

    def total_excitation(self) -> np.ndarray:
        """Total excitation number of every bare index (conserved by Eq.-1 dynamics)."""
        total = np.zeros(1, dtype=np.int64)
        for mode in self.modes:
            occ = np.arange(mode.levels)
            total = (total[:, None] + occ[None, :]).ravel()
        return total

    # -- derived devices ----------------------------------------------------

    def with_qubit_anharmonicity(self, eta: float) -> "DeviceSpec":
        """Clone with every qubit anharmonicity replaced; buses untouched."""
        modes = tuple(
            replace(m, anharmonicity=eta) if m.kind == "qubit" else m
            for m in self.modes
        )
        tag = f"{self.name}_eta{abs(round(eta * 1000))}"
        return DeviceSpec(modes=modes, couplings=self.couplings, name=tag)

    def idle_bus_frequencies(self) -> dict[str, float]:
        return {m.name: m.frequency for m in self.modes if m.kind == "bus"}

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "modes": [
                {
                    "name": m.name,
                    "kind": m.kind,
                    "frequency_GHz": m.frequency,
                    "anharmonicity_GHz": m.anharmonicity,
                    "levels": m.levels,
                }
                for m in self.modes
            ],
            "couplings": [
                {
                    "a": c.a,
                    "b": c.b,
                    "g_GHz": c.strength,
                    "reference_GHz": c.reference_frequency,
                    "scaling": c.scaling,
                }
                for c in self.couplings
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DeviceSpec":
        modes = tuple(
            ModeSpec(
                name=m["name"],
                kind=m["kind"],
                frequency=m["frequency_GHz"],
                anharmonicity=m["anharmonicity_GHz"],
                levels=m.get("levels", 3),
            )
            for m in data["modes"]
        )
        couplings = tuple(
            CouplingSpec(
                a=c["a"],
                b=c["b"],
                strength=c["g_GHz"],
                reference_frequency=c.get("reference_GHz", 5.5),
                scaling=c.get("scaling", "sqrt-product"),
            )
            for c in data["couplings"]
        )
        return cls(modes=modes, couplings=couplings, name=data.get("name", "device"))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense or sparse complex matrix on the truncated product space."""

    dimension: int
    entries: object  # ndarray or scipy CSR, chosen by size

    def toarray(self) -> np.ndarray:
        if sp.issparse(self.entries):
            return self.entries.toarray()
        return np.asarray(self.entries)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)


def _wrap(matrix, dim: int) -> OperatorMatrix:
    if dim >= SPARSE_DIM:
        return OperatorMatrix(dim, sp.csr_matrix(matrix))
    if sp.issparse(matrix):
        matrix = matrix.toarray()
    return OperatorMatrix(dim, np.asarray(matrix, dtype=complex))


def _destroy(levels: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, levels)), 1, format="csr").astype(complex)


def _embed(device: DeviceSpec, slot: int, op: sp.spmatrix) -> sp.csr_matrix:
    mats = []
    for i, mode in enumerate(device.modes):
        mats.append(op if i == slot else sp.identity(mode.levels, format="csr"))
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), mats)


def drive_operator(device: DeviceSpec, mode: str) -> OperatorMatrix:
    """(a^dag + a) embedded at the mode's tensor slot."""
    slot = device.mode_index(mode)
    a = _destroy(device.mode(mode).levels)
    return _wrap(_embed(device, slot, a + a.conj().T), device.dim)


def number_operator(device: DeviceSpec, mode: str) -> OperatorMatrix:
    slot = device.mode_index(mode)
    a = _destroy(device.mode(mode).levels)
    return _wrap(_embed(device, slot, a.conj().T @ a), device.dim)


def bare_diagonal(device: DeviceSpec, bus_frequencies: Mapping[str, float]) -> np.ndarray:
    """Diagonal of the uncoupled Hamiltonian: sum_l w_l n + (eta_l/2) n (n-1)."""
    freqs = _resolved_frequencies(device, bus_frequencies)
    diag = np.zeros(1)
    for mode in device.modes:
        n = np.arange(mode.levels)
        e = freqs[mode.name] * n + 0.5 * mode.anharmonicity * n * (n - 1)
        diag = (diag[:, None] + e[None, :]).ravel()
    return diag


def _resolved_frequencies(
    device: DeviceSpec, bus_frequencies: Mapping[str, float]
) -> dict[str, float]:
    known = set(device.mode_names)
    for name in bus_frequencies:
        if name not in known:
            raise DeviceError(f"unknown mode {name!r} in bus_frequencies")
        if device.mode(name).kind != "bus":
            raise DeviceError(f"mode {name!r} is fixed-frequency; cannot set it")
        if not bus_frequencies[name] > 0:
            raise DeviceError(f"bus frequency for {name!r} must be > 0")
    freqs = {}
    for mode in device.modes:
        if mode.kind == "bus":
            if mode.name not in bus_frequencies:
                raise DeviceError(f"missing frequency for tunable bus {mode.name!r}")
            freqs[mode.name] = float(bus_frequencies[mode.name])
        else:
            freqs[mode.name] = mode.frequency
    return freqs


def hopping_operator(device: DeviceSpec, a: str, b: str) -> sp.csr_matrix:
    """a^dag_a a_b + h.c. embedded on the full space (unit strength)."""
    ia, ib = device.mode_index(a), device.mode_index(b)
    la = _destroy(device.mode(a).levels)
    lb = _destroy(device.mode(b).levels)
    mats = []
    for i, mode in enumerate(device.modes):
        if i == ia:
            mats.append(la.conj().T)
        elif i == ib:
            mats.append(lb)
        else:
            mats.append(sp.identity(mode.levels, format="csr"))
    hop = reduce(lambda x, y: sp.kron(x, y, format="csr"), mats)
    return (hop + hop.conj().T).tocsr()


def build_hamiltonian(
    device: DeviceSpec, bus_frequencies: Mapping[str, float]
) -> OperatorMatrix:
    """Full Eq.-1 Hamiltonian at the given bus frequencies (GHz, hbar = 1)."""
    freqs = _resolved_frequencies(device, bus_frequencies)
    h = sp.diags(bare_diagonal(device, bus_frequencies).astype(complex), format="csr")
    for c in device.couplings:
        g = coupling_at(c, freqs[c.a], freqs[c.b])
        h = h + g * hopping_operator(device, c.a, c.b)
    return _wrap(h, device.dim)
