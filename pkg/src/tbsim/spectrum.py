"""Diagonalization, dressed-state labeling, ZZ coupling, and avoided crossings.

Dressed states are tied back to bare kets by maximum-overlap assignment; where
that is ambiguous (near resonances) adiabatic continuation from a dispersive
anchor is used, matching the definition of E_jk as the energy of the eigenstate
adiabatically connected to the bare state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .device import DeviceSpec, OperatorMatrix, build_hamiltonian

OVERLAP_FLOOR = 0.5


class LabelingError(RuntimeError):
    """Raised when a dressed state cannot be assigned to a bare ket."""


class ResonanceError(ZeroDivisionError):
    """Raised when a perturbative denominator vanishes."""


@dataclass(frozen=True)
class SpectrumResult:
    energies: np.ndarray          # ascending eigenvalues, GHz
    dressed_states: np.ndarray    # eigenvectors as columns
    label_map: dict               # bare occupation tuple -> eigenindex
    overlaps: dict                # bare occupation tuple -> |<bare|dressed>|^2

    def energy_of(self, ket: Sequence[int]) -> float:
        return float(self.energies[self.label_map[tuple(ket)]])

    def state_of(self, ket: Sequence[int]) -> np.ndarray:
        return self.dressed_states[:, self.label_map[tuple(ket)]]


@dataclass(frozen=True)
class DetuningReport:
    delta1: float     # omega_1 - omega_TB
    delta2: float     # omega_2 - omega_TB
    delta: float      # omega_2 - omega_1
    mean_freq: float  # (omega_1 + omega_2) / 2
    omega_on: float   # mean_freq - eta_TB / 2

    @classmethod
    def from_frequencies(cls, omega1: float, omega2: float, omega_tb: float,
                         eta_tb: float) -> "DetuningReport":
        return cls(
            delta1=omega1 - omega_tb,
            delta2=omega2 - omega_tb,
            delta=omega2 - omega1,
            mean_freq=0.5 * (omega1 + omega2),
            omega_on=0.5 * (omega1 + omega2) - 0.5 * eta_tb,
        )


@dataclass(frozen=True)
class AvoidedCrossing:
    pair: tuple          # the two bare occupation tuples
    location: float      # bus frequency at minimum gap, GHz
    gap: float           # minimum dressed splitting, GHz


# ---------------------------------------------------------------------------
# labeling

def _greedy_assign(overlap_sq: np.ndarray):
    """Assign rows (bare kets) to columns (eigenstates), best overlap first."""
    n_rows, n_cols = overlap_sq.shape
    order = np.dstack(np.unravel_index(np.argsort(overlap_sq, axis=None)[::-1],
                                       overlap_sq.shape))[0]
    row_done = np.zeros(n_rows, bool)
    col_done = np.zeros(n_cols, bool)
    assignment = np.full(n_rows, -1)
    for r, c in order:
        if not row_done[r] and not col_done[c]:
            assignment[r] = c
            row_done[r] = col_done[c] = True
            if row_done.all():
                break
    return assignment


def diagonalize_and_label(h: OperatorMatrix, device: DeviceSpec) -> SpectrumResult:
    """Eigenpairs of a Hermitian H with every bare ket labeled by max overlap."""
    mat = h.toarray()
    if np.max(np.abs(mat - mat.conj().T)) > 1e-9 * max(np.max(np.abs(mat)), 1.0):
        raise ValueError("Hamiltonian is not Hermitian")
    energies, vecs = np.linalg.eigh(mat)
    overlap_sq = np.abs(vecs) ** 2  # row = bare index, col = eigenindex
    assignment = _greedy_assign(overlap_sq)
    label_map, overlaps, weak = {}, {}, []
    for bare in range(h.dimension):
        ket = device.occupation_of(bare)
        col = assignment[bare]
        label_map[ket] = int(col)
        overlaps[ket] = float(overlap_sq[bare, col])
        if overlaps[ket] < OVERLAP_FLOOR:
            weak.append(ket)
    if weak:
        raise LabelingError(
            f"ambiguous dressed-state assignment (overlap < {OVERLAP_FLOOR}) "
            f"for bare kets: {weak[:8]}"
        )
    return SpectrumResult(energies, vecs, label_map, overlaps)


class _BlockLabeler:
    """Labels kets inside a single total-excitation block, with optional
    adiabatic continuation of bus frequencies from a dispersive anchor."""

    def __init__(self, device: DeviceSpec, kets: Sequence[tuple]):
        ns = {sum(k) for k in kets}
        if len(ns) != 1:
            raise ValueError("kets must share one total excitation number")
        self.device = device
        self.n = ns.pop()
        total = device.total_excitation()
        self.indices = np.flatnonzero(total == self.n)
        self.pos = {int(i): j for j, i in enumerate(self.indices)}

    def block_h(self, bus_frequencies: Mapping[str, float]) -> np.ndarray:
        h = build_hamiltonian(self.device, bus_frequencies).entries
        if sp.issparse(h):
            h = h[self.indices][:, self.indices].toarray()
        else:
            h = h[np.ix_(self.indices, self.indices)]
        return h

    def eig(self, bus_frequencies):
        return np.linalg.eigh(self.block_h(bus_frequencies))

    def labeled_pairs(self, bus_frequencies: Mapping[str, float],
                      kets: Sequence[tuple], continuation_steps: int = 24):
        """(energy, block eigenvector) of the dressed states adiabatically
        connected to `kets`.

        Tries direct max-overlap assignment; if any overlap falls below the
        floor, walks the bus frequencies in from a far-detuned anchor and
        follows the eigenvectors by continuity.  Eigenvector gauge is fixed so
        the amplitude on the labeling bare ket is real and positive.
        """
        rows = [self.pos[self.device.bare_index(k)] for k in kets]
        energies, vecs = self.eig(bus_frequencies)
        ov = np.abs(vecs[rows, :]) ** 2
        assignment = _greedy_assign(ov)
        if all(ov[i, assignment[i]] >= 0.6 for i in range(len(kets))):
            cols = assignment
        else:
            # adiabatic continuation: detune every bus upward, then walk back
            anchor = {b: f + 0.5 for b, f in bus_frequencies.items()}
            e0, v0 = self.eig(anchor)
            ov0 = np.abs(v0[rows, :]) ** 2
            asg = _greedy_assign(ov0)
            if any(ov0[i, asg[i]] < OVERLAP_FLOOR for i in range(len(kets))):
                raise LabelingError(
                    f"continuation anchor is not dispersive for kets {list(kets)}"
                )
            tracked = v0[:, asg]
            for step in range(1, continuation_steps + 1):
                s = step / continuation_steps
                freqs = {b: (1 - s) * anchor[b] + s * bus_frequencies[b]
                         for b in bus_frequencies}
                energies, vecs = self.eig(freqs)
                cols = []
                used = set()
                for j in range(tracked.shape[1]):
                    ov_cont = np.abs(vecs.conj().T @ tracked[:, j]) ** 2
                    for c in np.argsort(ov_cont)[::-1]:
                        if c not in used:
                            used.add(int(c))
                            cols.append(int(c))
                            break
                tracked = vecs[:, cols]
            cols = np.asarray(cols)
        out = {}
        for i, k in enumerate(kets):
            v = vecs[:, cols[i]].copy()
            amp = v[rows[i]]
            if amp != 0:
                v *= np.exp(-1j * np.angle(amp)) if np.iscomplexobj(v) else np.sign(amp)
            out[k] = (float(energies[cols[i]]), v)
        return out

    def labeled_energies(self, bus_frequencies: Mapping[str, float],
                         kets: Sequence[tuple], continuation_steps: int = 24):
        pairs = self.labeled_pairs(bus_frequencies, kets, continuation_steps)
        return {k: e for k, (e, _) in pairs.items()}


def labeled_energies(device: DeviceSpec, bus_frequencies: Mapping[str, float],
                     kets: Sequence[Sequence[int]]) -> dict:
    """Dressed energies of bare kets, computed per excitation block."""
    return {k: e for k, (e, _) in
            labeled_states(device, bus_frequencies, kets).items()}


def labeled_states(device: DeviceSpec, bus_frequencies: Mapping[str, float],
                   kets: Sequence[Sequence[int]]) -> dict:
    """Dressed (energy, full-space eigenvector) for each bare ket.

    Computed block by block in total excitation, so it stays exact and cheap
    even when the full Hilbert space is large.
    """
    kets = [tuple(k) for k in kets]
    by_n: dict[int, list] = {}
    for k in kets:
        by_n.setdefault(sum(k), []).append(k)
    out = {}
    for n, group in by_n.items():
        labeler = _BlockLabeler(device, group)
        pairs = labeler.labeled_pairs(bus_frequencies, group)
        for k, (e, block_vec) in pairs.items():
            full = np.zeros(device.dim, dtype=complex)
            full[labeler.indices] = block_vec
            out[k] = (e, full)
    return out


# ---------------------------------------------------------------------------
# ZZ coupling

def zz_numeric(device: DeviceSpec, bus_frequencies: Mapping[str, float],
               qubit_pair: tuple[str, str] | None = None) -> float:
    """zeta_ZZ = (E_11 - E_10) - (E_01 - E_00) from labeled dressed energies."""
    if qubit_pair is None:
        qubits = device.qubits
        if len(qubits) != 2:
            raise ValueError("qubit_pair required for devices with != 2 qubits")
        qubit_pair = (qubits[0], qubits[1])
    q1, q2 = qubit_pair
    kets = {
        "00": device.qubit_ket({q1: 0, q2: 0}),
        "10": device.qubit_ket({q1: 1, q2: 0}),
        "01": device.qubit_ket({q1: 0, q2: 1}),
        "11": device.qubit_ket({q1: 1, q2: 1}),
    }
    e = labeled_energies(device, bus_frequencies, list(kets.values()))
    return (e[kets["11"]] - e[kets["10"]]) - (e[kets["01"]] - e[kets["00"]])


def zz_perturbative(omega1: float, omega2: float, omega_tb: float,
                    eta1: float, eta2: float, eta_tb: float,
                    g1: float, g2: float) -> float:
    """Fourth-order closed form for zeta_ZZ in terms of detunings."""
    d1 = omega1 - omega_tb
    d2 = omega2 - omega_tb
    d = omega2 - omega1
    for value, label in [(d1, "Delta_1"), (d2, "Delta_2"),
                         (d - eta1, "Delta - eta_1"), (d + eta2, "Delta + eta_2"),
                         (d1 + d2 - eta_tb, "Delta_1 + Delta_2 - eta_TB")]:
        if value == 0:
            raise ResonanceError(f"vanishing denominator: {label}")
    pref = 2.0 * g1**2 * g2**2
    term1 = pref * (1.0 / (d2**2 * (d - eta1)) - 1.0 / (d1**2 * (d + eta2)))
    term2 = pref / (d1 + d2 - eta_tb) * (1.0 / d1 + 1.0 / d2) ** 2
    return term1 + term2


def exchange_J(g1: float, g2: float, delta1: float, delta2: float) -> float:
    """Bus-mediated exchange J = (g1 g2 / 2)(1/Delta_1 + 1/Delta_2)."""
    if delta1 == 0 or delta2 == 0:
        raise ResonanceError("qubit-bus resonance: Delta_1 and Delta_2 must be nonzero")
    return 0.5 * g1 * g2 * (1.0 / delta1 + 1.0 / delta2)


def _pair_perturbative(device: DeviceSpec, qubit_pair, omega_tb: float) -> float:
    from .device import coupling_at
    q1, q2 = qubit_pair
    bus = _shared_bus(device, q1, q2)
    m1, m2, mb = device.mode(q1), device.mode(q2), device.mode(bus)
    g = {}
    for c in device.couplings:
        ends = {c.a, c.b}
        if ends == {q1, bus}:
            g[q1] = coupling_at(c, m1.frequency, omega_tb)
        elif ends == {q2, bus}:
            g[q2] = coupling_at(c, m2.frequency, omega_tb)
    return zz_perturbative(m1.frequency, m2.frequency, omega_tb,
                           m1.anharmonicity, m2.anharmonicity, mb.anharmonicity,
                           g[q1], g[q2])


def _shared_bus(device: DeviceSpec, q1: str, q2: str) -> str:
    partners = {q1: set(), q2: set()}
    for c in device.couplings:
        for q, other in ((c.a, c.b), (c.b, c.a)):
            if q in partners and device.mode(other).kind == "bus":
                partners[q].add(other)
    shared = partners[q1] & partners[q2]
    if len(shared) != 1:
        raise ValueError(f"qubits {q1!r}, {q2!r} must share exactly one bus")
    return shared.pop()


def zz_sweep(device: DeviceSpec, bus: str, start: float, stop: float, step: float,
             qubit_pair: tuple[str, str] | None = None):
    """(omega_TB, zeta_numeric, zeta_perturbative) along a bus-frequency scan.

    Labeling failures are recorded as NaN gaps rather than aborting.
    """
    if qubit_pair is None:
        qubits = device.qubits
        if len(qubits) != 2:
            raise ValueError("qubit_pair required for devices with != 2 qubits")
        qubit_pair = (qubits[0], qubits[1])
    freqs = np.arange(start, stop + 0.5 * step, step)
    idle = device.idle_bus_frequencies()
    z_num = np.full(freqs.shape, np.nan)
    z_pert = np.full(freqs.shape, np.nan)
    for i, f in enumerate(freqs):
        bus_f = dict(idle)
        bus_f[bus] = float(f)
        try:
            z_num[i] = zz_numeric(device, bus_f, qubit_pair)
        except LabelingError:
            pass
        try:
            z_pert[i] = _pair_perturbative(device, qubit_pair, float(f))
        except ResonanceError:
            pass
    return freqs, z_num, z_pert


def zz_map(device: DeviceSpec, bus: str, delta_range, bus_detuning_range,
           qubit_pair: tuple[str, str] | None = None, mask_below: float = 1e-5):
    """zeta_ZZ over a (qubit-qubit detuning, bus-qubit detuning) grid.

    The first qubit's frequency is held fixed; the second is set to
    omega_1 + delta and the bus to omega_1 + bus_detuning.  Returns the raw
    grid plus a masked copy with |zeta| < mask_below set to NaN.
    """
    from dataclasses import replace as _replace
    if qubit_pair is None:
        qubits = device.qubits
        if len(qubits) != 2:
            raise ValueError("qubit_pair required for devices with != 2 qubits")
        qubit_pair = (qubits[0], qubits[1])
    q1, q2 = qubit_pair
    omega1 = device.mode(q1).frequency
    deltas = np.asarray(delta_range, float)
    bus_dets = np.asarray(bus_detuning_range, float)
    raw = np.full((deltas.size, bus_dets.size), np.nan)
    for i, d in enumerate(deltas):
        modes = tuple(
            _replace(m, frequency=omega1 + d) if m.name == q2 else m
            for m in device.modes
        )
        dev_i = DeviceSpec(modes=modes, couplings=device.couplings, name=device.name)
        for j, bd in enumerate(bus_dets):
            bus_f = dev_i.idle_bus_frequencies()
            bus_f[bus] = omega1 + bd
            try:
                raw[i, j] = zz_numeric(dev_i, bus_f, qubit_pair)
            except LabelingError:
                pass
    masked = raw.copy()
    masked[np.abs(masked) < mask_below] = np.nan
    return deltas, bus_dets, raw, masked


# ---------------------------------------------------------------------------
# avoided crossings

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def find_avoided_crossing(device: DeviceSpec, bare_pair, bus: str,
                          bus_interval: tuple[float, float],
                          location_tol: float = 1e-5) -> AvoidedCrossing:
    """Minimum dressed splitting of two bare labels over a bus-frequency scan.

    The two adiabatic branches are identified at each frequency as the two
    eigenstates carrying the most weight on span{|a>, |b>}, which stays well
    defined through the hybridization region; the minimum is refined by
    golden-section search.
    """
    ket_a, ket_b = (tuple(k) for k in bare_pair)
    if sum(ket_a) != sum(ket_b):
        raise ValueError("bare pair must share a total excitation number "
                         "(otherwise they never couple)")
    labeler = _BlockLabeler(device, [ket_a, ket_b])
    rows = [labeler.pos[device.bare_index(ket_a)],
            labeler.pos[device.bare_index(ket_b)]]
    idle = device.idle_bus_frequencies()

    def gap_at(f: float) -> float:
        bus_f = dict(idle)
        bus_f[bus] = f
        energies, vecs = labeler.eig(bus_f)
        weight = np.abs(vecs[rows[0], :]) ** 2 + np.abs(vecs[rows[1], :]) ** 2
        top2 = np.argsort(weight)[-2:]
        return float(abs(energies[top2[0]] - energies[top2[1]]))

    lo, hi = bus_interval
    scan = np.linspace(lo, hi, 101)
    gaps = np.array([gap_at(f) for f in scan])
    k = int(np.argmin(gaps))
    if k == 0 or k == len(scan) - 1:
        raise ValueError("no interior gap minimum in the scanned interval")
    a, b = scan[k - 1], scan[k + 1]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = gap_at(c), gap_at(d)
    while (b - a) > location_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = gap_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = gap_at(d)
    loc = 0.5 * (a + b)
    return AvoidedCrossing(pair=(ket_a, ket_b), location=float(loc),
                           gap=float(gap_at(loc)))
