"""Crosstalk experiments: cross-driving strengths, frequency-collision margins,
simultaneous-gate error matrices, spectator sweeps, population swap matrices,
and gate-time trade-off sweeps."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .calibrate import (
    CZCalibration,
    XCalibration,
    characterize_gate,
    calibrate_cz,
    measure_j101,
)
from .device import DeviceSpec, coupling_at, drive_operator
from .propagator import (
    CZ_TARGET,
    X_TARGET,
    computational_basis,
    excitation_indices,
    hamiltonian_terms,
    leakage,
    optimize_local_phases,
    propagate,
    simulate_gate,
)
from .pulses import PulseSchedule
from .spectrum import (
    AvoidedCrossing,
    _shared_bus,
    exchange_J,
    find_avoided_crossing,
    labeled_states,
)

DEFAULT_DRIVE = 0.025  # GHz; reference cross-driving drive amplitude


# ---------------------------------------------------------------------------
# cross-driving

def worst_case_error(strength: float, detuning: float) -> float:
    """Resonant-limit population error Omega~^2 / (Omega~^2 + delta^2)."""
    if strength == 0 and detuning == 0:
        raise ValueError("strength and detuning cannot both be zero")
    return strength**2 / (strength**2 + detuning**2)


@dataclass(frozen=True)
class CrossDriveEntry:
    transition: str          # e.g. "00<->01" (source bit, target bit)
    bra: tuple               # full-device occupation tuples
    ket: tuple
    analytic: float          # GHz, leading-order strength
    numeric: float           # GHz, |Omega <bra|(a+a^dag)_source|ket>| dressed
    beta: float              # numeric / Omega
    beta_db: float           # 20 log10 |beta|
    detuning: float          # GHz, dressed transition energy minus drive freq
    worst_case: float        # Eq.-(6)-style bound using the numeric strength


def cross_drive_table(device: DeviceSpec, source: str, target: str | None = None,
                      drive: float = DEFAULT_DRIVE) -> list[CrossDriveEntry]:
    """Strength of the off-target drive seen by a neighbor when `source` is
    driven at its own dressed frequency, for the four leading transitions."""
    qubits = device.qubits
    if target is None:
        others = [q for q in qubits if q != source]
        if len(others) != 1:
            raise ValueError("target required when the device has > 2 qubits")
        target = others[0]
    bus = _shared_bus(device, source, target)
    ms, mt, mb = device.mode(source), device.mode(target), device.mode(bus)
    delta = mt.frequency - ms.frequency
    eta1, eta2 = ms.anharmonicity, mt.anharmonicity
    g = {}
    for c in device.couplings:
        ends = {c.a, c.b}
        if ends == {source, bus}:
            g[source] = coupling_at(c, ms.frequency, mb.frequency)
        elif ends == {target, bus}:
            g[target] = coupling_at(c, mt.frequency, mb.frequency)
    j = exchange_J(g[source], g[target], ms.frequency - mb.frequency,
                   mt.frequency - mb.frequency)

    analytic = {
        "00<->01": j * drive / delta,
        "10<->11": j * drive * (delta + eta1) / (delta * (delta - eta1)),
        "01<->02": np.sqrt(2.0) * j * drive / (delta + eta2),
        "11<->12": np.sqrt(2.0) * j * drive * (delta + eta1 + eta2)
                   / ((delta - eta1 + eta2) * (delta + eta2)),
    }

    def occ(src_n, tgt_n):
        return tuple(src_n if m == source else (tgt_n if m == target else 0)
                     for m in device.mode_names)

    transitions = {
        "00<->01": (occ(0, 0), occ(0, 1)),
        "10<->11": (occ(1, 0), occ(1, 1)),
        "01<->02": (occ(0, 1), occ(0, 2)),
        "11<->12": (occ(1, 1), occ(1, 2)),
    }

    idle = device.idle_bus_frequencies()
    kets = sorted({k for pair in transitions.values() for k in pair})
    dressed = labeled_states(device, idle, kets)
    op = drive_operator(device, source).entries
    if hasattr(op, "toarray"):
        op = op.toarray()
    drive_freq = dressed[occ(1, 0)][0] - dressed[occ(0, 0)][0]

    out = []
    for label, (a, b) in transitions.items():
        ea, va = dressed[a]
        eb, vb = dressed[b]
        strength = drive * abs(va.conj() @ (op @ vb))
        det = (eb - ea) - drive_freq
        beta = strength / drive
        out.append(CrossDriveEntry(
            transition=label, bra=a, ket=b,
            analytic=float(analytic[label]), numeric=float(strength),
            beta=float(beta),
            beta_db=float(20.0 * np.log10(beta)) if beta > 0 else float("-inf"),
            detuning=float(det),
            worst_case=float(worst_case_error(strength, det)),
        ))
    return out


# ---------------------------------------------------------------------------
# frequency collisions

COLLISION_THRESHOLD = 0.050  # GHz


@dataclass(frozen=True)
class CollisionReport:
    pair: tuple
    margins: dict            # "type1"/"type2"/"type3" -> GHz distance
    classification: str      # closest type within threshold, else "none"


def collision_classifier(device: DeviceSpec, pair: Sequence[str]) -> CollisionReport:
    """Distances of a qubit pair to the direct, two-photon, and
    straddling-anharmonicity frequency collisions (bare frequencies)."""
    qa, qb = pair
    ma, mb = device.mode(qa), device.mode(qb)
    wa, wb = ma.frequency, mb.frequency
    margins = {
        "type1": abs(wa - wb),
        "type2": min(abs(wa - (2 * wb + mb.anharmonicity) / 2),
                     abs(wb - (2 * wa + ma.anharmonicity) / 2)),
        "type3": min(abs(wa - (wb + mb.anharmonicity)),
                     abs(wb - (wa + ma.anharmonicity))),
    }
    closest = min(margins, key=margins.get)
    # strict comparison with a sub-Hz tolerance so that pairs placed exactly
    # on the guard band are reported as clear
    clear = margins[closest] >= COLLISION_THRESHOLD - 1e-9
    classification = "none" if clear else closest
    return CollisionReport(pair=tuple(pair), margins=margins,
                           classification=classification)


# ---------------------------------------------------------------------------
# simultaneous gates

def combined_schedule(*schedules: PulseSchedule) -> PulseSchedule:
    """Merge schedules that start together and share a duration."""
    if not schedules:
        raise ValueError("need at least one schedule")
    duration = schedules[0].duration
    drives, flux = [], []
    for s in schedules:
        if abs(s.duration - duration) > 1e-12:
            raise ValueError("simultaneous schedules must share a duration")
        drives.extend(s.drives)
        flux.extend(s.flux)
    targets = [d.target_mode for d in drives]
    buses = [f.bus for f in flux]
    if len(set(targets)) != len(targets) or len(set(buses)) != len(buses):
        raise ValueError("simultaneous schedules must address disjoint modes")
    return PulseSchedule(duration=duration, drives=tuple(drives),
                         flux=tuple(flux))


def _tensor_target(target: np.ndarray, n_gates: int) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for _ in range(n_gates):
        out = np.kron(out, target)
    return out


def simultaneous_pair_error(device: DeviceSpec, cal_a, cal_b,
                            dt: float = 0.002, seed: int = 0) -> float:
    """Error of two calibrated gates run together, measured against the tensor
    product of their targets on the union computational subspace."""
    if isinstance(cal_a, XCalibration):
        active = (cal_a.qubit, cal_b.qubit)
        target = _tensor_target(X_TARGET, 2)
    else:
        active = tuple(cal_a.pair) + tuple(cal_b.pair)
        target = _tensor_target(CZ_TARGET, 2)
    if len(set(active)) != len(active):
        raise ValueError("gates overlap; cannot run simultaneously")
    # order the block by device qubit order and build a matching target
    order = sorted(range(len(active)),
                   key=lambda i: device.qubits.index(active[i]))
    active_sorted = tuple(active[i] for i in order)
    target = _permute_qubits(target, order)
    sched = combined_schedule(cal_a.schedule(device), cal_b.schedule(device))
    basis = computational_basis(device, device.idle_bus_frequencies(),
                                qubits=active_sorted)
    gate = simulate_gate(device, sched, dt, basis)
    _, fid, _ = optimize_local_phases(target, gate.block, len(active),
                                      seed=seed)
    return float(1.0 - fid)


def _permute_qubits(u: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of a 2^n x 2^n matrix: new qubit i is old
    qubit order[i]."""
    n = len(order)
    perm = np.zeros(2**n, dtype=int)
    for new_idx in range(2**n):
        bits = [(new_idx >> (n - 1 - i)) & 1 for i in range(n)]
        old_idx = 0
        for i in range(n):
            old_idx |= bits[i] << (n - 1 - order[i])
        perm[new_idx] = old_idx
    return u[np.ix_(perm, perm)]


@dataclass(frozen=True)
class ErrorMatrix:
    labels: tuple            # gate labels, row/col order
    matrix: np.ndarray       # diag: isolated; upper: summed; lower: simultaneous

    def added_error(self, i: int, j: int) -> float:
        """Simultaneous minus summed-isolated error for an unordered pair."""
        lo, hi = min(i, j), max(i, j)
        return float(self.matrix[hi, lo] - self.matrix[lo, hi])


def simultaneous_error_matrix(device: DeviceSpec, calibrations: Mapping,
                              family: str, dt: float = 0.002,
                              seed: int = 0) -> ErrorMatrix:
    """Isolated vs simultaneous errors for every compatible gate pair.

    `calibrations` maps gate label -> XCalibration (family "x", labels are
    qubits) or CZCalibration (family "cz", labels are pair names).  Pairs that
    share a qubit are marked NaN."""
    if family not in ("x", "cz"):
        raise ValueError("family must be 'x' or 'cz'")
    labels = tuple(calibrations)
    n = len(labels)
    iso = {}
    for lab in labels:
        iso[lab] = characterize_gate(device, calibrations[lab], dt=dt,
                                     seed=seed)["error"]
    m = np.full((n, n), np.nan)
    for i, a in enumerate(labels):
        m[i, i] = iso[a]
        for j in range(i + 1, n):
            b = labels[j]
            qa = ((calibrations[a].qubit,) if family == "x"
                  else tuple(calibrations[a].pair))
            qb = ((calibrations[b].qubit,) if family == "x"
                  else tuple(calibrations[b].pair))
            if set(qa) & set(qb):
                continue
            m[i, j] = iso[a] + iso[b]
            m[j, i] = simultaneous_pair_error(device, calibrations[a],
                                              calibrations[b], dt=dt, seed=seed)
    return ErrorMatrix(labels=labels, matrix=m)


# ---------------------------------------------------------------------------
# spectator sweeps

def spectator_configurations(device: DeviceSpec, active: Sequence[str],
                             full: bool = False) -> list[dict]:
    """Spectator occupation maps: all-ground plus single excitations, or the
    full product set when `full`."""
    spectators = [q for q in device.qubits if q not in active]
    if full:
        configs = []
        for bits in range(2 ** len(spectators)):
            configs.append({q: (bits >> (len(spectators) - 1 - i)) & 1
                            for i, q in enumerate(spectators)})
        return configs
    configs = [{q: 0 for q in spectators}]
    for q in spectators:
        configs.append({p: int(p == q) for p in spectators})
    return configs


def config_label(device: DeviceSpec, active: Sequence[str],
                 config: Mapping[str, int]) -> str:
    """Bitstring over all device qubits with active slots marked by '#'."""
    return "".join("#" if q in active else str(config.get(q, 0))
                   for q in device.qubits)


def spectator_sweep(device: DeviceSpec, calibration,
                    configurations: Sequence[Mapping[str, int]] | None = None,
                    dt: float = 0.002, seed: int = 0) -> dict:
    """Re-characterize a fixed calibration for each spectator configuration."""
    active = ((calibration.qubit,) if isinstance(calibration, XCalibration)
              else tuple(calibration.pair))
    if configurations is None:
        full = isinstance(calibration, CZCalibration)
        configurations = spectator_configurations(device, active, full=full)
    out = {}
    for config in configurations:
        res = characterize_gate(device, calibration, dt=dt,
                                spectator_config=config, seed=seed)
        out[config_label(device, active, config)] = {
            "error": res["error"], "leakage": res["leakage"],
            "config": dict(config),
        }
    return out


@dataclass(frozen=True)
class PairContextReport:
    pair: tuple
    f_iso: tuple             # (F of gate on a with b ground, same for b)
    f_excited: tuple         # (F of gate on a with b excited, same for b)
    f_simultaneous: float
    context_error: tuple     # |F_iso - F_excited| per qubit
    added_error_per_qubit: float    # (F_a0 F_0b - F_sim) / 2
    mean_isolated_error: float      # mean infidelity of the two isolated gates


def pair_context_report(device: DeviceSpec, cal_a: XCalibration,
                        cal_b: XCalibration, dt: float = 0.002,
                        seed: int = 0) -> PairContextReport:
    """Isolated, spectator-excited, and simultaneous X fidelities for a qubit
    pair, with the derived context and added-error figures."""
    qa, qb = cal_a.qubit, cal_b.qubit
    fa0 = 1.0 - characterize_gate(device, cal_a, dt=dt, seed=seed,
                                  spectator_config={qb: 0})["error"]
    fa1 = 1.0 - characterize_gate(device, cal_a, dt=dt, seed=seed,
                                  spectator_config={qb: 1})["error"]
    fb0 = 1.0 - characterize_gate(device, cal_b, dt=dt, seed=seed,
                                  spectator_config={qa: 0})["error"]
    fb1 = 1.0 - characterize_gate(device, cal_b, dt=dt, seed=seed,
                                  spectator_config={qa: 1})["error"]
    f_sim = 1.0 - simultaneous_pair_error(device, cal_a, cal_b, dt=dt,
                                          seed=seed)
    return PairContextReport(
        pair=(qa, qb), f_iso=(fa0, fb0), f_excited=(fa1, fb1),
        f_simultaneous=f_sim,
        context_error=(abs(fa0 - fa1), abs(fb0 - fb1)),
        added_error_per_qubit=float((fa0 * fb0 - f_sim) / 2.0),
        mean_isolated_error=float(1.0 - 0.5 * (fa0 + fb0)),
    )


# ---------------------------------------------------------------------------
# population swap matrices

SWAP_SUBSPACES = {
    "single": ("1000", "0010", "0100", "0001"),
    "double": ("1100", "1001", "0110", "0011"),
    "triple": ("1110", "1011", "1101", "0111"),
}


@dataclass(frozen=True)
class SwapMatrix:
    subspace: str
    states: tuple            # bitstrings over device qubits
    matrix: np.ndarray       # P(o|i); rows = initial i, cols = final o

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


def swap_matrix(device: DeviceSpec, cal_a: CZCalibration, cal_b: CZCalibration,
                subspace: str, dt: float = 0.002) -> SwapMatrix:
    """Population transfer among dressed computational kets of one excitation
    subspace under a simultaneous CZ pair."""
    if subspace not in SWAP_SUBSPACES:
        raise ValueError(f"subspace must be one of {sorted(SWAP_SUBSPACES)}")
    bitstrings = SWAP_SUBSPACES[subspace]
    if len(device.qubits) != len(bitstrings[0]):
        raise ValueError("subspace bitstrings require a four-qubit device")
    sched = combined_schedule(cal_a.schedule(device), cal_b.schedule(device))
    kets = [device.qubit_ket({q: int(b) for q, b in zip(device.qubits, bits)})
            for bits in bitstrings]
    dressed = labeled_states(device, device.idle_bus_frequencies(), kets)
    vectors = np.stack([dressed[k][1] for k in kets], axis=1)

    n_total = sum(kets[0])
    idx = excitation_indices(device, total=n_total)
    model = hamiltonian_terms(device, sched, idx)
    res = propagate(model, vectors[idx], sched.duration, dt)
    overlaps = vectors[idx].conj().T @ res.final
    return SwapMatrix(subspace=subspace, states=tuple(bitstrings),
                      matrix=np.abs(overlaps.T) ** 2)


# ---------------------------------------------------------------------------
# gate-time trade-off

@dataclass(frozen=True)
class GateTimePoint:
    duration: float
    error_ground: float          # spectators all ground
    error_excited: float         # designated spectator excited
    leak_population: float       # parasitic-state population from the
                                 # triple-excited start
    flagged: bool


def parasitic_kets(device: DeviceSpec, pair: Sequence[str], spectator: str,
                   bus: str | None = None):
    """(initial, parasitic) occupation tuples of the spectator-excited leakage
    channel of a CZ: both active qubits and the spectator excited, versus the
    spectator doubly excited with one bus photon."""
    q1, q2 = pair
    if bus is None:
        bus = _shared_bus(device, q1, q2)
    initial = device.qubit_ket({q1: 1, q2: 1, spectator: 1})
    parasitic = tuple(
        2 if m == spectator else (1 if m == bus else 0)
        for m in device.mode_names
    )
    return initial, parasitic


def leak_population(device: DeviceSpec, cal: CZCalibration, spectator: str,
                    dt: float = 0.002) -> float:
    """Final population of the parasitic dressed state when the CZ runs on the
    spectator-excited triple-excitation start state."""
    initial, parasitic = parasitic_kets(device, cal.pair, spectator, cal.bus)
    dressed = labeled_states(device, device.idle_bus_frequencies(),
                             [initial, parasitic])
    idx = excitation_indices(device, total=sum(initial))
    model = hamiltonian_terms(device, cal.schedule(device), idx)
    final = propagate(model, dressed[initial][1][idx], cal.duration, dt).final
    return float(abs(np.vdot(dressed[parasitic][1][idx], final)) ** 2)


def gate_time_sweep(device: DeviceSpec, pair: Sequence[str],
                    durations: Sequence[float], spectator: str,
                    dt: float = 0.002, seed: int = 0,
                    target_error: float = 1e-5,
                    restarts: int | None = None,
                    max_iter: int | None = None) -> list[GateTimePoint]:
    """Re-calibrate the CZ at each duration (warm-starting from the previous
    optimum) and record ground/excited-spectator errors and the parasitic
    population.

    Short durations can sit above `target_error`; `restarts`/`max_iter` cap
    how hard each point searches before settling for its best optimum."""
    pair = tuple(pair)
    _, model = measure_j101(device, pair)
    excited = {spectator: 1}
    extra = {}
    if restarts is not None:
        extra["restarts"] = restarts
    if max_iter is not None:
        extra["max_iter"] = max_iter
    points = []
    x0 = None
    for t in durations:
        cal = calibrate_cz(device, pair, duration=float(t), j101=model.j101,
                           target_error=target_error, seed=seed, x0=x0,
                           **extra)
        x0 = (cal.lambda1, cal.lambda2, cal.theta_f)
        err0 = characterize_gate(device, cal, dt=dt, seed=seed)["error"]
        err1 = characterize_gate(device, cal, dt=dt, seed=seed,
                                 spectator_config=excited)["error"]
        points.append(GateTimePoint(
            duration=float(t), error_ground=float(err0),
            error_excited=float(err1),
            leak_population=leak_population(device, cal, spectator, dt=dt),
            flagged=cal.flagged,
        ))
    return points


# ---------------------------------------------------------------------------
# anharmonicity variants and crossing catalog

def crossing_catalog(device: DeviceSpec, pair: Sequence[str], spectator: str,
                     bus: str | None = None,
                     half_width: float = 0.08) -> list[AvoidedCrossing]:
    """The two spectator-channel avoided crossings bracketing a CZ working
    point: (triple-excited start <-> parasitic) and (spectator single
    <-> parasitic, compared in the two-excitation block)."""
    q1, q2 = pair
    if bus is None:
        bus = _shared_bus(device, q1, q2)
    initial, parasitic = parasitic_kets(device, pair, spectator, bus)
    # two-excitation channel: spectator |1> plus two bus photons vs parasitic
    lower_a = tuple(1 if m == spectator else (2 if m == bus else 0)
                    for m in device.mode_names)
    lower_b = tuple(2 if m == spectator else (1 if m == bus else 0)
                    for m in device.mode_names)
    m1, m2, mb = device.mode(q1), device.mode(q2), device.mode(bus)
    omega_on = 0.5 * (m1.frequency + m2.frequency - mb.anharmonicity)
    interval = (omega_on - half_width, omega_on + half_width)
    out = []
    for a, b in ((initial, parasitic), (lower_a, lower_b)):
        try:
            out.append(find_avoided_crossing(device, (a, b), bus, interval))
        except ValueError:
            pass
    return out


def anharmonicity_variants(device: DeviceSpec, etas: Sequence[float]
                           ) -> list[DeviceSpec]:
    """Clones of the device with every qubit anharmonicity replaced."""
    return [device.with_qubit_anharmonicity(float(e)) for e in etas]
