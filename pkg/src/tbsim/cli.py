"""Command-line entry point.

Each subcommand runs one experiment on a device preset (or JSON device file),
writes a CSV data artifact plus a JSON metadata sidecar under
``<experiment>_<device>_<variant>``, and renders a matplotlib figure next to
them.  The exit status is nonzero when a calibration is flagged or an
invariant check fails.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifacts
from .calibrate import (
    calibrate_cz,
    calibrate_x,
    load_calibrations,
    measure_j101,
    save_calibrations,
)
from .device import DeviceSpec
from .experiments import (
    SWAP_SUBSPACES,
    cross_drive_table,
    crossing_catalog,
    gate_time_sweep,
    simultaneous_error_matrix,
    spectator_sweep,
    swap_matrix,
)
from .presets import PRESETS, get_preset
from .spectrum import LabelingError, _shared_bus, labeled_energies, zz_map, zz_sweep


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration plumbing

def resolve_device(name: str, eta_variant: float | None,
                   levels: int | None) -> tuple[DeviceSpec, str]:
    """Device plus the variant label used in artifact filenames."""
    if name in PRESETS:
        dev = get_preset(name)
    else:
        path = Path(name)
        if not path.exists():
            raise CliError(f"unknown preset or missing device file: {name}")
        import json
        dev = DeviceSpec.from_dict(json.loads(path.read_text()))
    variant = "base"
    if eta_variant is not None:
        dev = dev.with_qubit_anharmonicity(eta_variant)
        variant = f"eta{round(abs(eta_variant) * 1000):03d}"
    if levels is not None:
        if levels < 3:
            raise CliError("--levels must be >= 3")
        dev = DeviceSpec(name=dev.name,
                         modes=tuple(replace(m, levels=levels)
                                     for m in dev.modes),
                         couplings=dev.couplings)
        variant += f"-l{levels}"
    return dev, variant


def base_metadata(args, dev: DeviceSpec, **extra) -> dict:
    meta = {
        "device": dev.name,
        "device_hash": dev.content_hash(),
        "device_spec": dev.to_dict(),
        "seed": args.seed,
        "dt_ns": args.dt,
        "runtime_s": round(time.perf_counter() - getattr(args, "_t0", 0.0), 3),
    }
    meta.update(extra)
    return meta


def nn_pairs(dev: DeviceSpec) -> list[tuple[str, str]]:
    """Qubit pairs joined by a shared bus, in device order."""
    order = {q: i for i, q in enumerate(dev.qubits)}
    by_bus: dict[str, list[str]] = {}
    for c in dev.couplings:
        bus, qubit = (c.a, c.b) if dev.mode(c.a).kind == "bus" else (c.b, c.a)
        by_bus.setdefault(bus, []).append(qubit)
    pairs = []
    for members in by_bus.values():
        if len(members) == 2:
            pairs.append(tuple(sorted(members, key=order.get)))
    return sorted(pairs, key=lambda p: (order[p[0]], order[p[1]]))


def parse_pair(text: str, dev: DeviceSpec) -> tuple[str, str]:
    parts = [p for p in text.replace("-", ",").split(",") if p]
    if len(parts) != 2:
        raise CliError(f"expected a qubit pair like Q0,Q1 — got {text!r}")
    for q in parts:
        if q not in dev.qubits:
            raise CliError(f"unknown qubit {q!r}")
    return parts[0], parts[1]


def parse_durations(text: str) -> list[float]:
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(v) for v in
                np.linspace(float(start), float(stop), int(count))]
    return [float(v) for v in text.split(",")]


def default_store(args, dev: DeviceSpec, variant: str) -> Path:
    if args.store:
        return Path(args.store)
    return Path(args.out) / f"calibrations_{dev.name}_{variant}.json"


def load_store(path: Path, dev: DeviceSpec):
    if path.exists():
        return load_calibrations(path, dev)
    return {}, {}


# ---------------------------------------------------------------------------
# figures

def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_lines(base, x, curves: dict, xlabel: str, ylabel: str,
                 logy: bool = False) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if len(curves) > 1:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(str(base) + ".png", dpi=150)
    plt.close(fig)


def render_heatmap(base, x, y, z, xlabel: str, ylabel: str,
                   log_abs: bool = False,
                   xticklabels=None, yticklabels=None) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    data = np.abs(z) if log_abs else np.asarray(z, float)
    masked = np.ma.masked_invalid(data)
    from matplotlib.colors import LogNorm
    norm = LogNorm(vmin=max(float(masked.min()), 1e-12),
                   vmax=float(masked.max())) \
        if log_abs and masked.count() and float(masked.max()) > 0 else None
    mesh = ax.pcolormesh(x, y, masked.T, shading="auto", norm=norm)
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if xticklabels is not None:
        ax.set_xticks(np.asarray(x, float))
        ax.set_xticklabels(xticklabels, fontsize=8)
    if yticklabels is not None:
        ax.set_yticks(np.asarray(y, float))
        ax.set_yticklabels(yticklabels, fontsize=8)
    fig.tight_layout()
    fig.savefig(str(base) + ".png", dpi=150)
    plt.close(fig)


def render_bars(base, labels, values, ylabel: str, logy: bool = False) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(str(base) + ".png", dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands

def cmd_zz_sweep(args, dev: DeviceSpec, variant: str) -> int:
    pair = parse_pair(args.pair, dev) if args.pair else None
    bus = args.bus or (_shared_bus(dev, *pair) if pair else dev.buses[0])
    if pair is None and len(dev.qubits) != 2:
        raise CliError("--pair required for devices with more than two qubits")
    qubits = pair or dev.qubits
    m1, m2 = dev.mode(qubits[0]), dev.mode(qubits[1])
    start = args.start if args.start is not None else \
        0.5 * (m1.frequency + m2.frequency - dev.mode(bus).anharmonicity)
    stop = args.stop if args.stop is not None else dev.mode(bus).frequency + 0.1
    freqs, z_num, z_pert = zz_sweep(dev, bus, start, stop, args.step,
                                    qubit_pair=pair)
    base = artifacts.artifact_base(args.out, "zz-sweep", dev.name, variant)
    artifacts.write_csv(base, ["omega_tb_GHz", "zz_numeric_GHz", "zz_pert_GHz"],
                        zip(freqs.tolist(), z_num.tolist(), z_pert.tolist()))
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="zz-sweep", bus=bus,
        start_GHz=start, stop_GHz=stop, step_GHz=args.step))
    render_lines(base, freqs,
                 {"numeric": np.abs(z_num), "perturbative": np.abs(z_pert)},
                 "bus frequency (GHz)", "|zz| (GHz)", logy=True)
    return 0


def cmd_zz_map(args, dev: DeviceSpec, variant: str) -> int:
    pair = parse_pair(args.pair, dev) if args.pair else None
    bus = args.bus or (_shared_bus(dev, *pair) if pair else dev.buses[0])
    deltas = np.arange(args.delta_start, args.delta_stop + 0.5 * args.delta_step,
                       args.delta_step)
    dets = np.arange(args.det_start, args.det_stop + 0.5 * args.det_step,
                     args.det_step)
    deltas, dets, raw, masked = zz_map(dev, bus, deltas, dets,
                                       qubit_pair=pair,
                                       mask_below=args.mask_below)
    base = artifacts.artifact_base(args.out, "zz-map", dev.name, variant)
    rows = [(float(d), float(b), float(raw[i, j]))
            for i, d in enumerate(deltas) for j, b in enumerate(dets)]
    artifacts.write_csv(base, ["delta_GHz", "bus_detuning_GHz", "zz_GHz"], rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="zz-map", bus=bus,
        mask_below_GHz=args.mask_below,
        note="CSV stores raw values; the display mask is figure-only"))
    render_heatmap(base, deltas, dets, masked,
                   "qubit detuning (GHz)", "bus detuning (GHz)", log_abs=True)
    return 0


def cmd_spectrum(args, dev: DeviceSpec, variant: str) -> int:
    pair = parse_pair(args.pair, dev) if args.pair else None
    if pair is None:
        if len(dev.qubits) != 2:
            raise CliError("--pair required for devices with > 2 qubits")
        pair = (dev.qubits[0], dev.qubits[1])
    bus = args.bus or _shared_bus(dev, *pair)
    q1, q2 = pair
    kets = {
        "E_11": dev.qubit_ket({q1: 1, q2: 1}),
        "E_bus2": tuple(2 if m == bus else 0 for m in dev.mode_names),
        "E_10": dev.qubit_ket({q1: 1}),
        "E_01": dev.qubit_ket({q2: 1}),
    }
    m1, m2, mb = dev.mode(q1), dev.mode(q2), dev.mode(bus)
    center = 0.5 * (m1.frequency + m2.frequency - mb.anharmonicity)
    start = args.start if args.start is not None else center - 0.05
    stop = args.stop if args.stop is not None else center + 0.05
    freqs = np.arange(start, stop + 0.5 * args.step, args.step)
    idle = dev.idle_bus_frequencies()
    columns = {k: np.full(freqs.shape, np.nan) for k in kets}
    for i, f in enumerate(freqs):
        bus_f = dict(idle)
        bus_f[bus] = float(f)
        try:
            energies = labeled_energies(dev, bus_f, list(kets.values()))
        except LabelingError:
            continue
        for label, ket in kets.items():
            columns[label][i] = energies[ket]
    base = artifacts.artifact_base(args.out, "spectrum", dev.name, variant)
    artifacts.write_csv(
        base, ["omega_tb_GHz"] + list(kets),
        ((float(f),) + tuple(float(columns[k][i]) for k in kets)
         for i, f in enumerate(freqs)))
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="spectrum", bus=bus, pair=list(pair),
        kets={k: list(v) for k, v in kets.items()}))
    render_lines(base, freqs, {k: columns[k] for k in kets},
                 "bus frequency (GHz)", "energy (GHz)")
    return 0


def cmd_crossings(args, dev: DeviceSpec, variant: str) -> int:
    rows = []
    if args.spectator:
        pair = parse_pair(args.pair, dev)
        found = crossing_catalog(dev, pair, args.spectator)
        for cr in found:
            rows.append(("".join(map(str, cr.pair[0])),
                         "".join(map(str, cr.pair[1])),
                         float(cr.location), float(cr.gap)))
    else:
        pair = parse_pair(args.pair, dev) if args.pair else None
        if pair is None:
            if len(dev.qubits) != 2:
                raise CliError("--pair required for devices with > 2 qubits")
            pair = (dev.qubits[0], dev.qubits[1])
        crossing, _ = measure_j101(dev, pair)
        rows.append(("".join(map(str, crossing.pair[0])),
                     "".join(map(str, crossing.pair[1])),
                     float(crossing.location), float(crossing.gap)))
    base = artifacts.artifact_base(args.out, "crossings", dev.name, variant)
    artifacts.write_csv(base, ["state_a", "state_b", "location_GHz", "gap_GHz"],
                        rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="crossings",
        pair=list(pair), spectator=args.spectator))
    render_bars(base, [f"{a}|{b}" for a, b, _, _ in rows],
                [gap for *_, gap in rows], "gap (GHz)", logy=True)
    return 0


def cmd_crossdrive(args, dev: DeviceSpec, variant: str) -> int:
    table = cross_drive_table(dev, args.source, target=args.target,
                              drive=args.drive)
    base = artifacts.artifact_base(args.out, "crossdrive", dev.name, variant)
    artifacts.write_csv(
        base,
        ["transition", "analytic_GHz", "numeric_GHz", "beta", "beta_db",
         "detuning_GHz", "worst_case_error"],
        ((e.transition, e.analytic, e.numeric, e.beta, e.beta_db,
          e.detuning, e.worst_case) for e in table))
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="crossdrive", source=args.source,
        target=args.target, drive_GHz=args.drive))
    render_bars(base, [e.transition for e in table],
                [e.beta_db for e in table], "cross-driving (dB)")
    return 0


def cmd_calibrate_x(args, dev: DeviceSpec, variant: str) -> int:
    qubits = args.qubit or list(dev.qubits)
    store = default_store(args, dev, variant)
    xcals, czcals = load_store(store, dev)
    rows = []
    status = 0
    for q in qubits:
        cal = calibrate_x(dev, q, workers=args.workers)
        xcals[q] = cal
        rows.append((q, cal.amplitude, cal.detuning, cal.population_error,
                     cal.leakage_error, cal.gate_error, cal.gate_leakage,
                     cal.on_boundary, cal.flagged))
        if cal.flagged or cal.on_boundary:
            status = 1
        qbase = artifacts.artifact_base(args.out, "calibrate-x", dev.name,
                                        f"{variant}-{q}")
        render_heatmap(qbase, np.asarray(cal.amplitudes),
                       np.asarray(cal.detunings),
                       np.asarray(cal.error_surface),
                       "amplitude (GHz)", "detuning (GHz)", log_abs=True)
    save_calibrations(store, dev, x=xcals, cz=czcals)
    base = artifacts.artifact_base(args.out, "calibrate-x", dev.name, variant)
    artifacts.write_csv(
        base,
        ["qubit", "amplitude_GHz", "detuning_GHz", "population_error",
         "leakage_error", "gate_error", "gate_leakage", "on_boundary",
         "flagged"],
        rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="calibrate-x", qubits=list(qubits),
        store=str(store)))
    return status


def cmd_calibrate_cz(args, dev: DeviceSpec, variant: str) -> int:
    pairs = ([parse_pair(p, dev) for p in args.pair]
             if args.pair else nn_pairs(dev))
    store = default_store(args, dev, variant)
    xcals, czcals = load_store(store, dev)
    rows = []
    status = 0
    for pair in pairs:
        cal = calibrate_cz(dev, pair, duration=args.duration,
                           target_error=args.target_error, seed=args.seed)
        czcals["-".join(pair)] = cal
        rows.append(("-".join(pair), cal.bus, cal.lambda1, cal.lambda2,
                     cal.theta_f, cal.j101, cal.achieved_error,
                     cal.gate_leakage, cal.conditional_phase,
                     cal.evaluations, cal.flagged))
        if cal.flagged:
            status = 1
    save_calibrations(store, dev, x=xcals, cz=czcals)
    base = artifacts.artifact_base(args.out, "calibrate-cz", dev.name, variant)
    artifacts.write_csv(
        base,
        ["pair", "bus", "lambda1", "lambda2", "theta_f_rad", "j101_GHz",
         "achieved_error", "gate_leakage", "conditional_phase_rad",
         "evaluations", "flagged"],
        rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="calibrate-cz",
        pairs=["-".join(p) for p in pairs], duration_ns=args.duration,
        target_error=args.target_error, store=str(store)))
    # render the flux trajectory of the first calibrated pair
    first = czcals["-".join(pairs[0])]
    sched = first.schedule(dev)
    times = np.linspace(0.0, first.duration, 400)
    render_lines(base, times,
                 {"bus frequency": sched.flux[0].bus_frequency(times)},
                 "time (ns)", "bus frequency (GHz)")
    return status


def _error_matrix_cmd(args, dev: DeviceSpec, variant: str, family: str) -> int:
    store = default_store(args, dev, variant)
    if not store.exists():
        raise CliError(f"calibration store not found: {store}; "
                       f"run calibrate-{family} first")
    xcals, czcals = load_calibrations(store, dev)
    cals = xcals if family == "x" else czcals
    if not cals:
        raise CliError(f"store has no {family} calibrations")
    em = simultaneous_error_matrix(dev, cals, family,
                                   dt=args.dt or 0.002, seed=args.seed)
    base = artifacts.artifact_base(args.out, f"{family}-error-matrix",
                                   dev.name, variant)
    n = len(em.labels)
    rows = [(em.labels[i], em.labels[j], float(em.matrix[i, j]))
            for i in range(n) for j in range(n)]
    artifacts.write_csv(base, ["row", "col", "error"], rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment=f"{family}-error-matrix", labels=list(em.labels),
        layout="diagonal: isolated; upper: summed isolated; "
               "lower: simultaneous",
        store=str(store)))
    render_heatmap(base, np.arange(n), np.arange(n), em.matrix,
                   "", "", log_abs=True,
                   xticklabels=em.labels, yticklabels=em.labels)
    return 0


def cmd_x_error_matrix(args, dev, variant):
    return _error_matrix_cmd(args, dev, variant, "x")


def cmd_cz_error_matrix(args, dev, variant):
    return _error_matrix_cmd(args, dev, variant, "cz")


def cmd_spectator_sweep(args, dev: DeviceSpec, variant: str) -> int:
    store = default_store(args, dev, variant)
    if not store.exists():
        raise CliError(f"calibration store not found: {store}")
    xcals, czcals = load_calibrations(store, dev)
    if args.qubit:
        if args.qubit[0] not in xcals:
            raise CliError(f"no X calibration for {args.qubit[0]} in {store}")
        cal = xcals[args.qubit[0]]
        label = args.qubit[0]
    elif args.pair:
        key = "-".join(parse_pair(args.pair[0], dev))
        if key not in czcals:
            raise CliError(f"no CZ calibration for {key} in {store}")
        cal = czcals[key]
        label = key
    else:
        raise CliError("give --qubit (X gate) or --pair (CZ gate)")
    sweep = spectator_sweep(dev, cal, dt=args.dt or 0.002, seed=args.seed)
    base = artifacts.artifact_base(args.out, "spectator-sweep", dev.name,
                                   f"{variant}-{label}")
    artifacts.write_csv(
        base, ["configuration", "error", "leakage"],
        ((k, v["error"], v["leakage"]) for k, v in sweep.items()))
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="spectator-sweep", gate=label, store=str(store)))
    render_bars(base, list(sweep), [v["error"] for v in sweep.values()],
                "gate error", logy=True)
    return 0


def cmd_swap_matrix(args, dev: DeviceSpec, variant: str) -> int:
    store = default_store(args, dev, variant)
    if not store.exists():
        raise CliError(f"calibration store not found: {store}")
    _, czcals = load_calibrations(store, dev)
    pair_a = parse_pair(args.pairs.split("+")[0], dev)
    pair_b = parse_pair(args.pairs.split("+")[1], dev)
    key_a, key_b = "-".join(pair_a), "-".join(pair_b)
    for key in (key_a, key_b):
        if key not in czcals:
            raise CliError(f"no CZ calibration for {key} in {store}")
    subspaces = [args.subspace] if args.subspace else list(SWAP_SUBSPACES)
    rows = []
    for name in subspaces:
        sm = swap_matrix(dev, czcals[key_a], czcals[key_b], name,
                         dt=args.dt or 0.002)
        for i, initial in enumerate(sm.states):
            for j, final in enumerate(sm.states):
                rows.append((name, initial, final, float(sm.matrix[i, j])))
        sub_base = artifacts.artifact_base(args.out, "swap-matrix", dev.name,
                                           f"{variant}-{name}")
        render_heatmap(sub_base, np.arange(4), np.arange(4), sm.matrix,
                       "final", "initial", log_abs=True,
                       xticklabels=sm.states, yticklabels=sm.states)
    base = artifacts.artifact_base(args.out, "swap-matrix", dev.name, variant)
    artifacts.write_csv(base, ["subspace", "initial", "final", "probability"],
                        rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="swap-matrix", pairs=[key_a, key_b],
        subspaces=subspaces, store=str(store)))
    return 0


def cmd_gate_time_sweep(args, dev: DeviceSpec, variant: str) -> int:
    pair = parse_pair(args.pair, dev)
    durations = parse_durations(args.durations)
    points = gate_time_sweep(dev, pair, durations, args.spectator,
                             dt=args.dt or 0.002, seed=args.seed,
                             target_error=args.target_error)
    base = artifacts.artifact_base(args.out, "gate-time-sweep", dev.name,
                                   variant)
    artifacts.write_csv(
        base,
        ["duration_ns", "error_ground", "error_excited", "leak_population",
         "flagged"],
        ((p.duration, p.error_ground, p.error_excited, p.leak_population,
          p.flagged) for p in points))
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="gate-time-sweep", pair=list(pair),
        spectator=args.spectator, target_error=args.target_error))
    x = [p.duration for p in points]
    render_lines(base, x,
                 {"spectators ground": [p.error_ground for p in points],
                  "spectator excited": [p.error_excited for p in points],
                  "parasitic population": [p.leak_population for p in points]},
                 "gate time (ns)", "error", logy=True)
    return 1 if any(p.flagged for p in points) else 0


def cmd_validate_preset(args, dev: DeviceSpec, variant: str) -> int:
    pairs = nn_pairs(dev)
    order = {q: i for i, q in enumerate(dev.qubits)}
    rows = []
    for a, b in pairs:
        nn = abs(dev.mode(a).frequency - dev.mode(b).frequency)
        rows.append(("nn_detuning", f"{a}-{b}", nn,
                     abs(nn - 0.200) <= 0.050))
    # next-nearest neighbors: qubits two bus hops apart
    neighbors = {q: set() for q in dev.qubits}
    for a, b in pairs:
        neighbors[a].add(b)
        neighbors[b].add(a)
    seen = set()
    for q in dev.qubits:
        for n in neighbors[q]:
            for nn in neighbors[n]:
                if nn == q or nn in neighbors[q]:
                    continue
                key = tuple(sorted((q, nn), key=order.get))
                if key in seen:
                    continue
                seen.add(key)
                d = abs(dev.mode(key[0]).frequency - dev.mode(key[1]).frequency)
                rows.append(("nnn_detuning", f"{key[0]}-{key[1]}", d,
                             abs(d - 0.020) <= 0.010))
    top_band = max(m.frequency for m in dev.modes if m.kind == "qubit")
    for bus in dev.buses:
        margin = dev.mode(bus).frequency - top_band
        rows.append(("bus_margin", bus, margin, margin >= 0.450))
    base = artifacts.artifact_base(args.out, "validate-preset", dev.name,
                                   variant)
    artifacts.write_csv(base, ["rule", "subject", "value_GHz", "ok"], rows)
    artifacts.write_sidecar(base, base_metadata(
        args, dev, experiment="validate-preset",
        rules={"nn_detuning_GHz": 0.200, "nnn_detuning_GHz": 0.020,
               "bus_margin_GHz": 0.450}))
    render_bars(base, [f"{r}:{s}" for r, s, _, _ in rows],
                [v for _, _, v, _ in rows], "margin (GHz)")
    for rule, subject, value, ok in rows:
        state = "ok" if ok else "VIOLATION"
        print(f"{rule:14s} {subject:10s} {value:+.4f} GHz  {state}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tbsim",
        description="Pulse-level crosstalk experiments for tunable-bus "
                    "transmon devices")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--device", default="fig1pair",
                        help="preset name or device JSON path")
    common.add_argument("--out", default="artifacts", help="output directory")
    common.add_argument("--dt", type=float, default=None,
                        help="integrator step override (ns)")
    common.add_argument("--levels", type=int, default=None,
                        help="levels kept per mode")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eta-variant", type=float, default=None,
                        help="replace every qubit anharmonicity (GHz)")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--store", default=None,
                        help="calibration store path override")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zz-sweep", parents=[common])
    p.add_argument("--bus", default=None)
    p.add_argument("--pair", default=None)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--step", type=float, default=0.001)
    p.set_defaults(func=cmd_zz_sweep)

    p = sub.add_parser("zz-map", parents=[common])
    p.add_argument("--bus", default=None)
    p.add_argument("--pair", default=None)
    p.add_argument("--delta-start", type=float, default=-0.40)
    p.add_argument("--delta-stop", type=float, default=0.40)
    p.add_argument("--delta-step", type=float, default=0.02)
    p.add_argument("--det-start", type=float, default=0.30)
    p.add_argument("--det-stop", type=float, default=0.70)
    p.add_argument("--det-step", type=float, default=0.01)
    p.add_argument("--mask-below", type=float, default=1e-5)
    p.set_defaults(func=cmd_zz_map)

    p = sub.add_parser("spectrum", parents=[common])
    p.add_argument("--bus", default=None)
    p.add_argument("--pair", default=None)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--step", type=float, default=0.0005)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("crossings", parents=[common])
    p.add_argument("--pair", default=None)
    p.add_argument("--spectator", default=None)
    p.set_defaults(func=cmd_crossings)

    p = sub.add_parser("crossdrive", parents=[common])
    p.add_argument("--source", required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--drive", type=float, default=0.025)
    p.set_defaults(func=cmd_crossdrive)

    p = sub.add_parser("calibrate-x", parents=[common])
    p.add_argument("--qubit", action="append", default=None)
    p.set_defaults(func=cmd_calibrate_x)

    p = sub.add_parser("calibrate-cz", parents=[common])
    p.add_argument("--pair", action="append", default=None)
    p.add_argument("--duration", type=float, default=68.0)
    p.add_argument("--target-error", type=float, default=1e-5)
    p.set_defaults(func=cmd_calibrate_cz)

    p = sub.add_parser("x-error-matrix", parents=[common])
    p.set_defaults(func=cmd_x_error_matrix)

    p = sub.add_parser("cz-error-matrix", parents=[common])
    p.set_defaults(func=cmd_cz_error_matrix)

    p = sub.add_parser("spectator-sweep", parents=[common])
    p.add_argument("--qubit", action="append", default=None)
    p.add_argument("--pair", action="append", default=None)
    p.set_defaults(func=cmd_spectator_sweep)

    p = sub.add_parser("swap-matrix", parents=[common])
    p.add_argument("--pairs", required=True,
                   help="two CZ pairs, e.g. Q0-Q1+Q2-Q3")
    p.add_argument("--subspace", choices=sorted(SWAP_SUBSPACES), default=None)
    p.set_defaults(func=cmd_swap_matrix)

    p = sub.add_parser("gate-time-sweep", parents=[common])
    p.add_argument("--pair", required=True)
    p.add_argument("--spectator", required=True)
    p.add_argument("--durations", default="50:110:7",
                   help="comma list or start:stop:count")
    p.add_argument("--target-error", type=float, default=1e-5)
    p.set_defaults(func=cmd_gate_time_sweep)

    p = sub.add_parser("validate-preset", parents=[common])
    p.set_defaults(func=cmd_validate_preset)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args._t0 = time.perf_counter()
    try:
        dev, variant = resolve_device(args.device, args.eta_variant,
                                      args.levels)
        return int(args.func(args, dev, variant))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
