"""End-to-end acceptance checks for the full analysis chain.

Each test covers one headline physics claim and prints a single PASS/FAIL
summary line with the measured numbers.  Run with

    pytest tests/test_acceptance.py -v -s

to watch progress; the heavy calibrations are shared through module-scoped
fixtures, and the whole file is designed to run on a single core (expect a
few hours wall clock).
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from tbsim.calibrate import (
    calibrate_cz,
    calibrate_x,
    characterize_gate,
    cz_schedule,
    drag_schedule,
    measure_j101,
)
from tbsim.device import coupling_at
from tbsim.experiments import (
    SWAP_SUBSPACES,
    crossing_catalog,
    gate_time_sweep,
    simultaneous_error_matrix,
    swap_matrix,
)
from tbsim.presets import chain4, fig1pair, square4, square4_eta310, square4_eta320
from tbsim.propagator import (
    computational_basis,
    optimize_local_phases,
    simulate_gate,
)
from tbsim.spectrum import zz_numeric, zz_perturbative, zz_sweep

X_GRID = dict(amplitudes=(0.048, 0.052, 13), detunings=(-0.002, 0.002, 13),
              polish_maxiter=80, polish_max_total=2, final_max_total=3)


def _report(tag: str, clauses) -> None:
    """One pass/fail line per criterion; clauses are (name, ok, detail)."""
    ok = all(good for _, good, _ in clauses)
    detail = "; ".join(f"{name}={text}" for name, _, text in clauses)
    print(f"[{tag}] {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    failed = [name for name, good, _ in clauses if not good]
    assert not failed, f"{tag} failed {failed}: {detail}"


def _phase_deviation(phase: float) -> float:
    """Signed distance of a conditional phase from pi, wrapped to (-pi, pi]."""
    d = (phase - np.pi) % (2.0 * np.pi)
    return d - 2.0 * np.pi * (d > np.pi)


# ---------------------------------------------------------------------------
# shared heavy fixtures


@pytest.fixture(scope="module")
def zz_landscape():
    t0 = time.perf_counter()
    freqs, znum, zpert = zz_sweep(fig1pair(), "TB", 5.20, 5.70, 0.005)
    return dict(freqs=freqs, znum=znum, zpert=zpert,
                runtime=time.perf_counter() - t0)


@pytest.fixture(scope="module")
def fig1pair_x_cal():
    t0 = time.perf_counter()
    cal = calibrate_x(fig1pair(), "Q1")
    return cal, time.perf_counter() - t0


def _calibrate_cz_warm(device, pair, warm_lambda):
    """CZ tune-up seeded by a previous pair's optimum (same pulse family).

    The search stops at 2e-5, comfortably inside the 1e-4 requirement, so the
    Nelder-Mead restarts don't burn the single-core budget chasing the last
    factor of two."""
    _, model = measure_j101(device, pair)
    x0 = None
    if warm_lambda is not None:
        x0 = (warm_lambda[0], warm_lambda[1],
              float(model.theta_of(model.omega_on)))
    return calibrate_cz(device, pair, j101=model.j101, x0=x0,
                        target_error=2e-5, restarts=3)


@pytest.fixture(scope="module")
def cz_cals():
    """Calibrated CZs for every bus-coupled pair of the bundled devices."""
    plan = (
        (fig1pair(), (("Q1", "Q2"),)),
        (chain4(), (("Q0", "Q1"), ("Q1", "Q2"), ("Q2", "Q3"))),
        (square4(), (("Q0", "Q1"), ("Q1", "Q2"), ("Q2", "Q3"), ("Q0", "Q3"))),
    )
    out = {}
    for device, pairs in plan:
        warm = None
        for pair in pairs:
            t0 = time.perf_counter()
            cal = _calibrate_cz_warm(device, pair, warm)
            warm = (cal.lambda1, cal.lambda2)
            out[(device.name, pair)] = (device, cal, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def eta320_cals(cz_cals):
    device = square4_eta320()
    out = {}
    for pair in (("Q0", "Q1"), ("Q1", "Q2"), ("Q2", "Q3"), ("Q0", "Q3")):
        base = cz_cals[("square4", pair)][1]
        t0 = time.perf_counter()
        cal = _calibrate_cz_warm(device, pair, (base.lambda1, base.lambda2))
        out[pair] = (device, cal, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def chain4_x_cals():
    device = chain4()
    out = {}
    for q in device.qubits:
        t0 = time.perf_counter()
        out[q] = (calibrate_x(device, q, **X_GRID), time.perf_counter() - t0)
    return device, out


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_zz_landscape(zz_landscape):
    freqs, znum = zz_landscape["freqs"], zz_landscape["znum"]
    dev = fig1pair()
    root = brentq(lambda w: zz_numeric(dev, {"TB": w}), 5.40, 5.55, xtol=1e-8)
    z_on = abs(zz_numeric(dev, {"TB": 5.250}))
    z_idle = abs(znum[np.argmin(np.abs(freqs - 5.650))])
    rt = zz_landscape["runtime"]
    _report("criterion-01", [
        ("root", abs(root - 5.475) <= 0.075, f"{root:.4f} GHz"),
        ("zz@5.250", 7e-3 <= z_on <= 13e-3, f"{z_on*1e3:.3f} MHz"),
        ("zz@5.650", z_idle <= 15e-6, f"{z_idle*1e6:.2f} kHz"),
        ("runtime", rt <= 60.0, f"{rt:.1f} s"),
    ])


def test_criterion_02_perturbative_agreement(zz_landscape):
    freqs = zz_landscape["freqs"]
    znum, zpert = zz_landscape["znum"], zz_landscape["zpert"]
    dev = fig1pair()
    root = brentq(lambda w: zz_numeric(dev, {"TB": w}), 5.40, 5.55, xtol=1e-8)
    # dispersive band: bus above both straddled-resonance poles, excluding the
    # immediate vicinity of the sign change where both curves pass through zero
    band = (freqs >= 5.260) & (np.abs(freqs - root) >= 0.010)
    ratio = znum[band] / zpert[band]
    factor = float(np.max(np.maximum(np.abs(ratio), 1.0 / np.abs(ratio))))
    same_sign = bool(np.all(ratio > 0))

    m1, m2, mb = dev.mode("Q1"), dev.mode("Q2"), dev.mode("TB")
    c1 = next(c for c in dev.couplings if {c.a, c.b} == {"Q1", "TB"})
    c2 = next(c for c in dev.couplings if {c.a, c.b} == {"Q2", "TB"})

    def pert_root(scale):
        def f(w):
            return zz_perturbative(
                m1.frequency, m2.frequency, w, m1.anharmonicity,
                m2.anharmonicity, mb.anharmonicity,
                scale * coupling_at(c1, m1.frequency, w),
                scale * coupling_at(c2, m2.frequency, w))
        return brentq(f, 5.40, 5.55, xtol=1e-12)

    roots = [pert_root(s) for s in (0.5, 1.0, 2.0)]
    shift = max(roots) - min(roots)
    _report("criterion-02", [
        ("factor", factor <= 2.0 and same_sign, f"{factor:.2f}"),
        ("g-scaling-shift", shift < 1e-4, f"{shift:.2e} GHz"),
    ])


def test_criterion_03_x_calibration(fig1pair_x_cal):
    cal, rt = fig1pair_x_cal
    _report("criterion-03", [
        ("amplitude", abs(cal.amplitude - 0.05015) <= 5e-4,
         f"{cal.amplitude*1e3:.3f} MHz"),
        ("detuning", 0.6e-3 <= abs(cal.detuning) <= 1.2e-3,
         f"{cal.detuning*1e3:+.3f} MHz"),
        ("gate-error", cal.gate_error <= 1e-5, f"{cal.gate_error:.2e}"),
        ("gate-leakage", cal.gate_leakage <= 1e-5, f"{cal.gate_leakage:.2e}"),
        ("runtime", rt <= 600.0, f"{rt:.0f} s"),
    ])


def test_criterion_04_cz_calibrations(cz_cals):
    clauses = []
    for (dev_name, pair), (_, cal, rt) in cz_cals.items():
        dphi = abs(_phase_deviation(cal.conditional_phase))
        label = f"{dev_name}:{pair[0]}{pair[1]}"
        clauses.append((f"{label}-err", cal.achieved_error <= 1e-4,
                        f"{cal.achieved_error:.2e} ({rt:.0f}s)"))
        clauses.append((f"{label}-phase", dphi <= 1e-3, f"{dphi:.2e} rad"))
    _report("criterion-04", clauses)


def test_criterion_05_simultaneous_x_chain(chain4_x_cals):
    device, cals = chain4_x_cals
    mat = simultaneous_error_matrix(
        device, {q: c for q, (c, _) in cals.items()}, "x", dt=0.002)
    labels = mat.labels
    nn = ({"Q0", "Q1"}, {"Q1", "Q2"}, {"Q2", "Q3"})
    clauses = []
    worst, worst_pair = -np.inf, None
    for i, j in itertools.combinations(range(len(labels)), 2):
        sim = mat.matrix[j, i]
        summed = mat.matrix[i, j]
        if np.isnan(sim):
            continue
        if sim > worst:
            worst, worst_pair = sim, {labels[i], labels[j]}
        name = f"{labels[i]}{labels[j]}"
        if {labels[i], labels[j]} in nn:
            clauses.append((f"{name}-enhanced", sim >= 3.0 * summed,
                            f"sim={sim:.2e} vs 3*sum={3*summed:.2e}"))
        else:
            added = mat.added_error(i, j)
            clauses.append((f"{name}-added", added <= 2e-6, f"{added:.2e}"))
    clauses.insert(0, ("worst-pair", worst_pair == {"Q0", "Q1"},
                       f"{sorted(worst_pair)} @ {worst:.2e}"))
    _report("criterion-05", clauses)


def test_criterion_06_spectator_channel(cz_cals):
    device, cal, _ = cz_cals[("square4", ("Q0", "Q1"))]
    ground = characterize_gate(device, cal, dt=0.01)["error"]
    excited = characterize_gate(device, cal, dt=0.01,
                                spectator_config={"Q3": 1})["error"]
    ratio = excited / ground
    added = excited - ground
    crossings = crossing_catalog(device, ("Q0", "Q1"), "Q3")
    found = {}
    for target in (5.2590, 5.2305):
        match = [c for c in crossings if abs(c.location - target) <= 0.015]
        found[target] = match[0] if match else None
    clauses = [
        ("excited/ground", ratio >= 10.0, f"{ratio:.1f}"),
        ("added", 1e-4 <= added <= 1e-3, f"{added:.2e}"),
    ]
    for target, c in found.items():
        if c is None:
            clauses.append((f"crossing@{target}", False, "not found"))
        else:
            clauses.append(
                (f"crossing@{target}",
                 1e-4 <= c.gap <= 1e-3,
                 f"loc={c.location:.4f} gap={c.gap*1e3:.3f} MHz"))
    _report("criterion-06", clauses)


def _cz_added_errors(device, cals):
    """Added error of the two disjoint simultaneous CZ pairs on a plaquette."""
    mat = simultaneous_error_matrix(
        device, {f"{p[0]}{p[1]}": c for p, (_, c, _) in cals.items()},
        "cz", dt=0.01)
    idx = {lab: k for k, lab in enumerate(mat.labels)}
    return {
        ("Q0Q1", "Q2Q3"): mat.added_error(idx["Q0Q1"], idx["Q2Q3"]),
        ("Q1Q2", "Q0Q3"): mat.added_error(idx["Q1Q2"], idx["Q0Q3"]),
    }


def test_criterion_07_anharmonicity_mitigation(cz_cals, eta320_cals):
    base_cals = {pair: cz_cals[("square4", pair)]
                 for pair in (("Q0", "Q1"), ("Q1", "Q2"),
                              ("Q2", "Q3"), ("Q0", "Q3"))}
    base_added = _cz_added_errors(square4(), base_cals)
    var_added = _cz_added_errors(square4_eta320(), eta320_cals)
    avg_base = np.mean(list(base_added.values()))
    avg_var = np.mean(list(var_added.values()))
    reduction = np.inf if avg_var <= 0 else avg_base / avg_var
    per_op = max(v / 2.0 for v in var_added.values())
    clauses = [
        ("reduction", reduction >= 4.0,
         f"{reduction:.1f}x ({avg_base:.2e} -> {avg_var:.2e})"),
        ("per-op-added", per_op <= 3e-5, f"{per_op:.2e}"),
    ]
    for pair, (_, cal, rt) in eta320_cals.items():
        clauses.append((f"{pair[0]}{pair[1]}-err", cal.achieved_error <= 1e-4,
                        f"{cal.achieved_error:.2e} ({rt:.0f}s)"))
    _report("criterion-07", clauses)


_NNN_PAIRS = ({"Q0", "Q2"}, {"Q1", "Q3"})


def _is_nnn_transfer(state_in, state_out, qubits):
    """True when the transition moves excitations only between diagonal
    (next-nearest-neighbor) qubit pairs of the plaquette."""
    lost = [q for q, a, b in zip(qubits, state_in, state_out)
            if a == "1" and b == "0"]
    gained = [q for q, a, b in zip(qubits, state_in, state_out)
              if a == "0" and b == "1"]
    if not lost or len(lost) != len(gained):
        return False
    return any(all({l, g} in _NNN_PAIRS for l, g in zip(lost, perm))
               for perm in itertools.permutations(gained))


def test_criterion_08_swap_suppression(cz_cals):
    device, cal_a, _ = cz_cals[("square4", ("Q0", "Q1"))]
    _, cal_b, _ = cz_cals[("square4", ("Q2", "Q3"))]
    clauses = []
    for subspace in SWAP_SUBSPACES:
        sm = swap_matrix(device, cal_a, cal_b, subspace, dt=0.01)
        worst = 0.0
        for i, si in enumerate(sm.states):
            for j, so in enumerate(sm.states):
                if i != j and _is_nnn_transfer(si, so, device.qubits):
                    worst = max(worst, float(sm.matrix[i, j]))
        clauses.append((subspace, worst <= 2e-4, f"max P={worst:.2e}"))
    _report("criterion-08", clauses)


def _oscillation_period(durations, values):
    """Dominant oscillation period of a short uniformly sampled trace, from
    the peak of a zero-padded FFT of the detrended series."""
    d = np.asarray(values, dtype=float)
    t = np.asarray(durations, dtype=float)
    d = d - np.polyval(np.polyfit(t, d, 1), t)
    n_pad = 512
    spec = np.abs(np.fft.rfft(d, n_pad))
    freqs = np.fft.rfftfreq(n_pad, d=t[1] - t[0])
    k = 1 + int(np.argmax(spec[1:]))
    return 1.0 / freqs[k]


def test_criterion_09_gate_time_tradeoff():
    durations = np.arange(50.0, 110.1, 5.0)
    sweeps = {}
    for device in (square4(), square4_eta310()):
        t0 = time.perf_counter()
        sweeps[device.name] = gate_time_sweep(device, ("Q0", "Q1"), durations,
                                              "Q3", dt=0.01,
                                              target_error=2e-5, restarts=2,
                                              max_iter=300)
        print(f"  {device.name} sweep: {time.perf_counter()-t0:.0f} s",
              flush=True)
    base, var = sweeps["square4"], sweeps["square4_eta310"]
    slope = float(np.polyfit(durations, [p.error_ground for p in base], 1)[0])
    peak_base = max(p.leak_population for p in base)
    peak_var = max(p.leak_population for p in var)
    period_base = _oscillation_period(durations,
                                      [p.leak_population for p in base])
    period_var = _oscillation_period(durations,
                                     [p.leak_population for p in var])
    _report("criterion-09", [
        ("ground-slope", slope <= 0.0, f"{slope:.2e} /ns"),
        ("leak-peak", peak_base >= 3.0 * peak_var,
         f"{peak_base:.2e} vs {peak_var:.2e}"),
        ("period", period_var < period_base,
         f"{period_var:.1f} < {period_base:.1f} ns"),
    ])


def test_criterion_10_numerical_hygiene():
    dev = fig1pair()
    idle = dev.idle_bus_frequencies()
    x_sched = drag_schedule(dev, "Q1", 0.05, 0.0)
    _, model_cz = measure_j101(dev, ("Q1", "Q2"))
    theta_on = float(model_cz.theta_of(model_cz.omega_on))
    f_sched = cz_schedule(dev, ("Q1", "Q2"), 0.9, 0.0, theta_on,
                          model=model_cz)
    basis1 = computational_basis(dev, idle, qubits=("Q1",))
    basis = computational_basis(dev, idle, qubits=("Q1", "Q2"))

    clauses = []
    plans = (("drive", x_sched, basis1, 0.002, 20, 0.001),
             ("flux", f_sched, basis, 0.002, 40, 0.01))
    for name, sched, bas, dt_x, substeps, dt_h in plans:
        cf4 = simulate_gate(dev, sched, dt_x, bas)
        rk4 = simulate_gate(dev, sched, dt_x, bas,
                            engine="rk4", rk4_substeps=substeps)
        coarse = simulate_gate(dev, sched, dt_h, bas)
        halved = simulate_gate(dev, sched, dt_h / 2.0, bas)
        cross = float(np.max(np.abs(cf4.block - rk4.block)))
        conv = float(np.max(np.abs(coarse.block - halved.block)))
        drift = max(cf4.norm_drift, coarse.norm_drift, halved.norm_drift)
        clauses.append((f"{name}-cross-oracle", cross <= 1e-8, f"{cross:.2e}"))
        clauses.append((f"{name}-dt-halving", conv < 1e-9, f"{conv:.2e}"))
        clauses.append((f"{name}-norm-drift", drift < 1e-9, f"{drift:.2e}"))
    gate1 = simulate_gate(dev, f_sched, 0.01, basis)
    gate2 = simulate_gate(dev, f_sched, 0.01, basis)
    ph1, f1, b1 = optimize_local_phases(np.diag([1, 1, 1, -1.0]), gate1.block,
                                        2, seed=7)
    ph2, f2, b2 = optimize_local_phases(np.diag([1, 1, 1, -1.0]), gate2.block,
                                        2, seed=7)
    repro = (gate1.block.tobytes() == gate2.block.tobytes()
             and b1.tobytes() == b2.tobytes() and f1 == f2)
    clauses.append(("seed-reproducibility", repro, f"fid={f1:.12f}"))
    _report("criterion-10", clauses)
