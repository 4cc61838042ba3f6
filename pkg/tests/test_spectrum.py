import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbsim.device import CouplingSpec, DeviceSpec, ModeSpec, build_hamiltonian
from tbsim.presets import fig1pair
from tbsim.spectrum import (
    DetuningReport,
    LabelingError,
    ResonanceError,
    diagonalize_and_label,
    exchange_J,
    find_avoided_crossing,
    labeled_energies,
    labeled_states,
    zz_map,
    zz_numeric,
    zz_perturbative,
    zz_sweep,
)


def decoupled_pair():
    return DeviceSpec(
        name="decoupled",
        modes=(ModeSpec("Q1", "qubit", 5.0, -0.3),
               ModeSpec("TB", "bus", 5.65, -0.3),
               ModeSpec("Q2", "qubit", 5.2, -0.3)),
        couplings=(),
    )


def test_decoupled_labeling_is_identity():
    dev = decoupled_pair()
    h = build_hamiltonian(dev, {"TB": 5.65})
    res = diagonalize_and_label(h, dev)
    for idx in range(dev.dim):
        ket = dev.occupation_of(idx)
        assert res.overlaps[ket] == pytest.approx(1.0)
        assert res.energy_of(ket) == pytest.approx(
            5.0 * ket[0] + 5.65 * ket[1] + 5.2 * ket[2]
            - 0.15 * sum(n * (n - 1) for n in ket))


def test_dispersive_overlap_high():
    dev = fig1pair()
    res = diagonalize_and_label(build_hamiltonian(dev, {"TB": 5.65}), dev)
    assert res.overlaps[(1, 0, 0)] > 0.99
    assert sorted(res.label_map.values()) == list(range(dev.dim))


def test_resonant_labeling_fails():
    dev = fig1pair()
    with pytest.raises(LabelingError):
        diagonalize_and_label(build_hamiltonian(dev, {"TB": 5.0}), dev)


def test_labeled_states_match_full_diagonalization():
    dev = fig1pair()
    full = diagonalize_and_label(build_hamiltonian(dev, {"TB": 5.65}), dev)
    block = labeled_energies(dev, {"TB": 5.65},
                             [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 0, 1)])
    for ket, energy in block.items():
        assert energy == pytest.approx(full.energy_of(ket), abs=1e-12)


def test_labeled_states_are_eigenvectors():
    dev = fig1pair()
    h = build_hamiltonian(dev, {"TB": 5.65}).toarray()
    for ket, (e, v) in labeled_states(dev, {"TB": 5.65},
                                      [(1, 0, 0), (1, 0, 1)]).items():
        np.testing.assert_allclose(h @ v, e * v, atol=1e-10)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert v[dev.bare_index(ket)].real > 0  # gauge fixed


def test_detuning_report_identities():
    r = DetuningReport.from_frequencies(5.0, 5.2, 5.65, -0.3)
    assert r.delta1 == pytest.approx(-0.65)
    assert r.delta2 == pytest.approx(-0.45)
    assert r.delta == pytest.approx(r.delta2 - r.delta1)
    assert r.mean_freq == pytest.approx(5.1)
    assert r.omega_on == pytest.approx(5.25)


# ---------------------------------------------------------------------------
# ZZ coupling

def test_zz_free_point_location():
    dev = fig1pair()
    freqs, num, _ = zz_sweep(dev, "TB", 5.42, 5.53, 0.001)
    signs = np.sign(num)
    flips = np.flatnonzero(np.diff(signs) != 0)
    assert flips.size >= 1
    root = freqs[flips[0]]
    assert abs(root - 5.475) < 0.075


def test_zz_at_anchor_points():
    dev = fig1pair()
    assert abs(zz_numeric(dev, {"TB": 5.475})) < 10e-6
    assert abs(zz_numeric(dev, {"TB": 5.650})) <= 15e-6
    assert 7e-3 <= abs(zz_numeric(dev, {"TB": 5.250})) <= 13e-3


def test_zz_perturbative_reference_value():
    # constant g = 25 MHz at the idle point
    z = zz_perturbative(5.0, 5.2, 5.65, -0.3, -0.3, -0.3, 0.025, 0.025)
    assert z == pytest.approx(12.4e-6, rel=0.02)
    term1 = 2 * 0.025**4 * (1 / (0.45**2 * 0.5) - 1 / (0.65**2 * (-0.1)))
    assert term1 == pytest.approx(26.2e-6, rel=0.02)


def test_zz_perturbative_trivial_zero():
    assert zz_perturbative(5.0, 5.2, 5.65, -0.3, -0.3, -0.3, 0.0, 0.025) == 0.0


def test_zz_perturbative_resonance_guard():
    with pytest.raises(ResonanceError):
        zz_perturbative(5.0, 5.2, 5.0, -0.3, -0.3, -0.3, 0.025, 0.025)
    with pytest.raises(ResonanceError):
        # Delta + eta_2 built from binary-exact values so it vanishes exactly
        zz_perturbative(5.0, 5.25, 5.65, -0.3, -0.25, -0.3, 0.025, 0.025)


def test_zz_free_root_detuning_rule():
    """For near-degenerate qubits the analytic ZZ-free root sits near
    Delta_1 = 3 eta / 2."""
    eta = -0.3
    omega1, omega2 = 5.000, 5.001

    def f(om_tb):
        return zz_perturbative(omega1, omega2, om_tb, eta, eta, eta,
                               0.025, 0.025)

    lo, hi = omega1 - 1.6 * eta - 0.15, omega1 - 1.4 * eta + 0.15
    grid = np.linspace(lo, hi, 2001)
    vals = np.array([f(x) for x in grid])
    k = np.flatnonzero(np.diff(np.sign(vals)) != 0)
    assert k.size >= 1
    root = grid[k[0]]
    assert abs((omega1 - root) - 1.5 * eta) < 0.02


@settings(max_examples=20, deadline=None)
@given(scale=st.sampled_from([0.5, 2.0]))
def test_zz_root_invariant_under_g_scaling(scale):
    """Eq.-style ZZ is proportional to g1^2 g2^2, so the root cannot move."""
    def root_for(g):
        grid = np.linspace(5.40, 5.55, 3001)
        vals = np.array([zz_perturbative(5.0, 5.2, x, -0.3, -0.3, -0.3, g, g)
                         for x in grid])
        k = np.flatnonzero(np.diff(np.sign(vals)) != 0)[0]
        # linear interpolation for sub-grid root location
        x0, x1 = grid[k], grid[k + 1]
        y0, y1 = vals[k], vals[k + 1]
        return x0 - y0 * (x1 - x0) / (y1 - y0)

    assert abs(root_for(0.025 * scale) - root_for(0.025)) < 1e-4


def test_exchange_j_value_and_guard():
    j = exchange_J(0.025, 0.025, -0.65, -0.45)
    assert j == pytest.approx(-1.175e-3, rel=0.01)
    with pytest.raises(ResonanceError):
        exchange_J(0.025, 0.025, 0.0, -0.45)


def test_zz_sweep_emits_perturbative_column():
    dev = fig1pair()
    freqs, num, pert = zz_sweep(dev, "TB", 5.60, 5.70, 0.02)
    assert freqs.shape == num.shape == pert.shape
    ratios = num / pert
    assert np.all((0.5 < ratios) & (ratios < 2.0))


def test_zz_map_masks_small_values():
    dev = fig1pair()
    deltas, dets, raw, masked = zz_map(
        dev, "TB", [0.2], [0.4, 0.45, 0.65], mask_below=1e-5)
    assert raw.shape == (1, 3)
    small = np.abs(raw) < 1e-5
    assert np.all(np.isnan(masked[small]))
    assert np.all(masked[~small] == raw[~small])


# ---------------------------------------------------------------------------
# avoided crossings

def test_avoided_crossing_101_020():
    dev = fig1pair()
    cr = find_avoided_crossing(dev, ((1, 0, 1), (0, 2, 0)), "TB", (5.1, 5.4))
    assert 5.20 < cr.location < 5.30
    assert 0.020 < cr.gap < 0.030  # 2 * J101 with J101 near 12 MHz
    assert cr.gap >= 0


def test_avoided_crossing_requires_same_excitation():
    dev = fig1pair()
    with pytest.raises(ValueError):
        find_avoided_crossing(dev, ((1, 0, 0), (0, 2, 0)), "TB", (5.1, 5.4))


def test_avoided_crossing_boundary_minimum_rejected():
    dev = fig1pair()
    with pytest.raises(ValueError):
        find_avoided_crossing(dev, ((1, 0, 1), (0, 2, 0)), "TB", (5.5, 5.8))
