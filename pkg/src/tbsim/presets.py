"""Bundled device presets.

fig1pair is the two-qubit/one-bus reference device.  chain4 and square4 are
reconstructions of the four-qubit lattice fragments from the frequency
allocation rules (two qubit bands 200 MHz apart, ~20 MHz degeneracy breaking
between next-nearest neighbors, buses idling ~500 MHz above the upper band).
chain4's Q3 sits at 5.180 GHz so that the (Q0, Q1) pair carries the uniquely
smallest collision margin (100 MHz), as the worst-pair analysis requires.
"""

from __future__ import annotations

from .device import CouplingSpec, DeviceSpec, ModeSpec

ETA = -0.300
G = 0.025
G_REF = 5.500


def _qubit(name, freq, eta=ETA):
    return ModeSpec(name=name, kind="qubit", frequency=freq, anharmonicity=eta)


def _bus(name, freq, eta=ETA):
    return ModeSpec(name=name, kind="bus", frequency=freq, anharmonicity=eta)


def _g(a, b):
    return CouplingSpec(a=a, b=b, strength=G, reference_frequency=G_REF,
                        scaling="sqrt-product")


def fig1pair() -> DeviceSpec:
    """Two fixed transmons (5.000, 5.200 GHz) with one bus idling at 5.650."""
    return DeviceSpec(
        name="fig1pair",
        modes=(_qubit("Q1", 5.000), _bus("TB", 5.650), _qubit("Q2", 5.200)),
        couplings=(_g("Q1", "TB"), _g("Q2", "TB")),
    )


def chain4() -> DeviceSpec:
    """Four-qubit chain Q0-TB0-Q1-TB1-Q2-TB2-Q3 (qubits first in tensor order)."""
    return DeviceSpec(
        name="chain4",
        modes=(
            _qubit("Q0", 5.000), _qubit("Q1", 5.200),
            _qubit("Q2", 5.020), _qubit("Q3", 5.180),
            _bus("TB0", 5.700), _bus("TB1", 5.720), _bus("TB2", 5.700),
        ),
        couplings=(
            _g("Q0", "TB0"), _g("Q1", "TB0"),
            _g("Q1", "TB1"), _g("Q2", "TB1"),
            _g("Q2", "TB2"), _g("Q3", "TB2"),
        ),
    )


def square4() -> DeviceSpec:
    """2x2 plaquette Q0..Q3 with buses TB0..TB3 on the edges (01, 12, 23, 30).

    Q1/Q3 take the lower half of the upper band (5.180/5.200 GHz): the CZ01
    working point then sits at 5.240 GHz and the parasitic spectator channel
    |Q3=2, TB0=1> develops its two narrow avoided crossings at 5.2590 and
    5.2305 GHz, bracketing the working point.  Raising Q1 to 5.200 would park
    a direct Q1-TB0 resonance inside the flux excursion window and fold both
    crossings into the broad CZ-channel hybridization region.
    """
    return DeviceSpec(
        name="square4",
        modes=(
            _qubit("Q0", 5.000), _qubit("Q1", 5.180),
            _qubit("Q2", 5.020), _qubit("Q3", 5.200),
            _bus("TB0", 5.700), _bus("TB1", 5.720),
            _bus("TB2", 5.700), _bus("TB3", 5.720),
        ),
        couplings=(
            _g("Q0", "TB0"), _g("Q1", "TB0"),
            _g("Q1", "TB1"), _g("Q2", "TB1"),
            _g("Q2", "TB2"), _g("Q3", "TB2"),
            _g("Q3", "TB3"), _g("Q0", "TB3"),
        ),
    )


def square4_eta310() -> DeviceSpec:
    dev = square4().with_qubit_anharmonicity(-0.310)
    return DeviceSpec(modes=dev.modes, couplings=dev.couplings, name="square4_eta310")


def square4_eta320() -> DeviceSpec:
    dev = square4().with_qubit_anharmonicity(-0.320)
    return DeviceSpec(modes=dev.modes, couplings=dev.couplings, name="square4_eta320")


PRESETS = {
    "fig1pair": fig1pair,
    "chain4": chain4,
    "square4": square4,
    "square4_eta310": square4_eta310,
    "square4_eta320": square4_eta320,
}


def get_preset(name: str) -> DeviceSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
