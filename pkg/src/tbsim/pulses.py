"""Microwave DRAG envelopes and fast-adiabatic bus-frequency trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class PulseError(ValueError):
    pass


@dataclass(frozen=True)
class DragPulse:
    """Cosine-window DRAG drive: Omega_x - i * alpha * dOmega_x/dt / eta."""

    peak_amplitude: float      # GHz
    gate_time: float           # ns
    drag_coefficient: float    # dimensionless alpha
    drive_frequency: float     # GHz
    target_mode: str
    anharmonicity_ref: float   # GHz, eta of the driven qubit

    def __post_init__(self):
        if not self.gate_time > 0:
            raise PulseError("gate_time must be > 0")
        if self.anharmonicity_ref == 0:
            raise PulseError("anharmonicity_ref must be nonzero")

    def envelope(self, t):
        """Complex envelope Omega_x + i Omega_y at time t (vectorized)."""
        a, tg = self.peak_amplitude, self.gate_time
        if isinstance(t, float):  # fast scalar path for the integrators
            if t < -1e-12 or t > tg + 1e-12:
                raise PulseError("t outside [0, gate_time]")
            phase = 2.0 * math.pi * t / tg
            ox = 0.5 * a * (1.0 - math.cos(phase))
            dox = a * (math.pi / tg) * math.sin(phase)
            oy = -self.drag_coefficient * dox / (2.0 * math.pi
                                                 * self.anharmonicity_ref)
            return complex(ox, oy)
        t = np.asarray(t, float)
        if np.any(t < -1e-12) or np.any(t > tg + 1e-12):
            raise PulseError("t outside [0, gate_time]")
        ox = 0.5 * a * (1.0 - np.cos(2.0 * np.pi * t / tg))
        dox = a * (np.pi / tg) * np.sin(2.0 * np.pi * t / tg)
        # amplitudes are linear frequencies (GHz) but the derivative is taken
        # in real time, so the ratio d(Omega_x)/dt / eta carries a 1/(2 pi)
        oy = -self.drag_coefficient * dox / (2.0 * np.pi * self.anharmonicity_ref)
        return ox + 1j * oy

    def carrier_coefficient(self, t):
        """Real lab-frame drive coefficient multiplying (a^dag + a)."""
        env = self.envelope(t)
        if isinstance(t, float):
            phase = 2.0 * math.pi * self.drive_frequency * t
            return env.real * math.cos(phase) + env.imag * math.sin(phase)
        phase = 2.0 * np.pi * self.drive_frequency * np.asarray(t, float)
        return env.real * np.cos(phase) + env.imag * np.sin(phase)


def drag_envelope(pulse: DragPulse, t: float) -> complex:
    return complex(pulse.envelope(t))


@dataclass(frozen=True)
class FluxPulse:
    """Fourier fast-adiabatic control-angle window (lambda_3 = 1 - lambda_1)."""

    lambda1: float
    lambda2: float
    theta_initial: float   # rad
    theta_final: float     # rad
    duration: float        # ns

    def __post_init__(self):
        if not self.duration > 0:
            raise PulseError("duration must be > 0")

    @property
    def lambda3(self) -> float:
        return 1.0 - self.lambda1

    @property
    def fourier_coefficients(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)

    def theta(self, t):
        if isinstance(t, float):  # fast scalar path for the integrators
            if t < -1e-12 or t > self.duration + 1e-12:
                raise PulseError("t outside [0, duration]")
            base = 2.0 * math.pi * t / self.duration
            acc = (self.lambda1 * (1.0 - math.cos(base))
                   + self.lambda2 * (1.0 - math.cos(2.0 * base))
                   + self.lambda3 * (1.0 - math.cos(3.0 * base)))
            return self.theta_initial + 0.5 * (self.theta_final
                                               - self.theta_initial) * acc
        t = np.asarray(t, float)
        if np.any(t < -1e-12) or np.any(t > self.duration + 1e-12):
            raise PulseError("t outside [0, duration]")
        acc = np.zeros_like(t)
        for n, lam in enumerate(self.fourier_coefficients, start=1):
            acc = acc + lam * (1.0 - np.cos(2.0 * n * np.pi * t / self.duration))
        return self.theta_initial + 0.5 * (self.theta_final - self.theta_initial) * acc


def flux_theta(pulse: FluxPulse, t: float) -> float:
    return float(pulse.theta(t))


@dataclass(frozen=True)
class ControlAngleModel:
    """theta = atan2(2 J_101, Delta_101) with the bare detuning
    Delta_101 = (omega_1 + omega_2) - (2 omega_TB + eta_TB).

    The map is monotone in omega_TB on (0, pi), so it inverts in closed form;
    J_101 is either the measured half-gap of the |101> <-> |020> crossing or a
    configured value.
    """

    j101: float       # GHz, half-gap
    omega1: float     # GHz
    omega2: float     # GHz
    eta_tb: float     # GHz

    def detuning(self, omega_tb):
        return (self.omega1 + self.omega2) - (2.0 * np.asarray(omega_tb, float)
                                              + self.eta_tb)

    def theta_of(self, omega_tb):
        return np.arctan2(2.0 * self.j101, self.detuning(omega_tb))

    def bus_frequency_of(self, theta):
        # Delta_101 = 2 J / tan(theta); exact inversion of the arctangent.
        # tan is finite in floating point throughout (0, pi), so no special
        # case is needed at theta = pi/2.
        if isinstance(theta, float):  # fast scalar path for the integrators
            if theta <= 0.0 or theta >= math.pi:
                raise PulseError("theta must lie strictly inside (0, pi)")
            delta = 2.0 * self.j101 / math.tan(theta)
            return 0.5 * ((self.omega1 + self.omega2) - self.eta_tb - delta)
        theta = np.asarray(theta, float)
        if np.any(theta <= 0.0) or np.any(theta >= np.pi):
            raise PulseError("theta must lie strictly inside (0, pi)")
        delta = 2.0 * self.j101 / np.tan(theta)
        out = 0.5 * ((self.omega1 + self.omega2) - self.eta_tb - delta)
        return float(out) if out.ndim == 0 else out

    @property
    def omega_on(self) -> float:
        """Bus frequency where the bare |101>/|020> detuning vanishes."""
        return 0.5 * ((self.omega1 + self.omega2) - self.eta_tb)


def theta_to_bus_frequency(model: ControlAngleModel, theta: float) -> float:
    return float(model.bus_frequency_of(theta))


@dataclass(frozen=True)
class FluxDrive:
    """A flux pulse routed through the control-angle model onto one bus."""

    bus: str
    pulse: FluxPulse
    model: ControlAngleModel

    def bus_frequency(self, t):
        return self.model.bus_frequency_of(self.pulse.theta(t))


@dataclass(frozen=True)
class PulseSchedule:
    """Time-parameterized controls: DRAG drives plus flux trajectories."""

    duration: float                          # ns
    drives: tuple[DragPulse, ...] = ()
    flux: tuple[FluxDrive, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple(self.drives))
        object.__setattr__(self, "flux", tuple(self.flux))
        if self.duration < 0:
            raise PulseError("duration must be >= 0")
        for d in self.drives:
            if abs(d.gate_time - self.duration) > 1e-12:
                raise PulseError("drive gate_time must equal schedule duration")
        for f in self.flux:
            if abs(f.pulse.duration - self.duration) > 1e-12:
                raise PulseError("flux duration must equal schedule duration")

    @property
    def is_flux_only(self) -> bool:
        return not self.drives


def sample_schedule(schedule: PulseSchedule, dt: float):
    """Left-endpoint samples of every control over [0, duration].

    Returns (times, drive_samples, flux_samples) where drive_samples maps
    target mode -> complex envelope array and flux_samples maps
    bus -> frequency array.
    """
    if not dt > 0:
        raise PulseError("dt must be > 0")
    if not schedule.drives and not schedule.flux:
        raise PulseError("schedule has no pulses")
    n = max(1, int(round(schedule.duration / dt)))
    times = np.arange(n) * dt
    drive_samples = {d.target_mode: d.envelope(times) for d in schedule.drives}
    flux_samples = {f.bus: f.bus_frequency(times) for f in schedule.flux}
    return times, drive_samples, flux_samples
