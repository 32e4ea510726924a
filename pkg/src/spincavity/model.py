"""Shared parameter and trajectory types, unit conventions, validation.

Unit conventions used throughout the package:

* time in nanoseconds,
* every frequency and rate an *angular* frequency in rad/ns,
* ``kappa`` and ``gamma`` are amplitude decay rates (half widths); the
  intensity linewidth of the bare cavity is ``2 * kappa``,
* reported intensity decay rates refer to ``|A(t)|**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeRate, NonFinite, NonPositiveFrequency

TWO_PI = 2.0 * np.pi


def mhz_to_angular(f_mhz: float) -> float:
    """Convert an ordinary frequency in MHz to an angular one in rad/ns."""
    return TWO_PI * f_mhz * 1e-3


def angular_to_mhz(omega: float) -> float:
    """Convert an angular frequency in rad/ns to an ordinary one in MHz."""
    return omega / (TWO_PI * 1e-3)


@dataclass(frozen=True)
class SystemParams:
    """Cavity, ensemble and probe parameters (rad/ns).

    omega_c, omega_s, omega_p are the cavity, ensemble-center and probe
    angular frequencies; kappa and gamma the cavity and single-spin
    amplitude decay rates; Omega the collective coupling strength.
    """

    omega_c: float
    omega_s: float
    omega_p: float
    kappa: float
    gamma: float
    Omega: float

    @property
    def kappa_fwhm(self) -> float:
        """Intensity linewidth of the bare cavity, 2 * kappa."""
        return 2.0 * self.kappa

    @property
    def cavity_rate(self) -> complex:
        """Complex cavity rate in the probe frame, kappa + i(omega_c - omega_p)."""
        return self.kappa + 1j * (self.omega_c - self.omega_p)


def validate(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged if all invariants hold.

    Raises NegativeRate if any of kappa, gamma, Omega is negative and
    NonPositiveFrequency if any carrier frequency is not positive.
    """
    for name in ("kappa", "gamma", "Omega"):
        value = getattr(params, name)
        if not np.isfinite(value) or value < 0.0:
            raise NegativeRate(f"{name} must be finite and >= 0, got {value}")
    for name in ("omega_c", "omega_s", "omega_p"):
        value = getattr(params, name)
        if not np.isfinite(value) or value <= 0.0:
            raise NonPositiveFrequency(f"{name} must be finite and > 0, got {value}")
    return params


def paper_params() -> SystemParams:
    """Canonical parameter set of the experiment this package models.

    Resonant probe, cavity at 2.6899 GHz, cavity amplitude decay
    2*pi*0.4 MHz (half of the 2*pi*0.8 MHz intensity FWHM), negligible
    single-spin dissipation, collective coupling 2*pi*8.6 MHz.
    """
    omega = mhz_to_angular(2689.9)
    return SystemParams(
        omega_c=omega,
        omega_s=omega,
        omega_p=omega,
        kappa=mhz_to_angular(0.4),
        gamma=0.0,
        Omega=mhz_to_angular(8.6),
    )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time lattice: t_i = t_start + i*dt for i = 0..n_samples-1."""

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > self.t_start):
            raise ValueError(
                f"t_end must exceed t_start, got [{self.t_start}, {self.t_end}]"
            )

    @property
    def n_samples(self) -> int:
        # tolerate float representation of exact multiples of dt
        return int(np.floor((self.t_end - self.t_start) / self.dt + 1e-9)) + 1

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)


@dataclass(frozen=True, eq=False)
class CavityTrajectory:
    """Complex cavity amplitude A(t_i) sampled on a TimeGrid."""

    grid: TimeGrid
    amplitude: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        object.__setattr__(self, "amplitude", amp)
        if amp.shape != (self.grid.n_samples,):
            raise ValueError(
                f"amplitude has {amp.shape[0]} samples, grid expects {self.grid.n_samples}"
            )
        if not np.all(np.isfinite(amp.view(float))):
            raise NonFinite("trajectory contains non-finite samples")

    def times(self) -> np.ndarray:
        return self.grid.times()

    def intensity(self) -> np.ndarray:
        """|A(t)|^2 on the grid."""
        return np.abs(self.amplitude) ** 2
