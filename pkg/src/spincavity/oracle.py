"""Brute-force reference dynamics: the discrete N-spin mean-field system.

Integrates the coupled cavity/spin amplitude equations

    dA/dt  = -[kappa + i(omega_c - omega_p)] A + sum_k g_k B_k + eta(t)
    dB_k/dt = -[gamma + i(omega_k - omega_p)] B_k - g_k A

with a classic fixed-step fourth-order Runge-Kutta scheme, stepping
segment by segment so the piecewise-constant drive never changes inside
a step.  Used to validate the integral-equation solver and to produce
independent ground truth; not a performance target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drive import DriveProtocol
from .errors import NonFinite, StepTooLarge
from .model import CavityTrajectory, SystemParams, TimeGrid, validate
from .spectral import SpectralDensity, sample_frequencies
from .volterra import _segment_indices


@dataclass(frozen=True, eq=False)
class DiscreteEnsemble:
    """Sampled spin frequencies and couplings for the discrete system."""

    omegas: np.ndarray
    couplings: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.omegas) != len(self.couplings):
            raise ValueError("omegas and couplings must have equal length")

    @property
    def collective_coupling(self) -> float:
        return float(np.sqrt(np.sum(self.couplings ** 2)))


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Cavity amplitude and the N spin amplitudes at one instant."""

    a: complex
    b: np.ndarray

    @classmethod
    def ground(cls, n: int) -> "EnsembleState":
        return cls(0.0j, np.zeros(n, dtype=complex))


def build_ensemble(rho: SpectralDensity, n: int, Omega: float, seed: int,
                   *, stratified: bool = False) -> DiscreteEnsemble:
    """Equal couplings Omega/sqrt(n); frequencies drawn from the density."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    omegas = sample_frequencies(rho, n, seed, stratified=stratified)
    couplings = np.full(n, Omega / np.sqrt(n))
    return DiscreteEnsemble(omegas=omegas, couplings=couplings, seed=seed)


def total_excitation(state: EnsembleState) -> float:
    """|A|^2 + sum_k |B_k|^2; conserved when kappa = gamma = eta = 0."""
    return float(abs(state.a) ** 2 + np.sum(np.abs(state.b) ** 2))


def integrate(ensemble: DiscreteEnsemble, params: SystemParams,
              protocol: DriveProtocol, grid: TimeGrid,
              initial: EnsembleState = None):
    """Fixed-step RK4 trajectory; returns (CavityTrajectory, final EnsembleState)."""
    validate(params)
    dt = grid.dt
    detune_scale = np.max(np.abs(ensemble.omegas - params.omega_p), initial=0.0)
    if params.Omega * dt >= 0.05 or detune_scale * dt >= 0.5:
        raise StepTooLarge(
            f"dt = {dt} too coarse for rates (Omega*dt = {params.Omega * dt:.3g}, "
            f"max detuning*dt = {detune_scale * dt:.3g})"
        )
    segs = _segment_indices(protocol, grid)
    g = ensemble.couplings.astype(complex)
    nu = params.gamma + 1j * (ensemble.omegas - params.omega_p)
    kt = params.cavity_rate

    if initial is None:
        initial = EnsembleState.ground(len(g))
    a = complex(initial.a)
    b = initial.b.astype(complex).copy()
    amp = np.empty(grid.n_samples, dtype=complex)
    amp[0] = a

    for ia, ib, eta in segs:
        for i in range(ia, ib):
            k1a = -kt * a + g @ b + eta
            k1b = -nu * b - g * a
            a2 = a + 0.5 * dt * k1a
            b2 = b + 0.5 * dt * k1b
            k2a = -kt * a2 + g @ b2 + eta
            k2b = -nu * b2 - g * a2
            a3 = a + 0.5 * dt * k2a
            b3 = b + 0.5 * dt * k2b
            k3a = -kt * a3 + g @ b3 + eta
            k3b = -nu * b3 - g * a3
            a4 = a + dt * k3a
            b4 = b + dt * k3b
            k4a = -kt * a4 + g @ b4 + eta
            k4b = -nu * b4 - g * a4
            a = a + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            b = b + (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            amp[i + 1] = a
        if not np.isfinite(a):
            raise NonFinite("discrete-ensemble integration diverged")

    traj = CavityTrajectory(grid=grid, amplitude=amp)
    return traj, EnsembleState(a=a, b=b)
