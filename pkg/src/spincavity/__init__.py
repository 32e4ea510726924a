"""Mean-field dynamics of a driven cavity coupled to a broadened spin ensemble."""

from .analysis import (AnalysisResult, PolePair, dispersion_value,
                       enhancement_factor, extract_decay_rate, extract_rabi,
                       find_poles, gamma_asymptotic, gamma_lorentzian,
                       gamma_markov)
from .drive import DriveProtocol, amplitude_at, phase_switched_train, rectangular
from .model import (CavityTrajectory, SystemParams, TimeGrid, angular_to_mhz,
                    mhz_to_angular, paper_params, validate)
from .oracle import (DiscreteEnsemble, EnsembleState, build_ensemble, integrate,
                     total_excitation)
from .spectral import (SpectralDensity, delta_from_fwhm, density_at, fwhm,
                       normalization_constant, sample_frequencies,
                       support_window)
from .volterra import (KernelTable, MemoryState, advance_memory, forcing,
                       kernel_table, solve)

__all__ = [
    "AnalysisResult", "CavityTrajectory", "DiscreteEnsemble", "DriveProtocol",
    "EnsembleState", "KernelTable", "MemoryState", "PolePair", "SpectralDensity",
    "SystemParams", "TimeGrid", "advance_memory", "amplitude_at",
    "angular_to_mhz", "build_ensemble", "delta_from_fwhm", "density_at",
    "dispersion_value", "enhancement_factor", "extract_decay_rate",
    "extract_rabi", "find_poles", "forcing", "fwhm", "gamma_asymptotic",
    "gamma_lorentzian", "gamma_markov", "integrate", "kernel_table",
    "mhz_to_angular", "normalization_constant", "paper_params",
    "phase_switched_train", "rectangular", "sample_frequencies", "solve",
    "support_window", "total_excitation", "validate",
]

__version__ = "0.1.0"
