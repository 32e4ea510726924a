"""Laplace-domain and time-domain analysis of the coupled dynamics.

The Laplace transform of the integral equation gives a dispersion
function

    D(s) = s + kappa + i(omega_c - omega_p)
             + Omega^2 * int d(omega) rho(omega) / (s + gamma + i(omega - omega_p)),

whose zeros are the complex poles of the cavity response: -2 Re(s) is
the intensity decay rate of a hybridized mode, Im(s_+) - Im(s_-) the
oscillation splitting.  For vanishing spin dissipation the physical
(decaying) poles sit on the other side of the branch cut spanned by the
density support, so the pole search evaluates the analytic
continuation: crossing the cut adds 2*pi*Omega^2*rho(w) with the
density continued to the complex point w = omega_p + i(s + gamma).

Time-domain extraction works on |A(t)|^2: decay rates from the
log-linear envelope of its local maxima after switch-off, oscillation
periods from their spacing, drive-scheme gain from late-time peak
levels against a constant-drive steady state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import (InsufficientDecay, NoConvergence, NoOscillation,
                     NotSplit, NotSteady, QuadratureFailure)
from .model import CavityTrajectory, SystemParams, validate
from .spectral import (DEFAULT_TRUNCATION_EPS, LORENTZIAN, SpectralDensity,
                       density_at, density_complex, density_complex_derivative)
from .volterra import _MAX_DOUBLINGS, frequency_grid

_NEWTON_MAX_ITER = 50


@dataclass(frozen=True)
class PolePair:
    """Dominant pair of response poles (rad/ns)."""

    s_plus: complex
    s_minus: complex
    converged: bool
    residual: float

    @property
    def decay_rates(self) -> tuple:
        """Intensity decay rates -2 Re(s) of the two modes."""
        return (-2.0 * self.s_plus.real, -2.0 * self.s_minus.real)

    @property
    def rabi_splitting(self) -> float:
        return self.s_plus.imag - self.s_minus.imag


@dataclass(frozen=True)
class AnalysisResult:
    """Scalar summaries of one simulated scenario."""

    gamma: float
    omega_r: float = None
    t_r: float = None
    enhancement: float = None

    def __post_init__(self):
        if self.gamma is not None and not self.gamma > 0.0:
            raise ValueError(f"decay rate must be positive, got {self.gamma}")
        if self.omega_r is not None and self.t_r is not None:
            if abs(self.t_r * self.omega_r - 2.0 * np.pi) > 1e-9 * 2.0 * np.pi:
                raise ValueError("t_r and omega_r are inconsistent")


def _resolvent(s: complex, params: SystemParams, rho: SpectralDensity,
               tol: float = 1e-9):
    """(f, f') for f(s) = int rho(omega)/(s + gamma + i(omega - omega_p)) domega.

    Gauss-Legendre panels over the truncation window, doubled until both
    sums settle.  The Lorentzian kind uses its exact resolvent
    1/(s + gamma + delta + i(omega_s - omega_p)), which is already the
    global analytic function.
    """
    if rho.kind == LORENTZIAN:
        den = s + params.gamma + rho.delta + 1j * (rho.omega_s - params.omega_p)
        return 1.0 / den, -1.0 / den ** 2
    panels = 64
    prev = None
    for _ in range(_MAX_DOUBLINGS + 1):
        nodes, w = frequency_grid(rho, panels)
        den = s + params.gamma + 1j * (nodes - params.omega_p)
        f = np.sum(w / den)
        fp = -np.sum(w / den ** 2)
        if prev is not None:
            df = abs(f - prev[0]) <= tol * max(abs(f), 1e-300)
            dfp = abs(fp - prev[1]) <= tol * max(abs(fp), 1e-300)
            if df and dfp:
                return f, fp
        prev = (f, fp)
        panels *= 2
    raise QuadratureFailure("resolvent quadrature did not converge")


def dispersion_value(s: complex, params: SystemParams, rho: SpectralDensity,
                     *, continued: bool = False, tol: float = 1e-9) -> complex:
    """D(s); with ``continued`` the second-sheet continuation below the cut."""
    value, _ = _dispersion_with_derivative(s, params, rho, continued=continued,
                                           tol=tol)
    return value


def _dispersion_with_derivative(s: complex, params: SystemParams,
                                rho: SpectralDensity, *, continued: bool,
                                tol: float = 1e-9):
    f, fp = _resolvent(s, params, rho, tol=tol)
    kt = params.cavity_rate
    omega2 = params.Omega ** 2
    value = s + kt + omega2 * f
    deriv = 1.0 + omega2 * fp
    if continued and rho.kind != LORENTZIAN and (s.real + params.gamma) < 0.0:
        w = params.omega_p + 1j * (s + params.gamma)
        value += omega2 * 2.0 * np.pi * density_complex(rho, w)
        deriv += omega2 * 2.0 * np.pi * 1j * density_complex_derivative(rho, w)
    return value, deriv


def find_poles(params: SystemParams, rho: SpectralDensity, *,
               tol_factor: float = 1e-10,
               max_iter: int = _NEWTON_MAX_ITER) -> PolePair:
    """Newton search for the two dominant response poles.

    Requires the splitting regime Omega > HWHM/2 for a usable starting
    guess; converged means |D| < tol_factor * Omega at both roots.
    """
    validate(params)
    hwhm = 0.5 * rho.fwhm
    if not params.Omega > 0.5 * hwhm:
        raise NotSplit(
            f"Omega = {params.Omega:.4g} not above half the spectral HWHM "
            f"{hwhm:.4g}; no split pole pair to search for"
        )
    tol_abs = tol_factor * params.Omega
    roots = []
    residuals = []
    frame_shift = 1j * (rho.omega_s - params.omega_p)
    for sign in (+1.0, -1.0):
        guess_rate = params.kappa + np.pi * params.Omega ** 2 * density_at(
            rho, rho.omega_s + sign * params.Omega)
        s0 = frame_shift + sign * 1j * params.Omega - 0.5 * guess_rate
        s, resid = _newton(params, rho, s0, tol_abs, max_iter)
        roots.append(s)
        residuals.append(resid)
    s_plus, s_minus = roots
    if s_plus.imag < s_minus.imag:
        s_plus, s_minus = s_minus, s_plus
    return PolePair(s_plus=s_plus, s_minus=s_minus, converged=True,
                    residual=float(max(residuals)))


def _newton(params: SystemParams, rho: SpectralDensity, s0: complex,
            tol_abs: float, max_iter: int):
    s = s0
    value, deriv = _dispersion_with_derivative(s, params, rho, continued=True)
    for _ in range(max_iter):
        if abs(value) < tol_abs:
            return s, abs(value)
        step = value / deriv
        lam = 1.0
        for _ in range(10):
            s_try = s - lam * step
            v_try, d_try = _dispersion_with_derivative(s_try, params, rho,
                                                       continued=True)
            if abs(v_try) < abs(value):
                break
            lam *= 0.5
        s, value, deriv = s_try, v_try, d_try
    raise NoConvergence(
        f"pole search stalled at |D| = {abs(value):.3e} (tolerance {tol_abs:.3e})"
    )


def gamma_markov(params: SystemParams, rho: SpectralDensity) -> float:
    """Memoryless-limit intensity decay rate 2[kappa + pi Omega^2 rho(omega_s)]."""
    return 2.0 * (params.kappa
                  + np.pi * params.Omega ** 2 * density_at(rho, rho.omega_s))


def gamma_asymptotic(params: SystemParams, rho: SpectralDensity) -> float:
    """Very-strong-coupling intensity decay rate kappa + pi Omega^2 rho(omega_s + Omega).

    The hybridized modes sit a splitting away from the line center, so
    only the spectral tail damps them; for tails falling faster than
    1/omega^2 this decreases with coupling.  An equal cavity/spin mode
    carries half of each amplitude rate, Re(s) = -[kappa + pi Omega^2
    rho(omega_s +/- Omega)]/2, so the bracket itself is the intensity
    rate -2 Re(s); for a Lorentzian tail it reduces exactly to the
    strong-coupling plateau kappa + delta of the pole quadratic.
    """
    if not params.Omega > 0.0:
        raise ValueError("asymptotic rate needs Omega > 0")
    return params.kappa + np.pi * params.Omega ** 2 * density_at(
        rho, rho.omega_s + params.Omega)


def gamma_lorentzian(delta: float, kappa: float, Omega: float) -> tuple:
    """Characteristic amplitude rates of the Lorentzian-density quadratic.

    Roots of (s + kappa)(s + delta) + Omega^2 = 0 written as
    [-2(delta + kappa) +/- sqrt((2 delta - 2 kappa)^2 - 16 Omega^2)]/4
    with kappa the cavity amplitude half-width and delta the HWHM.  The
    branch puts the non-negative imaginary part on the first root.
    """
    if delta < 0.0 or kappa < 0.0 or Omega < 0.0:
        raise ValueError("delta, kappa, Omega must be non-negative")
    root = np.sqrt(complex((2.0 * delta - 2.0 * kappa) ** 2 - 16.0 * Omega ** 2))
    g1 = (-2.0 * (delta + kappa) + root) / 4.0
    g2 = (-2.0 * (delta + kappa) - root) / 4.0
    return complex(g1), complex(g2)


def _refined_peaks(t: np.ndarray, y: np.ndarray, prominence: float):
    """Local maxima with parabolic sub-sample refinement of time and height."""
    idx, _ = find_peaks(y, prominence=prominence)
    if len(idx) == 0:
        return np.array([]), np.array([])
    times = []
    heights = []
    for i in idx:
        denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
        if denom < 0.0:
            shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
            dt = t[i + 1] - t[i]
            times.append(t[i] + shift * dt)
            heights.append(y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift)
        else:
            times.append(t[i])
            heights.append(y[i])
    return np.array(times), np.array(heights)


def extract_decay_rate(traj: CavityTrajectory, t_fit_start: float, *,
                       floor_rel: float = 1e-6,
                       direct_fit_decade: float = 1e-3) -> float:
    """Intensity decay rate after switch-off at ``t_fit_start`` (rad/ns).

    Least-squares slope of log peak heights of |A|^2 against peak times
    when at least three usable oscillation maxima exist; otherwise a
    direct log-linear fit of |A|^2 from the switch-off down to a
    relative decay of ``direct_fit_decade``.
    """
    t = traj.times()
    intensity = traj.intensity()
    i0 = int(np.searchsorted(t, t_fit_start))
    if i0 >= len(t) - 2:
        raise InsufficientDecay("fit window starts at the end of the trajectory")
    ref = float(intensity[i0])
    if ref <= 0.0:
        ref = float(np.max(intensity[i0:]))
    if ref <= 0.0:
        raise InsufficientDecay("no signal after the fit start")
    pk_t, pk_y = _refined_peaks(t[i0:], intensity[i0:], prominence=1e-7 * ref)
    usable = pk_y >= floor_rel * ref
    if np.count_nonzero(usable) >= 3:
        slope = np.polyfit(pk_t[usable], np.log(pk_y[usable]), 1)[0]
        return float(-slope)
    # non-oscillatory regime: fit the intensity itself over three decades
    below = np.flatnonzero(intensity[i0:] < direct_fit_decade * ref)
    j_end = i0 + (below[0] if len(below) else len(intensity) - i0 - 1)
    window = slice(i0, max(j_end, i0 + 1) + 1)
    sel = intensity[window] > floor_rel * ref
    if np.count_nonzero(sel) < 3:
        raise InsufficientDecay("fewer than three usable samples above the floor")
    slope = np.polyfit(t[window][sel], np.log(intensity[window][sel]), 1)[0]
    return float(-slope)


def extract_rabi(traj: CavityTrajectory, *, window: tuple = None,
                 prominence_rel: float = 1e-3) -> tuple:
    """(omega_r, t_r) from the spacing of |A|^2 maxima.

    Peak gaps in |A|^2 of a two-mode beat come in two families: the
    oscillation period itself where the amplitude swings through zero
    (every extremum of A is a maximum of A^2, e.g. during free decay),
    and twice that where it rides on a steady offset (crests only).
    Plateau and switch-off gaps add isolated outliers.  The period is
    therefore the mean of the smallest self-consistent spacing cluster;
    peak positions are refined parabolically before differencing.
    """
    t = traj.times()
    intensity = traj.intensity()
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, intensity = t[sel], intensity[sel]
    if len(t) < 5:
        raise NoOscillation("window too short")
    pk_t, _ = _refined_peaks(t, intensity, prominence=prominence_rel * np.max(intensity))
    if len(pk_t) < 3:
        raise NoOscillation(f"found {len(pk_t)} maxima, need at least 3")
    spacings = np.sort(np.diff(pk_t))
    clusters = []
    start = 0
    for i in range(1, len(spacings) + 1):
        if i == len(spacings) or spacings[i] > 1.3 * spacings[start]:
            clusters.append(spacings[start:i])
            start = i
    for cluster in clusters:
        if len(cluster) >= 2:
            t_r = float(np.mean(cluster))
            return 2.0 * np.pi / t_r, t_r
    t_r = float(np.median(spacings))
    return 2.0 * np.pi / t_r, t_r


def enhancement_factor(traj_pulsed: CavityTrajectory, traj_cw: CavityTrajectory,
                       *, pulsed_window: tuple = None, cw_window: tuple = None,
                       peak_tol: float = 0.05) -> float:
    """Late-time pulsed peak |A|^2 over the constant-drive steady |A|^2.

    The constant-drive trace must be steady over its reference window;
    the pulsed trace must have settled into steady oscillation (its
    last three qualifying peaks within ``peak_tol`` of each other).
    """
    t_cw = traj_cw.times()
    i_cw = traj_cw.intensity()
    if cw_window is None:
        cw_window = (t_cw[0] + 0.9 * (t_cw[-1] - t_cw[0]), t_cw[-1])
    sel = (t_cw >= cw_window[0]) & (t_cw <= cw_window[1])
    ref = i_cw[sel]
    if len(ref) < 2 or np.mean(ref) <= 0.0:
        raise NotSteady("empty or dark steady-state window")
    steady = float(np.mean(ref))
    if (np.max(ref) - np.min(ref)) > 0.05 * steady:
        raise NotSteady("constant-drive trace is not steady over the reference window")

    t_p = traj_pulsed.times()
    i_p = traj_pulsed.intensity()
    if pulsed_window is not None:
        sel = (t_p >= pulsed_window[0]) & (t_p <= pulsed_window[1])
        t_p, i_p = t_p[sel], i_p[sel]
    pk_t, pk_y = _refined_peaks(t_p, i_p, prominence=1e-3 * np.max(i_p))
    if len(pk_y) == 0:
        # flat drive compared against itself: no oscillation, unit gain
        return float(np.mean(i_p) / steady)
    qualifying = pk_y[pk_y >= 0.5 * np.max(pk_y)]
    if len(qualifying) < 3:
        raise NotSteady("fewer than three comparable late-time peaks")
    last3 = qualifying[-3:]
    if (np.max(last3) - np.min(last3)) > peak_tol * np.mean(last3):
        raise NotSteady("late-time peaks still drifting")
    return float(np.mean(last3) / steady)
