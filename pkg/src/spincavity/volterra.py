"""Memory-kernel solver for the driven cavity amplitude.

Integrating out the spin continuum turns the mean-field equations into
a second-kind integral equation for the cavity amplitude,

    A(t) = int_0^t K(t - tau) A(tau) dtau + F(t),

with a convolution kernel

    K(u) = Omega^2 * int d(omega) rho(omega) * g(omega, u),
    g(omega, u) = [exp(-nu(omega) u) - exp(-kt u)] / (nu(omega) - kt),

where nu(omega) = gamma + i (omega - omega_p) is the complex rate of a
spin at omega and kt = kappa + i (omega_c - omega_p) the complex cavity
rate in the probe frame, and a drive integral

    F(t) = int_0^t eta(tau) exp(-kt (t - tau)) dtau.

Solving this directly over microsecond horizons is quadratic in the
full sample count, so the integration is split at the drive-segment
boundaries T_n.  Inside one segment the convolution only reaches back
to T_n; everything earlier enters through the boundary value A(T_n)
and a per-frequency memory integral

    I_n(omega) = int_0^{T_n} exp(-nu(omega) (T_n - tau)) A(tau) dtau,

updated recursively segment by segment.  With trapezoidal product
integration on a uniform lattice and shared frequency nodes the split
is an exact reformulation, not an approximation.

The frequency integral uses composite Gauss-Legendre panels over the
density's truncation window, doubling the panel count until the kernel
table stops changing.  A Lorentzian density is collapsed analytically
to a single complex node omega_s - i*delta, which reproduces its
exponential kernel exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .drive import DriveProtocol
from .errors import NonFinite, OutOfRange, QuadratureFailure, StepTooLarge
from .model import CavityTrajectory, SystemParams, TimeGrid, validate
from .spectral import (DEFAULT_TRUNCATION_EPS, LORENTZIAN, SpectralDensity,
                       density_at, support_window)

_GL_ORDER = 8
_INITIAL_PANELS = 64
_MAX_DOUBLINGS = 12
_KERNEL_TOL = 1e-9
_RATE_DEGENERACY = 1e-12

_kernel_cache: dict = {}


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Kernel samples K(m*dt) for m = 0..M plus the frequency nodes used."""

    dt: float
    values: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    params_hash: str

    @property
    def horizon(self) -> float:
        return self.dt * (len(self.values) - 1)


@dataclass(frozen=True, eq=False)
class MemoryState:
    """Per-node ensemble memory I_n and the segment-boundary amplitude."""

    nodes: np.ndarray
    weights: np.ndarray
    i_values: np.ndarray
    a_last: complex

    @classmethod
    def initial(cls, nodes: np.ndarray, weights: np.ndarray) -> "MemoryState":
        return cls(nodes, weights, np.zeros(len(nodes), dtype=complex), 0.0j)


def _params_hash(params: SystemParams, rho: SpectralDensity, dt: float,
                 n_values: int) -> str:
    text = repr((params, rho, dt, n_values))
    return hashlib.sha1(text.encode()).hexdigest()[:16]


def _gl_nodes(lo: float, hi: float, n_panels: int):
    x, w = leggauss(_GL_ORDER)
    edges = np.linspace(lo, hi, n_panels + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (centers[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def frequency_grid(rho: SpectralDensity, n_panels: int,
                   eps: float = DEFAULT_TRUNCATION_EPS):
    """Quadrature nodes and density-weighted weights for the kernel integral."""
    lo, hi = support_window(rho, eps)
    nodes, glw = _gl_nodes(lo, hi, n_panels)
    return nodes.astype(complex), glw * density_at(rho, nodes)


def lorentzian_node(rho: SpectralDensity):
    """Exact one-node representation of a Lorentzian density.

    The Lorentzian frequency integral closes analytically onto the pole
    at omega_s - i*delta, so kernel and memory sums over this single
    complex node reproduce the continuum without quadrature error.
    """
    if rho.kind != LORENTZIAN:
        raise ValueError("exact node representation only exists for the Lorentzian kind")
    return (np.array([rho.omega_s - 1j * rho.delta]),
            np.array([1.0 + 0.0j]))


def _spin_rates(params: SystemParams, nodes: np.ndarray) -> np.ndarray:
    return params.gamma + 1j * (nodes - params.omega_p)


def _drive_integral(kt: complex, u: np.ndarray) -> np.ndarray:
    """(1 - exp(-kt*u)) / kt with a series branch for small |kt*u|."""
    u = np.asarray(u, dtype=float)
    z = kt * u
    out = np.empty(u.shape, dtype=complex)
    small = np.abs(z) < 1e-4
    if np.any(~small):
        out[~small] = (1.0 - np.exp(-z[~small])) / kt
    if np.any(small):
        zs = z[small]
        out[small] = u[small] * (1.0 - zs / 2.0 + zs ** 2 / 6.0 - zs ** 3 / 24.0)
    return out


def _kernel_sum_at(params: SystemParams, nodes: np.ndarray, weights: np.ndarray,
                   u: np.ndarray) -> np.ndarray:
    """Unit-coupling kernel sum(w * g(node, u)) evaluated by direct exponentials."""
    kt = params.cavity_rate
    nu = _spin_rates(params, nodes)
    d = nu - kt
    degenerate = np.abs(d) < _RATE_DEGENERACY
    ek = np.exp(-kt * u)
    out = np.zeros(len(u), dtype=complex)
    reg_idx = np.flatnonzero(~degenerate)
    chunk = _node_chunks(len(reg_idx), len(u))
    for start in range(0, len(reg_idx), chunk):
        sel = reg_idx[start:start + chunk]
        c = weights[sel] / d[sel]
        out += np.exp(-np.outer(u, nu[sel])) @ c - c.sum() * ek
    if np.any(degenerate):
        out += weights[degenerate].sum() * (-u * ek)
    return out


def _phase_table(rates: np.ndarray, dt: float, m: int) -> np.ndarray:
    """exp(-rate * j * dt) for j = 0..m as an (m+1, len(rates)) table.

    Built by block doubling (rows [1..2k] from rows [1..k] times row k),
    which keeps every multiply a large contiguous array operation.
    """
    table = np.empty((m + 1, len(rates)), dtype=complex)
    table[0] = 1.0
    if m == 0:
        return table
    table[1] = np.exp(-rates * dt)
    filled = 1
    while filled < m:
        take = min(filled, m - filled)
        np.multiply(table[1:take + 1], table[filled],
                    out=table[filled + 1:filled + 1 + take])
        filled += take
    return table


def _node_chunks(n_nodes: int, m: int) -> int:
    # keep each phase table around 100 MB
    return max(16, min(n_nodes, int(6e6 / max(1, m + 1))))


def _unit_kernel_lattice(params: SystemParams, nodes: np.ndarray,
                         weights: np.ndarray, dt: float, m: int) -> np.ndarray:
    """Unit-coupling kernel on the full lattice, chunked over nodes."""
    kt = params.cavity_rate
    nu = _spin_rates(params, nodes)
    d = nu - kt
    u = dt * np.arange(m + 1)
    ek = np.exp(-kt * u)
    out = np.zeros(m + 1, dtype=complex)
    degenerate = np.abs(d) < _RATE_DEGENERACY
    if np.any(degenerate):
        out += weights[degenerate].sum() * (-u * ek)
    reg_idx = np.flatnonzero(~degenerate)
    chunk = _node_chunks(len(reg_idx), m)
    for start in range(0, len(reg_idx), chunk):
        sel = reg_idx[start:start + chunk]
        c = weights[sel] / d[sel]
        table = _phase_table(nu[sel], dt, m)
        out += table @ c
    out -= (weights[~degenerate] / d[~degenerate]).sum() * ek
    out[0] = 0.0  # exact: g(omega, 0) = 0
    return out


def kernel_table(params: SystemParams, rho: SpectralDensity, dt: float,
                 horizon: float, *, eps: float = DEFAULT_TRUNCATION_EPS,
                 tol: float = _KERNEL_TOL, quadrature: str = "auto",
                 initial_panels: int = _INITIAL_PANELS,
                 use_cache: bool = True) -> KernelTable:
    """Tabulate K(m*dt) for m*dt <= horizon.

    ``quadrature`` is "auto" (exact single node for a Lorentzian,
    Gauss-Legendre panels otherwise) or "gl" to force the panel
    quadrature for any kind.  Panel counts double until the sampled
    kernel changes by less than ``tol`` relative to its peak; the check
    runs on a probe sub-lattice that includes the slowest-converging
    (largest) time argument, then the full table is built once.
    """
    validate(params)
    if dt <= 0.0 or horizon <= 0.0:
        raise ValueError("dt and horizon must be positive")
    m = int(np.floor(horizon / dt + 1e-9))
    key = (params.omega_c, params.omega_p, params.kappa, params.gamma,
           rho, dt, m, eps, tol, quadrature, initial_panels)
    cached = _kernel_cache.get(key) if use_cache else None
    if cached is None:
        if quadrature == "auto" and rho.kind == LORENTZIAN:
            nodes, weights = lorentzian_node(rho)
            values = _unit_kernel_lattice(params, nodes, weights, dt, m)
        else:
            nodes, weights = _converged_nodes(params, rho, dt, m, eps, tol,
                                              initial_panels)
            values = _unit_kernel_lattice(params, nodes, weights, dt, m)
        cached = (values, nodes, weights)
        if use_cache:
            _kernel_cache[key] = cached
    values, nodes, weights = cached
    return KernelTable(
        dt=dt,
        values=params.Omega ** 2 * values,
        nodes=nodes,
        weights=weights,
        params_hash=_params_hash(params, rho, dt, m + 1),
    )


def clear_kernel_cache():
    _kernel_cache.clear()


def _probe_lattice(m: int) -> np.ndarray:
    if m <= 48:
        return np.arange(1, m + 1)
    probes = np.unique(np.round(np.geomspace(1, m, 48)).astype(int))
    return probes


def _converged_nodes(params: SystemParams, rho: SpectralDensity, dt: float,
                     m: int, eps: float, tol: float,
                     initial_panels: int = _INITIAL_PANELS):
    probes = dt * _probe_lattice(m)
    panels = initial_panels
    nodes, weights = frequency_grid(rho, panels, eps)
    ref = _kernel_sum_at(params, nodes, weights, probes)
    for _ in range(_MAX_DOUBLINGS):
        panels *= 2
        nodes, weights = frequency_grid(rho, panels, eps)
        new = _kernel_sum_at(params, nodes, weights, probes)
        scale = np.max(np.abs(new))
        if scale == 0.0 or np.max(np.abs(new - ref)) <= tol * scale:
            return nodes, weights
        ref = new
    raise QuadratureFailure(
        f"kernel quadrature not converged after {_MAX_DOUBLINGS} doublings "
        f"({panels} panels)"
    )


def forcing(params: SystemParams, protocol: DriveProtocol, t) -> complex | np.ndarray:
    """Drive integral F(t) accumulated exactly across segments."""
    kt = params.cavity_rate
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < protocol.t_start - 1e-12) or np.any(ts > protocol.t_end + 1e-12):
        raise OutOfRange("forcing queried outside the protocol span")
    # boundary values at segment starts
    starts = np.array([s[0] for s in protocol.segments])
    f_bound = np.zeros(len(protocol.segments), dtype=complex)
    for k, (a, b, eta) in enumerate(protocol.segments[:-1]):
        du = np.array([b - a])
        f_bound[k + 1] = (f_bound[k] * np.exp(-kt * du)
                          + eta * _drive_integral(kt, du))[0]
    idx = np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(starts) - 1)
    out = np.empty(len(ts), dtype=complex)
    for k in range(len(protocol.segments)):
        sel = idx == k
        if not np.any(sel):
            continue
        a, _, eta = protocol.segments[k]
        du = ts[sel] - a
        out[sel] = f_bound[k] * np.exp(-kt * du) + eta * _drive_integral(kt, du)
    return complex(out[0]) if scalar else out


def advance_memory(state: MemoryState, piece: CavityTrajectory,
                   params: SystemParams) -> MemoryState:
    """Propagate the memory integrals across one completed drive segment.

    ``piece`` must hold the amplitude on exactly one segment, from its
    first to its last lattice point; the update applies the segment
    propagator to the stored integrals and adds the trapezoid integral
    of exp(-nu (T_end - tau)) A(tau) over the segment.
    """
    dt = piece.grid.dt
    m = piece.grid.n_samples - 1
    if m < 1:
        raise ValueError("segment piece needs at least two samples")
    nu = _spin_rates(params, state.nodes)
    span = dt * m
    prop = np.exp(-nu * span)
    w = np.full(m + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    tail = np.exp(-np.outer(span - dt * np.arange(m + 1), nu))
    i_new = prop * state.i_values + (w * piece.amplitude) @ tail
    return MemoryState(state.nodes, state.weights, i_new,
                       complex(piece.amplitude[-1]))


def _segment_indices(protocol: DriveProtocol, grid: TimeGrid):
    """Protocol segments snapped to lattice indices and clipped to the grid."""
    n = grid.n_samples
    segs = []
    for a, b, eta in protocol.segments:
        ia = int(round((a - grid.t_start) / grid.dt))
        ib = int(round((b - grid.t_start) / grid.dt))
        ia, ib = max(ia, 0), min(ib, n - 1)
        if ib > ia:
            segs.append((ia, ib, eta))
    if not segs or segs[0][0] != 0 or segs[-1][1] != n - 1:
        raise OutOfRange("protocol does not cover the time grid")
    return segs


def solve(params: SystemParams, rho: SpectralDensity, protocol: DriveProtocol,
          grid: TimeGrid, *, kernel: KernelTable = None, use_cache: bool = True,
          eps: float = DEFAULT_TRUNCATION_EPS,
          quad_tol: float = _KERNEL_TOL) -> CavityTrajectory:
    """Cavity amplitude on the grid from empty-cavity, ground-state start.

    Product integration with trapezoidal weights inside each drive
    segment; the ensemble memory crosses segment boundaries through the
    recursive per-node integrals, so cost stays quadratic only in the
    longest segment.
    """
    validate(params)
    if params.Omega * grid.dt >= 0.05:
        raise StepTooLarge(
            f"Omega*dt = {params.Omega * grid.dt:.3f} rad >= 0.05; refine the grid"
        )
    if protocol.t_start > grid.t_start + 1e-9:
        raise OutOfRange("protocol must start at (or before) the grid origin")
    times = grid.times()
    if protocol.t_end < times[-1] - 1e-9:
        raise OutOfRange("protocol must cover the time grid")
    segs = _segment_indices(protocol, grid)
    dt = grid.dt
    m_max = max(ib - ia for ia, ib, _ in segs)
    if kernel is None:
        kernel = kernel_table(params, rho, dt, m_max * dt, eps=eps, tol=quad_tol,
                              use_cache=use_cache)
    else:
        if abs(kernel.dt - dt) > 1e-12 or len(kernel.values) < m_max + 1:
            raise ValueError("supplied kernel table does not match grid/segments")
    kv = kernel.values
    nodes, weights = kernel.nodes, kernel.weights
    kt = params.cavity_rate
    nu = _spin_rates(params, nodes)
    d = nu - kt
    degenerate = np.abs(d) < _RATE_DEGENERACY
    reg = ~degenerate

    amp = np.zeros(grid.n_samples, dtype=complex)
    mem_i = np.zeros(len(nodes), dtype=complex)
    omega2 = params.Omega ** 2
    mem_term = None  # memory contribution to F for the upcoming segment

    for seg_pos, (ia, ib, eta) in enumerate(segs):
        mseg = ib - ia
        u = dt * np.arange(mseg + 1)
        ek = np.exp(-kt * u)
        f_seg = amp[ia] * ek + eta * _drive_integral(kt, u)
        if mem_term is not None:
            f_seg += omega2 * mem_term

        a_loc = np.empty(mseg + 1, dtype=complex)
        a_loc[0] = amp[ia]
        if omega2 == 0.0:
            a_loc[1:] = f_seg[1:]
        else:
            krev = kv[:mseg + 1][::-1].copy()
            half_k = 0.5 * kv
            for m in range(1, mseg + 1):
                s = half_k[m] * a_loc[0]
                if m >= 2:
                    s += np.dot(a_loc[1:m], krev[mseg - m + 1:mseg])
                a_loc[m] = dt * s + f_seg[m]
        if not np.all(np.isfinite(a_loc.view(float))):
            raise NonFinite(f"divergence inside segment {seg_pos}")
        amp[ia:ib + 1] = a_loc

        last = seg_pos == len(segs) - 1
        if last or omega2 == 0.0 or len(nodes) == 0:
            mem_term = None
            continue

        # One fused pass per chunk: advance the memory integrals across the
        # segment just solved, then accumulate their forcing contribution
        # g(omega, u) = [exp(-nu u) - exp(-kt u)]/(nu - kt) for the next one.
        next_m = segs[seg_pos + 1][1] - segs[seg_pos + 1][0]
        u_next = dt * np.arange(next_m + 1)
        ek_next = np.exp(-kt * u_next)
        mem_term = np.zeros(next_m + 1, dtype=complex)
        deg_weight = 0.0j
        w_trap = np.full(mseg + 1, dt)
        w_trap[0] = w_trap[-1] = 0.5 * dt
        aw_rev = (w_trap * a_loc)[::-1].copy()
        rows = max(mseg, next_m)
        chunk = _node_chunks(len(nodes), rows)
        for start in range(0, len(nodes), chunk):
            sl = slice(start, min(start + chunk, len(nodes)))
            table = _phase_table(nu[sl], dt, rows)
            mem_i[sl] = table[mseg] * mem_i[sl] + aw_rev @ table[:mseg + 1]
            q = np.where(reg[sl], weights[sl] * mem_i[sl], 0.0)
            q /= np.where(reg[sl], d[sl], 1.0)
            mem_term += table[:next_m + 1] @ q - q.sum() * ek_next
            deg_weight += np.sum(weights[sl] * mem_i[sl] * degenerate[sl])
        if deg_weight != 0.0:
            mem_term += deg_weight * (-u_next * ek_next)

    return CavityTrajectory(grid=grid, amplitude=amp)
