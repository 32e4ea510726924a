"""Run configurations, batch execution and CSV/JSON emission.

Configuration files carry user-friendly units (ordinary MHz for
frequencies and rates, ns for times); everything is converted to
angular rad/ns once, at load time.  Scans fan points out over a
process pool; each point is computed independently of scheduling and
results are reassembled in axis order, so output is identical for any
worker count.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from .analysis import (enhancement_factor, extract_decay_rate, extract_rabi,
                       find_poles, gamma_asymptotic, gamma_lorentzian,
                       gamma_markov)
from .drive import DriveProtocol, phase_switched_train, rectangular
from .errors import (ParseError, SpinCavityError, ValidationError)
from .model import (SystemParams, TimeGrid, angular_to_mhz, mhz_to_angular,
                    validate)
from .oracle import build_ensemble, integrate, total_excitation
from .spectral import SpectralDensity
from .volterra import KernelTable, kernel_table, solve

SCAN_VARIABLES = ("omega_p", "Omega", "tau")


@dataclass(frozen=True)
class ScanSpec:
    variable: str
    values: tuple


@dataclass(frozen=True)
class OracleSpec:
    n_spins: int
    dt_ns: float
    t_end_ns: float
    stratified: bool = True


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    density: SpectralDensity
    protocol_spec: dict
    grid: TimeGrid
    scan: ScanSpec
    output_path: str
    output_format: str
    seed: int
    workers: int
    oracle: OracleSpec
    steady_window_ns: float
    traj_stride: int
    reproducible: bool = False


@dataclass(frozen=True)
class ScanResult:
    variable: str
    columns: tuple
    rows: tuple


def _fail(field: str, message: str):
    raise ValidationError(f"{field}: {message}")


def _get(section: dict, field: str, kind, context: str, required=True, default=None):
    if field not in section:
        if required:
            _fail(f"{context}.{field}", "missing required field")
        return default
    value = section[field]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return int(value)
    if kind is str and isinstance(value, str):
        return value
    if kind is bool and isinstance(value, bool):
        return value
    _fail(f"{context}.{field}", f"expected {kind.__name__}, got {value!r}")


def _bundled_config_path(name: str):
    candidate = resources.files("spincavity") / "configs" / name
    return candidate if candidate.is_file() else None


def load_config(path: str) -> RunConfig:
    """Parse and validate a run configuration (file path or bundled name)."""
    if os.path.exists(path):
        text = open(path).read()
    else:
        bundled = _bundled_config_path(os.path.basename(path))
        if bundled is None:
            raise ParseError(f"no such config file or bundled config: {path}")
        text = bundled.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be an object")

    psec = raw.get("params")
    if not isinstance(psec, dict):
        _fail("params", "missing section")
    params = SystemParams(
        omega_c=mhz_to_angular(_get(psec, "omega_c_mhz", float, "params")),
        omega_s=mhz_to_angular(_get(psec, "omega_s_mhz", float, "params")),
        omega_p=mhz_to_angular(_get(psec, "omega_p_mhz", float, "params")),
        kappa=mhz_to_angular(_get(psec, "kappa_mhz", float, "params")),
        gamma=mhz_to_angular(_get(psec, "gamma_mhz", float, "params")),
        Omega=mhz_to_angular(_get(psec, "Omega_mhz", float, "params")),
    )
    try:
        validate(params)
    except SpinCavityError as exc:
        _fail("params", str(exc))

    dsec = raw.get("density")
    if not isinstance(dsec, dict):
        _fail("density", "missing section")
    kind = _get(dsec, "kind", str, "density")
    fwhm = mhz_to_angular(_get(dsec, "fwhm_mhz", float, "density"))
    try:
        if kind == "q_gaussian":
            q = _get(dsec, "q", float, "density")
            density = SpectralDensity.q_gaussian(params.omega_s, q=q, fwhm=fwhm)
        elif kind == "lorentzian":
            density = SpectralDensity.lorentzian(params.omega_s, fwhm=fwhm)
        elif kind == "gaussian":
            density = SpectralDensity.gaussian(params.omega_s, fwhm=fwhm)
        else:
            _fail("density.kind", f"unknown kind {kind!r}")
    except ValueError as exc:
        _fail("density", str(exc))

    gsec = raw.get("grid")
    if not isinstance(gsec, dict):
        _fail("grid", "missing section")
    try:
        grid = TimeGrid(
            t_start=_get(gsec, "t_start_ns", float, "grid", required=False, default=0.0),
            t_end=_get(gsec, "t_end_ns", float, "grid"),
            dt=_get(gsec, "dt_ns", float, "grid"),
        )
    except ValueError as exc:
        _fail("grid", str(exc))

    prsec = raw.get("protocol")
    if not isinstance(prsec, dict):
        _fail("protocol", "missing section")
    ptype = _get(prsec, "type", str, "protocol")
    eta = complex(_get(prsec, "eta_re", float, "protocol", required=False, default=1.0),
                  _get(prsec, "eta_im", float, "protocol", required=False, default=0.0))
    if ptype == "rectangular":
        spec = {"type": ptype, "eta": eta,
                "t_on": _get(prsec, "t_on_ns", float, "protocol"),
                "t_off": _get(prsec, "t_off_ns", float, "protocol")}
    elif ptype == "phase_switched_train":
        spec = {"type": ptype, "eta": eta,
                "tau": _get(prsec, "tau_ns", float, "protocol"),
                "n_pulses": _get(prsec, "n_pulses", int, "protocol")}
    else:
        _fail("protocol.type", f"unknown type {ptype!r}")
    try:
        build_protocol(spec, grid.t_end)
    except SpinCavityError as exc:
        _fail("protocol", str(exc))

    scan = None
    ssec = raw.get("scan")
    if ssec is not None:
        if not isinstance(ssec, dict):
            _fail("scan", "must be an object")
        variable = _get(ssec, "variable", str, "scan")
        if variable not in SCAN_VARIABLES:
            _fail("scan.variable", f"must be one of {SCAN_VARIABLES}")
        if "values" in ssec:
            values = ssec["values"]
            if (not isinstance(values, list) or len(values) < 2
                    or not all(isinstance(v, (int, float)) for v in values)):
                _fail("scan.values", "need a list of at least 2 numbers")
            values = tuple(float(v) for v in values)
        else:
            lo = _get(ssec, "min", float, "scan")
            hi = _get(ssec, "max", float, "scan")
            steps = _get(ssec, "steps", int, "scan")
            if steps < 2:
                _fail("scan.steps", f"need at least 2 steps, got {steps}")
            if not hi > lo:
                _fail("scan.max", "must exceed scan.min")
            values = tuple(float(v) for v in np.linspace(lo, hi, steps))
        if variable == "tau" and spec["type"] != "phase_switched_train":
            _fail("scan.variable", "tau scan needs a phase_switched_train protocol")
        scan = ScanSpec(variable=variable, values=values)

    osec = raw.get("output", {})
    if not isinstance(osec, dict):
        _fail("output", "must be an object")
    output_path = _get(osec, "path", str, "output", required=False, default="out.csv")
    output_format = _get(osec, "format", str, "output", required=False, default="csv")
    if output_format not in ("csv", "json", "both"):
        _fail("output.format", f"must be csv, json or both, got {output_format!r}")

    orsec = raw.get("oracle")
    oracle = None
    if orsec is not None:
        if not isinstance(orsec, dict):
            _fail("oracle", "must be an object")
        oracle = OracleSpec(
            n_spins=_get(orsec, "n_spins", int, "oracle"),
            dt_ns=_get(orsec, "dt_ns", float, "oracle"),
            t_end_ns=_get(orsec, "t_end_ns", float, "oracle"),
            stratified=_get(orsec, "stratified", bool, "oracle",
                            required=False, default=True),
        )
        if oracle.n_spins < 1:
            _fail("oracle.n_spins", "must be positive")

    return RunConfig(
        params=params,
        density=density,
        protocol_spec=spec,
        grid=grid,
        scan=scan,
        output_path=output_path,
        output_format=output_format,
        seed=_get(raw, "seed", int, "config", required=False, default=1),
        workers=_get(raw, "workers", int, "config", required=False, default=1),
        oracle=oracle,
        steady_window_ns=_get(raw, "steady_window_ns", float, "config",
                              required=False, default=200.0),
        traj_stride=_get(raw, "traj_stride", int, "config", required=False, default=0),
    )


def build_protocol(spec: dict, t_end: float) -> DriveProtocol:
    if spec["type"] == "rectangular":
        return rectangular(spec["eta"], spec["t_on"], spec["t_off"], t_end)
    return phase_switched_train(spec["eta"], spec["tau"], spec["n_pulses"], t_end)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_csv(path: str, columns, rows, reproducible: bool):
    lines = []
    if not reproducible:
        lines.append("# generated " + datetime.now(timezone.utc).isoformat())
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, columns, rows, reproducible: bool):
    doc = {"columns": list(columns), "rows": [[row[c] for c in columns] for row in rows]}
    if not reproducible:
        doc["generated"] = datetime.now(timezone.utc).isoformat()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _emit(config: RunConfig, out_path: str, columns, rows):
    if config.output_format in ("csv", "both"):
        _write_csv(out_path, columns, rows, config.reproducible)
    if config.output_format in ("json", "both"):
        json_path = out_path if config.output_format == "json" else out_path + ".json"
        _write_json(json_path, columns, rows, config.reproducible)


def run_simulate(config: RunConfig, out_path: str = None):
    """Single trajectory run; emits t_ns, re_A, im_A, abs_A2, eta_re, eta_im."""
    if config.scan is not None:
        raise ValidationError("scan: simulate needs a config without a scan axis")
    protocol = build_protocol(config.protocol_spec, config.grid.t_end)
    traj = solve(config.params, config.density, protocol, config.grid)
    times = traj.times()
    eta_vals = np.zeros(len(times), dtype=complex)
    for a, b, eta in protocol.segments:
        sel = (times >= a) & (times < b)
        eta_vals[sel] = eta
    eta_vals[-1] = protocol.segments[-1][2]
    columns = ("t_ns", "re_A", "im_A", "abs_A2", "eta_re", "eta_im")
    rows = [
        {"t_ns": float(t), "re_A": float(a.real), "im_A": float(a.imag),
         "abs_A2": float(abs(a) ** 2), "eta_re": float(e.real), "eta_im": float(e.imag)}
        for t, a, e in zip(times, traj.amplitude, eta_vals)
    ]
    _emit(config, out_path or config.output_path, columns, rows)
    return traj


def _scan_point(task):
    """One scan point; module-level so process pools can pickle it."""
    (index, variable, value, params, density, protocol_spec, grid,
     steady_window, kernel) = task
    row = {_axis_column(variable): value, "status": "ok"}
    try:
        if variable == "omega_p":
            point_params = replace(params, omega_p=mhz_to_angular(value))
            protocol = build_protocol(protocol_spec, grid.t_end)
            traj = solve(point_params, density, protocol, grid, kernel=kernel)
            t = traj.times()
            sel = t >= grid.t_end - steady_window
            row["steady_abs_A2"] = float(np.mean(traj.intensity()[sel]))
        elif variable == "Omega":
            point_params = replace(params, Omega=mhz_to_angular(value))
            protocol = build_protocol(protocol_spec, grid.t_end)
            traj = solve(point_params, density, protocol, grid, kernel=kernel)
            gamma = extract_decay_rate(traj, protocol_spec["t_off"])
            row["gamma_mhz"] = angular_to_mhz(gamma)
            row.update(_theory_rates(point_params, density))
        else:  # tau
            spec = dict(protocol_spec)
            spec["tau"] = value
            protocol = build_protocol(spec, grid.t_end)
            traj = solve(params, density, protocol, grid, kernel=kernel)
            drive_end = value * spec["n_pulses"]
            row["late_peak_abs_A2"] = _late_peak_level(traj, (0.0, drive_end))
    except SpinCavityError as exc:
        row["status"] = f"error:{type(exc).__name__}"
    return index, row


def _axis_column(variable: str) -> str:
    return {"omega_p": "omega_p_mhz", "Omega": "Omega_mhz", "tau": "tau_ns"}[variable]


def _theory_rates(params: SystemParams, density: SpectralDensity) -> dict:
    delta_lor = 0.5 * density.fwhm
    g1, g2 = gamma_lorentzian(delta_lor, params.kappa, params.Omega)
    return {
        "gamma_markov_mhz": angular_to_mhz(gamma_markov(params, density)),
        "gamma_lorentzian_re1_mhz": angular_to_mhz(g1.real),
        "gamma_lorentzian_re2_mhz": angular_to_mhz(g2.real),
        "gamma_asymptotic_mhz": angular_to_mhz(gamma_asymptotic(params, density)),
    }


def _late_peak_level(traj, drive_window) -> float:
    """Mean of the last three qualifying |A|^2 peaks inside the drive window."""
    from .analysis import _refined_peaks
    t = traj.times()
    intensity = traj.intensity()
    sel = (t >= drive_window[0]) & (t <= drive_window[1])
    pk_t, pk_y = _refined_peaks(t[sel], intensity[sel],
                                prominence=1e-3 * np.max(intensity[sel]))
    if len(pk_y) == 0:
        return float(np.max(intensity[sel]))
    qualifying = pk_y[pk_y >= 0.5 * np.max(pk_y)]
    return float(np.mean(qualifying[-3:]))


_SCAN_COLUMNS = {
    "omega_p": ("omega_p_mhz", "steady_abs_A2", "status"),
    "Omega": ("Omega_mhz", "gamma_mhz", "gamma_markov_mhz",
              "gamma_lorentzian_re1_mhz", "gamma_lorentzian_re2_mhz",
              "gamma_asymptotic_mhz", "status"),
    "tau": ("tau_ns", "late_peak_abs_A2", "status"),
}


def _shared_kernel(config: RunConfig) -> KernelTable:
    """Kernel reusable across scan points (None when it varies per point).

    The unit-coupling kernel is independent of the coupling strength, so
    an Omega scan shares one table built at the longest segment; a tau
    scan likewise after sizing the table for the worst point.  A probe
    scan changes the frame and must rebuild per point.
    """
    if config.scan.variable == "omega_p":
        return None
    if config.scan.variable == "Omega":
        protocol = build_protocol(config.protocol_spec, config.grid.t_end)
        bounds = [b for b in protocol.boundaries()
                  if config.grid.t_start <= b <= config.grid.t_end]
        bounds = sorted(set(bounds + [config.grid.t_start, config.grid.t_end]))
        horizon = max(b2 - b1 for b1, b2 in zip(bounds, bounds[1:]))
        return kernel_table(config.params, config.density, config.grid.dt, horizon)
    horizon = 0.0
    for value in config.scan.values:
        drive_end = value * config.protocol_spec["n_pulses"]
        horizon = max(horizon, value, config.grid.t_end - drive_end)
    return kernel_table(config.params, config.density, config.grid.dt, horizon)


def run_scan(config: RunConfig, out_path: str = None) -> ScanResult:
    """Parameter sweep over the configured axis; emits one row per point."""
    if config.scan is None:
        raise ValidationError("scan: config has no scan axis")
    variable = config.scan.variable
    kernel = _shared_kernel(config)
    if variable == "Omega":
        # scaled per point from the shared unit table via the cache
        kernel = None
    tasks = [
        (i, variable, value, config.params, config.density, config.protocol_spec,
         config.grid, config.steady_window_ns, kernel)
        for i, value in enumerate(config.scan.values)
    ]
    rows = [None] * len(tasks)
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for index, row in pool.map(_scan_point, tasks):
                rows[index] = row
    else:
        for task in tasks:
            index, row = _scan_point(task)
            rows[index] = row
    columns = _SCAN_COLUMNS[variable]
    full_rows = []
    for row in rows:
        full = {c: row.get(c, float("nan")) for c in columns}
        full_rows.append(full)
    _emit(config, out_path or config.output_path, columns, full_rows)
    if config.traj_stride > 0:
        _emit_trajectory_map(config, out_path or config.output_path)
    return ScanResult(variable=variable, columns=columns, rows=tuple(full_rows))


def _emit_trajectory_map(config: RunConfig, out_path: str):
    """Long-format |A(t)|^2 map over (axis value, time), downsampled."""
    variable = config.scan.variable
    axis_col = _axis_column(variable)
    columns = (axis_col, "t_ns", "abs_A2")
    rows = []
    kernel = _shared_kernel(config)
    if variable == "Omega":
        kernel = None
    for value in config.scan.values:
        params, spec = config.params, dict(config.protocol_spec)
        if variable == "omega_p":
            params = replace(params, omega_p=mhz_to_angular(value))
        elif variable == "Omega":
            params = replace(params, Omega=mhz_to_angular(value))
        else:
            spec["tau"] = value
        protocol = build_protocol(spec, config.grid.t_end)
        traj = solve(params, config.density, protocol, config.grid, kernel=kernel)
        t = traj.times()[::config.traj_stride]
        intensity = traj.intensity()[::config.traj_stride]
        rows.extend({axis_col: value, "t_ns": float(tt), "abs_A2": float(ii)}
                    for tt, ii in zip(t, intensity))
    base, ext = os.path.splitext(out_path)
    _emit(config, f"{base}.traj{ext or '.csv'}", columns, rows)


def run_validate(config: RunConfig, *, l2_threshold: float = 2e-2,
                 drift_threshold: float = 1e-8) -> dict:
    """Cross-check the integral-equation solver against the N-spin system.

    Solves the configured scenario both ways and reports the relative L2
    distance of the complex trajectories, plus the excitation-conservation
    drift of a lossless variant (kappa = gamma = 0, drive cut after 10 ns).
    """
    if config.oracle is None:
        raise ValidationError("oracle: validate needs an oracle section")
    spec = config.oracle
    ratio = config.grid.dt / spec.dt_ns
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ValidationError("oracle.dt_ns: must divide the grid dt")
    ratio = int(round(ratio))
    grid_v = TimeGrid(config.grid.t_start, spec.t_end_ns, config.grid.dt)
    grid_o = TimeGrid(config.grid.t_start, spec.t_end_ns, spec.dt_ns)
    protocol = build_protocol(config.protocol_spec, config.grid.t_end)
    traj_v = solve(config.params, config.density, protocol, grid_v)
    ensemble = build_ensemble(config.density, spec.n_spins, config.params.Omega,
                              config.seed, stratified=spec.stratified)
    traj_o, _ = integrate(ensemble, config.params, protocol, grid_o)
    a_o = traj_o.amplitude[::ratio]
    a_v = traj_v.amplitude
    l2 = float(np.linalg.norm(a_v - a_o) / np.linalg.norm(a_v))

    lossless = replace(config.params, kappa=0.0, gamma=0.0)
    span = 50.0
    n_cons = min(spec.n_spins, 1000)
    ens = build_ensemble(config.density, n_cons, config.params.Omega,
                         config.seed, stratified=spec.stratified)
    state = None
    levels = []
    for k in range(10):
        drive = rectangular(1.0, 0.0, 10.0, span) if k == 0 else _zero_drive(span)
        _, state = integrate(ens, lossless, drive, TimeGrid(0.0, span, spec.dt_ns),
                             initial=state)
        levels.append(total_excitation(state))
    levels = np.array(levels)
    drift = float(np.max(np.abs(levels - levels[0])) / levels[0])

    return {
        "n_spins": spec.n_spins,
        "stratified": spec.stratified,
        "l2_distance": l2,
        "l2_threshold": l2_threshold,
        "l2_pass": l2 < l2_threshold,
        "conservation_drift": drift,
        "drift_threshold": drift_threshold,
        "conservation_pass": drift < drift_threshold,
    }


def _zero_drive(t_end: float) -> DriveProtocol:
    return DriveProtocol(((0.0, t_end, 0.0j),))


def run_poles(config: RunConfig) -> dict:
    """Pole pair and closed-form rates for the configured system."""
    pair = find_poles(config.params, config.density)
    delta_lor = 0.5 * config.density.fwhm
    g1, g2 = gamma_lorentzian(delta_lor, config.params.kappa, config.params.Omega)
    return {
        "s_plus_re_mhz": angular_to_mhz(pair.s_plus.real),
        "s_plus_im_mhz": angular_to_mhz(pair.s_plus.imag),
        "s_minus_re_mhz": angular_to_mhz(pair.s_minus.real),
        "s_minus_im_mhz": angular_to_mhz(pair.s_minus.imag),
        "gamma_mhz": angular_to_mhz(pair.decay_rates[0]),
        "rabi_splitting_mhz": angular_to_mhz(pair.rabi_splitting),
        "rabi_period_ns": 2.0 * np.pi / pair.rabi_splitting,
        "gamma_markov_mhz": angular_to_mhz(gamma_markov(config.params, config.density)),
        "gamma_asymptotic_mhz": angular_to_mhz(
            gamma_asymptotic(config.params, config.density)),
        "gamma_lorentzian_re1_mhz": angular_to_mhz(g1.real),
        "gamma_lorentzian_re2_mhz": angular_to_mhz(g2.real),
        "residual": pair.residual,
    }
