"""Experiment orchestration: ramps, phase diagrams, seed ensembles.

A run is described by a flat key = value config (SI units, same format as
the parameter files; unknown keys are a hard error), executes one of the
engines, and persists everything into one output directory:

    config.resolved     exact config used, defaults expanded
    manifest.json       package version, git hash, wall times
    *.csv / *.fld       data files in the formats declared per engine

Determinism contract: for a fixed (config, seed) the data files are
byte-identical across runs on one platform.  Excluded by construction:
manifest.json and the wall_time_s column of sweep tables, which exist to
record timings.  Sweep points run in a worker pool; each completed point is
persisted immediately (a killed sweep loses at most the in-flight point)
and the merged table is written in point order, independent of completion
order.
"""

import json
import math
import os
import platform
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields as dc_fields

import numpy as np
import scipy
from scipy.stats import binomtest

from . import __version__
from .constants import HBAR
from .params import (ExperimentParams, ParameterError, derive,
                     parse_key_value_text, params_from_mapping, _PARAM_KEYS)
from .grid import Grid2D, save_field
from .gpe import (CondensateSim, PowerRamp, EtaRamp, detect_threshold,
                  oscillation_metric)
from . import dicke
from .boundary import thomas_fermi, boundary_curve, boundary_table_csv

_PARAM_KEY_SET = set(_PARAM_KEYS)


class ConfigError(ParameterError):
    """Invalid run configuration."""


class EngineError(RuntimeError):
    """An engine failed; the message carries the run context."""


ENGINES = ("gpe", "dicke-exact", "dicke-semiclassical", "boundary")

# every config key beyond the embedded experiment parameters:
# (name, type, default) -- types: f float, i int, b bool, lf float list
_RUN_KEYS = [
    ("engine", "s", "gpe"),
    # grid (extents in units of 1/k)
    ("grid_extent_x", "f", 160.0),
    ("grid_extent_z", "f", 160.0),
    ("grid_points_x", "i", 256),
    ("grid_points_z", "i", 256),
    ("envelopes", "b", True),
    ("trap", "b", True),
    ("pump_lattice", "b", True),
    ("sigma_y_mode", "s", "thomas-fermi"),
    ("sigma_y", "f", math.nan),          # m; NaN = use sigma_y_mode
    # ramp protocol (SI)
    ("ramp_time", "f", 10e-3),           # s
    ("power_start", "f", 0.0),           # W
    ("power_end", "f", 1.3e-3),          # W
    ("eta_end", "f", math.nan),          # scaled eta ramp instead of power
    ("dt", "f", math.nan),               # s; NaN = auto
    ("record_every", "i", 1),
    ("noise_amplitude", "f", 1e-4),
    ("snapshot_powers", "lf", ()),       # W
    # sweep axes
    ("delta_c_list", "lf", ()),          # rad/s
    ("power_list", "lf", ()),            # W, diagram sample powers
    ("power_end_list", "lf", ()),        # optional per-detuning ramp caps
    # threshold detector and frustration metric
    ("baseline_fraction", "f", 0.05),
    ("floor_factor", "f", 10.0),
    ("consecutive", "i", 50),
    ("oscillation_threshold", "f", 0.5),
    ("final_window_fraction", "f", 0.2),
    # ensemble / ground-state relaxation
    ("n_seeds", "i", 1),
    ("ensemble_power", "f", math.nan),   # W, fixed pump for ensembles
    ("ensemble_eta", "f", math.nan),     # scaled, overrides ensemble_power
    ("dtau", "f", 2e-3),                 # imaginary time step, 1/omega_r
    ("gs_tol_energy", "f", 1e-10),
    ("gs_tol_theta", "f", 1e-8),
    ("gs_max_steps", "i", 200_000),
    # dicke engines
    ("dicke_omega", "f", 1.0),           # units of omega_r
    ("dicke_omega0", "f", 2.0),
    ("dicke_kappa", "f", 1.0),
    ("dicke_coupling", "f", 1.0),
    ("dicke_n_atoms", "i", 8),
    ("dicke_n_max", "i", 60),
    ("lambda_list", "lf", ()),           # units of omega_r, ED sweeps
    ("t_final", "f", math.nan),          # s, ODE runs; NaN = 50/kappa
]
_RUN_KEY_INFO = {name: (typ, default) for name, typ, default in _RUN_KEYS}


@dataclass(frozen=True)
class RunConfig:
    params: ExperimentParams
    options: dict         # resolved run keys, defaults expanded
    seed: int = 0

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


def _coerce(name, typ, raw):
    try:
        if typ == "f":
            return float(raw)
        if typ == "i":
            value = float(raw)
            if value != int(value):
                raise ValueError("not an integer")
            return int(value)
        if typ == "b":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("true", "1", "yes", "on"):
                return True
            if text in ("false", "0", "no", "off"):
                return False
            raise ValueError("not a boolean")
        if typ == "s":
            return str(raw).strip()
        if typ == "lf":
            if isinstance(raw, (list, tuple)):
                return tuple(float(v) for v in raw)
            text = str(raw).strip()
            if not text:
                return ()
            return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"key {name!r}: bad value {raw!r} ({exc})") from exc
    raise ConfigError(f"internal: unknown type code {typ}")


def resolve_config(mapping, seed=0):
    """Split a flat mapping into experiment params and run options.

    Unknown keys are rejected; every missing key takes its documented
    default.
    """
    mapping = dict(mapping)
    unknown = sorted(set(mapping) - set(_PARAM_KEY_SET) - set(_RUN_KEY_INFO))
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    param_map = {k: v for k, v in mapping.items() if k in _PARAM_KEY_SET}
    try:
        params = params_from_mapping(param_map)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    options = {}
    for name, (typ, default) in _RUN_KEY_INFO.items():
        options[name] = _coerce(name, typ, mapping[name]) \
            if name in mapping else default
    if options["engine"] not in ENGINES:
        raise ConfigError(f"unknown engine {options['engine']!r}; "
                          f"choose from {', '.join(ENGINES)}")
    return RunConfig(params=params, options=options, seed=int(seed))


def load_config(path, overrides=(), seed=0):
    with open(path, encoding="utf-8") as fh:
        mapping = parse_key_value_text(fh.read())
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    return resolve_config(mapping, seed=seed)


def default_config(overrides=(), seed=0):
    mapping = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    return resolve_config(mapping, seed=seed)


def format_resolved(config: RunConfig):
    """Full config echo (defaults expanded), reparseable."""
    lines = ["# resolved run configuration"]
    for f in dc_fields(ExperimentParams):
        value = getattr(config.params, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {float(value)!r}")
    for name, (typ, _) in sorted(_RUN_KEY_INFO.items()):
        value = config.options[name]
        if typ == "lf":
            rendered = ",".join(repr(float(v)) for v in value)
            if rendered == "":
                continue
            lines.append(f"{name} = {rendered}")
        elif typ == "b":
            lines.append(f"{name} = {'true' if value else 'false'}")
        elif typ == "f":
            if isinstance(value, float) and math.isnan(value):
                continue
            lines.append(f"{name} = {float(value)!r}")
        else:
            lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# output directory plumbing
# ---------------------------------------------------------------------------

def _git_hash():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"],
                             capture_output=True, text=True, timeout=5,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _atomic_write(path, data):
    tmp = path + ".tmp"
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class RunDir:
    """One output directory per run, with config echo and manifest."""

    def __init__(self, path, config: RunConfig, command=""):
        self.path = path
        os.makedirs(path, exist_ok=True)
        _atomic_write(os.path.join(path, "config.resolved"),
                      format_resolved(config))
        self._t0 = time.monotonic()
        self._manifest = {
            "package": "selforg",
            "version": __version__,
            "git_hash": _git_hash(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "platform": platform.platform(),
            "command": command,
            "seed": config.seed,
            "wall_times_s": {},
        }

    def file(self, name):
        return os.path.join(self.path, name)

    def write(self, name, data):
        _atomic_write(self.file(name), data)

    def stage_done(self, stage):
        self._manifest["wall_times_s"][stage] = round(
            time.monotonic() - self._t0, 6)

    def finish(self, status="ok"):
        self._manifest["status"] = status
        self._manifest["wall_times_s"]["total"] = round(
            time.monotonic() - self._t0, 6)
        _atomic_write(self.file("manifest.json"),
                      json.dumps(self._manifest, indent=2, sort_keys=True)
                      + "\n")


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, float, np.integer, np.floating)):
        return repr(float(value))
    return str(value)


def _csv(header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


GPE_TRAJ_HEADER = "t,P,eta,alpha_re,alpha_im,nphoton,theta,bunching,norm"
ODE_TRAJ_HEADER = "t,alpha_re,alpha_im,photon_frac,jz,order"
ED_HEADER = "lambda,photon_frac,jz,order,gap"
PEAKS_HEADER = "px_over_hk,pz_over_hk,weight"
SWEEP_HEADER = ("delta_c,power,seed,mean_nphoton,theta,thresholded,"
                "p_cr,oscillation,frustrated,status,wall_time_s")
ENSEMBLE_HEADER = "seed,sign,theta,nphoton,energy"


def gpe_trajectory_csv(rec):
    rows = zip(rec["t"], rec["power"], rec["eta"],
               rec["alpha"].real, rec["alpha"].imag, rec["nphoton"],
               rec["theta"], rec["bunching"], rec["norm"])
    return _csv(GPE_TRAJ_HEADER, rows)


def ode_trajectory_csv(rec):
    rows = zip(rec["t"], rec["alpha"].real, rec["alpha"].imag,
               rec["photon_frac"], rec["jz"], rec["order"])
    return _csv(ODE_TRAJ_HEADER, rows)


def peaks_csv(peaks):
    return _csv(PEAKS_HEADER, peaks)


# ---------------------------------------------------------------------------
# engine assembly
# ---------------------------------------------------------------------------

def build_sim(config: RunConfig):
    grid = Grid2D(config.grid_extent_x, config.grid_extent_z,
                  config.grid_points_x, config.grid_points_z)
    sigma_y = None if math.isnan(config.sigma_y) else config.sigma_y
    sim = CondensateSim(config.params, grid,
                        envelopes=config.envelopes, trap=config.trap,
                        pump_lattice=config.pump_lattice,
                        sigma_y_mode=config.sigma_y_mode, sigma_y=sigma_y)
    if config.trap:
        d = derive(config.params)
        tf = thomas_fermi(config.params)
        grid.require_encloses_cloud(d.wavenumber * tf.radius_x,
                                    d.wavenumber * tf.radius_z)
    return sim


def build_ramp(config: RunConfig, power_end=None):
    """Schedule from the config: linear power ramp, or linear eta ramp when
    eta_end is set (idealized mode).  Times are scaled by omega_r."""
    d = derive(config.params)
    t_ramp = config.ramp_time * d.recoil_frequency
    if not math.isnan(config.eta_end):
        return EtaRamp([(0.0, 0.0), (t_ramp, config.eta_end)]), t_ramp
    pe = config.power_end if power_end is None else power_end
    return PowerRamp(config.params,
                     [(0.0, config.power_start), (t_ramp, pe)]), t_ramp


def _auto_dt(config: RunConfig, sim):
    if not math.isnan(config.dt):
        return config.dt * derive(config.params).recoil_frequency
    kmax_sq = float(sim.ksq.max())
    return min(2.5e-3, 0.05 / kmax_sq)


def point_seed(base_seed, index):
    """Deterministic independent seed stream per sweep point."""
    return int(np.random.SeedSequence([int(base_seed), int(index)])
               .generate_state(1)[0])


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_ramp(config: RunConfig, rundir: RunDir = None):
    """Pump ramp with threshold detection and optional field snapshots.

    Engine per config: gpe (default) or dicke-semiclassical.  Returns the
    trajectory record plus the threshold report; persists trajectory.csv,
    threshold.json and snapshot files when a run directory is given.
    """
    try:
        if config.engine == "dicke-semiclassical":
            return _run_ramp_ode(config, rundir)
        if config.engine != "gpe":
            raise ConfigError(f"ramp needs the gpe or dicke-semiclassical "
                              f"engine, not {config.engine!r}")
        return _run_ramp_gpe(config, rundir)
    except (ConfigError, EngineError):
        raise
    except Exception as exc:
        raise EngineError(f"ramp failed ({type(exc).__name__}: {exc}) with "
                          f"engine={config.engine} seed={config.seed}") from exc


def _run_ramp_gpe(config, rundir, power_end=None):
    sim = build_sim(config)
    ramp, t_ramp = build_ramp(config, power_end)
    dt = _auto_dt(config, sim)
    psi0 = sim.initial_state(seed=config.seed, noise=config.noise_amplitude)

    snap_times = []
    if config.snapshot_powers:
        powers = np.array([ramp(t)[0] for t in np.linspace(0, t_ramp, 4096)])
        for p_want in config.snapshot_powers:
            j = int(np.searchsorted(powers, p_want))
            snap_times.append(float(np.linspace(0, t_ramp, 4096)[min(j, 4095)]))
    rec = sim.real_time_evolve(psi0, ramp, t_ramp, dt,
                               record_every=config.record_every,
                               snapshot_times=snap_times or None)
    report = detect_threshold(rec,
                              baseline_fraction=config.baseline_fraction,
                              floor_factor=config.floor_factor,
                              consecutive=config.consecutive)
    report["oscillation"] = oscillation_metric(
        rec, config.final_window_fraction)
    if rundir is not None:
        rundir.write("trajectory.csv", gpe_trajectory_csv(rec))
        rundir.write("threshold.json",
                     json.dumps(report, indent=2, sort_keys=True) + "\n")
        for i, (t_snap, psi) in enumerate(rec["snapshots"]):
            save_field(rundir.file(f"snapshot_{i:02d}.fld"), sim.grid, psi,
                       config.params.atom_number)
            rundir.write(f"snapshot_{i:02d}_peaks.csv",
                         peaks_csv(sim.momentum_peaks(psi)))
        rundir.stage_done("ramp")
    return rec, report


def _run_ramp_ode(config, rundir):
    """Coupling ramp 0 -> dicke_coupling over ramp_time (semiclassical).

    Runs in recoil units like the gpe engine: dicke_* config keys are in
    units of omega_r and the trajectory time axis is in 1/omega_r.
    """
    w_r = derive(config.params).recoil_frequency
    p = dicke.DickeParams(omega=config.dicke_omega,
                          omega0=config.dicke_omega0,
                          coupling=config.dicke_coupling,
                          kappa=config.dicke_kappa,
                          n_atoms=max(1, int(config.params.atom_number)))
    t_final = (config.ramp_time if math.isnan(config.t_final)
               else config.t_final) * w_r
    lam_end = config.dicke_coupling

    def lam_of(t):
        return lam_end * min(1.0, t / t_final)

    s0 = dicke.normal_state(noise=config.noise_amplitude, seed=config.seed)
    rec = dicke.integrate_semiclassical_ramp(
        s0, p, lam_of, t_final, record_every=config.record_every)
    report = detect_threshold(
        {"nphoton": rec["photon_frac"], "power": np.full_like(rec["t"],
                                                              math.nan),
         "eta": rec["coupling"]},
        baseline_fraction=config.baseline_fraction,
        floor_factor=config.floor_factor, consecutive=config.consecutive)
    if rundir is not None:
        rundir.write("trajectory.csv", ode_trajectory_csv(rec))
        rundir.write("threshold.json",
                     json.dumps(report, indent=2, sort_keys=True) + "\n")
        rundir.stage_done("ramp")
    return rec, report


def _diagram_point(config_mapping, base_seed, index, delta_c, power_end):
    """Worker: one detuning of the phase diagram (its own ramp)."""
    t0 = time.monotonic()
    mapping = dict(config_mapping)
    mapping["pump_cavity_detuning"] = repr(float(delta_c))
    config = resolve_config(mapping, seed=point_seed(base_seed, index))
    rows = []
    try:
        rec, report = _run_ramp_gpe(config, None, power_end=power_end)
        osc = report["oscillation"]
        frustrated = osc > config.oscillation_threshold
        p_cr = report["power"] if report["detected"] else math.nan
        n = len(rec["t"])
        window = max(1, int(0.01 * n))
        for p_sample in config.power_list:
            j = int(np.searchsorted(rec["power"], p_sample))
            j = min(max(j, window - 1), n - 1)
            mean_nph = float(rec["nphoton"][j - window + 1:j + 1].mean())
            thresholded = bool(report["detected"]
                               and p_sample >= p_cr - 1e-300)
            rows.append((delta_c, p_sample, config.seed, mean_nph,
                         float(rec["theta"][j]), thresholded, p_cr, osc,
                         frustrated, "ok", round(time.monotonic() - t0, 3)))
    except Exception as exc:      # persists the failure, keeps the sweep alive
        rows.append((delta_c, math.nan, config.seed, math.nan, math.nan,
                     False, math.nan, math.nan, False,
                     f"failed:{type(exc).__name__}",
                     round(time.monotonic() - t0, 3)))
        return index, rows, False
    return index, rows, True


def run_phase_diagram(config: RunConfig, rundir: RunDir, workers=None,
                      config_mapping=None):
    """Detuning x power sweep (each detuning is one ramp) plus the analytic
    boundary table for overlay.  Completed points are persisted immediately
    under points/; the merged sweep.csv is written in point order.  Returns
    (rows, all_ok)."""
    deltas = config.delta_c_list
    caps = config.power_end_list
    if caps and len(caps) != len(deltas):
        raise ConfigError("power_end_list length must match delta_c_list")
    if config_mapping is None:
        config_mapping = _mapping_from_config(config)
    points_dir = rundir.file("points")
    os.makedirs(points_dir, exist_ok=True)

    # analytic overlay (cheap, done first so it survives any interruption)
    if config.trap and config.params.scattering_length > 0:
        curve = boundary_curve(deltas, config.params)
        rundir.write("boundary.csv", boundary_table_csv(curve))
        rundir.stage_done("boundary")

    results = {}
    all_ok = True
    jobs = [(i, dc, caps[i] if caps else None)
            for i, dc in enumerate(deltas)]
    if workers is None or workers <= 1:
        completed = (_diagram_point(config_mapping, config.seed, i, dc, cap)
                     for i, dc, cap in jobs)
        for index, rows, ok in completed:
            results[index] = rows
            all_ok &= ok
            _atomic_write(os.path.join(points_dir, f"point_{index:04d}.csv"),
                          _csv(SWEEP_HEADER, rows))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_diagram_point, config_mapping,
                                   config.seed, i, dc, cap)
                       for i, dc, cap in jobs]
            for fut in futures:
                index, rows, ok = fut.result()
                results[index] = rows
                all_ok &= ok
                _atomic_write(
                    os.path.join(points_dir, f"point_{index:04d}.csv"),
                    _csv(SWEEP_HEADER, rows))
    merged = []
    for index in sorted(results):
        merged.extend(results[index])
    rundir.write("sweep.csv", _csv(SWEEP_HEADER, merged))
    rundir.stage_done("sweep")
    return merged, all_ok


def _mapping_from_config(config: RunConfig):
    """Round-trip the resolved config through its textual form (picklable,
    and guarantees workers see exactly what the echo records)."""
    return parse_key_value_text(format_resolved(config))


def _ensemble_point(config_mapping, base_seed, index, eta, mirrored):
    t0 = time.monotonic()
    config = resolve_config(config_mapping, seed=base_seed)
    sim = build_sim(config)
    seed = point_seed(base_seed, index)
    psi0 = sim.initial_state(seed=seed, noise=config.noise_amplitude)
    if mirrored:
        # shift the noise realization by half a pump wavelength along the
        # cavity axis: swaps the checkerboard sublattices, so the relaxed
        # state must come out with the opposite sign of Theta
        shift_x = sim.grid.points_x // int(round(sim.grid.extent_x / math.pi))
        psi0 = np.roll(psi0, shift_x, axis=0)
    gs = sim.imaginary_time_ground_state(
        eta, psi0=psi0, dtau=config.dtau,
        tol_energy=config.gs_tol_energy, tol_theta=config.gs_tol_theta,
        max_steps=config.gs_max_steps)
    return index, (seed, float(np.sign(gs["theta"])), gs["theta"],
                   abs(gs["alpha"]) ** 2, gs["energy"]), \
        round(time.monotonic() - t0, 3)


def ensemble_eta(config: RunConfig):
    """Fixed pump strength for ensemble runs, from eta or power."""
    if not math.isnan(config.ensemble_eta):
        return config.ensemble_eta
    if math.isnan(config.ensemble_power):
        raise ConfigError("ensemble runs need ensemble_eta or ensemble_power")
    d = derive(config.params)
    coef = config.params.single_atom_lightshift \
        * config.params.calibration_constant / HBAR
    return math.sqrt(coef * config.ensemble_power) / d.recoil_frequency


def run_symmetry_ensemble(config: RunConfig, rundir: RunDir = None,
                          workers=None, mirrored_pairs=False):
    """Relax n_seeds noise realizations above threshold; tabulate sign(Theta).

    With mirrored_pairs each seed also runs with its noise shifted by half a
    pump wavelength, which must flip the sign exactly.  Returns (rows,
    stats) where stats carries the two-sided binomial test of the 50/50
    sign hypothesis.
    """
    eta = ensemble_eta(config)
    mapping = _mapping_from_config(config)
    jobs = []
    for i in range(config.n_seeds):
        jobs.append((i, eta, False))
        if mirrored_pairs:
            jobs.append((i, eta, True))
    rows = {}
    if workers is None or workers <= 1:
        for i, (idx, eta_i, mir) in enumerate(jobs):
            key, row, _ = _ensemble_point(mapping, config.seed, idx, eta_i, mir)
            rows[i] = row + (mir,)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_ensemble_point, mapping, config.seed,
                                   idx, eta_i, mir)
                       for idx, eta_i, mir in jobs]
            for i, fut in enumerate(futures):
                _, row, _ = fut.result()
                rows[i] = row + (jobs[i][2],)
    ordered = [rows[i] for i in sorted(rows)]
    base = [r for r in ordered if not r[5]]
    n_plus = sum(1 for r in base if r[1] > 0)
    n_minus = len(base) - n_plus
    stats = {
        "n_seeds": len(base),
        "n_plus": n_plus,
        "n_minus": n_minus,
        "binomial_p": float(binomtest(n_plus, len(base), 0.5).pvalue)
        if base else math.nan,
        "mean_abs_theta_plus": float(np.mean([abs(r[2]) for r in base
                                              if r[1] > 0])) if n_plus else math.nan,
        "mean_abs_theta_minus": float(np.mean([abs(r[2]) for r in base
                                               if r[1] < 0])) if n_minus else math.nan,
    }
    if rundir is not None:
        table = _csv(ENSEMBLE_HEADER + ",mirrored",
                     [(r[0], r[1], r[2], r[3], r[4],
                       "true" if r[5] else "false") for r in ordered])
        rundir.write("ensemble.csv", table)
        rundir.write("ensemble_stats.json",
                     json.dumps(stats, indent=2, sort_keys=True) + "\n")
        rundir.stage_done("ensemble")
    return ordered, stats


def run_dicke_ed(config: RunConfig, rundir: RunDir = None):
    """Exact-diagonalization coupling sweep; observables CSV per coupling.

    Couplings and the gap are in units of omega_r (the closed two-mode model
    is scale free, so only ratios matter).
    """
    lams = config.lambda_list or (config.dicke_coupling,)
    rows = []
    for lam in lams:
        p = dicke.DickeParams(omega=config.dicke_omega,
                              omega0=config.dicke_omega0,
                              coupling=lam,
                              n_atoms=config.dicke_n_atoms)
        obs, _ = dicke.converged_ground_state_observables(
            p, n_max_start=config.dicke_n_max)
        rows.append((lam, obs["photon_fraction"], obs["inversion"],
                     obs["order"], obs["gap"]))
    if rundir is not None:
        rundir.write("eigen.csv", _csv(ED_HEADER, rows))
        rundir.stage_done("dicke-ed")
    return rows


def run_boundary(config: RunConfig, rundir: RunDir = None):
    deltas = config.delta_c_list
    if not deltas:
        raise ConfigError("boundary runs need delta_c_list")
    curve = boundary_curve(deltas, config.params)
    if rundir is not None:
        rundir.write("boundary.csv", boundary_table_csv(curve))
        rundir.stage_done("boundary")
    return curve
