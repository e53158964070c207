import json
import math
import os

import numpy as np
import pytest

import selforg.sweeps as sweeps
from selforg import cli
from selforg.boundary import BOUNDARY_CSV_HEADER
from selforg.dicke import (DickeParams, critical_coupling,
                           steadystate_photon_fraction)
from selforg.params import ExperimentParams, derive
from selforg.sweeps import (ConfigError, RunDir, default_config, load_config,
                            point_seed, resolve_config, format_resolved,
                            run_boundary, run_dicke_ed, run_phase_diagram,
                            run_ramp, run_symmetry_ensemble)

W_R = derive(ExperimentParams()).recoil_frequency
TWO_PI = 2 * math.pi

# idealized gpe test bed (same family as test_gpe): kappa = 2pi*1.3 MHz
# = 348.5 omega_r, U0*N = -10 omega_r, effective cavity frequency 500 omega_r
N_AT = 1e4
U0_SCALED = -1e-3
OMEGA_EFF = 500.0
KAPPA_SCALED = 348.5121851045933
LAM_CR = critical_coupling(OMEGA_EFF, 2.0, KAPPA_SCALED)

IDEAL_KEYS = {
    "atom_number": repr(N_AT),
    "scattering_length": "0",
    "cavity_decay": repr(KAPPA_SCALED * W_R),
    "single_atom_lightshift": repr(U0_SCALED * W_R),
    "pump_cavity_detuning": repr((-OMEGA_EFF + U0_SCALED * N_AT / 2) * W_R),
    "envelopes": "false",
    "trap": "false",
    "pump_lattice": "false",
    "grid_extent_x": repr(4 * TWO_PI),
    "grid_extent_z": repr(4 * TWO_PI),
    "grid_points_x": "32",
    "grid_points_z": "32",
    "noise_amplitude": "1e-5",
    "floor_factor": "1e4",
    "ramp_time": repr(300.0 / W_R),
    "dt": repr(4e-3 / W_R),
    "eta_end": repr(2.0 * 2 * LAM_CR / math.sqrt(N_AT)),
}


def write_ideal_config(path, extra=None):
    keys = dict(IDEAL_KEYS)
    if extra:
        keys.update(extra)
    path.write_text("".join(f"{k} = {v}\n" for k, v in keys.items()),
                    encoding="utf-8")
    return str(path)


class TestConfig:
    def test_defaults_and_unknown_keys(self):
        config = default_config()
        assert config.engine == "gpe"
        assert config.grid_points_x == 256
        with pytest.raises(ConfigError, match="unknown config keys"):
            resolve_config({"not_a_key": "1"})
        with pytest.raises(ConfigError, match="unknown engine"):
            resolve_config({"engine": "vortex"})
        with pytest.raises(ConfigError, match="bad value"):
            resolve_config({"grid_points_x": "a few"})

    def test_overrides_and_lists(self):
        config = default_config(overrides=["delta_c_list=-1e8,-2e8",
                                           "trap=false"])
        assert config.delta_c_list == (-1e8, -2e8)
        assert config.trap is False
        with pytest.raises(ConfigError):
            default_config(overrides=["delta_c_list"])

    def test_resolved_round_trip(self):
        config = default_config(overrides=["power_end=0.7e-3",
                                           "delta_c_list=-1e8"])
        text = format_resolved(config)
        again = resolve_config(sweeps.parse_key_value_text(text))
        assert again.params == config.params
        # idempotent echo (NaN-valued optional keys are omitted, so compare
        # the canonical text form)
        assert format_resolved(again) == text
        assert again.delta_c_list == (-1e8,)
        assert again.power_end == 0.7e-3

    def test_point_seed_deterministic(self):
        assert point_seed(7, 3) == point_seed(7, 3)
        assert point_seed(7, 3) != point_seed(7, 4)
        assert 0 <= point_seed(7, 3) < 2**32


class TestRunDir:
    def test_echo_and_manifest(self, tmp_path):
        config = default_config()
        rd = RunDir(str(tmp_path / "run"), config, command="test")
        rd.stage_done("stage1")
        rd.finish()
        resolved = (tmp_path / "run" / "config.resolved").read_text()
        assert "atom_number" in resolved
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["package"] == "selforg"
        assert "stage1" in manifest["wall_times_s"]
        assert manifest["status"] == "ok"


def test_run_boundary_table(tmp_path):
    config = default_config(overrides=[
        "delta_c_list=" + ",".join(repr(-TWO_PI * f * 1e6)
                                   for f in (25.0, 15.0, 8.0, 2.0))])
    rd = RunDir(str(tmp_path / "b"), config)
    curve = run_boundary(config, rd)
    assert len(curve) == 4
    text = (tmp_path / "b" / "boundary.csv").read_text()
    assert text.startswith(BOUNDARY_CSV_HEADER)
    # -2pi*2 MHz is above the shifted resonance (-2pi*3.75 MHz): flagged
    assert "false" in text.strip().split("\n")[-1]


def test_run_dicke_ed_sweep(tmp_path):
    config = default_config(overrides=[
        "engine=dicke-exact", "dicke_omega=1", "dicke_omega0=1",
        "dicke_n_atoms=6", "dicke_n_max=30", "lambda_list=0.1,1.0"])
    rd = RunDir(str(tmp_path / "ed"), config)
    rows = run_dicke_ed(config, rd)
    assert len(rows) == 2
    text = (tmp_path / "ed" / "eigen.csv").read_text()
    assert text.splitlines()[0] == sweeps.ED_HEADER
    # second row is deep in the superradiant regime
    assert rows[1][1] > 0.5


def test_ode_ramp_detects_threshold(tmp_path):
    # the photon signal of the mean-field Dicke ramp turns on only once the
    # seeded spin fluctuation has grown macroscopic, so the detected point
    # lies above lam_cr but never below; by the end of the ramp the system
    # must sit near the superradiant fixed point
    config = default_config(overrides=[
        "engine=dicke-semiclassical", "dicke_omega=1.0", "dicke_omega0=1.0",
        "dicke_kappa=0.5", "dicke_coupling=1.2",
        "ramp_time=" + repr(8000.0 / W_R), "noise_amplitude=1e-4",
        "floor_factor=1e4", "record_every=10"])
    rd = RunDir(str(tmp_path / "ode"), config)
    rec, report = run_ramp(config, rd)
    lam_ref = critical_coupling(1.0, 1.0, 0.5)
    assert report["detected"]
    assert lam_ref < report["eta"] < 1.6 * lam_ref
    target = steadystate_photon_fraction(
        DickeParams(omega=1.0, omega0=1.0, coupling=1.2, kappa=0.5))
    assert rec["photon_frac"][-1] == pytest.approx(target, rel=0.25)
    assert (tmp_path / "ode" / "trajectory.csv").read_text().splitlines()[0] \
        == sweeps.ODE_TRAJ_HEADER


@pytest.mark.slow
def test_cli_ramp_deterministic(tmp_path):
    cfg = write_ideal_config(tmp_path / "ideal.cfg")
    outs = []
    for name in ("run_a", "run_b"):
        out = str(tmp_path / name)
        code = cli.main(["ramp", "--config", cfg, "--out", out,
                         "--seed", "11"])
        assert code == cli.EXIT_OK
        outs.append(out)
    traj_a = open(os.path.join(outs[0], "trajectory.csv"), "rb").read()
    traj_b = open(os.path.join(outs[1], "trajectory.csv"), "rb").read()
    assert traj_a == traj_b
    report = json.loads(open(os.path.join(outs[0], "threshold.json")).read())
    assert report["detected"]
    lam_det = report["eta"] * math.sqrt(N_AT) / 2
    assert lam_det == pytest.approx(LAM_CR, rel=0.05)
    cfg_echo = open(os.path.join(outs[0], "config.resolved")).read()
    assert "eta_end" in cfg_echo


@pytest.mark.slow
def test_cli_ramp_snapshots(tmp_path):
    # snapshots at given powers along a power ramp, plus peak tables
    d = derive(ExperimentParams())
    cfg = write_ideal_config(tmp_path / "snap.cfg", extra={
        "eta_end": "nan", "power_end": "1e-3",
        "calibration_constant": repr(-10 * d.recoil_energy / 1e-3),
        "single_atom_lightshift": repr(-0.05 * W_R),
        "pump_cavity_detuning": repr((-OMEGA_EFF - 0.05 * N_AT / 2) * W_R),
        "pump_lattice": "true",
        "snapshot_powers": "2e-4,8e-4",
        "ramp_time": repr(100.0 / W_R)})
    out = str(tmp_path / "snaprun")
    assert cli.main(["ramp", "--config", cfg, "--out", out]) == cli.EXIT_OK
    assert os.path.exists(os.path.join(out, "snapshot_00.fld"))
    assert os.path.exists(os.path.join(out, "snapshot_01_peaks.csv"))
    peaks = open(os.path.join(out, "snapshot_01_peaks.csv")).read()
    assert peaks.splitlines()[0] == sweeps.PEAKS_HEADER


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("definitely_not_a_key = 3\n")
    assert cli.main(["ramp", "--config", str(bad),
                     "--out", str(tmp_path / "x1")]) == cli.EXIT_CONFIG
    # missing config file
    assert cli.main(["ramp", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "x2")]) == cli.EXIT_CONFIG
    # engine failure: trapped cloud does not fit the configured grid
    small = tmp_path / "small.cfg"
    small.write_text("grid_extent_x = 25.132741228718345\n"
                     "grid_extent_z = 25.132741228718345\n"
                     "grid_points_x = 32\ngrid_points_z = 32\n")
    assert cli.main(["ramp", "--config", str(small),
                     "--out", str(tmp_path / "x3")]) == cli.EXIT_ENGINE
    # diagram without detunings is a config error
    ok = tmp_path / "ok.cfg"
    ok.write_text("trap = false\n")
    assert cli.main(["diagram", "--config", str(ok),
                     "--out", str(tmp_path / "x4")]) == cli.EXIT_CONFIG


@pytest.mark.slow
def test_diagram_sweep_and_empty_power_list(tmp_path):
    deltas = [(-OMEGA_EFF + U0_SCALED * N_AT / 2) * W_R,
              (-1.3 * OMEGA_EFF + U0_SCALED * N_AT / 2) * W_R]
    cfg = write_ideal_config(tmp_path / "diag.cfg", extra={
        "delta_c_list": ",".join(repr(v) for v in deltas),
        "power_list": "1e-4,5e-4,9e-4"})
    out = str(tmp_path / "diag")
    code = cli.main(["diagram", "--config", cfg, "--out", out,
                     "--workers", "2", "--seed", "4"])
    assert code == cli.EXIT_OK
    table = open(os.path.join(out, "sweep.csv")).read().strip().split("\n")
    assert table[0] == sweeps.SWEEP_HEADER
    assert len(table) == 1 + 2 * 3
    assert os.path.exists(os.path.join(out, "points", "point_0000.csv"))
    assert os.path.exists(os.path.join(out, "points", "point_0001.csv"))
    # empty power list: empty result, success
    cfg2 = write_ideal_config(tmp_path / "diag2.cfg", extra={
        "delta_c_list": repr(deltas[0])})
    out2 = str(tmp_path / "diag2")
    assert cli.main(["diagram", "--config", cfg2, "--out", out2]) == cli.EXIT_OK
    assert open(os.path.join(out2, "sweep.csv")).read().strip() \
        == sweeps.SWEEP_HEADER


def test_diagram_partial_failure_persists_points(tmp_path, monkeypatch):
    real = sweeps._run_ramp_gpe
    calls = {"n": 0}

    def flaky(config, rundir, power_end=None):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("injected failure")
        return real(config, rundir, power_end)

    monkeypatch.setattr(sweeps, "_run_ramp_gpe", flaky)
    deltas = [(-OMEGA_EFF + U0_SCALED * N_AT / 2) * W_R,
              (-1.2 * OMEGA_EFF + U0_SCALED * N_AT / 2) * W_R]
    cfg = write_ideal_config(tmp_path / "flaky.cfg", extra={
        "delta_c_list": ",".join(repr(v) for v in deltas),
        "power_list": "5e-4", "ramp_time": repr(20.0 / W_R)})
    config = load_config(cfg)
    rd = RunDir(str(tmp_path / "flaky"), config)
    rows, all_ok = run_phase_diagram(config, rd, workers=1)
    assert not all_ok
    statuses = [r[9] for r in rows]
    assert "ok" in statuses
    assert any(s.startswith("failed:") for s in statuses)
    # the completed point file survived independently of the merge
    assert os.path.exists(str(tmp_path / "flaky" / "points" / "point_0000.csv"))
    # the CLI maps partial completion to exit code 4
    monkeypatch.setattr(cli, "run_phase_diagram",
                        lambda *a, **k: ([], False))
    out = str(tmp_path / "flaky-cli")
    assert cli.main(["diagram", "--config", cfg, "--out", out]) \
        == cli.EXIT_PARTIAL


@pytest.mark.slow
def test_symmetry_ensemble_and_mirrors(tmp_path):
    cfg = write_ideal_config(tmp_path / "ens.cfg", extra={
        "n_seeds": "6", "noise_amplitude": "1e-2",
        "ensemble_eta": repr(2 * 1.3 * LAM_CR / math.sqrt(N_AT))})
    config = load_config(cfg, seed=1)
    rd = RunDir(str(tmp_path / "ens"), config)
    rows, stats = run_symmetry_ensemble(config, rd, workers=2,
                                        mirrored_pairs=True)
    assert stats["n_seeds"] == 6
    assert stats["n_plus"] + stats["n_minus"] == 6
    base = [r for r in rows if not r[5]]
    mirrored = [r for r in rows if r[5]]
    assert len(base) == len(mirrored) == 6
    for b, m in zip(base, mirrored):
        assert b[1] == -m[1]                      # exact sign flip
        assert abs(b[2]) == pytest.approx(abs(m[2]), rel=1e-6)
    text = (tmp_path / "ens" / "ensemble.csv").read_text()
    assert text.splitlines()[0] == sweeps.ENSEMBLE_HEADER + ",mirrored"
    stats_file = json.loads((tmp_path / "ens" / "ensemble_stats.json")
                            .read_text())
    assert 0.0 <= stats_file["binomial_p"] <= 1.0


def test_ensemble_requires_pump(tmp_path):
    cfg = write_ideal_config(tmp_path / "e2.cfg")
    config = load_config(cfg)
    with pytest.raises(ConfigError, match="ensemble"):
        sweeps.ensemble_eta(config)
