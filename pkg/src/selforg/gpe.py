"""2D mean-field simulator of the pumped condensate with an adiabatically
eliminated cavity field.

The condensate obeys (recoil units: x in 1/k, t in 1/omega_r, energy in E_r)

    i dpsi/dt = [ -(d^2/dx^2 + d^2/dz^2) + V(x,z) + g2d |psi|^2 ] psi,

    V = v0 * phi_p^2 + u0 |alpha|^2 phi_c^2 + 2 eta Re(alpha) phi_c phi_p
        + trap,

with the cavity amplitude slaved to the density at every step,

    alpha = eta * Theta / (delta_c - u0 * B + i kappa),
    Theta = <phi_c phi_p>,  B = <phi_c^2>,

where phi_c = cos(x) exp(-z^2/wc^2) and phi_p = cos(z) exp(-x^2/wx^2) are the
mode profiles evaluated in the y = 0 plane (pure cosines in cos-only mode).

Propagation is Strang split-step: half kinetic, full potential, half
kinetic, with alpha updated once per step from the pre-step density.  The
same splitting runs in imaginary time for ground states, with the field
renormalized to the atom number after every step.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .constants import HBAR
from .dicke import DivergenceError, ConvergenceError
from .grid import Grid2D, GridError
from .params import ExperimentParams, derive, collision_strength


@dataclass(frozen=True)
class OrderParameters:
    theta: float        # localization on the even/odd checkerboard, |theta| <= N
    bunching: float     # <phi_c^2>, controls the dispersive shift


def cavity_amplitude(theta, bunching, eta, delta_c, u0, kappa):
    """alpha = eta*Theta / (Delta_c - U0*B + i*kappa); any consistent units.

    kappa > 0 keeps the denominator away from zero for every Theta, B.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return eta * theta / ((delta_c - u0 * bunching) + 1j * kappa)


class CondensateSim:
    """Split-step engine bound to one grid and one experimental parameter set.

    envelopes=False drops the transverse Gaussian profiles (pure-cosine
    mode), trap=False drops the harmonic confinement, pump_lattice=False
    drops the v0*phi_p^2 lattice while keeping the cavity coupling; the
    idealized combination of all three is the two-mode test bed.

    The 3D collisional strength is reduced to 2D by integrating out a
    Gaussian of width sigma_y along the unsimulated axis:
    g2d = g / (sqrt(2 pi) sigma_y).  sigma_y_mode selects the Thomas-Fermi
    rms extent R_y/sqrt(7) (default) or the harmonic-oscillator length;
    sigma_y overrides both.
    """

    def __init__(self, params: ExperimentParams, grid: Grid2D, *,
                 envelopes=True, trap=True, pump_lattice=True,
                 sigma_y_mode="thomas-fermi", sigma_y=None):
        self.params = params
        self.derived = derive(params)
        self.grid = grid
        self.envelopes = envelopes
        self.trap = trap
        self.pump_lattice = pump_lattice

        d = self.derived
        k = d.wavenumber
        w_r = d.recoil_frequency
        self.n_atoms = params.atom_number
        self.kappa = params.cavity_decay / w_r
        self.delta_c = params.pump_cavity_detuning / w_r
        self.u0 = params.single_atom_lightshift / w_r

        x = grid.x()
        z = grid.z()
        cos_x = np.cos(x)
        cos_z = np.cos(z)
        if envelopes:
            env_c = np.exp(-(z / (k * params.cavity_waist)) ** 2)
            env_p = np.exp(-(x / (k * params.pump_waist_x)) ** 2)
        else:
            env_c = np.ones_like(z)
            env_p = np.ones_like(x)
        self.prof_c = cos_x * env_c        # phi_c at y = 0
        self.prof_p = env_p * cos_z        # phi_p at y = 0
        self.prof_cc = self.prof_c * self.prof_p
        self.prof_c2 = self.prof_c**2
        self.prof_p2 = self.prof_p**2
        if trap:
            cx = (params.trap_frequency_x / (2 * w_r)) ** 2
            cz = (params.trap_frequency_z / (2 * w_r)) ** 2
            self.v_trap = cx * x**2 + cz * z**2
        else:
            self.v_trap = np.zeros((1, 1))
        self.ksq = grid.ksq()
        self.g2d = self._reduce_interaction(sigma_y_mode, sigma_y)

    def _reduce_interaction(self, mode, sigma_y):
        p, d = self.params, self.derived
        if p.scattering_length == 0.0:
            return 0.0
        if sigma_y is None:
            if mode == "thomas-fermi":
                # R_y of the 3D Thomas-Fermi cloud; rms width is R_y/sqrt(7)
                from .boundary import thomas_fermi
                sigma_y = thomas_fermi(p).radius_y / math.sqrt(7.0)
            elif mode == "harmonic":
                sigma_y = math.sqrt(HBAR / (p.atom_mass * p.trap_frequency_y))
            else:
                raise ValueError(f"unknown sigma_y_mode {mode!r}")
        g3d = collision_strength(p)
        g2d = g3d / (math.sqrt(2 * math.pi) * sigma_y)      # J m^2
        return g2d * d.wavenumber**2 / d.recoil_energy

    # -- diagnostics ------------------------------------------------------

    def norm(self, psi):
        return float((np.abs(psi) ** 2).sum() * self.grid.cell_area)

    def order_parameters(self, psi) -> OrderParameters:
        dens = np.abs(psi) ** 2
        da = self.grid.cell_area
        return OrderParameters(
            theta=float((self.prof_cc * dens).sum() * da),
            bunching=float((self.prof_c2 * dens).sum() * da),
        )

    def alpha_of(self, psi, eta):
        op = self.order_parameters(psi)
        return cavity_amplitude(op.theta, op.bunching, eta,
                                self.delta_c, self.u0, self.kappa), op

    def pump_depth_of(self, eta):
        """Scaled lattice depth v0 = eta^2/u0 (<= 0 in the red regime)."""
        if not self.pump_lattice or eta == 0.0:
            return 0.0
        return eta**2 / self.u0

    def potential(self, eta, alpha):
        """Dynamic potential grid in E_r (without the collisional term)."""
        v = self.pump_depth_of(eta) * self.prof_p2 \
            + self.u0 * abs(alpha) ** 2 * self.prof_c2 \
            + 2.0 * eta * alpha.real * self.prof_cc
        if self.trap:
            v = v + self.v_trap
        return v

    def energy(self, psi, eta, alpha=None):
        """Mean-field energy per the instantaneous cavity amplitude, in E_r."""
        if alpha is None:
            alpha, _ = self.alpha_of(psi, eta)
        da = self.grid.cell_area
        ft = sfft.fft2(psi)
        kin = float((self.ksq * np.abs(ft) ** 2).sum()
                    * da / (self.grid.points_x * self.grid.points_z))
        dens = np.abs(psi) ** 2
        pot = float((self.potential(eta, alpha) * dens).sum() * da)
        inter = 0.5 * self.g2d * float((dens**2).sum() * da)
        return kin + pot + inter

    def edge_density_fraction(self, psi):
        dens = np.abs(psi) ** 2
        edge = max(dens[0, :].max(), dens[-1, :].max(),
                   dens[:, 0].max(), dens[:, -1].max())
        return edge / dens.max()

    def _check_edges(self, psi, where):
        if self.trap and self.edge_density_fraction(psi) > 1e-10:
            raise GridError(
                f"{where}: cloud reaches the grid edge "
                f"(edge/peak = {self.edge_density_fraction(psi):.2e}); "
                "enlarge the grid")

    # -- initial states ---------------------------------------------------

    def initial_state(self, seed=None, noise=0.0):
        """Normalized starting field: homogeneous without a trap, a wide
        Gaussian inside one, plus optional multiplicative complex noise."""
        g = self.grid
        if self.trap:
            from .boundary import thomas_fermi
            k = self.derived.wavenumber
            tf = thomas_fermi(self.params)
            sx = max(0.5 * k * tf.radius_x, 2.0)
            sz = max(0.5 * k * tf.radius_z, 2.0)
            psi = np.exp(-(g.x() / sx) ** 2 - (g.z() / sz) ** 2).astype(complex)
        else:
            psi = np.ones((g.points_x, g.points_z), dtype=complex)
        if noise:
            rng = np.random.default_rng(seed)
            psi = psi * (1.0 + noise * (rng.standard_normal(psi.shape)
                                        + 1j * rng.standard_normal(psi.shape)))
        return self.renormalize(psi)

    def renormalize(self, psi):
        return psi * math.sqrt(self.n_atoms / self.norm(psi))

    # -- propagation ------------------------------------------------------

    def _step(self, psi, eta, dt, imaginary):
        """One Strang step; alpha from the pre-step density."""
        alpha, op = self.alpha_of(psi, eta)
        if imaginary:
            exp_k = np.exp(-self.ksq * (dt / 2))
            phase = -dt
        else:
            exp_k = np.exp(-1j * self.ksq * (dt / 2))
            phase = -1j * dt
        psi = sfft.ifft2(exp_k * sfft.fft2(psi))
        v = self.potential(eta, alpha)
        if self.g2d:
            v = v + self.g2d * np.abs(psi) ** 2
        psi = np.exp(phase * v) * psi
        psi = sfft.ifft2(exp_k * sfft.fft2(psi))
        return psi, alpha, op

    def imaginary_time_ground_state(self, eta, *, seed=None, noise=1e-4,
                                    dtau=2e-3, tol_energy=1e-10,
                                    tol_theta=1e-8, max_steps=200_000,
                                    psi0=None):
        """Relax to the self-consistent ground state at fixed pump strength.

        Converged when the energy change per step drops below
        tol_energy * N (E_r) and |dTheta| below tol_theta * N.  Returns a
        dict with psi, alpha, theta, bunching, energy and the step count;
        raises ConvergenceError (with the recent theta trace attached) if
        max_steps is exhausted.
        """
        psi = self.initial_state(seed, noise) if psi0 is None else self.renormalize(psi0)
        n = self.n_atoms
        # convergence is judged over a sliding window of checks: near the
        # critical point the unstable mode grows slowly out of the noise, so
        # instantaneous differences alone would declare victory while the
        # state is still sliding off the normal-phase saddle
        check_every = 10
        window = 30
        e_hist, th_hist = [], []
        for step in range(1, max_steps + 1):
            psi, alpha, _ = self._step(psi, eta, dtau, imaginary=True)
            psi = self.renormalize(psi)
            if step % check_every == 0:
                e_hist.append(self.energy(psi, eta))
                th_hist.append(self.order_parameters(psi).theta)
                if len(e_hist) >= window:
                    e_win = e_hist[-window:]
                    th_win = th_hist[-window:]
                    e_span = max(e_win) - min(e_win)
                    th_span = max(th_win) - min(th_win)
                    growing = abs(th_win[-1]) > 1.5 * abs(th_win[0]) \
                        + tol_theta * n
                    if (e_span < tol_energy * n * window * check_every
                            and th_span < tol_theta * n and not growing):
                        alpha, op = self.alpha_of(psi, eta)
                        self._check_edges(psi, "imaginary time")
                        return {"psi": psi, "alpha": alpha, "theta": op.theta,
                                "bunching": op.bunching, "energy": e_hist[-1],
                                "steps": step,
                                "energy_trace": np.array(e_hist)}
        err = ConvergenceError(
            f"imaginary time not converged after {max_steps} steps")
        err.theta_trace = np.array(th_hist[-200:])
        raise err

    def real_time_evolve(self, psi0, ramp, t_final, dt, *, record_every=1,
                         renormalize=False, edge_check_every=2000,
                         snapshot_times=None):
        """Propagate psi0 under a pump schedule; returns the trajectory.

        ramp is a callable t -> (power_watt, eta_scaled); see PowerRamp.
        Records t, P, eta, alpha, photon number, Theta, B and the norm every
        ``record_every`` steps.  Norm drift beyond 1e-6 relative per 1000
        steps aborts (the splitting is unitary, so drift means blow-up).
        ``snapshot_times`` requests (time, psi-copy) pairs under "snapshots".
        """
        psi = np.array(psi0, dtype=complex)
        n_steps = max(1, int(round(t_final / dt)))
        n_rec = n_steps // record_every + 1
        rec = {
            "t": np.empty(n_rec), "power": np.empty(n_rec),
            "eta": np.empty(n_rec), "alpha": np.empty(n_rec, dtype=complex),
            "nphoton": np.empty(n_rec), "theta": np.empty(n_rec),
            "bunching": np.empty(n_rec), "norm": np.empty(n_rec),
        }
        norm0 = self.norm(psi)
        snaps = []
        want = sorted(snapshot_times) if snapshot_times else []
        idx = 0
        for i in range(n_steps + 1):
            t = i * dt
            power, eta = ramp(t)
            if i % record_every == 0 and idx < n_rec:
                alpha, op = self.alpha_of(psi, eta)
                nrm = self.norm(psi)
                rec["t"][idx] = t
                rec["power"][idx] = power
                rec["eta"][idx] = eta
                rec["alpha"][idx] = alpha
                rec["nphoton"][idx] = abs(alpha) ** 2
                rec["theta"][idx] = op.theta
                rec["bunching"][idx] = op.bunching
                rec["norm"][idx] = nrm
                if not np.isfinite(nrm):
                    raise DivergenceError(f"norm is not finite at t={t:g}")
                drift = abs(nrm / norm0 - 1.0)
                if not renormalize and drift > 1e-6 * max(1.0, i / 1000.0):
                    raise DivergenceError(
                        f"norm drift {drift:.3e} after {i} steps; "
                        "step size too large")
                idx += 1
            while want and t >= want[0] - 1e-12:
                snaps.append((want.pop(0), psi.copy()))
            if i == n_steps:
                break
            psi, _, _ = self._step(psi, eta, dt, imaginary=False)
            if renormalize:
                psi = self.renormalize(psi)
            if edge_check_every and i % edge_check_every == edge_check_every - 1:
                self._check_edges(psi, f"real time (t={t:g})")
        for key in rec:
            rec[key] = rec[key][:idx]
        rec["psi"] = psi
        rec["snapshots"] = snaps
        return rec

    # -- spectra and overlaps --------------------------------------------

    def momentum_spectrum(self, psi):
        """|psi~|^2 on the (fft-shifted) momentum grid, normalized so the
        total weight is the atom number; momenta in units of hbar*k."""
        g = self.grid
        ft = sfft.fftshift(sfft.fft2(psi))
        # F = fft * dA approximates the continuous transform; Parseval then
        # reads sum |F|^2 / (Lx Lz) = N
        spec = (np.abs(ft) ** 2) * g.cell_area**2 / (g.extent_x * g.extent_z)
        px = sfft.fftshift(g.kx()).ravel()
        pz = sfft.fftshift(g.kz()).ravel()
        return px, pz, spec

    def momentum_peaks(self, psi, centers=None, half_width=0.5):
        """Integrated weights in half-open boxes around the given momentum
        centers (units of hbar*k).  Default centers cover the condensate
        peak, the pump-lattice doublet and the checkerboard quartet."""
        if centers is None:
            centers = [(0, 0), (0, 2), (0, -2), (2, 0), (-2, 0),
                       (1, 1), (1, -1), (-1, 1), (-1, -1)]
        px, pz, spec = self.momentum_spectrum(psi)
        rows = []
        for cx, cz in centers:
            mx = (px >= cx - half_width) & (px < cx + half_width)
            mz = (pz >= cz - half_width) & (pz < cz + half_width)
            rows.append((float(cx), float(cz),
                         float(spec[np.ix_(mx, mz)].sum())))
        return rows

    def overlap_integrals_2d(self, psi):
        """(N_eff, B0, E_int) of a given state on this grid.

        N_eff = <phi_c^2 phi_p^2>, B0 = <phi_c^2> (both dimensionless),
        E_int = (g2d/2N) * integral |psi|^4 converted to joules.  These are
        the 2D counterparts of the 3D Thomas-Fermi overlaps and feed the
        same critical-pump formula when comparing against this engine's own
        dynamics.
        """
        from .boundary import OverlapIntegrals
        dens = np.abs(psi) ** 2
        da = self.grid.cell_area
        n_eff = float((self.prof_c2 * self.prof_p2 * dens).sum() * da)
        b0 = float((self.prof_c2 * dens).sum() * da)
        e_int_scaled = (self.g2d / (2 * self.n_atoms)) * float((dens**2).sum() * da)
        e_int = e_int_scaled * self.derived.recoil_energy
        delta_tilde = self.params.pump_cavity_detuning \
            - self.params.single_atom_lightshift * b0
        return OverlapIntegrals(n_eff=n_eff, bunching_0=b0,
                                interaction_energy=e_int,
                                shifted_detuning=delta_tilde)


# ---------------------------------------------------------------------------
# pump schedules and threshold detection
# ---------------------------------------------------------------------------

class PowerRamp:
    """Piecewise-linear pump power P(t), converted to eta(t) on the fly.

    Breakpoints are (time, power) pairs; power is held at the last value
    beyond the final breakpoint.  eta = sqrt(U0 * c_cal * P / hbar) / omega_r
    (scaled), so a linear power ramp is linear in eta^2.
    """

    def __init__(self, params: ExperimentParams, breakpoints):
        pts = sorted((float(t), float(p)) for t, p in breakpoints)
        if len(pts) < 2:
            raise ValueError("need at least two (time, power) breakpoints")
        if any(p < 0 for _, p in pts):
            raise ValueError("pump power must be >= 0")
        self.times = np.array([t for t, _ in pts])
        self.powers = np.array([p for _, p in pts])
        d = derive(params)
        coef = params.single_atom_lightshift * params.calibration_constant / HBAR
        if coef < 0:
            raise ValueError("U0 and the calibration constant must have the "
                             "same sign for eta to be real")
        self._eta_sq_per_watt = coef / d.recoil_frequency**2

    def __call__(self, t):
        p = float(np.interp(t, self.times, self.powers))
        return p, math.sqrt(self._eta_sq_per_watt * p)


class EtaRamp:
    """Piecewise-linear ramp directly in the scaled two-photon Rabi
    frequency (power is reported as NaN; used in idealized runs where the
    power calibration is deliberately decoupled)."""

    def __init__(self, breakpoints):
        pts = sorted((float(t), float(e)) for t, e in breakpoints)
        if len(pts) < 2:
            raise ValueError("need at least two (time, eta) breakpoints")
        self.times = np.array([t for t, _ in pts])
        self.etas = np.array([e for _, e in pts])

    def __call__(self, t):
        return math.nan, float(np.interp(t, self.times, self.etas))


def detect_threshold(trajectory, *, baseline_fraction=0.05, floor_factor=10.0,
                     consecutive=50):
    """First ramp point where the photon number leaves the noise floor.

    The floor is floor_factor times the mean photon number over the first
    baseline_fraction of the trace; the threshold is the first sample from
    which ``consecutive`` successive samples all exceed the floor.  Returns
    a dict (detected, index, power, eta, floor) -- detected=False when the
    trace never qualifies.
    """
    nph = np.asarray(trajectory["nphoton"])
    n = len(nph)
    n_base = max(1, int(baseline_fraction * n))
    floor = floor_factor * float(nph[:n_base].mean())
    above = nph > floor
    run = 0
    for i in range(n):
        run = run + 1 if above[i] else 0
        if run >= consecutive:
            j = i - consecutive + 1
            return {"detected": True, "index": j,
                    "power": float(trajectory["power"][j]),
                    "eta": float(trajectory["eta"][j]), "floor": floor}
    return {"detected": False, "index": None, "power": math.nan,
            "eta": math.nan, "floor": floor}


def oscillation_metric(trajectory, window_fraction=0.2):
    """std/mean of the photon number over the final window; the frustrated
    regime shows values of order one, a settled phase stays near zero."""
    nph = np.asarray(trajectory["nphoton"])
    tail = nph[int((1 - window_fraction) * len(nph)):]
    mean = float(tail.mean())
    if mean == 0.0:
        return 0.0
    return float(tail.std() / mean)
