"""Two-mode Dicke description of the pumped BEC-cavity system.

H/hbar = omega0*Jz + omega*a^dag a + (lam/sqrt(N)) (a^dag + a)(J+ + J-)
         [+ (3/4)*U0 * c1^dag c1 * a^dag a   when the dispersive term is on]

with collective spin operators built on the symmetric j = N/2 sector and
c1^dag c1 = Jz + N/2.  Three engines live here:

* exact diagonalization in the truncated |j=N/2, m> x |n_photon> space
  (closed system, brute-force oracle for small N);
* semiclassical driven-dissipative equations of motion, with cavity decay
  -kappa*alpha, in per-particle variables;
* the analytic critical coupling of the dissipative model,
  lam_cr = sqrt((omega^2 + kappa^2) * omega0 / omega) / 2.

Per-particle normalization: the semiclassical state stores
alpha_scaled = <a>/sqrt(N), j_minus = <J->/N and j_z = <Jz>/N, so
|alpha_scaled|^2 is the photon number per atom and the equations of motion
contain no explicit N.  Closed dynamics conserves |j_minus|^2 + j_z^2.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class DivergenceError(RuntimeError):
    """Trajectory left the physical region (NaN/overflow)."""


class ConvergenceError(RuntimeError):
    """An eigensolve or cutoff scan failed to converge."""


# dense diagonalization is used up to this dimension; above it the solver
# switches to sparse Lanczos with a fixed deterministic start vector
_DENSE_CAP = 4000
_DIM_CAP = 200_000


@dataclass(frozen=True)
class DickeParams:
    omega: float                    # field frequency, rad/s (sign free)
    omega0: float                   # two-level splitting, rad/s, > 0
    coupling: float                 # lam, rad/s
    kappa: float = 0.0              # cavity decay, rad/s, >= 0
    n_atoms: int = 1
    dispersive_shift_enabled: bool = False
    u0: float = 0.0                 # only used when the dispersive term is on

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")


def critical_coupling(omega, omega0, kappa=0.0):
    """Critical coupling of the dissipative Dicke model.

    lam_cr = (1/2) * sqrt((omega^2 + kappa^2)/omega * omega0).  For
    omega <= 0 the normal phase is never destabilized and there is no real
    solution; that outcome is represented as NaN rather than an exception so
    sweep tables serialize cleanly.  Use :func:`has_transition` to branch.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if omega <= 0:
        return math.nan
    return 0.5 * math.sqrt((omega * omega + kappa * kappa) / omega * omega0)


def has_transition(omega):
    """True when the field frequency allows a superradiant transition."""
    return omega > 0


# ---------------------------------------------------------------------------
# exact diagonalization, symmetric sector
# ---------------------------------------------------------------------------

def _spin_matrices(n_atoms):
    j = n_atoms / 2.0
    m = -j + np.arange(n_atoms + 1)
    jz = sp.diags(m)
    # <m+1| J+ |m> = sqrt(j(j+1) - m(m+1))
    jp_elem = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jplus = sp.diags(jp_elem, -1)
    return jz, jplus


def _boson_matrices(n_max):
    n = np.arange(n_max + 1)
    num = sp.diags(n.astype(float))
    adag = sp.diags(np.sqrt(n[1:].astype(float)), -1)
    return num, adag


def build_hamiltonian(p: DickeParams, n_max):
    """Sparse Hermitian H/hbar on |j=N/2, m> x |0..n_max>.

    Ordering: spin index slow, photon index fast.  The optional dispersive
    term uses c1^dag c1 = Jz + N/2 and is parity even, so the parity symmetry
    of the Dicke Hamiltonian is preserved either way.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    dim = (p.n_atoms + 1) * (n_max + 1)
    if dim > _DIM_CAP:
        raise ValueError(
            f"Hilbert space dimension {dim} exceeds cap {_DIM_CAP}; "
            "reduce n_atoms or n_max")
    jz, jplus = _spin_matrices(p.n_atoms)
    num, adag = _boson_matrices(n_max)
    eye_s = sp.identity(p.n_atoms + 1, format="csr")
    eye_b = sp.identity(n_max + 1, format="csr")
    jx2 = jplus + jplus.T             # J+ + J-
    aa = adag + adag.T                # a^dag + a
    h = (p.omega0 * sp.kron(jz, eye_b)
         + p.omega * sp.kron(eye_s, num)
         + (p.coupling / math.sqrt(p.n_atoms)) * sp.kron(jx2, aa))
    if p.dispersive_shift_enabled:
        c1num = jz + (p.n_atoms / 2.0) * sp.identity(p.n_atoms + 1)
        h = h + 0.75 * p.u0 * sp.kron(c1num, num)
    return h.tocsr()


def parity_vector(n_atoms, n_max):
    """Diagonal of the parity operator: (-1)^(n_photon + m + j) per basis state.

    Parity flips a -> -a and J+- -> -J+-; it squares to the identity and
    commutes with the Hamiltonian.
    """
    exc = np.arange(n_atoms + 1)            # m + j = excited-mode occupation
    n = np.arange(n_max + 1)
    return np.where((exc[:, None] + n[None, :]) % 2 == 0, 1.0, -1.0).ravel()


def parity_transform(state, n_atoms, n_max):
    """Apply the parity operator to a state vector (involution)."""
    state = np.asarray(state)
    if state.shape != ((n_atoms + 1) * (n_max + 1),):
        raise ValueError("state dimension does not match (n_atoms, n_max)")
    return parity_vector(n_atoms, n_max) * state


def ground_state(h):
    """Lowest eigenpair of a sparse Hermitian matrix, deterministically."""
    dim = h.shape[0]
    if dim <= _DENSE_CAP:
        w, v = np.linalg.eigh(h.toarray())
        return w[:2], v[:, 0]
    v0 = np.ones(dim) / math.sqrt(dim)
    try:
        w, v = spla.eigsh(h, k=2, which="SA", v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("sparse eigensolver did not converge") from exc
    order = np.argsort(w)
    return w[order], v[:, order[0]]


def ground_state_observables(p: DickeParams, n_max):
    """Ground-state (photon_fraction, inversion, order, gap) at fixed cutoff.

    photon_fraction = <a^dag a>/N, inversion = <Jz>/N, order = <J+ + J->/N.
    In the exact parity-symmetric ground state the order parameter vanishes
    identically; superradiance shows up in the photon fraction (and in the
    closing gap), not in the bare order parameter.
    """
    h = build_hamiltonian(p, n_max)
    w, psi = ground_state(h)
    nb = p.n_atoms + 1
    prob = (np.abs(psi) ** 2).reshape(nb, n_max + 1)
    n_photon = float((prob.sum(axis=0) * np.arange(n_max + 1)).sum())
    m = -p.n_atoms / 2.0 + np.arange(nb)
    jz = float((prob.sum(axis=1) * m).sum())
    jz_b, jplus = _spin_matrices(p.n_atoms)
    jx2 = sp.kron(jplus + jplus.T, sp.identity(n_max + 1))
    order = float(np.real(np.vdot(psi, jx2 @ psi)))
    return {
        "photon_fraction": n_photon / p.n_atoms,
        "inversion": jz / p.n_atoms,
        "order": order / p.n_atoms,
        "gap": float(w[1] - w[0]),
    }


def converged_ground_state_observables(p: DickeParams, n_max_start=20,
                                       atol=1e-6, n_max_limit=400):
    """Grow the photon cutoff until observables stop moving.

    Runs n_max and n_max+10 and accepts once photon_fraction, inversion and
    gap all change by less than ``atol``; returns (observables, n_max_used).
    """
    n_max = n_max_start
    prev = ground_state_observables(p, n_max)
    while n_max < n_max_limit:
        n_max += 10
        cur = ground_state_observables(p, n_max)
        if all(abs(cur[key] - prev[key]) < atol
               for key in ("photon_fraction", "inversion", "gap")):
            return cur, n_max
        prev = cur
    raise ConvergenceError(
        f"photon cutoff not converged below n_max={n_max_limit}")


# ---------------------------------------------------------------------------
# semiclassical driven-dissipative dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemiclassicalState:
    """Per-particle mean-field state: alpha = <a>/sqrt(N), j_minus = <J->/N,
    j_z = <Jz>/N."""
    alpha: complex
    j_minus: complex
    j_z: float

    def spin_length_sq(self):
        return abs(self.j_minus) ** 2 + self.j_z**2

    def photon_fraction(self):
        return abs(self.alpha) ** 2


def normal_state(noise=0.0, seed=None):
    """Fully inverted-down normal state, optionally with complex Gaussian
    symmetry-breaking seeds of the given amplitude on alpha and j_minus."""
    if noise == 0.0:
        return SemiclassicalState(0.0 + 0.0j, 0.0 + 0.0j, -0.5)
    rng = np.random.default_rng(seed)
    a = noise * complex(rng.standard_normal(), rng.standard_normal())
    jm = noise * complex(rng.standard_normal(), rng.standard_normal())
    return SemiclassicalState(a, jm, -0.5)


def semiclassical_rhs(s: SemiclassicalState, p: DickeParams):
    """Mean-field equations of motion (factorized Heisenberg equations).

    d alpha/dt = -(i*omega + kappa)*alpha - 2i*lam*Re(j_minus)
    d j_minus/dt = -i*omega0*j_minus + 2i*lam*(alpha + alpha*)*j_z
    d j_z/dt = -2*lam*(alpha + alpha*)*Im(j_minus)

    plus the parity-even dispersive corrections when enabled.  The spin
    sector is undamped, so |j_minus|^2 + j_z^2 is conserved.
    """
    lam = p.coupling
    re2a = 2.0 * s.alpha.real
    da = -(1j * p.omega + p.kappa) * s.alpha - 2j * lam * s.j_minus.real
    djm = -1j * p.omega0 * s.j_minus + 1j * lam * re2a * 2.0 * s.j_z
    djz = -lam * re2a * 2.0 * s.j_minus.imag
    if p.dispersive_shift_enabled:
        n = p.n_atoms
        shift = 0.75 * p.u0 * n
        da += -1j * shift * (s.j_z + 0.5) * s.alpha
        djm += -1j * shift * abs(s.alpha) ** 2 * s.j_minus
    return da, djm, djz


def _rk4_step(s, p, dt):
    a1, m1, z1 = semiclassical_rhs(s, p)
    s2 = SemiclassicalState(s.alpha + 0.5 * dt * a1, s.j_minus + 0.5 * dt * m1,
                            s.j_z + 0.5 * dt * z1)
    a2, m2, z2 = semiclassical_rhs(s2, p)
    s3 = SemiclassicalState(s.alpha + 0.5 * dt * a2, s.j_minus + 0.5 * dt * m2,
                            s.j_z + 0.5 * dt * z2)
    a3, m3, z3 = semiclassical_rhs(s3, p)
    s4 = SemiclassicalState(s.alpha + dt * a3, s.j_minus + dt * m3,
                            s.j_z + dt * z3)
    a4, m4, z4 = semiclassical_rhs(s4, p)
    return SemiclassicalState(
        s.alpha + dt * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0,
        s.j_minus + dt * (m1 + 2 * m2 + 2 * m3 + m4) / 6.0,
        s.j_z + dt * (z1 + 2 * z2 + 2 * z3 + z4) / 6.0,
    )


def max_stable_dt(p: DickeParams):
    """Fixed-step bound dt <= 0.05 / max(omega, omega0, kappa, lam)."""
    return 0.05 / max(abs(p.omega), p.omega0, p.kappa, abs(p.coupling))


def integrate_semiclassical(s0: SemiclassicalState, p: DickeParams,
                            t_final, dt=None, record_every=1):
    """Fixed-step RK4 trajectory of the semiclassical equations.

    Returns a dict of arrays ``t, alpha, photon_frac, jz, order`` sampled
    every ``record_every`` steps (plus the final state under ``state``).
    dt defaults to :func:`max_stable_dt`; a larger explicit dt is rejected.
    Divergence (NaN or runaway photon number) aborts with DivergenceError.
    """
    bound = max_stable_dt(p)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} does not resolve the fastest scale "
                         f"(need <= {bound:g})")
    n_steps = max(1, int(round(t_final / dt)))
    n_rec = n_steps // record_every + 1
    t = np.empty(n_rec)
    alpha = np.empty(n_rec, dtype=complex)
    jz = np.empty(n_rec)
    order = np.empty(n_rec)

    s = s0
    idx = 0
    for i in range(n_steps + 1):
        if i % record_every == 0 and idx < n_rec:
            t[idx] = i * dt
            alpha[idx] = s.alpha
            jz[idx] = s.j_z
            order[idx] = 2.0 * s.j_minus.real
            idx += 1
        if i == n_steps:
            break
        s = _rk4_step(s, p, dt)
        if i % 100 == 0:
            a2 = abs(s.alpha) ** 2
            if not np.isfinite(a2) or a2 > 1e12:
                raise DivergenceError(
                    f"semiclassical trajectory diverged at t={i*dt:g} "
                    f"(|alpha|^2={a2:g}); reduce dt or check parameters")
    return {
        "t": t[:idx], "alpha": alpha[:idx],
        "photon_frac": np.abs(alpha[:idx]) ** 2,
        "jz": jz[:idx], "order": order[:idx],
        "state": s,
    }


def integrate_semiclassical_ramp(s0: SemiclassicalState, p: DickeParams,
                                 coupling_of_t, t_final, dt=None,
                                 record_every=1):
    """RK4 trajectory with a time-dependent coupling lam(t).

    ``coupling_of_t`` maps time to the coupling; all other parameters are
    fixed.  Same record layout as :func:`integrate_semiclassical`, plus the
    instantaneous coupling under ``coupling``.
    """
    lam_max = max(abs(coupling_of_t(0.0)), abs(coupling_of_t(t_final)))
    bound = 0.05 / max(abs(p.omega), p.omega0, p.kappa, lam_max, 1e-30)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} does not resolve the fastest scale "
                         f"(need <= {bound:g})")
    n_steps = max(1, int(round(t_final / dt)))
    n_rec = n_steps // record_every + 1
    t = np.empty(n_rec)
    alpha = np.empty(n_rec, dtype=complex)
    jz = np.empty(n_rec)
    order = np.empty(n_rec)
    lam_rec = np.empty(n_rec)
    s = s0
    idx = 0
    for i in range(n_steps + 1):
        now = i * dt
        if i % record_every == 0 and idx < n_rec:
            t[idx] = now
            alpha[idx] = s.alpha
            jz[idx] = s.j_z
            order[idx] = 2.0 * s.j_minus.real
            lam_rec[idx] = coupling_of_t(now)
            idx += 1
        if i == n_steps:
            break
        # piecewise-frozen coupling across the step keeps RK4 simple; the
        # dt bound makes the per-step coupling change negligible
        p_now = replace(p, coupling=coupling_of_t(now + 0.5 * dt))
        s = _rk4_step(s, p_now, dt)
        if i % 100 == 0 and not np.isfinite(abs(s.alpha)):
            raise DivergenceError(f"ramp trajectory diverged at t={now:g}")
    return {
        "t": t[:idx], "alpha": alpha[:idx],
        "photon_frac": np.abs(alpha[:idx]) ** 2,
        "jz": jz[:idx], "order": order[:idx], "coupling": lam_rec[:idx],
        "state": s,
    }


def steadystate_photon_fraction(p: DickeParams):
    """Analytic superradiant fixed point |alpha|^2 (per atom) above threshold.

    Setting the mean-field time derivatives to zero on the spin sphere gives
    j_z = -(lam_cr/lam)^2/2, |j_minus|^2 = 1/4 - j_z^2 and

        |alpha|^2/N = lam^2 * (1 - (lam_cr/lam)^4) / (omega^2 + kappa^2).

    Below threshold (or with no transition at all) the normal phase is the
    steady state and the function returns 0.  Continuity at lam = lam_cr
    makes the transition second order.
    """
    lam_cr = critical_coupling(p.omega, p.omega0, p.kappa)
    if math.isnan(lam_cr) or abs(p.coupling) <= lam_cr:
        return 0.0
    ratio4 = (lam_cr / p.coupling) ** 4
    return p.coupling**2 * (1.0 - ratio4) / (p.omega**2 + p.kappa**2)


def superradiant_fixed_point(p: DickeParams, sign=+1):
    """The analytic broken-symmetry fixed point (above threshold)."""
    lam_cr = critical_coupling(p.omega, p.omega0, p.kappa)
    if math.isnan(lam_cr) or abs(p.coupling) <= lam_cr:
        raise ValueError("no superradiant fixed point below threshold")
    x = (lam_cr / p.coupling) ** 2
    jz = -0.5 * x
    jm = sign * math.sqrt(0.25 - jz * jz)
    alpha = -2 * p.coupling * jm * (p.omega + 1j * p.kappa) / (
        p.omega**2 + p.kappa**2)
    return SemiclassicalState(alpha, complex(jm), jz)


# ---------------------------------------------------------------------------
# linear stability of the normal phase
# ---------------------------------------------------------------------------

def _pack(s: SemiclassicalState):
    return np.array([s.alpha.real, s.alpha.imag,
                     s.j_minus.real, s.j_minus.imag, s.j_z])


def _unpack(y):
    return SemiclassicalState(complex(y[0], y[1]), complex(y[2], y[3]), y[4])


def normal_phase_growth_rate(p: DickeParams, fd_step=1e-7):
    """Largest real part of the Jacobian spectrum at the normal fixed point.

    The Jacobian is built by central finite differences of the equations of
    motion, so this is an independent route to the instability threshold:
    the rate crosses zero exactly at the critical coupling.  The j_z
    direction decouples exactly at the fixed point (it is the neutral mode
    of the conserved spin length), so the spectrum is taken on the
    (Re alpha, Im alpha, Re j_minus, Im j_minus) block.
    """
    y0 = _pack(normal_state())
    jac = np.empty((4, 4))
    for i in range(4):
        yp = y0.copy()
        yp[i] += fd_step
        ym = y0.copy()
        ym[i] -= fd_step
        fp = np.array(semiclassical_rhs(_unpack(yp), p))
        fm = np.array(semiclassical_rhs(_unpack(ym), p))
        col = (fp - fm) / (2 * fd_step)
        jac[:, i] = [col[0].real, col[0].imag, col[1].real, col[1].imag]
    return float(np.linalg.eigvals(jac).real.max())


def instability_threshold(p: DickeParams, lam_hi=None, rtol=1e-9):
    """Coupling at which the normal phase destabilizes, by bisection on the
    finite-difference growth rate.  Independent check of Eq.-(9)-type
    formulas; NaN when omega <= 0 (no instability at any coupling)."""
    if p.omega <= 0:
        return math.nan
    if lam_hi is None:
        guess = critical_coupling(p.omega, p.omega0, p.kappa)
        lam_hi = 4.0 * guess if np.isfinite(guess) else 10.0 * p.omega0
    lo, hi = 0.0, lam_hi
    if normal_phase_growth_rate(replace(p, coupling=hi)) <= 0:
        raise ValueError("upper bracket is still stable; raise lam_hi")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if normal_phase_growth_rate(replace(p, coupling=mid)) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
