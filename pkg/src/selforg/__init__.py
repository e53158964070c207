"""Self-organization of a pumped BEC in a lossy optical cavity.

Library layout:

* :mod:`selforg.params` -- experimental parameters, derived model
  quantities, mode profiles, parameter files;
* :mod:`selforg.dicke` -- two-mode Dicke engines: exact diagonalization,
  semiclassical dissipative dynamics, analytic critical coupling;
* :mod:`selforg.gpe` -- 2D split-step mean-field simulator with the
  adiabatically eliminated cavity field;
* :mod:`selforg.boundary` -- Thomas-Fermi cloud, overlap integrals and the
  analytic phase boundary over detuning;
* :mod:`selforg.sweeps` -- experiment orchestration (ramps, phase diagrams,
  seed ensembles) and persistent output;
* :mod:`selforg.cli` -- the ``selforg`` command-line front end.
"""

__version__ = "0.1.0"

from .params import (ExperimentParams, DerivedParams, ParameterError, derive,
                     cavity_profile, pump_profile, external_potential,
                     load_params, with_pump_power, with_pump_depth)
from .dicke import (DickeParams, SemiclassicalState, critical_coupling,
                    has_transition, build_hamiltonian,
                    ground_state_observables,
                    converged_ground_state_observables, parity_transform,
                    semiclassical_rhs, integrate_semiclassical,
                    steadystate_photon_fraction, instability_threshold,
                    normal_state)
from .grid import Grid2D, GridError, save_field, load_field
from .gpe import (CondensateSim, PowerRamp, EtaRamp, cavity_amplitude,
                  detect_threshold, oscillation_metric)
from .boundary import (ThomasFermiProfile, OverlapIntegrals, CriticalPoint,
                       thomas_fermi, overlap_integrals, critical_pump,
                       boundary_curve, boundary_table_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
