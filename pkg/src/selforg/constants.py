"""Fundamental constants (CODATA 2018) and rubidium-87 defaults.

Everything in this package that touches SI quantities pulls its constants
from this table, so changing a value here changes it everywhere.
"""

HBAR = 1.054571817e-34          # reduced Planck constant [J s]
ATOMIC_MASS_UNIT = 1.66053906660e-27    # unified atomic mass unit [kg]
BOHR_RADIUS = 5.29177210903e-11         # [m]

# 87Rb
RB87_MASS = 86.909180520 * ATOMIC_MASS_UNIT     # [kg]
RB87_SCATTERING_LENGTH = 100.4 * BOHR_RADIUS    # |1,-1> s-wave default [m]
