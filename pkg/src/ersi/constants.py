"""Physical constants (CODATA 2018) and silicon material parameters.

These are compiled-in named constants; tests may monkeypatch them, but
production code must import from here so that every module agrees on the
same values.
"""

MU_0 = 1.25663706212e-6    # vacuum permeability, T m / A
MU_B = 9.2740100783e-24    # Bohr magneton, J / T
MU_N = 5.0507837461e-27    # nuclear magneton, J / T
PLANCK_H = 6.62607015e-34  # Planck constant, J s (exact)
SPEED_OF_LIGHT = 299792458.0  # m / s (exact)

# 29Si nuclear moment magnitude |mu| = 0.55529 mu_N (sign irrelevant for
# an unpolarized bath; only the magnitude enters the field model).
SI29_MOMENT = 0.55529 * MU_N  # J / T, = 2.8047e-27

SI29_NATURAL_ABUNDANCE = 0.047

SILICON_LATTICE_CONSTANT_NM = 0.5431
SILICON_REFRACTIVE_INDEX = 3.48

# Zeeman conversion: one Bohr magneton in frequency units, 13.996 GHz/T.
MU_B_OVER_H = MU_B / PLANCK_H  # Hz / T

NM_TO_M = 1e-9
CM3_TO_NM3 = 1e-21  # converts a per-cm^3 density to per-nm^3
