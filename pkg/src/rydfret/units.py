"""Unit conversions between atomic units and the lab units used at interfaces.

Everything inside the solvers is atomic units (Hartree, Bohr, e*a0). The public
surface speaks um, us, V/cm, MHz and a0*e.
"""

from scipy import constants as _c

HARTREE_MHZ = _c.physical_constants["hartree-hertz relationship"][0] * 1e-6
BOHR_UM = _c.physical_constants["Bohr radius"][0] * 1e6
#: atomic unit of electric field in V/cm
FIELD_AU_V_PER_CM = _c.physical_constants["atomic unit of electric field"][0] * 1e-2
#: speed of light in cm/s, for cm^-1 -> Hz
C_CM_PER_S = _c.c * 100.0

#: V (MHz) = DIPOLE_COUPLING_MHZ * mu1 * mu2 / R(um)^3 with mu in a0*e
DIPOLE_COUPLING_MHZ = HARTREE_MHZ * BOHR_UM**3
#: alpha (MHz/(V/cm)^2) = POLARIZABILITY_MHZ * alpha (atomic units)
POLARIZABILITY_MHZ = HARTREE_MHZ / FIELD_AU_V_PER_CM**2
#: energy of a0*e in a 1 V/cm field, in MHz
DIPOLE_FIELD_MHZ = HARTREE_MHZ / FIELD_AU_V_PER_CM


def wavenumber_to_ghz(k_cm):
    return k_cm * C_CM_PER_S * 1e-9
