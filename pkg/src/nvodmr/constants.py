"""Physical constants, spin operators and lattice geometry shared across modules.

All energies are in MHz (frequency units), fields in Gauss unless noted,
distances in Angstrom.
"""

import numpy as np

# Ground-state axial zero-field splitting of the NV- electron triplet.
D_DEFAULT_MHZ = 2870.0

# Electron gyromagnetic ratio, MHz per Gauss.
GAMMA_E_MHZ_PER_G = 2.8025

# 13C nuclear gyromagnetic ratio, MHz per Gauss (10.705 MHz/T).
GAMMA_C13_MHZ_PER_G = 1.0705e-3

# Nuclear-bath summation constants.
XI_MHZ_A3 = 19.9          # g_I mu_N g_S mu_B mu_0/(4 pi), MHz * A^3
RHO_PER_A3 = 0.177        # carbon atom density of diamond, A^-3
R0_ANGSTROM = 6.0         # inner radius of the continuum shell integral, A
NEAR_THRESHOLD_MHZ = 8.0  # couplings above this are summed site by site
SPIN_HALF_SIGMA = 0.5     # std of one component of a fluctuating spin-1/2

# Proximal-site hyperfine magnitudes, MHz.
A_FIRST_SHELL_MHZ = 130.0
A_SHELL_13P7_MHZ = 13.7
A_SHELL_12P8_MHZ = 12.8

NATURAL_ABUNDANCE = 0.011

# Spin-1 operators in the (+1, 0, -1) basis.
S1X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2)
S1Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / np.sqrt(2)
S1Z = np.diag([1.0, 0.0, -1.0]).astype(complex)

# Spin-1/2 operators in the (up, down) basis.
SHX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SHY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SHZ = np.diag([0.5, -0.5]).astype(complex)

# The four <111>-family NV axes in the cubic crystal frame (unnormalized).
NV_AXES = np.array(
    [
        [1, 1, 1],
        [-1, -1, 1],
        [-1, 1, -1],
        [1, -1, -1],
    ],
    dtype=float,
)
NV_AXES_UNIT = NV_AXES / np.sqrt(3.0)


def nv_frame(orientation: int) -> np.ndarray:
    """Orthonormal frame (rows x, y, z) of one NV orientation in crystal coords.

    z is the NV axis; x lies in the plane spanned by the axis and the crystal
    [001] direction (declared convention).
    """
    z = NV_AXES_UNIT[orientation]
    ez = np.array([0.0, 0.0, 1.0])
    x = ez - np.dot(ez, z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.array([x, y, z])


NV_FRAMES = np.array([nv_frame(k) for k in range(4)])
