"""
Autocorrelation preprocessing
=============================

The encoder never sees raw CSI. Each sample is reduced to the spatial
autocorrelation C = H H^H, packed into one real B x B matrix and scaled to unit
Frobenius norm. This removes per-subcarrier phase offsets and the overall gain.
"""

import numpy as np

from csi_supcon import preprocess
from csi_supcon.preprocess import unpack

rng = np.random.default_rng(0)
H = rng.standard_normal((4, 16)) + 1j * rng.standard_normal((4, 16))

out = preprocess(H)
print("packed matrix shape:", out.R_matrix.shape, " norm factor %.3f" % out.norm_factor)
print(np.round(out.R_matrix, 3))

# timing/frequency offsets show up as a phase per subcarrier, which C ignores
offsets = np.exp(1j * rng.uniform(0, 2 * np.pi, 16))
print("phase-offset change:", np.abs(preprocess(H * offsets).R_matrix - out.R_matrix).max())
print("gain change:", np.abs(preprocess(7.5 * H).R_matrix - out.R_matrix).max())

# the packing is lossless up to the normalization
C = H @ H.conj().T
print("unpack error:", np.abs(unpack(out.R_matrix) * out.norm_factor - C).max())
