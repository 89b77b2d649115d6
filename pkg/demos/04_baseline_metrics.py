"""
Hand-crafted CSI similarities
=============================

Three classical similarities used as baselines: correlation matrix distance
(CMD), the overlap of dominant left singular vectors (SVD), and the inverse
squared distance between CSI magnitudes. We look at how each one decays with
the distance between two users.
"""

import numpy as np

from csi_supcon import default_scenario, generate_dataset, sample_positions
from csi_supcon.similarity import cmd_similarity, magnitude_similarity, svd_similarity

db = generate_dataset(default_scenario(rng_seed=1), sample_positions(400, seed=1))
ref = db.csi[0].astype(np.complex128)
d = np.linalg.norm(db.positions - db.positions[0], axis=1)

bins = [0, 10, 25, 50, 100, 300]
print("distance bin     CMD     SVD     Magn")
for lo, hi in zip(bins[:-1], bins[1:]):
    sel = np.where((d > lo) & (d <= hi))[0]
    if len(sel) == 0:
        continue
    cmd = np.mean([cmd_similarity(ref, db.csi[i]) for i in sel])
    svd = np.mean([svd_similarity(ref, db.csi[i]) for i in sel])
    mag = np.median([magnitude_similarity(ref, db.csi[i]) for i in sel])
    print("%4d-%-4d m    %.3f   %.3f   %.2e" % (lo, hi, cmd, svd, mag))

# CMD ignores a common gain and any per-antenna phase rotation
D = np.diag(np.exp(1j * np.linspace(0, 3, ref.shape[0])))
print("CMD invariance:", cmd_similarity(3 * D @ ref, D @ db.csi[1].astype(np.complex128)) - cmd_similarity(ref, db.csi[1].astype(np.complex128)))
