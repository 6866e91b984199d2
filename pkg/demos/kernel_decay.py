"""Sup-norm decay of the oscillatory kernel and its three stationary-phase pieces.

A coarse frequency step keeps this fast; the largest sigma already pushes mass to
the edge of the sampled box, which is reported next to each value.
"""
import numpy as np

from rotstrat import kernel as K

sigmas = np.geomspace(10.0, 1000.0, 6)
rows = K.decay_table(sigmas, K.PIECES, sampling=K.FrequencySampling(h=1 / 32, npad=256), boundary_tol=None)

print(f"{'sigma':>9} " + " ".join(f"{p:>10}" for p in K.PIECES) + "  boundary")
for s in sigmas:
    here = [r for r in rows if r.sigma == s]
    print(f"{s:9.1f} " + " ".join(f"{r.sup_abs:10.4g}" for r in here) + f"  {max(r.boundary_mass for r in here):.2f}")

for piece in K.PIECES:
    fit = K.decay_fit(sigmas, piece, sups=[r.sup_abs for r in rows if r.piece == piece])
    print(f"{piece:>7}: slope {fit.slope:+.3f}")
whole = [r.sup_abs for r in rows if r.piece == "whole"]
print(f"envelope C for C min(1, sigma^-1/2): {K.envelope_constant(sigmas, whole):.2f}")
