"""Epsilon scaling of a space-time norm of the free viscous oscillating flow.

For a frequency-localized profile the L^p_t L^r_x norm should shrink like
eps^{(theta/4)(1 - 2/r)}; a short horizon keeps the scan quick.
"""
from rotstrat import kernel as K

for p, r, theta in [(2, 6, 1), (4, 4, 1), (2, 4, 0.5)]:
    ok, why = K.strichartz_admissible(p, r, theta)
    if not ok:
        print(f"({p}, {r}, {theta}) rejected: {why}")
        continue
    rep = K.strichartz_measure(p, r, theta, [0.2, 0.1, 0.05, 0.025], t_end=1.0, n_times=41)
    norms = ", ".join(f"{v:.4g}" for v in rep.norms)
    print(f"(p, r, theta) = ({p}, {r}, {theta}): norms {norms}")
    print(f"    slope {rep.slope:.3f}, predicted {rep.predicted:.3f}")
print(K.strichartz_admissible(8, 6, 1))
