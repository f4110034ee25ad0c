"""Quasi-hyperbolic unfolding of planar domains, and what a cusp does to it."""
import numpy as np

from hypgreen.unfold import (base_operator, check_uniformity, check_unfolding_hyperbolic,
                             hardy_constant, sample_domain, transfer_residual)

for spec in ("disc", "square", "lshape", "slit"):
    rep = check_unfolding_hyperbolic(spec, 0.04)
    uni = check_uniformity(sample_domain(spec, 0.04))
    print(f"{spec:7s} delta {rep['delta'][0]:.3f} -> {rep['delta'][1]:.3f}   worst_c {uni['worst_c']:.2f}")

for h in (0.02, 0.01, 0.005):
    ds = sample_domain("cusp:2", h)
    tip = int(np.argmin(ds.points[:, 0]))
    c = check_uniformity(ds, pairs=[(tip, ds.nearest((0.8, 0.0)))])["worst_c"]
    print(f"cusp h = {h:<6} tip-to-centre cone constant {c:.2f}")

ds = sample_domain("disc", 0.04)
op = base_operator(ds, potential=0.3)
print(f"disc Hardy constant {hardy_constant(base_operator(ds), ds):.4f}, "
      f"harmonic transfer residual {transfer_residual(op, ds):.1e}")
for h in (1 / 50, 1 / 100, 1 / 200, 1 / 400):
    iv = sample_domain("interval", h)
    print(f"interval h = 1/{round(1 / h):<4d} Hardy constant {hardy_constant(base_operator(iv), iv):.4f}")
