"""Geodesics on a perturbed disk: exit times, boundary convexity, conjugate points.

Run: python3 demos/geodesics.py
"""

import numpy as np

from geoxrt import ConformalBump, Euclidean, influx_fan, nontrapping_scan, strict_convexity, trace_fan
from geoxrt.geometry import conjugate_scan

flat = Euclidean()
bump = ConformalBump(0.05, (0.1, -0.2), 0.5)

# on the flat disk every chord has length 2 cos(alpha)
fan = influx_fan(flat, 16, 8, 0.05)
paths = trace_fan(flat, fan, 1e-3)
err = max(abs(p.tau_plus - 2 * np.cos(z.alpha)) for z, p in zip(fan, paths))
print(f"flat disk: {len(fan)} rays, worst chord error {err:.1e}")

# a small conformal bump bends the rays but keeps the disk simple
paths = trace_fan(bump, fan, 1e-3)
d = np.array([p.tau_plus - 2 * np.cos(z.alpha) for z, p in zip(fan, paths)])
print(f"bump: exit times shift by {d.min():+.4f} .. {d.max():+.4f}")
rep = nontrapping_scan(bump, influx_fan(bump, 32, 16, 0.05), tau_max=10.0)
print(f"bump: non-trapping {rep.ok}, longest ray {rep.max_tau:.4f}")

beta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
kappa = strict_convexity(bump, beta)
print(f"bump: boundary second fundamental form in [{kappa.min():.4f}, {kappa.max():.4f}]")

zeros = [len(conjugate_scan(bump, z, 1e-2, 10.0)) for z in fan[::9]]
print(f"bump: conjugate points along sampled rays: {zeros}")
