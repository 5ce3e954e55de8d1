"""Analytic wavefront sets from Gaussian wave packets.

Run: python3 demos/wavefront.py
"""

import json

from geoxrt import PhaseSpacePoint, decay_fit, fbi, wf_probe
from geoxrt.microlocal import Dirac, HalfPlane, Interval, radon_wf_consistency

# a point mass: the packet decays like exp(-lambda |z|^2 / 2) away from it
for z in (0.0, 0.25, 0.5):
    fit = decay_fit(fbi(Dirac((0.0,)), PhaseSpacePoint(z, 1.0)))
    print(f"dirac, z = {z}: epsilon {fit.epsilon:.6f} (|z|^2/2 = {z * z / 2:.6f})")

f = Interval(-1, 1)
for z in (-1.0, -0.5, 0.0, 1.0):
    r = wf_probe(f, PhaseSpacePoint(z, 1.0))
    print(f"interval, z = {z:+.1f}: {r.classification:8s} eps_min {r.eps_min:.2e}")

hp = HalfPlane((1.0, 0.0), 0.0)
for zeta in ((1.0, 0.0), (0.0, 1.0)):
    print(f"half plane at the origin, zeta = {zeta}: {wf_probe(hp, PhaseSpacePoint((0.0, 0.0), zeta)).classification}")

rep = radon_wf_consistency()
print(f"Radon probe on the disk indicator: {len(rep['entries'])} points, {rep['violations']} violations")
for e in rep["entries"][:3]:
    print(json.dumps({k: e[k] for k in ("x", "eta", "label", "phantom_regular")}),
          [p["classification"] for p in e["preimages"]])
