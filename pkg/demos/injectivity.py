"""Desk-scale injectivity probes: global, layer stripping, local, Higgs.

Run: python3 demos/injectivity.py   (about a minute)
"""

import numpy as np

from geoxrt import ConformalBump, Euclidean, IdentityWeight, PixelBasis, assemble, rotation_weight, scalar_weight
from geoxrt.lab import (global_probe, higgs_recover, layer_stripping, lens_phantom, local_probe,
                        oversampled_fan)
from geoxrt.transforms import BumpAttenuation, PixelAttenuation, scattering_sinogram

metric = ConformalBump(0.05, (0.1, -0.2), 0.5)


def phantom(x):
    r2 = np.sum(x * x, -1)
    return np.stack([np.exp(-r2 / 0.2), 0.5 * np.exp(-r2 / 0.1) * (1 + x[..., 0])], -1)


basis = PixelBasis(24)
rep = global_probe(metric, rotation_weight(), phantom, basis)
m = rep.metrics
print(f"global: passed {rep.passed}, error {m['rel_error']:.1e}, sigma in [{m['sigma_min']:.1e}, {m['sigma_max']:.1e}]")

# the same data, solved ring by ring from the boundary inwards
flat = Euclidean()
basis = PixelBasis(32)
op = assemble(IdentityWeight(1), basis, oversampled_fan(flat, basis.n_pixels), flat, 1e-2)
truth = basis.project(lambda x: np.exp(-np.sum(x * x, -1) / 0.3)).astype(complex)
res = layer_stripping(op, op.matrix @ truth, 4, flat, truth)
print("strip: ring errors", ", ".join(f"{e:.1e}" for e in res.ring_errors), f"final {res.final_error:.1e}")

# local data near beta = 0 see a shallow lens but not the centre of the disk
basis = PixelBasis(96, 0.0)
rep = local_probe(flat, scalar_weight(), 0.0, lens_phantom(basis, 0.0, 0.15), basis)
print(f"local lens: passed {rep.passed}, error {rep.metrics['rel_error']:.1e}")
deep = np.exp(-np.sum(basis.centers ** 2, -1) / 0.02)
deep[deep < 1e-3] = 0
rep = local_probe(flat, scalar_weight(), 0.0, deep, basis)
print(f"local deep phantom: {rep.notes['verdict']}")

# a matrix Higgs field from its scattering data
basis = PixelBasis(16)
truth = PixelAttenuation(basis, BumpAttenuation.random(2, np.random.default_rng(3), 0.3)(basis.centers))
fan = oversampled_fan(metric, basis.n_pixels)
out = higgs_recover(metric, scattering_sinogram(truth, fan, metric, 1e-2), basis, truth=truth)
print(f"higgs: error {out.report.metrics['rel_error']:.1e} after {out.report.metrics['iterations']} iterations;"
      " misfit", ", ".join(f"{h:.0e}" for h in out.history))
