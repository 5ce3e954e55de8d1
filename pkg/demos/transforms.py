"""Weighted, attenuated and nonabelian ray transforms along one fan.

Run: python3 demos/transforms.py
"""

import numpy as np

from geoxrt import ConformalBump, InfluxPoint, influx_fan, rotation_weight, sinogram, trace_fan
from geoxrt.transforms import (BumpAttenuation, ConstantAttenuation, ConstantSource, GaussianSource,
                               attenuated_transform, pseudo_residual_batch, scattering_batch)

metric = ConformalBump(0.05, (0.1, -0.2), 0.5)
fan = influx_fan(metric, 12, 6, 0.05)

# a matrix weight mixes the two components of the phantom along each ray
f = GaussianSource(1.0, (0.2, 0.1), 0.3, (1.0, 0.5))
sino = sinogram(rotation_weight(), f, fan, metric, 1e-3)
print(f"rotation-weighted sinogram: {sino.values.shape}, max |R_W f| {np.abs(sino.values).max():.4f}")

# attenuation a = 1 on the flat diameter: (e^2 - 1)
v = attenuated_transform(ConstantAttenuation(1.0), ConstantSource(1.0), InfluxPoint(0.0, 0.0))
print(f"attenuated diameter value {v[0].real:.9f} vs e^2 - 1 = {np.e ** 2 - 1:.9f}")

# scattering data of a random matrix field and the pseudo-linearization identity
rng = np.random.default_rng(1)
a, b = BumpAttenuation.random(2, rng, 0.5), BumpAttenuation.random(2, rng, 0.5)
paths = trace_fan(metric, fan, 1e-3)
c = np.array(scattering_batch(a, paths))
print(f"scattering data: |det C_A| in [{np.abs(np.linalg.det(c)).min():.3f}, {np.abs(np.linalg.det(c)).max():.3f}]")
res = pseudo_residual_batch(a, b, paths)
print(f"I_E(A - B) - (C_A C_B^-1 - Id): max Frobenius norm {np.linalg.norm(res, axis=(1, 2)).max():.1e}")
