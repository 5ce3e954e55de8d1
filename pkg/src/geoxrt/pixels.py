"""Bilinear pixel basis on ``[-1, 1]^2`` restricted to the disk interior."""

from __future__ import annotations

import hashlib
import json

import numpy as np


class PixelBasis:
    """Tent functions centred on an ``m x m`` grid of pixel centres.

    A pixel is kept when its centre satisfies ``|c| < 1 - delta_support``
    and its whole tent support (the square of half-width one pixel) lies in
    the open unit disk, so every basis function vanishes near the boundary.
    """

    def __init__(self, m: int, delta_support: float | None = None):
        if m < 2:
            raise ValueError("grid resolution must be >= 2")
        self.m = int(m)
        self.spacing = 2.0 / m
        self.delta_support = 2.0 / m if delta_support is None else float(delta_support)
        c = -1 + (np.arange(m) + 0.5) * self.spacing
        cx, cy = np.meshgrid(c, c, indexing="ij")
        corner = np.hypot(np.abs(cx) + self.spacing, np.abs(cy) + self.spacing)
        self.mask = (np.hypot(cx, cy) < 1 - self.delta_support) & (corner < 1)
        if not self.mask.any():
            raise ValueError("pixel mask is empty")
        self.centers = np.stack([cx[self.mask], cy[self.mask]], axis=-1)
        self._index = np.full((m, m), -1, dtype=np.int64)
        self._index[self.mask] = np.arange(self.mask.sum())

    @property
    def n_pixels(self):
        return len(self.centers)

    def radii(self):
        return np.hypot(self.centers[:, 0], self.centers[:, 1])

    def stencil(self, x):
        """Masked pixel indices ``(..., 4)`` (``-1`` if absent) and bilinear weights."""
        x = np.asarray(x, dtype=float)
        u = (x + 1) / self.spacing - 0.5
        i0 = np.floor(u).astype(np.int64)
        fr = u - i0
        idx, wts = [], []
        for di in (0, 1):
            for dj in (0, 1):
                ii = i0[..., 0] + di
                jj = i0[..., 1] + dj
                w = (fr[..., 0] if di else 1 - fr[..., 0]) * (fr[..., 1] if dj else 1 - fr[..., 1])
                inside = (ii >= 0) & (ii < self.m) & (jj >= 0) & (jj < self.m)
                k = np.where(inside, self._index[np.clip(ii, 0, self.m - 1),
                                                 np.clip(jj, 0, self.m - 1)], -1)
                idx.append(k)
                wts.append(np.where(k >= 0, w, 0.0))
        return np.stack(idx, axis=-1), np.stack(wts, axis=-1)

    def interpolate(self, coeffs, x):
        """Evaluate ``sum_p coeffs[p] * phi_p(x)``; ``coeffs`` has shape ``(n_pixels, ...)``."""
        coeffs = np.asarray(coeffs)
        idx, w = self.stencil(x)
        vals = coeffs[np.maximum(idx, 0)]
        w = w.reshape(w.shape + (1,) * (coeffs.ndim - 1))
        return np.sum(w * vals, axis=idx.ndim - 1)

    def project(self, fn):
        """Coefficients from point values at the pixel centres."""
        return np.asarray(fn(self.centers))

    def config(self):
        return {"m": self.m, "delta_support": self.delta_support}

    def digest(self):
        return hashlib.sha256(json.dumps(self.config(), sort_keys=True).encode()).hexdigest()[:16]
