"""Dense forward operator of the weighted transform on a bilinear pixel basis, plus solvers."""

from __future__ import annotations

import hashlib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import TrappingError, trace_fan
from .pixels import PixelBasis
from .transforms import MatrixWeight, WeightSingularError, _digest, simpson_weights


class NumericalError(ArithmeticError):
    """Solver breakdown (NaN iterates, SVD non-convergence)."""


@dataclass
class ForwardOperator:
    """Rows ``ray * N + comp``; columns ``pixel * N + comp``."""

    matrix: np.ndarray
    n: int
    fan: list
    basis: PixelBasis
    paths: list = field(repr=False, default_factory=list)
    config_hash: str = ""

    @property
    def n_rays(self):
        return len(self.fan)

    @property
    def n_pixels(self):
        return self.basis.n_pixels

    @property
    def shape(self):
        return self.matrix.shape

    def row_meta(self):
        r = np.arange(self.shape[0])
        return np.stack([r // self.n, r % self.n], axis=-1)

    def col_meta(self):
        c = np.arange(self.shape[1])
        return np.stack([c // self.n, c % self.n], axis=-1)

    def zero_columns(self, rtol=1e-12):
        norms = np.linalg.norm(self.matrix, axis=0)
        return np.flatnonzero(norms <= rtol * max(norms.max(), 1e-300))

    def pixel_blocks_touched(self, rtol=1e-12):
        """Boolean ``(n_rays, n_pixels)``: does ray ``r`` see pixel ``p`` at all."""
        a = np.abs(self.matrix).reshape(self.n_rays, self.n, self.n_pixels, self.n)
        mag = a.max(axis=(1, 3))
        return mag > rtol * max(mag.max(), 1e-300)


def _ray_blocks(weight, basis, paths):
    """``(n_rays, n_pixels, N, N)`` block tensor for a list of paths."""
    n, P, R = weight.n, basis.n_pixels, len(paths)
    ws = weight.along(paths)
    rows, cols, vals = [], [], []
    for r, (p, w) in enumerate(zip(paths, ws)):
        q = simpson_weights(p.t)
        idx, bw = basis.stencil(p.x)
        c = (q[:, None] * bw)
        keep = idx >= 0
        k_of = np.nonzero(keep)[0]
        rows.append(np.full(len(k_of), r))
        cols.append(idx[keep])
        vals.append(c[keep][:, None, None] * w[k_of])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals) if vals else np.zeros((0, n, n), dtype=complex)
    lin = rows * P + cols
    out = np.zeros((R * P, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            v = vals[:, i, j]
            out[:, i, j] = (np.bincount(lin, weights=v.real, minlength=R * P)
                            + 1j * np.bincount(lin, weights=v.imag, minlength=R * P))
    return out.reshape(R, P, n, n)


def assemble(weight: MatrixWeight, basis: PixelBasis, fan, metric, quad_step: float = 1e-2,
             tau_max: float = 100.0, paths=None, threads: int = 1) -> ForwardOperator:
    """Matrix of ``f -> R_W f`` restricted to the pixel basis.

    Column ``p * N + j`` is the sinogram of basis function ``p`` in
    component ``j``.  Rays are processed in independent chunks.
    """
    if len(fan) == 0:
        raise ValueError("fan is empty")
    if paths is None:
        paths = trace_fan(metric, fan, quad_step, tau_max, on_trap="report")
    bad = [i for i, p in enumerate(paths) if p.trapped]
    if bad:
        z = fan[bad[0]]
        raise TrappingError(tau_max, f"ray {bad[0]} (beta={z.beta:.6f}, alpha={z.alpha:.6f}) "
                                     f"trapped within tau_max={tau_max}")
    n = weight.n
    chunk = max(1, math.ceil(len(paths) / max(threads, 1)))
    parts = [paths[s:s + chunk] for s in range(0, len(paths), chunk)]

    def work(part_idx):
        part = parts[part_idx]
        try:
            return _ray_blocks(weight, basis, part)
        except WeightSingularError:
            for j, p in enumerate(part):
                try:
                    weight.along([p])
                except WeightSingularError as exc:
                    k = part_idx * chunk + j
                    raise WeightSingularError(f"ray {k}: {exc}") from exc
            raise

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(work, range(len(parts))))
    else:
        blocks = [work(i) for i in range(len(parts))]
    blk = np.concatenate(blocks, axis=0)
    R, P = blk.shape[:2]
    mat = blk.transpose(0, 2, 1, 3).reshape(R * n, P * n)
    if not np.all(np.isfinite(mat)):
        raise NumericalError("non-finite operator entries")
    h = _digest({"weight": weight.config(), "basis": basis.config(), "metric": metric.config(),
                 "fan": [(z.beta, z.alpha) for z in fan], "quad_step": quad_step})
    return ForwardOperator(mat, n, list(fan), basis, paths, h)


def _matrix(op):
    return op.matrix if isinstance(op, ForwardOperator) else np.asarray(op)


def apply(op, coeffs):
    """Matrix-vector product; ``coeffs`` may be ``(n_pixels, N)`` or flat."""
    a = _matrix(op)
    c = np.asarray(coeffs).reshape(-1)
    if c.shape[0] != a.shape[1]:
        raise ValueError(f"coefficient length {c.shape[0]} != {a.shape[1]} columns")
    return a @ c


def apply_adjoint(op, data):
    a = _matrix(op)
    d = np.asarray(data).reshape(-1)
    if d.shape[0] != a.shape[0]:
        raise ValueError(f"data length {d.shape[0]} != {a.shape[0]} rows")
    return a.conj().T @ d


def sigma_extremes(op):
    """Smallest and largest singular values (LAPACK bidiagonalisation).

    ``sigma_min`` is the ``n_cols``-th singular value, hence zero for wide matrices.
    """
    a = _matrix(op)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    smin = float(s[-1]) if a.shape[0] >= a.shape[1] else 0.0
    return smin, float(s[0])


@dataclass
class CGLSResult:
    x: np.ndarray
    residuals: list
    iterations: int
    converged: bool


def cgls(op, data, max_iters: int = 500, tol: float = 1e-10, x0=None) -> CGLSResult:
    """Conjugate gradients on the normal equations (CGLS).

    Stops when ``|b - A x| / |b|`` or ``|A^H r| / |A^H b|`` drops below
    ``tol``.  ``residuals`` holds the relative data residual per iterate,
    which CGLS makes non-increasing.  Real systems run in real arithmetic.
    """
    a = _matrix(op)
    b = np.asarray(data, dtype=complex).reshape(-1)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"data length {b.shape[0]} != {a.shape[0]} rows")
    if _is_real(a) and not b.imag.any() and (x0 is None or not np.iscomplexobj(x0)
                                              or not np.asarray(x0).imag.any()):
        x0r = None if x0 is None else np.asarray(x0).real
        res = _cgls(np.ascontiguousarray(a.real), b.real, max_iters, tol, x0r, float)
        return CGLSResult(res.x.astype(complex), res.residuals, res.iterations, res.converged)
    return _cgls(a, b, max_iters, tol, x0, complex)


def _is_real(a):
    return not np.iscomplexobj(a) or not a.imag.any()


def _cgls(a, b, max_iters, tol, x0, dtype):
    ah = np.ascontiguousarray(a.conj().T)
    x = np.zeros(a.shape[1], dtype=dtype) if x0 is None else np.asarray(x0, dtype=dtype).copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0 and x0 is None:
        return CGLSResult(x, [0.0], 0, True)
    r = b - a @ x
    s = ah @ r
    snorm0 = np.linalg.norm(ah @ b) or 1.0
    p = s.copy()
    gamma = np.vdot(s, s).real
    hist = [np.linalg.norm(r) / bnorm]
    it = 0
    converged = hist[-1] <= tol or math.sqrt(gamma) <= tol * snorm0
    while not converged and it < max_iters:
        q = a @ p
        qq = np.vdot(q, q).real
        if qq == 0:
            break
        alpha = gamma / qq
        x = x + alpha * p
        r = r - alpha * q
        s = ah @ r
        gamma_new = np.vdot(s, s).real
        it += 1
        if not (np.all(np.isfinite(x)) and math.isfinite(gamma_new)):
            raise NumericalError(f"NaN in CGLS iterate {it}; last residual {hist[-1]:.3e}")
        hist.append(np.linalg.norm(r) / bnorm)
        converged = hist[-1] <= tol or math.sqrt(gamma_new) <= tol * snorm0
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return CGLSResult(x, hist, it, converged)


# ---------------------------------------------------------------------------
# export


def save_operator(op: ForwardOperator, path):
    """Write ``[u64 header length][JSON header][row-major complex64 data]``."""
    mat = np.ascontiguousarray(op.matrix, dtype=np.complex64)
    header = {"shape": list(mat.shape), "dtype": "complex64", "order": "C", "n": op.n,
              "n_rays": op.n_rays, "n_pixels": op.n_pixels, "config_hash": op.config_hash,
              "basis": op.basis.config(),
              "data_sha256": hashlib.sha256(mat.tobytes()).hexdigest()}
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(mat.tobytes())
    return header


def load_operator(path):
    """Inverse of ``save_operator``: ``(header, matrix)``."""
    with open(path, "rb") as fh:
        (length,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(length))
        data = np.frombuffer(fh.read(), dtype=np.complex64)
    return header, data.reshape(header["shape"])
