"""Weighted, attenuated and nonabelian ray transforms along traced geodesics.

Conventions along a ray ``x_z`` with exit time ``tau``:

* ``W_A`` solves ``dW/dt + A W = 0`` with ``W(0) = Id`` (anchored at entry).
* ``U`` solves the same equation with ``U(tau) = Id`` (anchored at exit), so
  ``U(t) = W_A(t) W_A(tau)^{-1}`` and the scattering matrix is
  ``C_A = U(0) = W_A(tau)^{-1}``.
* The attenuated transform is ``I_A f = int_0^tau W_A^{-1} f dt``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import expressions
from .geometry import (Euclidean, GeodesicPath, InfluxPoint, TrappingError, _reject_keys, fan_arrays,
                       geodesic_trace, trace_fan)
from .pixels import PixelBasis

DET_TOL = 1e-12
_CHUNK_BYTES = 64 * 2 ** 20


class WeightSingularError(FloatingPointError):
    """A weight or transport matrix had ``|det| < 1e-12``."""


# ---------------------------------------------------------------------------
# quadrature and small linear algebra


def simpson_weights(t):
    """Quadrature weights for samples at ``t`` (uniform except possibly the last interval).

    Composite Simpson on pairs of uniform intervals; a leftover uniform
    interval and the short exit interval are each integrated with the
    quadratic through the three nearest nodes.  Fourth order overall.
    """
    t = np.asarray(t, dtype=float)
    n = len(t) - 1
    w = np.zeros(n + 1)
    if n <= 0:
        return w
    if n == 1:
        w[:] = 0.5 * (t[1] - t[0])
        return w
    h = np.diff(t)
    uniform = n if math.isclose(h[-1], h[0], rel_tol=1e-9) else n - 1
    pairs = uniform - (uniform % 2)
    if pairs:
        a, b = h[0:pairs:2], h[1:pairs:2]
        np.add.at(w, np.arange(0, pairs, 2), (a + b) / 6 * (2 - b / a))
        np.add.at(w, np.arange(1, pairs, 2), (a + b) ** 3 / (6 * a * b))
        np.add.at(w, np.arange(2, pairs + 1, 2), (a + b) / 6 * (2 - a / b))
    for j in range(pairs, n):
        # integrate [t_j, t_j+1] with the quadratic through t_{j-1}, t_j, t_{j+1}
        a, b = h[j - 1], h[j]
        w[j - 1] += -b ** 3 / (6 * a * (a + b))
        w[j] += b * (b + 3 * a) / (6 * a)
        w[j + 1] += b * (2 * b + 3 * a) / (6 * (a + b))
    return w


def inv_checked(mats):
    """Batched inverse with the ``|det| < 1e-12`` singularity guard."""
    mats = np.asarray(mats)
    n = mats.shape[-1]
    det = np.linalg.det(mats)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) < DET_TOL):
        raise WeightSingularError(f"singular matrix: min |det| = {np.min(np.abs(det)):.3e}")
    if n == 1:
        return 1.0 / mats
    if n == 2:
        out = np.empty_like(mats)
        out[..., 0, 0] = mats[..., 1, 1]
        out[..., 1, 1] = mats[..., 0, 0]
        out[..., 0, 1] = -mats[..., 0, 1]
        out[..., 1, 0] = -mats[..., 1, 0]
        return out / det[..., None, None]
    return np.linalg.inv(mats)


def _path_z(path: GeodesicPath):
    if path.start is None:
        return math.nan, math.nan
    return path.start.beta, path.start.alpha


def _digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# attenuations


class Attenuation:
    """``N x N`` complex matrix field ``A(z, x)``; ``higgs`` means position-only."""

    n = 1
    higgs = True
    kind = "general"

    def evaluate(self, beta, alpha, x):
        raise NotImplementedError

    def __call__(self, x, beta=math.nan, alpha=math.nan):
        return self.evaluate(beta, alpha, np.asarray(x, dtype=float))

    def config(self):
        return {"kind": self.kind, "n": self.n}


class ConstantAttenuation(Attenuation):
    kind = "constant"

    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        self.n = self.matrix.shape[0]

    def evaluate(self, beta, alpha, x):
        shape = np.shape(x)[:-1]
        return np.broadcast_to(self.matrix, shape + self.matrix.shape)

    def config(self):
        m = self.matrix
        return {"kind": "constant", "re": m.real.tolist(), "im": m.imag.tolist()}


class ZeroAttenuation(ConstantAttenuation):
    def __init__(self, n):
        super().__init__(np.zeros((n, n)))


class ExprMatrix:
    """``N x N`` matrix of expressions in ``beta, alpha, x1, x2``."""

    def __init__(self, entries):
        rows = [list(r) for r in entries]
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("expression matrix must be square and non-empty")
        self.n = n
        self.entries = [[str(e) for e in r] for r in rows]
        exprs = [[expressions.parse(e) for e in r] for r in self.entries]
        self.z_dependent = any((expressions.BETA in e.free_symbols or expressions.ALPHA in e.free_symbols)
                               for r in exprs for e in r)
        self._fns = [[expressions.compile_expr(e) for e in r] for r in exprs]

    def evaluate(self, beta, alpha, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        b = np.broadcast_to(np.asarray(beta, dtype=float), shape)
        a = np.broadcast_to(np.asarray(alpha, dtype=float), shape)
        out = np.empty(shape + (self.n, self.n), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                out[..., i, j] = self._fns[i][j](x[..., 0], x[..., 1], b, a)
        return out


class ExprAttenuation(Attenuation):
    kind = "expr"

    def __init__(self, entries):
        self.matrix = ExprMatrix(entries)
        self.n = self.matrix.n
        self.higgs = not self.matrix.z_dependent

    def evaluate(self, beta, alpha, x):
        return self.matrix.evaluate(beta, alpha, x)

    def config(self):
        return {"kind": "expr", "n": self.n, "entries": self.matrix.entries}


class BumpAttenuation(Attenuation):
    """Higgs field with entries ``a_ij exp(-|x - c_ij|^2 / w_ij^2)`` (complex amplitudes allowed)."""

    kind = "bumps"

    def __init__(self, amplitudes, centers, widths):
        self.amplitudes = np.asarray(amplitudes, dtype=complex)
        self.centers = np.asarray(centers, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        self.n = self.amplitudes.shape[0]

    @classmethod
    def random(cls, n, rng, amplitude=0.5, width=(0.3, 0.8)):
        amps = rng.uniform(-amplitude, amplitude, (n, n))
        r = 0.8 * np.sqrt(rng.uniform(0, 1, (n, n)))
        th = rng.uniform(0, 2 * np.pi, (n, n))
        centers = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
        widths = rng.uniform(*width, (n, n))
        return cls(amps, centers, widths)

    def evaluate(self, beta, alpha, x):
        x = np.asarray(x, dtype=float)
        d1 = x[..., 0, None, None] - self.centers[..., 0]
        d2 = x[..., 1, None, None] - self.centers[..., 1]
        return self.amplitudes * np.exp(-(d1 * d1 + d2 * d2) / self.widths ** 2)

    def config(self):
        return {"kind": "bumps", "re": self.amplitudes.real.tolist(),
                "im": self.amplitudes.imag.tolist(), "centers": self.centers.tolist(),
                "widths": self.widths.tolist()}


class PixelAttenuation(Attenuation):
    """Higgs field stored as bilinear pixel coefficients of shape ``(n_pixels, N, N)``."""

    kind = "pixels"

    def __init__(self, basis: PixelBasis, coeffs):
        self.basis = basis
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.n = self.coeffs.shape[-1]

    def evaluate(self, beta, alpha, x):
        return self.basis.interpolate(self.coeffs, x)

    def config(self):
        return {"kind": "pixels", "basis": self.basis.config(),
                "digest": hashlib.sha256(self.coeffs.tobytes()).hexdigest()[:16]}


class PseudoAttenuation(Attenuation):
    """``E(A, B): U -> A U - U B`` as an ``N^2 x N^2`` matrix on row-major ``vec(U)``."""

    kind = "pseudo"

    def __init__(self, a: Attenuation, b: Attenuation):
        if a.n != b.n:
            raise ValueError(f"attenuation sizes differ: {a.n} != {b.n}")
        self.a, self.b = a, b
        self.base_n = a.n
        self.n = a.n ** 2
        self.higgs = a.higgs and b.higgs

    def evaluate(self, beta, alpha, x):
        A = self.a.evaluate(beta, alpha, x)
        B = self.b.evaluate(beta, alpha, x)
        eye = np.eye(self.base_n)
        # vec(A U) = (A kron I) vec U ; vec(U B) = (I kron B^T) vec U
        left = np.einsum("...ij,kl->...ikjl", A, eye)
        right = np.einsum("ij,...lk->...ikjl", eye, B)
        shape = left.shape[:-4] + (self.n, self.n)
        return (left - right).reshape(shape)

    def config(self):
        return {"kind": "pseudo", "a": self.a.config(), "b": self.b.config()}


def pseudo_weight(a: Attenuation, b: Attenuation) -> PseudoAttenuation:
    return PseudoAttenuation(a, b)


def attenuation_from_config(cfg: dict) -> Attenuation:
    kind = cfg.get("kind")
    _reject_keys(cfg, {"kind", "n"} if kind == "identity" else {"kind", "n", "entries"})
    if kind == "identity":  # zero attenuation: identity transport
        return ZeroAttenuation(int(cfg.get("n", 1)))
    if kind == "expr":
        att = ExprAttenuation(cfg["entries"])
        if "n" in cfg and int(cfg["n"]) != att.n:
            raise ValueError("'n' does not match the entries")
        return att
    raise ValueError(f"unknown attenuation kind {kind!r}")


# ---------------------------------------------------------------------------
# sources


class VectorSource:
    """``C^N``-valued source ``f(x)``; evaluation broadcasts over ``x[..., 2]``."""

    n = 1
    kind = "closed-form"

    def evaluate(self, beta, alpha, x):
        return self(x)

    def __call__(self, x):
        raise NotImplementedError


class ConstantSource(VectorSource):
    kind = "constant"

    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=complex))
        self.n = len(self.value)

    def __call__(self, x):
        return np.broadcast_to(self.value, np.shape(x)[:-1] + (self.n,))


class CallableSource(VectorSource):
    def __init__(self, fn, n=1, name="callable"):
        self.fn, self.n, self.name = fn, n, name

    def __call__(self, x):
        out = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=complex)
        if self.n == 1 and out.shape == np.shape(x)[:-1]:
            out = out[..., None]
        return out


class ExprSource(VectorSource):
    kind = "expr"

    def __init__(self, entries):
        self.entries = [str(e) for e in entries]
        self.n = len(self.entries)
        self._fns = [expressions.compile_expr(expressions.parse(e, ("x1", "x2")),
                                              (expressions.X1, expressions.X2))
                     for e in self.entries]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.asarray(f(x[..., 0], x[..., 1]), dtype=complex) for f in self._fns],
                        axis=-1)


class GaussianSource(VectorSource):
    """``amplitude * exp(-|x - c|^2 / w^2)`` in every component (times ``weights``)."""

    def __init__(self, amplitude=1.0, center=(0.0, 0.0), width=0.3, weights=(1.0,)):
        self.amplitude = amplitude
        self.center = np.asarray(center, dtype=float)
        self.width = width
        self.weights = np.asarray(weights, dtype=complex)
        self.n = len(self.weights)

    def __call__(self, x):
        d = np.asarray(x, dtype=float) - self.center
        s = self.amplitude * np.exp(-np.sum(d * d, axis=-1) / self.width ** 2)
        return s[..., None] * self.weights


class PixelSource(VectorSource):
    """Pixel-grid source with bilinear interpolation; coefficients ``(n_pixels, N)``."""

    kind = "pixels"

    def __init__(self, basis: PixelBasis, coeffs):
        self.basis = basis
        c = np.asarray(coeffs, dtype=complex)
        self.coeffs = c[:, None] if c.ndim == 1 else c
        self.n = self.coeffs.shape[1]

    def __call__(self, x):
        return self.basis.interpolate(self.coeffs, x)


class AttenuationSource(VectorSource):
    """Row-major ``vec`` of a matrix field (``sum_k c_k A_k``) as an ``N^2``-vector source."""

    def __init__(self, terms):
        self.terms = list(terms)
        self.n = self.terms[0][1].n ** 2

    def evaluate(self, beta, alpha, x):
        out = sum(c * att.evaluate(beta, alpha, x) for c, att in self.terms)
        return out.reshape(out.shape[:-2] + (self.n,))

    def __call__(self, x):
        return self.evaluate(math.nan, math.nan, x)


def difference_source(a: Attenuation, b: Attenuation) -> AttenuationSource:
    return AttenuationSource([(1.0, a), (-1.0, b)])


def source_from_config(cfg: dict) -> VectorSource:
    kind = cfg.get("kind")
    _reject_keys(cfg, {"constant": {"kind", "value"},
                       "gaussian": {"kind", "amplitude", "center", "width", "weights", "n"},
                       }.get(kind, {"kind", "entries"}))
    if kind == "constant":
        v = cfg.get("value", 1.0)
        return ConstantSource(v)
    if kind == "gaussian":
        return GaussianSource(cfg.get("amplitude", 1.0), cfg.get("center", (0.0, 0.0)),
                              cfg.get("width", 0.3), cfg.get("weights", [1.0] * int(cfg.get("n", 1))))
    if kind == "expr":
        return ExprSource(cfg["entries"])
    raise ValueError(f"unknown phantom kind {kind!r}")


# ---------------------------------------------------------------------------
# weights


class MatrixWeight:
    """``W(z, x)`` evaluated along traced rays; ``along`` returns ``(K, N, N)`` per path."""

    n = 1
    kind = "closed-form"
    analytic = True

    def along(self, paths):
        return [self._check(w) for w in self._along(paths)]

    def _along(self, paths):
        raise NotImplementedError

    @staticmethod
    def _check(w):
        det = np.linalg.det(w) if w.shape[-1] > 1 else w[..., 0, 0]
        if np.any(~np.isfinite(det)) or np.any(np.abs(det) < DET_TOL):
            raise WeightSingularError(f"weight not invertible: min |det| = {np.min(np.abs(det)):.3e}")
        return w

    def config(self):
        return {"kind": self.kind, "n": self.n}


class IdentityWeight(MatrixWeight):
    kind = "identity"

    def __init__(self, n=1):
        self.n = n

    def _along(self, paths):
        return [np.broadcast_to(np.eye(self.n, dtype=complex), (len(p.t), self.n, self.n))
                for p in paths]


class FieldWeight(MatrixWeight):
    """Closed-form weight ``fn(beta, alpha, x) -> (..., N, N)``."""

    def __init__(self, fn, n, name="closed-form"):
        self.fn, self.n, self.name = fn, n, name

    def _along(self, paths):
        out = []
        for p in paths:
            b, a = _path_z(p)
            out.append(np.asarray(self.fn(b, a, p.x), dtype=complex))
        return out

    def config(self):
        return {"kind": "closed-form", "n": self.n, "name": self.name}


class ExprWeight(MatrixWeight):
    kind = "expr"

    def __init__(self, entries):
        self.matrix = ExprMatrix(entries)
        self.n = self.matrix.n

    def _along(self, paths):
        return [self.matrix.evaluate(*_path_z(p), p.x) for p in paths]

    def config(self):
        return {"kind": "expr", "n": self.n, "entries": self.matrix.entries}


class SMWeight(MatrixWeight):
    """Adapter for weights ``w(x, v)`` on the unit sphere bundle: ``W(z, x_z(t)) = w(x_z(t), v_z(t))``."""

    kind = "sm"

    def __init__(self, fn, n):
        self.fn, self.n = fn, n

    def _along(self, paths):
        return [np.asarray(self.fn(p.x, p.v), dtype=complex) for p in paths]


def lift_sm_weight(fn, n) -> SMWeight:
    return SMWeight(fn, n)


class TransportWeight(MatrixWeight):
    """Weight induced by an attenuation: ``W_A^{-1}`` (default) or ``W_A`` along each ray."""

    kind = "transport-induced"

    def __init__(self, attenuation: Attenuation, inverse=True):
        self.attenuation = attenuation
        self.inverse = inverse
        self.n = attenuation.n

    def _along(self, paths):
        ws = transport_batch(self.attenuation, paths)
        return [inv_checked(w) if self.inverse else w for w in ws]

    def config(self):
        return {"kind": self.kind, "inverse": self.inverse, "attenuation": self.attenuation.config()}


def weight_from_config(cfg: dict) -> MatrixWeight:
    kind = cfg.get("kind")
    _reject_keys(cfg, {"kind", "n"} if kind == "identity" else {"kind", "n", "entries"})
    if kind == "identity":
        return IdentityWeight(int(cfg.get("n", 1)))
    if kind == "expr":
        w = ExprWeight(cfg["entries"])
        if "n" in cfg and int(cfg["n"]) != w.n:
            raise ValueError("'n' does not match the entries")
        return w
    raise ValueError(f"unknown weight kind {kind!r}")


def rotation_weight(scale="0.3*exp(-(x1**2+x2**2)/0.5)", angle="0.5*x1 + 0.3*sin(beta)"):
    """``exp(s) R(theta)``: exponential of ``[[s, -theta], [theta, s]]`` with analytic ``s, theta``."""
    return ExprWeight([[f"exp({scale})*cos({angle})", f"-exp({scale})*sin({angle})"],
                       [f"exp({scale})*sin({angle})", f"exp({scale})*cos({angle})"]])


def scalar_weight(expr="exp(0.3*exp(-(x1**2+x2**2)/0.5) + 0.2*x1*cos(beta))"):
    return ExprWeight([[expr]])


# ---------------------------------------------------------------------------
# transport along rays


def _padded(paths):
    k = max(len(p.t) for p in paths)
    R = len(paths)
    X = np.empty((R, k, 2))
    M = np.empty((R, k - 1, 2)) if k > 1 else np.empty((R, 0, 2))
    dt = np.zeros((R, max(k - 1, 0)))
    for i, p in enumerate(paths):
        n = len(p.t)
        X[i, :n] = p.x
        X[i, n:] = p.x[-1]
        if n > 1:
            M[i, :n - 1] = p.midpoints()
            dt[i, :n - 1] = np.diff(p.t)
        M[i, n - 1:] = p.x[-1]
    return X, M, dt


def _chunks(paths, n):
    k = max(len(p.t) for p in paths)
    per_ray = 10 * k * n * n * 16  # step maps, scan buffers and temporaries
    size = max(1, _CHUNK_BYTES // max(per_ray, 1))
    for s in range(0, len(paths), size):
        yield paths[s:s + size]


def _eval_on(att, paths, X, M):
    zb = np.array([_path_z(p)[0] for p in paths])[:, None]
    za = np.array([_path_z(p)[1] for p in paths])[:, None]
    An = np.asarray(att.evaluate(zb, za, X), dtype=complex)
    Am = np.asarray(att.evaluate(zb, za, M), dtype=complex)
    return An, Am


def _rk4_propagators(An, Am, dt):
    """One RK4 step of ``dW/dt + A W = 0`` is linear in ``W``: ``W_{k+1} = P_k W_k``."""
    n = An.shape[-1]
    h = dt[..., None, None]
    a0, am, a1 = An[:, :-1], Am, An[:, 1:]
    # stage matrices k_i = b_i W, written out to avoid forming identity shifts
    b2 = am @ a0
    b2 *= 0.5 * h
    b2 -= am
    b3 = am @ b2
    b3 *= -0.5 * h
    b3 -= am
    b4 = a1 @ b3
    b4 *= -h
    b4 -= a1
    P = b2
    P += b3
    P *= 2
    P += b4
    P -= a0
    P *= h / 6
    idx = np.arange(n)
    P[..., idx, idx] += 1
    return P


def _prefix_products(P):
    """``Q_k = P_k ... P_0`` for every ``k``, one batched product per step."""
    Q = np.empty_like(P)
    Q[:, 0] = P[:, 0]
    for k in range(1, P.shape[1]):
        np.matmul(P[:, k], Q[:, k - 1], out=Q[:, k])
    return Q


def _total_product(P):
    """``P_{K-1} ... P_0`` by pairwise reduction along axis 1."""
    while P.shape[1] > 1:
        if P.shape[1] % 2:
            eye = np.broadcast_to(np.eye(P.shape[-1], dtype=complex), P[:, :1].shape)
            P = np.concatenate([P, eye], axis=1)
        P = P[:, 1::2] @ P[:, 0::2]
    return P[:, 0]


def transport_batch(att: Attenuation, paths, final_only=False):
    """RK4 solution of ``dW/dt + A W = 0``, ``W(0) = Id`` on every path's samples.

    The step maps are formed for all samples at once; only their running
    product is sequential (a pairwise reduction when just ``W(tau)`` is needed).
    """
    if any(p.trapped for p in paths):
        raise TrappingError(math.inf)
    n = att.n
    out = []
    for chunk in _chunks(paths, n):
        X, M, dt = _padded(chunk)
        An, Am = _eval_on(att, chunk, X, M)
        R, K = X.shape[:2]
        eye = np.broadcast_to(np.eye(n, dtype=complex), (R, 1, n, n))
        if K == 1:
            W = eye.copy()
        else:
            P = _rk4_propagators(An, Am, dt[:, :K - 1])
            W = _total_product(P)[:, None] if final_only else np.concatenate([eye, _prefix_products(P)], axis=1)
        for i, p in enumerate(chunk):
            out.append(W[i, 0].copy() if final_only else W[i, :len(p.t)].copy())
    return out


def _trace(metric, z, step, tau_max):
    if isinstance(z, GeodesicPath):
        return z
    return geodesic_trace(metric or Euclidean(), z, step, tau_max)


def transport_weight(att: Attenuation, z, metric=None, step=1e-3, tau_max=100.0):
    """``(path, W)``: the traced ray and ``W_A`` at its samples, shape ``(K, N, N)``."""
    path = _trace(metric, z, step, tau_max)
    return path, transport_batch(att, [path])[0]


def scattering_batch(att: Attenuation, paths):
    """Scattering matrices ``C_A = W_A(tau)^{-1}`` for each path."""
    return [inv_checked(w) for w in transport_batch(att, paths, final_only=True)]


def scattering_data(att: Attenuation, z, metric=None, step=1e-3, tau_max=100.0):
    path = _trace(metric, z, step, tau_max)
    return scattering_batch(att, [path])[0]


# ---------------------------------------------------------------------------
# transforms


def _eval_source(f, paths):
    return [np.asarray(f.evaluate(*_path_z(p), p.x), dtype=complex).reshape(len(p.t), f.n)
            for p in paths]


def weighted_batch(weight: MatrixWeight, f: VectorSource, paths):
    """``int_0^tau W(z, x_z(t)) f(x_z(t)) dt`` for every path, shape ``(R, N)``."""
    if weight.n != f.n:
        raise ValueError(f"weight size {weight.n} != source size {f.n}")
    if any(p.trapped for p in paths):
        raise TrappingError(math.inf)
    ws = weight.along(paths)
    fs = _eval_source(f, paths)
    out = np.zeros((len(paths), f.n), dtype=complex)
    for i, (p, w, fv) in enumerate(zip(paths, ws, fs)):
        q = simpson_weights(p.t)
        out[i] = np.einsum("k,kij,kj->i", q, w, fv)
    return out


def ray_transform(weight: MatrixWeight, f: VectorSource, z, metric=None, quad_step=1e-3,
                  tau_max=100.0):
    path = _trace(metric, z, quad_step, tau_max)
    return weighted_batch(weight, f, [path])[0]


def attenuated_batch(att: Attenuation, f: VectorSource, paths):
    """Reduction formula ``int W_A^{-1} f dt`` for every path."""
    if att.n != f.n:
        raise ValueError(f"attenuation size {att.n} != source size {f.n}")
    return weighted_batch(TransportWeight(att, inverse=True), f, paths)


def attenuated_ode_batch(att: Attenuation, f: VectorSource, paths):
    """Direct RK4 for ``u' + A u = -f``, ``u(tau) = 0``, integrated backward; returns ``u(0)``."""
    n = att.n
    out = np.zeros((len(paths), n), dtype=complex)
    row = 0
    for chunk in _chunks(paths, n):
        X, M, dt = _padded(chunk)
        An, Am = _eval_on(att, chunk, X, M)
        zb = np.array([_path_z(p)[0] for p in chunk])[:, None]
        za = np.array([_path_z(p)[1] for p in chunk])[:, None]
        Fn = np.asarray(f.evaluate(zb, za, X), dtype=complex).reshape(X.shape[:2] + (n,))
        Fm = np.asarray(f.evaluate(zb, za, M), dtype=complex).reshape(M.shape[:2] + (n,))
        u = np.zeros((len(chunk), n), dtype=complex)
        # reversed time s = tau - t: du/ds = A u + f
        for k in range(X.shape[1] - 2, -1, -1):
            h = dt[:, k, None]
            a1, am, a0 = An[:, k + 1], Am[:, k], An[:, k]
            f1, fm, f0 = Fn[:, k + 1], Fm[:, k], Fn[:, k]
            k1 = np.einsum("rij,rj->ri", a1, u) + f1
            k2 = np.einsum("rij,rj->ri", am, u + 0.5 * h * k1) + fm
            k3 = np.einsum("rij,rj->ri", am, u + 0.5 * h * k2) + fm
            k4 = np.einsum("rij,rj->ri", a0, u + h * k3) + f0
            u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[row:row + len(chunk)] = u
        row += len(chunk)
    return out


def attenuated_transform(att: Attenuation, f: VectorSource, z, metric=None, step=1e-3,
                         tau_max=100.0, method="reduction"):
    path = _trace(metric, z, step, tau_max)
    if method == "reduction":
        return attenuated_batch(att, f, [path])[0]
    if method == "ode":
        return attenuated_ode_batch(att, f, [path])[0]
    raise ValueError(f"unknown method {method!r}")


def pseudo_linear_batch(a: Attenuation, b: Attenuation, paths):
    """``I_{E(A,B)}(A - B)`` reshaped to ``N x N`` for every path."""
    vals = attenuated_batch(pseudo_weight(a, b), difference_source(a, b), paths)
    return vals.reshape(len(paths), a.n, a.n)


def pseudo_closed_form(ca, cb):
    """``C_A C_B^{-1} - Id``: the exact value of ``I_{E(A,B)}(A - B)``.

    With ``U_A, U_B`` the exit-anchored fundamental matrices, ``V = U_A U_B^{-1}``
    satisfies ``V' = -(A V - V B)`` and ``V(tau) = Id``, so ``V - Id`` solves the
    attenuated transport problem for ``E(A,B)`` with source ``A - B``.
    """
    ca = np.asarray(ca)
    return ca @ inv_checked(cb) - np.eye(ca.shape[-1])


def pseudo_residual_batch(a: Attenuation, b: Attenuation, paths):
    lin = pseudo_linear_batch(a, b, paths)
    ca = np.array(scattering_batch(a, paths))
    cb = np.array(scattering_batch(b, paths))
    return lin - pseudo_closed_form(ca, cb)


def pseudo_residual(a: Attenuation, b: Attenuation, z, metric=None, step=1e-3, tau_max=100.0):
    path = _trace(metric, z, step, tau_max)
    return pseudo_residual_batch(a, b, [path])[0]


# ---------------------------------------------------------------------------
# sinograms


@dataclass
class Sinogram:
    """Per-ray values of a transform over a fan: ``(R, N)`` vectors or ``(R, N, N)`` matrices."""

    fan: list
    values: np.ndarray
    tau: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.tau = np.asarray(self.tau, dtype=float)
        if len(self.values) != len(self.fan) or len(self.tau) != len(self.fan):
            raise ValueError("sinogram values and fan length differ")
        if np.any(np.isnan(self.values)):
            raise ValueError("sinogram contains NaN")

    @property
    def beta(self):
        return fan_arrays(self.fan)[0]

    @property
    def alpha(self):
        return fan_arrays(self.fan)[1]


def sinogram(weight: MatrixWeight, f: VectorSource, fan, metric, quad_step=1e-2,
             tau_max=100.0, metadata=None):
    paths = trace_fan(metric, fan, quad_step, tau_max)
    vals = weighted_batch(weight, f, paths)
    meta = {"metric": _digest(metric.config()), "weight": _digest(weight.config()),
            "quad_step": quad_step}
    meta.update(metadata or {})
    return Sinogram(list(fan), vals, [p.tau_plus for p in paths], meta)


def scattering_sinogram(att: Attenuation, fan, metric, step=1e-2, tau_max=100.0, paths=None):
    if paths is None:
        paths = trace_fan(metric, fan, step, tau_max)
    vals = np.array(scattering_batch(att, paths))
    dets = np.abs(np.linalg.det(vals))
    meta = {"metric": _digest(metric.config()), "attenuation": _digest(att.config()),
            "step": step, "min_abs_det": float(dets.min()), "max_abs_det": float(dets.max())}
    return Sinogram(list(fan), vals, [p.tau_plus for p in paths], meta)


__all__ = [
    "Attenuation", "AttenuationSource", "BumpAttenuation", "CallableSource", "ConstantAttenuation",
    "ConstantSource", "ExprAttenuation", "ExprSource", "ExprWeight", "FieldWeight", "GaussianSource",
    "IdentityWeight", "InfluxPoint", "MatrixWeight", "PixelAttenuation", "PixelSource",
    "PseudoAttenuation", "SMWeight", "Sinogram", "TransportWeight", "VectorSource",
    "WeightSingularError", "ZeroAttenuation", "attenuated_batch", "attenuated_ode_batch",
    "attenuated_transform", "difference_source", "inv_checked", "lift_sm_weight",
    "pseudo_closed_form", "pseudo_linear_batch", "pseudo_residual", "pseudo_residual_batch",
    "pseudo_weight", "ray_transform", "rotation_weight", "scalar_weight", "scattering_batch",
    "scattering_data", "scattering_sinogram", "simpson_weights", "sinogram", "transport_batch",
    "transport_weight", "weighted_batch",
]
