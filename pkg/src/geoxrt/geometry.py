"""Analytic metrics on the closed unit disk and their geodesics.

The manifold is the closed unit disk in one global chart with boundary
defining function ``rho(x) = 1 - |x|^2`` (positive inside).  Geodesics are
integrated with a fixed-step classical RK4 scheme; the boundary event is
isolated by bisection on ``rho`` along a shortened final step.  Tracing is
vectorised over whole fans of rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import expressions

DEFAULT_TAU_MAX = 100.0
EXIT_TOL = 1e-10
_BISECT_ITERS = 60
_BOUNDARY_TOL = 1e-12


class DomainError(ValueError):
    """A point outside the closed unit disk was queried."""


class TrappingError(RuntimeError):
    """A geodesic did not reach the boundary within the arclength budget."""

    def __init__(self, budget, message=None):
        self.budget = budget
        super().__init__(message or f"geodesic trapped: no exit within tau_max={budget}")


def rho(x):
    x = np.asarray(x, dtype=float)
    return 1.0 - np.sum(x * x, axis=-1)


def _check_domain(x, tol=1e-9):
    x = np.asarray(x, dtype=float)
    if np.any(rho(x) < -tol):
        raise DomainError(f"point outside the closed unit disk: {x}")
    return x


# ---------------------------------------------------------------------------
# metrics


class Metric:
    """Riemannian metric on the closed unit disk.

    Subclasses provide ``g`` and ``dg`` for arrays of points of shape
    ``(..., 2)``.  ``dg[..., k, i, j]`` is the partial derivative of
    ``g_ij`` with respect to ``x_k``.
    """

    kind = "general"

    def g(self, x):
        raise NotImplementedError

    def dg(self, x, h=1e-5):
        x = np.asarray(x, dtype=float)
        out = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            out.append((self.g(x + e) - self.g(x - e)) / (2 * h))
        return np.stack(out, axis=-3)

    def christoffel(self, x):
        """``Gamma[..., k, i, j]`` of the Levi-Civita connection."""
        g = self.g(x)
        dg = self.dg(x)
        ginv = np.linalg.inv(g)
        # lowered symbols: d_i g_lj + d_j g_li - d_l g_ij
        low = (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg)
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, low)

    def accel(self, x, v):
        gam = self.christoffel(x)
        return -np.einsum("...kij,...i,...j->...k", gam, v, v)

    def gauss_curvature(self, x, h=1e-4):
        """Gauss curvature from finite differences of the Christoffel symbols."""
        x = np.asarray(x, dtype=float)
        gam = self.christoffel(x)
        dgam = []
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            dgam.append((self.christoffel(x + e) - self.christoffel(x - e)) / (2 * h))
        dgam = np.stack(dgam, axis=-4)  # [..., j, l, a, b] = d_j Gamma^l_ab
        # R(d1, d2) d2 = R^l_{2 1 2} d_l
        r = (dgam[..., 0, :, 1, 1] - dgam[..., 1, :, 0, 1]
             + np.einsum("...lm,...m->...l", gam[..., :, 0, :], gam[..., :, 1, 1])
             - np.einsum("...lm,...m->...l", gam[..., :, 1, :], gam[..., :, 0, 1]))
        g = self.g(x)
        r1212 = np.einsum("...l,...l->...", g[..., 0, :], r)
        return r1212 / np.linalg.det(g)

    def norm2(self, x, v):
        return np.einsum("...i,...ij,...j->...", v, self.g(x), v)

    def config(self):
        raise NotImplementedError(f"{type(self).__name__} has no JSON form")


class GeneralMetric(Metric):
    """Metric from a user callable ``g(x) -> (..., 2, 2)``; derivatives by differences."""

    def __init__(self, g_fn, dg_fn=None):
        self._g = g_fn
        self._dg = dg_fn

    def g(self, x):
        return np.asarray(self._g(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x, h=1e-5):
        if self._dg is not None:
            return np.asarray(self._dg(np.asarray(x, dtype=float)), dtype=float)
        return super().dg(x, h)


class ConformalMetric(Metric):
    """``g = exp(2 phi) I``; subclasses give ``phi``, its gradient and Laplacian."""

    kind = "conformal"

    def phi(self, x):
        raise NotImplementedError

    def grad_phi(self, x):
        raise NotImplementedError

    def laplacian_phi(self, x):
        raise NotImplementedError

    def g(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(2 * self.phi(x))[..., None, None] * np.eye(2)

    def dg(self, x, h=None):
        x = np.asarray(x, dtype=float)
        s = 2 * np.exp(2 * self.phi(x))[..., None] * self.grad_phi(x)
        return s[..., :, None, None] * np.eye(2)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        d = self.grad_phi(x)
        eye = np.eye(2)
        return (np.einsum("ki,...j->...kij", eye, d) + np.einsum("kj,...i->...kij", eye, d)
                - np.einsum("ij,...k->...kij", eye, d))

    def accel(self, x, v):
        d = self.grad_phi(x)
        dv = np.sum(d * v, axis=-1)[..., None]
        vv = np.sum(v * v, axis=-1)[..., None]
        return -2 * dv * v + vv * d

    def gauss_curvature(self, x, h=None):
        x = np.asarray(x, dtype=float)
        return -np.exp(-2 * self.phi(x)) * self.laplacian_phi(x)

    def norm2(self, x, v):
        return np.exp(2 * self.phi(x)) * np.sum(np.asarray(v) ** 2, axis=-1)


class Euclidean(ConformalMetric):
    kind = "euclidean"

    def phi(self, x):
        return np.zeros(np.shape(x)[:-1])

    def grad_phi(self, x):
        return np.zeros(np.shape(x))

    def laplacian_phi(self, x):
        return np.zeros(np.shape(x)[:-1])

    def config(self):
        return {"kind": "euclidean"}


class ConformalBump(ConformalMetric):
    """``phi(x) = a exp(-|x - c|^2 / w^2)``."""

    kind = "conformal"

    def __init__(self, amplitude=0.05, center=(0.0, 0.0), width=0.5):
        if width <= 0:
            raise ValueError("width must be positive")
        self.amplitude = float(amplitude)
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)

    def phi(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return self.amplitude * np.exp(-np.sum(d * d, axis=-1) / self.width ** 2)

    def grad_phi(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return (-2 / self.width ** 2) * self.phi(x)[..., None] * d

    def laplacian_phi(self, x):
        d = np.asarray(x, dtype=float) - self.center
        r2 = np.sum(d * d, axis=-1)
        w2 = self.width ** 2
        return self.phi(x) * (4 * r2 / w2 ** 2 - 4 / w2)

    def config(self):
        return {"kind": "conformal", "amplitude": self.amplitude,
                "center": self.center.tolist(), "width": self.width}


class ConformalExpr(ConformalMetric):
    """Conformal factor given as an expression in ``x1, x2``; derivatives are symbolic."""

    kind = "expr"

    def __init__(self, phi: str):
        self.text = phi
        expr = expressions.parse(phi, variables=("x1", "x2"))
        x1, x2 = expressions.X1, expressions.X2
        args = (x1, x2)
        self._phi = expressions.compile_expr(expr, args)
        self._d1 = expressions.compile_expr(expr.diff(x1), args)
        self._d2 = expressions.compile_expr(expr.diff(x2), args)
        self._lap = expressions.compile_expr(expr.diff(x1, 2) + expr.diff(x2, 2), args)

    def _call(self, fn, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(fn(x[..., 0], x[..., 1]), dtype=float)

    def phi(self, x):
        return self._call(self._phi, x)

    def grad_phi(self, x):
        return np.stack([self._call(self._d1, x), self._call(self._d2, x)], axis=-1)

    def laplacian_phi(self, x):
        return self._call(self._lap, x)

    def config(self):
        return {"kind": "expr", "phi": self.text}


def metric_from_config(cfg: dict) -> Metric:
    kind = cfg.get("kind")
    if kind == "euclidean":
        _reject_keys(cfg, {"kind"})
        return Euclidean()
    if kind in ("conformal", "conformal-bump"):
        _reject_keys(cfg, {"kind", "amplitude", "center", "width"})
        return ConformalBump(cfg.get("amplitude", 0.05), cfg.get("center", (0.0, 0.0)),
                             cfg.get("width", 0.5))
    if kind == "expr":
        _reject_keys(cfg, {"kind", "phi"})
        return ConformalExpr(cfg["phi"])
    raise ValueError(f"unknown metric kind {kind!r}")


def _reject_keys(cfg, allowed):
    extra = set(cfg) - set(allowed)
    if extra:
        raise ValueError(f"unknown keys {sorted(extra)}")


def metric_eval(metric: Metric, x):
    """``g(x)`` as a 2x2 matrix; raises ``DomainError`` outside the closed disk."""
    x = _check_domain(x)
    return metric.g(x)


def christoffel(metric: Metric, x):
    x = _check_domain(x)
    gam = metric.christoffel(x)
    if not np.all(np.isfinite(gam)):
        raise FloatingPointError("non-finite Christoffel symbols")
    return gam


# ---------------------------------------------------------------------------
# phase space


@dataclass(frozen=True)
class UnitTangent:
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class InfluxPoint:
    """Point of the influx boundary: boundary angle ``beta`` and incidence ``alpha``.

    ``alpha`` is measured from the inward unit normal towards the
    counter-clockwise boundary tangent, both normalised in the metric.
    """

    beta: float
    alpha: float

    def base_point(self):
        return np.array([math.cos(self.beta), math.sin(self.beta)])

    def tangent(self, metric: Metric) -> UnitTangent:
        x, v = influx_vectors(metric, np.array([self.beta]), np.array([self.alpha]))
        return UnitTangent(x[0], v[0])


def boundary_frame(metric: Metric, beta, radius=1.0):
    """g-unit inward normal and g-unit counter-clockwise tangent on the circle ``|x| = radius``."""
    beta = np.asarray(beta, dtype=float)
    x = radius * np.stack([np.cos(beta), np.sin(beta)], axis=-1)
    g = metric.g(x)
    nu = np.linalg.solve(g, (-x)[..., None])[..., 0]
    nu = nu / np.sqrt(metric.norm2(x, nu))[..., None]
    tan = np.stack([-np.sin(beta), np.cos(beta)], axis=-1)
    tan = tan / np.sqrt(metric.norm2(x, tan))[..., None]
    return x, nu, tan


def influx_vectors(metric: Metric, beta, alpha):
    x, nu, tan = boundary_frame(metric, beta)
    alpha = np.asarray(alpha, dtype=float)[..., None]
    return x, np.cos(alpha) * nu + np.sin(alpha) * tan


def influx_fan(metric: Metric, n_beta: int, n_alpha: int, alpha_margin: float):
    """Uniform (beta, alpha) grid on the influx boundary, glancing rays excluded."""
    if n_beta < 1 or n_alpha < 1:
        raise ValueError("fan counts must be >= 1")
    if not 0 < alpha_margin < math.pi / 2:
        raise ValueError("alpha_margin must lie in (0, pi/2)")
    betas = 2 * math.pi * np.arange(n_beta) / n_beta
    lim = math.pi / 2 - alpha_margin
    alphas = np.array([0.0]) if n_alpha == 1 else np.linspace(-lim, lim, n_alpha)
    return [InfluxPoint(float(b), float(a)) for b in betas for a in alphas]


def fan_arrays(fan):
    return (np.array([z.beta for z in fan], dtype=float),
            np.array([z.alpha for z in fan], dtype=float))


# ---------------------------------------------------------------------------
# geodesics


@dataclass
class GeodesicPath:
    """Samples ``(t, x(t), v(t))`` at uniform step ``h``; the last interval ends at the exit."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    tau_plus: float
    step: float
    tau_minus: float = 0.0
    trapped: bool = False
    start: InfluxPoint | None = None

    @property
    def dt(self):
        return np.diff(self.t)

    def midpoints(self):
        """Cubic Hermite positions at the middle of every step (fourth-order accurate)."""
        dt = self.dt[:, None]
        return 0.5 * (self.x[:-1] + self.x[1:]) + dt * (self.v[:-1] - self.v[1:]) / 8


def _rk4(metric, x, v, h):
    h = np.asarray(h, dtype=float)
    if h.ndim:
        h = h[:, None]
    k1x, k1v = v, metric.accel(x, v)
    k2x = v + 0.5 * h * k1v
    k2v = metric.accel(x + 0.5 * h * k1x, k2x)
    k3x = v + 0.5 * h * k2v
    k3v = metric.accel(x + 0.5 * h * k2x, k3x)
    k4x = v + h * k3v
    k4v = metric.accel(x + h * k3x, k4x)
    return (x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))


def _exit_step(metric, x, v, h, started_on_boundary):
    """Step length in (0, h] at which ``rho`` of the RK4 update vanishes."""
    n = len(x)
    hi = np.full(n, float(h))
    lo = np.zeros(n)
    if np.any(started_on_boundary):
        # the start itself has rho = 0; move lo to a strictly interior sample
        idx = np.flatnonzero(started_on_boundary)
        trial = hi[idx].copy()
        ok = np.zeros(len(idx), dtype=bool)
        for _ in range(_BISECT_ITERS):
            trial = np.where(ok, trial, trial / 2)
            xt, _ = _rk4(metric, x[idx], v[idx], trial)
            ok |= rho(xt) > 0
            if ok.all():
                break
        lo[idx] = np.where(ok, trial, 0.0)
        hi[idx] = np.where(ok, hi[idx], 0.0)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        xm, _ = _rk4(metric, x, v, mid)
        inside = rho(xm) > 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all(hi - lo <= 1e-16 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def trace_batch(metric: Metric, x0, v0, step: float, tau_max: float = DEFAULT_TAU_MAX,
                starts=None, on_trap="raise"):
    """Trace many geodesics at once; returns a list of ``GeodesicPath``.

    ``on_trap='raise'`` raises ``TrappingError`` for the first ray that
    exceeds ``tau_max``; ``'report'`` returns it with ``trapped=True``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    v0 = np.atleast_2d(np.asarray(v0, dtype=float))
    _check_domain(x0)
    n = len(x0)
    on_bdry = np.abs(rho(x0)) < _BOUNDARY_TOL
    # glancing or outward starts on the boundary have tau_plus = 0
    inward = np.sum(x0 * v0, axis=-1) < -1e-14
    active = ~(on_bdry & ~inward)
    xs, vs = [x0.copy()], [v0.copy()]
    t_exit = np.where(active, np.nan, 0.0)
    x_exit = x0.copy()
    v_exit = v0.copy()
    trapped = np.zeros(n, dtype=bool)
    x, v = x0.copy(), v0.copy()
    k = 0
    while active.any():
        if (k + 1) * step > tau_max:
            trapped |= active
            t_exit[active] = np.inf
            if on_trap == "raise":
                raise TrappingError(tau_max)
            break
        ia = np.flatnonzero(active)
        xn, vn = _rk4(metric, x[ia], v[ia], step)
        out = rho(xn) <= 0
        if out.any():
            io = ia[out]
            dl = _exit_step(metric, x[io], v[io], step, on_bdry[io] & (k == 0))
            xe, ve = _rk4(metric, x[io], v[io], dl)
            x_exit[io], v_exit[io] = xe, ve
            t_exit[io] = k * step + dl
            active[io] = False
        keep = ia[~out]
        x = x.copy()
        v = v.copy()
        x[keep], v[keep] = xn[~out], vn[~out]
        x[~active] = np.nan
        v[~active] = np.nan
        xs.append(x.copy())
        vs.append(v.copy())
        k += 1
    X = np.stack(xs, axis=1)
    V = np.stack(vs, axis=1)
    paths = []
    for i in range(n):
        good = np.isfinite(X[i, :, 0])
        xi, vi = X[i, good], V[i, good]
        ti = step * np.arange(len(xi), dtype=float)
        if trapped[i]:
            paths.append(GeodesicPath(ti, xi, vi, math.inf, step, trapped=True,
                                      start=None if starts is None else starts[i]))
            continue
        if t_exit[i] > ti[-1]:
            ti = np.append(ti, t_exit[i])
            xi = np.vstack([xi, x_exit[i]])
            vi = np.vstack([vi, v_exit[i]])
        paths.append(GeodesicPath(ti, xi, vi, float(t_exit[i]), step,
                                  start=None if starts is None else starts[i]))
    return paths


def trace_fan(metric: Metric, fan, step: float, tau_max: float = DEFAULT_TAU_MAX,
              on_trap="raise"):
    if len(fan) == 0:
        return []
    beta, alpha = fan_arrays(fan)
    x0, v0 = influx_vectors(metric, beta, alpha)
    return trace_batch(metric, x0, v0, step, tau_max, starts=list(fan), on_trap=on_trap)


def geodesic_trace(metric: Metric, z, step: float = 1e-3, tau_max: float = DEFAULT_TAU_MAX,
                   backward: bool = False) -> GeodesicPath:
    """Trace the unit-speed geodesic from an ``InfluxPoint`` or ``UnitTangent``.

    With ``backward=True`` the backward exit time ``tau_minus`` is computed
    by tracing the reversed velocity.
    """
    if isinstance(z, InfluxPoint):
        u = z.tangent(metric)
        start = z
    else:
        u, start = z, None
    path = trace_batch(metric, u.x[None], u.v[None], step, tau_max, starts=[start])[0]
    if backward:
        back = trace_batch(metric, u.x[None], -u.v[None], step, tau_max)[0]
        path.tau_minus = back.tau_plus
    return path


# ---------------------------------------------------------------------------
# boundary convexity, curvature, Jacobi fields


def strict_convexity(metric: Metric, beta, radius: float = 1.0, h: float = 1e-5):
    """Second fundamental form ``-<nabla_T nu, T>_g`` of the circle ``|x| = radius``.

    ``T`` is the g-unit tangent and ``nu`` the g-unit inward normal; positive
    values mean strictly convex.  The derivative of ``nu`` along the circle
    is a centred difference in ``beta``.
    """
    beta = np.asarray(beta, dtype=float)
    x, nu, tan = boundary_frame(metric, beta, radius)
    _, nu_p, _ = boundary_frame(metric, beta + h, radius)
    _, nu_m, _ = boundary_frame(metric, beta - h, radius)
    # d/ds with s the g-arclength: dx/dbeta = radius * e_T, |e_T|_g
    speed = radius * np.sqrt(metric.norm2(x, np.stack([-np.sin(beta), np.cos(beta)], -1)))
    dnu = (nu_p - nu_m) / (2 * h) / speed[..., None]
    gam = metric.christoffel(x)
    cov = dnu + np.einsum("...kij,...i,...j->...k", gam, tan, nu)
    return -np.einsum("...i,...ij,...j->...", cov, metric.g(x), tan)


def _hermite_root(t0, t1, y0, y1, d0, d1):
    h = t1 - t0

    def p(t):
        s = (t - t0) / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

    return brentq(p, t0, t1, xtol=1e-15)


def _jacobi_zeros(t, k_nodes, k_mids):
    """RK4 for ``J'' + K J = 0`` with ``J(0)=0, J'(0)=1``; returns sign-change times."""
    J, Jp = 0.0, 1.0
    zeros = []
    for i in range(len(t) - 1):
        h = t[i + 1] - t[i]
        k0, km, k1 = k_nodes[i], k_mids[i], k_nodes[i + 1]
        a1, b1 = Jp, -k0 * J
        a2, b2 = Jp + 0.5 * h * b1, -km * (J + 0.5 * h * a1)
        a3, b3 = Jp + 0.5 * h * b2, -km * (J + 0.5 * h * a2)
        a4, b4 = Jp + h * b3, -k1 * (J + h * a3)
        Jn = J + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        Jpn = Jp + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        if i > 0 and J != 0 and np.sign(Jn) != np.sign(J) and Jn != 0:
            zeros.append(_hermite_root(t[i], t[i + 1], J, Jn, Jp, Jpn))
        elif i > 0 and Jn == 0 and i + 1 < len(t) - 1:
            zeros.append(float(t[i + 1]))
        J, Jp = Jn, Jpn
    return zeros


def jacobi_zeros(curvature, t_end: float, step: float = 1e-3):
    """Conjugate times in ``(0, t_end)`` for a curvature profile ``K(t)``."""
    n = max(1, int(math.ceil(t_end / step - 1e-12)))
    t = np.linspace(0.0, t_end, n + 1)
    k_nodes = np.asarray([curvature(s) for s in t], dtype=float)
    k_mids = np.asarray([curvature(s) for s in 0.5 * (t[:-1] + t[1:])], dtype=float)
    return _jacobi_zeros(t, k_nodes, k_mids)


def conjugate_scan(metric: Metric, z, step: float = 1e-3, tau_max: float = DEFAULT_TAU_MAX,
                   path: GeodesicPath | None = None):
    """Conjugate times along the geodesic from ``z`` (empty list if none)."""
    if path is None:
        path = geodesic_trace(metric, z, step, tau_max)
    if path.trapped:
        raise TrappingError(tau_max)
    if len(path.t) < 2:
        return []
    k_nodes = metric.gauss_curvature(path.x)
    k_mids = metric.gauss_curvature(path.midpoints())
    return [s for s in _jacobi_zeros(path.t, k_nodes, k_mids) if 0 < s < path.tau_plus]


@dataclass
class NontrappingReport:
    n_rays: int = 0
    max_tau: float | None = None
    trapped: list = field(default_factory=list)
    tau_max: float = DEFAULT_TAU_MAX

    @property
    def ok(self):
        return not self.trapped


def nontrapping_scan(metric: Metric, fan, tau_max: float = DEFAULT_TAU_MAX,
                     step: float = 1e-2) -> NontrappingReport:
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    if len(fan) == 0:
        return NontrappingReport(tau_max=tau_max)
    paths = trace_fan(metric, fan, step, tau_max, on_trap="report")
    trapped = [i for i, p in enumerate(paths) if p.trapped]
    taus = [p.tau_plus for p in paths if not p.trapped]
    return NontrappingReport(len(fan), max(taus) if taus else None, trapped, tau_max)


@dataclass
class AdmissibilityReport:
    interior: bool
    injective: bool
    regular: bool
    finite: bool
    transversality: bool = True  # vacuous: the fan has codimension one in SM

    @property
    def admissible(self):
        return self.interior and self.injective and self.regular and self.finite


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def has_self_intersection(x, skip: int = 2) -> bool:
    """Polyline self-crossing test; candidate pairs come from a KD-tree on segment midpoints.

    Segments closer than ``skip`` indices apart are neighbours and ignored.
    This is a sampled surrogate for injectivity of the curve.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 4:
        return False
    mids = 0.5 * (x[:-1] + x[1:])
    lens = np.linalg.norm(np.diff(x, axis=0), axis=1)
    tree = cKDTree(mids)
    for i, j in tree.query_pairs(float(lens.max()) + 1e-15):
        if abs(i - j) <= skip:
            continue
        if _segments_cross(x[i], x[i + 1], x[j], x[j + 1]):
            return True
    return False


def admissibility_check(metric: Metric, path: GeodesicPath) -> AdmissibilityReport:
    inner = path.x[1:-1] if len(path.x) > 2 else path.x[:0]
    interior = bool(np.all(rho(inner) > 0))
    speed = np.sqrt(np.sum(path.v ** 2, axis=-1))
    return AdmissibilityReport(
        interior=interior,
        injective=not has_self_intersection(path.x),
        regular=bool(np.all(speed > 0)),
        finite=bool(np.isfinite(path.tau_plus) and not path.trapped),
    )
