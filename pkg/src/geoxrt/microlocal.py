"""Gaussian wave-packet (FBI) transform and analytic wavefront probes.

For ``lambda > 0`` and ``u = (z, zeta)`` the wave packet is

    M_u(w) = lambda^(3m/4) exp(i lambda w.zeta) c_m exp(-lambda |w - z|^2 / 2),
    c_m = 2^(-m/2) pi^(-3m/4),

and the FBI transform is the pairing ``L f(u) = <f, conj(M_u)>``.  A point
is analytically regular iff ``|L f| = O(exp(-eps lambda))`` uniformly on a
conic neighbourhood.  The probes here fit that exponent on a finite
``lambda`` grid, so every classification carries its thresholds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import wofz

log = logging.getLogger(__name__)

DEFAULT_LAMBDAS = np.geomspace(20.0, 400.0, 16)
EPS_THRESHOLD = 1e-3
R2_MIN = 0.99
FLOOR = 1e-300
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_WINDOW = 40.0  # Gaussian tail cut at exp(-_WINDOW)


class QuadratureStepError(ValueError):
    """Requested quadrature step exceeds ``lambda^(-1/2) / 8``."""


def c_m(m: int) -> float:
    return 2.0 ** (-m / 2) * math.pi ** (-3 * m / 4)


@dataclass(frozen=True)
class PhaseSpacePoint:
    z: tuple
    zeta: tuple

    def __post_init__(self):
        z = tuple(float(v) for v in np.atleast_1d(self.z))
        zeta = tuple(float(v) for v in np.atleast_1d(self.zeta))
        if len(z) != len(zeta):
            raise ValueError("z and zeta dimensions differ")
        if math.hypot(*zeta) <= 0:
            raise ValueError("zeta must be nonzero")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "zeta", zeta)

    @property
    def m(self):
        return len(self.z)


def wave_packet(u: PhaseSpacePoint, lam: float, w):
    if lam <= 0:
        raise ValueError("lambda must be positive")
    w = np.asarray(w, dtype=float)
    if u.m == 1 and (w.ndim == 0 or w.shape[-1] != 1):
        w = w[..., None]
    z, zeta = np.asarray(u.z), np.asarray(u.zeta)
    d2 = np.sum((w - z) ** 2, axis=-1)
    return (lam ** (0.75 * u.m) * c_m(u.m) * np.exp(1j * lam * (w @ zeta))
            * np.exp(-0.5 * lam * d2))


# ---------------------------------------------------------------------------
# one-dimensional pairings  P(lam, z, zeta) = c_1 lam^(3/4) int f(w) e^{-i lam w zeta} e^{-lam (w-z)^2/2} dw


def _erf_edge(s, lam, z, zeta):
    """``exp(-q^2) erf(p + i q)`` with ``p = sqrt(lam/2)(s - z)``, ``q = sqrt(lam/2) zeta``.

    Written through the Faddeeva function so that no factor overflows.
    """
    k = math.sqrt(lam / 2)
    if s == math.inf:
        return math.exp(-(k * zeta) ** 2)
    if s == -math.inf:
        return -math.exp(-(k * zeta) ** 2)
    p, q = k * (s - z), k * zeta
    bounded = np.exp(-p * p - 2j * p * q)  # exp(-q^2) exp(-B^2)
    B = p + 1j * q
    if p >= 0:
        return math.exp(-q * q) - bounded * wofz(1j * B)
    return -math.exp(-q * q) + bounded * wofz(-1j * B)


def interval_pairing(a, b, lam, z, zeta):
    """Closed form for ``1_[a, b]`` (infinite ends allowed)."""
    k = math.sqrt(lam / 2)
    pref = c_m(1) * lam ** 0.75 * math.sqrt(math.pi / (2 * lam)) * np.exp(-1j * lam * zeta * z)
    return pref * (_erf_edge(b, lam, z, zeta) - _erf_edge(a, lam, z, zeta)) * (1 if k else 0)


def line_pairing(lam, z, zeta):
    """Pairing of the constant function 1 on the whole line."""
    return (c_m(1) * lam ** 0.75 * math.sqrt(2 * math.pi / lam)
            * np.exp(-1j * lam * zeta * z - 0.5 * lam * zeta ** 2))


def _panels(lo, hi, step, breaks):
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    edges = []
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil((b - a) / step))
        edges.extend(np.linspace(a, b, n + 1)[:-1].tolist())
    edges.append(pts[-1])
    return np.asarray(edges)


def _nodes(edges, smooth_ends):
    """Gauss-Legendre nodes per panel; a panel touching one of ``smooth_ends`` is mapped by a
    one-sided square ``x = e + h u^2`` from that end, which turns square-root edge behaviour
    into a polynomial."""
    a, b = edges[:-1, None], edges[1:, None]
    u = 0.5 * (_GL_NODES + 1)
    wu = 0.5 * _GL_WEIGHTS
    x = a + (b - a) * u
    w = np.broadcast_to((b - a) * wu, x.shape).copy()
    ends = np.asarray(sorted(smooth_ends)) if smooth_ends else np.zeros(0)
    left = np.zeros(len(edges) - 1, dtype=bool)
    right = np.zeros(len(edges) - 1, dtype=bool)
    for e in ends:
        left |= np.isclose(edges[:-1], e)
        right |= np.isclose(edges[1:], e) & ~left
    xl, wl = a + (b - a) * u ** 2, (b - a) * wu * 2 * u
    xr, wr = b - (b - a) * (1 - u) ** 2, (b - a) * wu * 2 * (1 - u)
    x = np.where(left[:, None], xl, np.where(right[:, None], xr, x))
    w = np.where(left[:, None], wl, np.where(right[:, None], wr, w))
    return x.ravel(), w.ravel()


def quad_pairing_1d(fn, support, breaks, lam, z, zeta, step=None):
    """Composite Gauss-Legendre pairing for a piecewise-analytic ``fn`` on ``support``."""
    max_step = lam ** -0.5 / 8
    if step is None:
        step = max_step
    elif step > max_step * (1 + 1e-12):
        raise QuadratureStepError(f"step {step} exceeds lambda^(-1/2)/8 = {max_step}")
    half = math.sqrt(2 * _WINDOW / lam)
    lo, hi = max(support[0], z - half), min(support[1], z + half)
    if lo >= hi:
        return 0j
    ends = [support[0], support[1], *breaks]
    edges = _panels(lo, hi, step, breaks)
    x, w = _nodes(edges, [e for e in ends if lo <= e <= hi])
    vals = np.asarray(fn(x), dtype=complex)
    kern = np.exp(-1j * lam * zeta * x - 0.5 * lam * (x - z) ** 2)
    return c_m(1) * lam ** 0.75 * np.sum(w * vals * kern)


# ---------------------------------------------------------------------------
# test distributions


class TestDistribution:
    """Compactly supported distribution paired exactly or by quadrature."""

    __test__ = False  # not a pytest class
    m = 1
    kind = "abstract"
    exact = False

    def pairing(self, u: PhaseSpacePoint, lam: float, step=None) -> complex:
        raise NotImplementedError


class Dirac(TestDistribution):
    kind = "dirac"
    exact = True

    def __init__(self, point=(0.0,)):
        self.point = np.atleast_1d(np.asarray(point, dtype=float))
        self.m = len(self.point)

    def pairing(self, u, lam, step=None):
        z, zeta = np.asarray(u.z), np.asarray(u.zeta)
        d2 = np.sum((self.point - z) ** 2)
        return (c_m(self.m) * lam ** (0.75 * self.m) * np.exp(-1j * lam * (self.point @ zeta))
                * math.exp(-0.5 * lam * d2))


class Interval(TestDistribution):
    kind = "interval-indicator"
    exact = True

    def __init__(self, a=-1.0, b=1.0):
        self.a, self.b = float(a), float(b)

    def pairing(self, u, lam, step=None):
        return interval_pairing(self.a, self.b, lam, u.z[0], u.zeta[0])


class Zero(TestDistribution):
    kind = "zero"
    exact = True

    def __init__(self, m=1):
        self.m = m

    def pairing(self, u, lam, step=None):
        return 0j


class Function1D(TestDistribution):
    """Piecewise-analytic function on ``support`` with singular points ``breaks``."""

    kind = "function-1d"

    def __init__(self, fn, support, breaks=()):
        self.fn, self.support, self.breaks = fn, tuple(support), tuple(breaks)

    def pairing(self, u, lam, step=None):
        return quad_pairing_1d(self.fn, self.support, self.breaks, lam, u.z[0], u.zeta[0], step)


class LineConstant(TestDistribution):
    """The function 1 on the whole line (used as a factor of separable distributions)."""

    kind = "constant"
    exact = True

    def pairing(self, u, lam, step=None):
        return line_pairing(lam, u.z[0], u.zeta[0])


class Separable(TestDistribution):
    """Tensor product ``f_1(w_1) f_2(w_2) ...`` of one-dimensional factors."""

    kind = "separable"

    def __init__(self, factors):
        self.factors = list(factors)
        self.m = len(self.factors)
        self.exact = all(f.exact for f in self.factors)

    def pairing(self, u, lam, step=None):
        out = 1.0 + 0j
        for k, f in enumerate(self.factors):
            if u.zeta[k]:
                out *= f.pairing(PhaseSpacePoint((u.z[k],), (u.zeta[k],)), lam, step)
            else:
                out *= _zero_freq(f, u.z[k], lam, step)
        return out


def _zero_freq(f, z, lam, step):
    # pairing at zero frequency in this coordinate (PhaseSpacePoint forbids a zero covector)
    if isinstance(f, LineConstant):
        return c_m(1) * lam ** 0.75 * math.sqrt(2 * math.pi / lam)
    if isinstance(f, Interval):
        return interval_pairing(f.a, f.b, lam, z, 0.0)
    if isinstance(f, Function1D):
        return quad_pairing_1d(f.fn, f.support, f.breaks, lam, z, 0.0, step)
    if isinstance(f, Zero):
        return 0j
    raise TypeError(f"zero-frequency pairing unsupported for {type(f).__name__}")


class HalfPlane(TestDistribution):
    """Indicator of ``{x : x.n > offset}`` in the plane (conormal to a line)."""

    kind = "conormal-to-curve"
    exact = True
    m = 2

    def __init__(self, normal=(1.0, 0.0), offset=0.0):
        n = np.asarray(normal, dtype=float)
        self.normal = n / np.linalg.norm(n)
        self.offset = float(offset)

    def pairing(self, u, lam, step=None):
        n = self.normal
        t = np.array([-n[1], n[0]])
        z, zeta = np.asarray(u.z), np.asarray(u.zeta)
        # rotate coordinates: w = s n + r t
        zs, zr = z @ n, z @ t
        ks, kr = zeta @ n, zeta @ t
        return interval_pairing(self.offset, math.inf, lam, zs, ks) * line_pairing(lam, zr, kr)


class DiskIndicator(TestDistribution):
    """Indicator of a disk; exact in ``w_1``, Gauss-Legendre in ``w_2``."""

    kind = "disk-indicator"
    m = 2

    def __init__(self, center=(0.0, 0.0), radius=0.5):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def pairing(self, u, lam, step=None):
        c, R = self.center, self.radius
        z1, z2 = u.z
        k1, k2 = u.zeta

        def row(y):
            y = np.atleast_1d(y)
            half = np.sqrt(np.maximum(R * R - (y - c[1]) ** 2, 0.0))
            return np.array([interval_pairing(c[0] - h, c[0] + h, lam, z1, k1) if h > 0 else 0j
                             for h in half])

        return quad_pairing_1d(row, (c[1] - R, c[1] + R), (), lam, z2, k2, step)


class GaussianBump(TestDistribution):
    """``amplitude * exp(-|w - c|^2 / s^2)`` by tensor quadrature (analytic everywhere).

    The quadrature resolves magnitudes down to about 1e-15 of the peak, so
    probe it with ``eps * max(lambda)`` well below 30 (e.g. ``|zeta| <= 0.3``).
    """

    kind = "smooth-bump"

    def __init__(self, center=(0.0,), width=0.3, amplitude=1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.m = len(self.center)
        self.width, self.amplitude = float(width), float(amplitude)

    def pairing(self, u, lam, step=None):
        out = self.amplitude + 0j
        for k in range(self.m):
            ck = self.center[k]
            fn = (lambda x, ck=ck: np.exp(-((x - ck) / self.width) ** 2))
            zk = u.zeta[k]
            span = 12 * self.width
            out *= quad_pairing_1d(fn, (ck - span, ck + span), (), lam, u.z[k], zk, step)
        return out

    def closed_form(self, u, lam):
        """Independent Gaussian-integral evaluation of the same pairing."""
        out = self.amplitude + 0j
        a = 1 / self.width ** 2
        for k in range(self.m):
            c, z, zeta = self.center[k], u.z[k], u.zeta[k]
            A = a + lam / 2
            Bc = 2 * a * c + lam * z - 1j * lam * zeta
            C = a * c * c + lam * z * z / 2
            out *= c_m(1) * lam ** 0.75 * np.sqrt(np.pi / A) * np.exp(Bc * Bc / (4 * A) - C)
        return out


# ---------------------------------------------------------------------------
# responses and fits


@dataclass
class FbiResponse:
    lambdas: np.ndarray
    values: np.ndarray
    u: PhaseSpacePoint
    c_m: float
    normalization: str = "lambda^(3m/4)"

    @property
    def magnitudes(self):
        return np.abs(self.values)

    def to_csv(self):
        lines = ["lambda,magnitude"]
        lines += [f"{lam:.17g},{mag:.17g}" for lam, mag in zip(self.lambdas, self.magnitudes)]
        return "\n".join(lines) + "\n"


def fbi(f: TestDistribution, u: PhaseSpacePoint, lambda_grid=DEFAULT_LAMBDAS, step=None) -> FbiResponse:
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.ndim != 1 or np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise ValueError("lambda grid must be positive and strictly increasing")
    if f.m != u.m:
        raise ValueError(f"dimension mismatch: distribution m={f.m}, point m={u.m}")
    vals = np.array([f.pairing(u, lam, step) for lam in lams], dtype=complex)
    return FbiResponse(lams, vals, u, c_m(u.m))


@dataclass
class DecayFit:
    epsilon: float
    r2: float
    power: float = 0.0
    floored: bool = False

    def __iter__(self):
        return iter((self.epsilon, self.r2))


def decay_fit(resp: FbiResponse) -> DecayFit:
    """Fit ``log|L| = c + p log(lambda) - eps lambda + d / lambda`` on the upper half of the grid.

    The ``log(lambda)`` column absorbs polynomial prefactors such as the
    ``lambda^(3m/4)`` normalisation, and ``1/lambda`` the first correction of
    a conormal asymptotic expansion, so power laws give ``eps ~ 0``.
    Zero magnitudes are floored at 1e-300; an identically zero response
    decays faster than any exponential and returns ``eps = inf``.
    """
    lams = np.asarray(resp.lambdas, dtype=float)
    if len(lams) < 8 or lams[-1] / lams[0] < 8 * (1 - 1e-12):
        raise ValueError("decay fit needs >= 8 lambdas spanning a factor >= 8")
    mags = resp.magnitudes
    if np.all(mags == 0):
        return DecayFit(math.inf, 1.0, 0.0, True)
    floored = bool(np.any(mags < FLOOR))
    y = np.log(np.maximum(mags, FLOOR))
    sel = slice(len(lams) // 2, None)
    lam, y = lams[sel], y[sel]
    X = np.stack([np.ones_like(lam), np.log(lam), lam, 1 / lam], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-24 * max(1.0, float(np.sum(y * y))) else 1 - ss_res / ss_tot
    return DecayFit(float(-coef[2]), float(r2), float(coef[1]), floored)


def neighbourhood(u: PhaseSpacePoint, radius=0.05, n=5):
    """``n x n`` base-point / direction perturbations of ``u``.

    In one dimension the direction is fixed, so the second factor perturbs
    ``|zeta|`` by relative amounts up to ``radius``; in two dimensions the
    base point moves along the coordinate axes and the direction rotates.
    """
    z, zeta = np.asarray(u.z), np.asarray(u.zeta)
    offs = np.linspace(-radius, radius, n)
    out = []
    if u.m == 1:
        for dz in offs:
            for ds in offs:
                out.append(PhaseSpacePoint(z + dz, zeta * (1 + ds)))
        return out
    shifts = [np.zeros(2), *[s * radius * e for e in np.eye(2) for s in (-1, 1)]][:n]
    rot = lambda a: np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    for dz in shifts:
        for da in offs:
            out.append(PhaseSpacePoint(z + dz, rot(da) @ zeta))
    return out


@dataclass
class WfProbeResult:
    classification: str
    eps_min: float
    r2_min: float
    eps_threshold: float
    r2_threshold: float
    points: list = field(default_factory=list)

    @property
    def regular(self):
        return self.classification == "regular"

    def to_dict(self):
        return {"classification": self.classification, "eps_min": _finite(self.eps_min),
                "r2_min": self.r2_min, "eps_threshold": self.eps_threshold,
                "r2_threshold": self.r2_threshold,
                "points": [{"z": list(p.z), "zeta": list(p.zeta), "eps": _finite(e), "r2": r}
                           for p, e, r in self.points]}


def _finite(v):
    return v if math.isfinite(v) else "inf"


def wf_probe(f: TestDistribution, u: PhaseSpacePoint, lambda_grid=DEFAULT_LAMBDAS,
             eps_threshold=EPS_THRESHOLD, r2_threshold=R2_MIN, radius=0.05, step=None) -> WfProbeResult:
    """Regular iff every neighbourhood point decays with ``eps >= eps_threshold`` and ``r2 >= r2_threshold``."""
    rows = []
    for v in neighbourhood(u, radius):
        fit = decay_fit(fbi(f, v, lambda_grid, step))
        rows.append((v, fit.epsilon, fit.r2))
    eps_min = min(r[1] for r in rows)
    r2_min = min(r[2] for r in rows)
    regular = eps_min >= eps_threshold and r2_min >= r2_threshold
    return WfProbeResult("regular" if regular else "singular", eps_min, r2_min,
                         eps_threshold, r2_threshold, rows)


# ---------------------------------------------------------------------------
# the Radon instance: euclidean disk, identity weight


class GeometryMismatch(ValueError):
    """Numerical sinogram disagrees with the closed-form chord sinogram."""


def chord_sinogram(alpha, radius=0.5):
    """Closed-form X-ray transform of the centred disk indicator at incidence ``alpha``."""
    s = np.sin(np.asarray(alpha, dtype=float))
    return 2 * np.sqrt(np.maximum(radius ** 2 - s ** 2, 0.0))


def _line_point(beta, alpha, t):
    e = np.array([math.cos(beta), math.sin(beta)])
    d = -np.array([math.cos(beta + alpha), math.sin(beta + alpha)])
    return e + t * d


def preimages(x, eta):
    """Fan parameters ``(beta, alpha, t, zeta)`` of the lines through ``x`` conormal to ``eta``.

    ``zeta`` is the pull-back of ``eta`` by ``(beta, alpha) -> x_z(t)`` at fixed ``t``.
    """
    x, eta = np.asarray(x, dtype=float), np.asarray(eta, dtype=float)
    d0 = np.array([-eta[1], eta[0]]) / np.linalg.norm(eta)
    out = []
    for d in (d0, -d0):
        # |x - s d| = 1 with s > 0: entry point behind x
        b = x @ d
        s = b + math.sqrt(b * b - (x @ x - 1))
        entry = x - s * d
        beta = math.atan2(entry[1], entry[0])
        nu = -entry
        alpha = math.atan2(nu[0] * d[1] - nu[1] * d[0], nu @ d)
        h = 1e-6
        jb = (_line_point(beta + h, alpha, s) - _line_point(beta - h, alpha, s)) / (2 * h)
        ja = (_line_point(beta, alpha + h, s) - _line_point(beta, alpha - h, s)) / (2 * h)
        out.append((beta, alpha, s, np.array([eta @ jb, eta @ ja])))
    return out


def default_probe_set(radius=0.5):
    pts = []
    for th in (0.0, math.pi / 3, 2.2):
        e = np.array([math.cos(th), math.sin(th)])
        t = np.array([-e[1], e[0]])
        pts.append((radius * e, e, "boundary-normal"))
        pts.append((radius * e, t, "boundary-tangent"))
        pts.append((0.75 * e, e, "exterior"))
    pts.append((np.zeros(2), np.array([1.0, 0.0]), "interior"))
    pts.append((np.zeros(2), np.array([0.6, 0.8]), "interior"))
    return pts


def radon_wf_consistency(radius=0.5, probes=None, zeta_scale=0.2, metric=None,
                         n_check=64, step=1e-3, check_tol=1e-2, lambda_grid=DEFAULT_LAMBDAS,
                         eps_threshold=EPS_THRESHOLD, zero_phantom=False):
    """Check ``sinogram regular at all preimages => phantom regular`` for a disk indicator.

    The sinogram is computed along traced rays and compared with the closed
    form chord lengths; the wavefront probes then run on the closed form
    (as a separable distribution in ``(beta, alpha)``) since quadrature of
    the sampled sinogram would put a noise floor under the decay.
    """
    from .geometry import Euclidean, influx_fan, trace_fan
    from .transforms import CallableSource, IdentityWeight, weighted_batch

    metric = metric or Euclidean()
    if metric.kind != "euclidean":
        raise GeometryMismatch("the Radon instance needs the euclidean metric")
    amp = 0.0 if zero_phantom else 1.0
    fan = influx_fan(metric, 4, n_check, 0.05)
    paths = trace_fan(metric, fan, step)
    src = CallableSource(lambda x: amp * (np.sum(x * x, axis=-1) < radius ** 2), 1)
    num = weighted_batch(IdentityWeight(1), src, paths)[:, 0].real
    ref = amp * chord_sinogram([z.alpha for z in fan], radius)
    dev = float(np.max(np.abs(num - ref)))
    if dev > check_tol:
        raise GeometryMismatch(f"sinogram deviates from chord lengths by {dev:.3e}")
    a_star = math.asin(radius)
    if zero_phantom:
        sino = Separable([LineConstant(), Zero()])
    else:
        sino = Separable([LineConstant(), Function1D(lambda a: chord_sinogram(a, radius),
                                                     (-a_star, a_star))])
    entries, violations = [], []
    for x, eta, label in (probes or default_probe_set(radius)):
        f_singular = bool(not zero_phantom and math.isclose(np.linalg.norm(x), radius, abs_tol=1e-12)
                      and abs(abs(np.dot(x, eta)) - np.linalg.norm(x) * np.linalg.norm(eta)) < 1e-12)
        pre = []
        for beta, alpha, t, zeta in preimages(x, eta):
            zeta = zeta_scale * zeta / np.linalg.norm(zeta)
            res = wf_probe(sino, PhaseSpacePoint((beta, alpha), tuple(zeta)), lambda_grid,
                           eps_threshold)
            pre.append({"beta": float(beta), "alpha": float(alpha), "t": float(t), "zeta": zeta.tolist(),
                        "classification": res.classification, "eps_min": _finite(res.eps_min),
                        "r2_min": res.r2_min})
        all_regular = all(p["classification"] == "regular" for p in pre)
        violated = bool(all_regular and f_singular)
        entry = {"x": list(map(float, x)), "eta": list(map(float, eta)), "label": label,
                 "phantom_regular": not f_singular, "preimages": pre, "violation": violated}
        entries.append(entry)
        if violated:
            log.warning("implication violated at x=%s eta=%s", x, eta)
            violations.append(entry)
    return {"theorem": "sinogram regularity implies phantom regularity",
            "radius": radius, "zeta_scale": zeta_scale, "eps_threshold": eps_threshold,
            "r2_threshold": R2_MIN, "lambda_grid": list(map(float, lambda_grid)),
            "sinogram_max_deviation": dev, "entries": entries,
            "violations": len(violations), "passed": not violations}
