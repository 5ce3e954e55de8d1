"""Desk-scale probes of the uniqueness theorems.

Every probe re-checks the hypotheses of the statement it exercises
(non-trapping, strict convexity, analytic weight or position-only
attenuation) before doing any linear algebra, and returns a
``ProbeReport`` that carries its thresholds next to its outcomes.

The reconstruction oracle is self-consistent: data are produced by the
same discrete operator that is inverted, so a failure means the discrete
system is not injective or not solvable at the declared tolerance.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .discrete import ForwardOperator, assemble, cgls, sigma_extremes
from .geometry import (InfluxPoint, Metric, boundary_frame, influx_fan, nontrapping_scan,
                       strict_convexity, trace_fan)
from .pixels import PixelBasis
from .transforms import (Attenuation, MatrixWeight, PixelAttenuation, PseudoAttenuation, Sinogram,
                         TransportWeight, VectorSource, _digest, inv_checked, scattering_batch)

log = logging.getLogger(__name__)


class HypothesisError(RuntimeError):
    """A theorem hypothesis failed; ``hypothesis`` names it."""

    def __init__(self, hypothesis, detail=""):
        self.hypothesis = hypothesis
        super().__init__(f"hypothesis '{hypothesis}' violated: {detail}")


class RingCoverageError(HypothesisError):
    def __init__(self, ring, detail=""):
        self.ring = ring
        super().__init__("ring-coverage", f"ring {ring} has no covering rays {detail}".strip())


class DivergenceError(ArithmeticError):
    def __init__(self, history):
        self.history = list(history)
        super().__init__("Gauss-Newton misfit increased 3 consecutive times: "
                         + ", ".join(f"{m:.3e}" for m in self.history))


@dataclass
class ProbeReport:
    theorem: str
    passed: bool
    metrics: dict
    thresholds: dict
    hypotheses: dict = field(default_factory=dict)
    config_hashes: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# hypotheses


def check_hypotheses(metric: Metric, fan=None, weight=None, attenuation=None, n_beta=64,
                     tau_max=100.0, step=1e-2):
    """Re-check the hypotheses of the injectivity statements; raise on the first failure."""
    out = {}
    beta = np.linspace(0, 2 * np.pi, n_beta, endpoint=False)
    kappa = strict_convexity(metric, beta)
    out["strict-convexity"] = float(np.min(kappa))
    if not np.all(kappa > 0):
        b = beta[int(np.argmin(kappa))]
        raise HypothesisError("strict-convexity", f"second fundamental form {kappa.min():.3e} at beta={b:.4f}")
    if fan is not None:
        rep = nontrapping_scan(metric, fan, tau_max, step)
        out["non-trapping"] = rep.ok
        out["max-exit-time"] = rep.max_tau
        if not rep.ok:
            raise HypothesisError("non-trapping", f"{len(rep.trapped)} rays exceed tau_max={tau_max}")
    if weight is not None:
        ok = bool(getattr(weight, "analytic", False))
        out["analytic-weight"] = weight.kind
        if not ok:
            raise HypothesisError("analytic-weight", f"weight kind {weight.kind!r} is not analytic")
    if attenuation is not None:
        out["position-only"] = bool(attenuation.higgs)
        if not attenuation.higgs:
            raise HypothesisError("position-only", "attenuation depends on direction")
    return out


def oversampled_fan(metric, n_unknowns, factor=3.0, alpha_margin=0.05):
    """Fan with about ``factor * n_unknowns`` rays, twice as many angles as incidences.

    With ``n_unknowns`` the pixel count this gives ``factor`` rows per column for any ``N``.
    """
    rays = factor * n_unknowns
    n_beta = max(2, math.ceil(math.sqrt(2 * rays)))
    n_alpha = max(1, math.ceil(rays / n_beta))
    return influx_fan(metric, n_beta, n_alpha, alpha_margin)


def local_fan(metric, beta0, n_beta=24, n_alpha=12, beta_halfwidth=0.3, glancing_window=0.35,
              alpha_margin=0.02):
    """Rays entering within ``beta_halfwidth`` of ``beta0`` and within ``glancing_window`` of glancing."""
    betas = beta0 + np.linspace(-beta_halfwidth, beta_halfwidth, n_beta)
    mags = np.linspace(np.pi / 2 - glancing_window, np.pi / 2 - alpha_margin, n_alpha)
    alphas = np.concatenate([-mags[::-1], mags])
    return [InfluxPoint(float(b), float(a)) for b in betas for a in alphas]


def _coeffs(basis: PixelBasis, phantom, n):
    if isinstance(phantom, VectorSource) or callable(phantom):
        c = np.asarray(phantom(basis.centers), dtype=complex)
    else:
        c = np.asarray(phantom, dtype=complex)
    return c.reshape(basis.n_pixels, n)


def _rel(a, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


def _noisy(data, eta, rng):
    if not eta:
        return data
    noise = rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
    return data + eta * np.linalg.norm(data) * noise / np.linalg.norm(noise)


GLOBAL_THRESHOLDS = {"rel_error": 0.01, "sigma_min_rel": 1e-10}


def global_probe(metric: Metric, weight: MatrixWeight, phantom, basis: PixelBasis, fan=None,
                 thresholds=None, quad_step=1e-2, max_iters=5000, tol=1e-10, noise=0.0, seed=0,
                 op: ForwardOperator | None = None, threads=1):
    """Global injectivity surrogate: recover ``phantom`` from its own sinogram by CGLS.

    Passes when ``sigma_min > sigma_min_rel * sigma_max`` and the relative L2
    coefficient error is within ``rel_error``.
    """
    th = {**GLOBAL_THRESHOLDS, **(thresholds or {})}
    n = weight.n
    if fan is None:
        fan = oversampled_fan(metric, basis.n_pixels)
    hyp = check_hypotheses(metric, fan, weight=weight, step=quad_step)
    if op is None:
        op = assemble(weight, basis, fan, metric, quad_step, threads=threads)
    truth = _coeffs(basis, phantom, n)
    data = _noisy(op.matrix @ truth.ravel(), noise, np.random.default_rng(seed))
    smin, smax = sigma_extremes(op)
    sol = cgls(op, data, max_iters=max_iters, tol=tol)
    err = _rel(sol.x, truth.ravel())
    passed = smin > th["sigma_min_rel"] * smax and err <= th["rel_error"]
    metrics = {"sigma_min": smin, "sigma_max": smax,
               "condition": smax / smin if smin > 0 else math.inf, "rel_error": err,
               "max_residual": float(np.max(np.abs(op.matrix @ sol.x - data))),
               "cgls_iterations": sol.iterations, "cgls_converged": sol.converged,
               "n_rays": len(fan), "n_unknowns": op.shape[1], "noise": noise}
    hashes = {"operator": op.config_hash, "phantom": _phantom_hash(truth)}
    return ProbeReport("global-injectivity", bool(passed), metrics, th, hyp, hashes,
                       {"solution": sol.x})


def _phantom_hash(c):
    return _digest([c.real.tolist(), c.imag.tolist()])


# ---------------------------------------------------------------------------
# local data


LOCAL_THRESHOLDS = {"rel_error": 0.02, "sigma_min_rel": 1e-10}


def lens_pixels(basis: PixelBasis, beta0, depth, halfwidth=0.3):
    """Pixels with ``rho(center) < depth`` whose polar angle is within ``halfwidth`` of ``beta0``."""
    c = basis.centers
    rho = 1 - np.sum(c * c, axis=-1)
    ang = np.angle(np.exp(1j * (np.arctan2(c[:, 1], c[:, 0]) - beta0)))
    return np.flatnonzero((rho < depth) & (np.abs(ang) < halfwidth))


def lens_phantom(basis: PixelBasis, beta0, depth, n=1, halfwidth=0.3):
    """Smooth coefficients supported on the lens: a bump peaked mid-lens, tapered to its edges."""
    idx = lens_pixels(basis, beta0, depth, halfwidth)
    c = basis.centers[idx]
    rho = 1 - np.sum(c * c, axis=-1)
    ang = np.angle(np.exp(1j * (np.arctan2(c[:, 1], c[:, 0]) - beta0)))
    s = np.sin(np.pi * rho / depth) * np.cos(0.5 * np.pi * ang / halfwidth) ** 2
    out = np.zeros((basis.n_pixels, n), dtype=complex)
    for j in range(n):
        out[idx, j] = s * (1 + 0.5 * j)
    return out


def local_probe(metric: Metric, weight: MatrixWeight, beta0, phantom, basis: PixelBasis, fan=None,
                depth=0.15, halfwidth=0.3, thresholds=None, quad_step=5e-3, max_iters=5000,
                tol=1e-10, threads=1):
    """Local injectivity surrogate near the boundary point ``beta0``.

    Unknowns are the lens pixels together with the phantom's support.  A
    zero column (a pixel no local ray sees) makes the probe report the
    phantom non-identifiable; that is an outcome, not an error.
    """
    th = {**LOCAL_THRESHOLDS, **(thresholds or {})}
    n = weight.n
    if fan is None:
        fan = local_fan(metric, beta0)
    hyp = check_hypotheses(metric, fan, weight=weight, step=quad_step)
    kappa0 = float(strict_convexity(metric, beta0))
    hyp["convex-at-point"] = kappa0
    if kappa0 <= 0:
        raise HypothesisError("convex-at-point", f"second fundamental form {kappa0:.3e} at beta={beta0}")
    truth = _coeffs(basis, phantom, n)
    support = np.flatnonzero(np.any(np.abs(truth) > 0, axis=1))
    lens = lens_pixels(basis, beta0, depth, halfwidth)
    if len(lens) == 0:
        raise ValueError(f"no pixels of the {basis.m}x{basis.m} grid lie in the lens; refine the grid")
    active = np.union1d(lens, support)
    op = assemble(weight, basis, fan, metric, quad_step, threads=threads)
    cols = (active[:, None] * n + np.arange(n)).ravel()
    a = op.matrix[:, cols]
    norms = np.linalg.norm(a, axis=0)
    zero = norms <= 1e-12 * max(norms.max(), 1e-300)
    outside = np.setdiff1d(support, lens)
    metrics = {"n_rays": len(fan), "n_unknowns": len(cols), "lens_pixels": len(lens),
               "support_outside_lens": len(outside), "zero_columns": int(zero.sum())}
    if zero.any():
        metrics.update({"identifiable": False, "rel_error": math.inf, "sigma_min": 0.0})
        rep = ProbeReport("local-injectivity", False, metrics, th, hyp,
                          {"operator": op.config_hash},
                          {"verdict": "non-identifiable: phantom pixels unseen by the local fan",
                           "unseen_pixels": active[zero[::n]].tolist()})
        return rep
    data = a @ truth[active].ravel()
    smin, smax = sigma_extremes(a)
    sol = cgls(a, data, max_iters=max_iters, tol=tol)
    err = _rel(sol.x, truth[active].ravel())
    passed = smin > th["sigma_min_rel"] * smax and err <= th["rel_error"]
    metrics.update({"identifiable": bool(smin > th["sigma_min_rel"] * smax), "sigma_min": smin,
                    "sigma_max": smax, "rel_error": err, "cgls_iterations": sol.iterations,
                    "max_residual": float(np.max(np.abs(a @ sol.x - data)))})
    return ProbeReport("local-injectivity", bool(passed), metrics, th, hyp,
                       {"operator": op.config_hash}, {"verdict": "identifiable" if passed else "failed"})


# ---------------------------------------------------------------------------
# layer stripping


@dataclass
class StripResult:
    coeffs: np.ndarray
    ring_of_pixel: np.ndarray
    ring_errors: list
    ring_rays: list
    final_error: float | None
    convexity: list


def ring_index(basis: PixelBasis, n_rings):
    """Ring ``k`` (1 = outermost) holds pixels with centre radius in ``[1 - k/n, 1 - (k-1)/n)``."""
    r = basis.radii()
    return np.clip(np.floor((1 - r) * n_rings).astype(int) + 1, 1, n_rings)


def ray_depth_ring(op: ForwardOperator, n_rings):
    """Ring containing each ray's deepest chart point (``min |x|`` along the samples)."""
    rmin = np.array([np.min(np.hypot(p.x[:, 0], p.x[:, 1])) for p in op.paths])
    return np.clip(np.floor((1 - rmin) * n_rings).astype(int) + 1, 1, n_rings)


def layer_stripping(op: ForwardOperator, data, n_rings, metric: Metric | None = None, truth=None,
                    max_iters=5000, tol=1e-10, n_beta=64):
    """Outside-in reconstruction along the concentric-circle foliation.

    Ring ``k`` is solved from the rays whose deepest point lies in ring
    ``k``, with the reconstructed outer rings moved to the right-hand side.
    Those rays can graze tents of pixels centred just inside the ring; such
    pixels join the ring solve as auxiliary unknowns and are discarded
    afterwards (they are solved for properly in the next ring).  Each ring
    solve is a limited-angle problem, so it uses a dense least-squares
    solve.  With one ring the foliation is trivial and the solve is the
    global CGLS call, identical to ``global_probe``.
    """
    if isinstance(data, Sinogram):
        data = data.values
    data = np.asarray(data, dtype=complex).ravel()
    n, basis = op.n, op.basis
    rings = ring_index(basis, n_rings)
    convex = []
    if metric is not None:
        beta = np.linspace(0, 2 * np.pi, n_beta, endpoint=False)
        for k in range(1, n_rings):
            rk = 1 - k / n_rings
            kap = float(np.min(strict_convexity(metric, beta, radius=rk)))
            convex.append(kap)
            if kap <= 0:
                raise HypothesisError("ring-convexity", f"ring radius {rk:.3f} has curvature {kap:.3e}")
    truth = None if truth is None else np.asarray(truth, dtype=complex).ravel()
    expand = lambda idx, m: (idx[:, None] * m + np.arange(m)).ravel()
    if n_rings == 1:
        sol = cgls(op, data, max_iters=max_iters, tol=tol)
        err = None if truth is None else _rel(sol.x, truth)
        return StripResult(sol.x, rings, [err], [op.n_rays], err, convex)
    depth = ray_depth_ring(op, n_rings)
    touched = op.pixel_blocks_touched()
    x = np.zeros(op.shape[1], dtype=complex)
    ring_err, ring_rays = [], []
    for k in range(1, n_rings + 1):
        pix = np.flatnonzero(rings == k)
        rays = np.flatnonzero(depth == k)
        if len(pix) and len(rays) == 0:
            raise RingCoverageError(k)
        ring_rays.append(len(rays))
        if len(pix) == 0:
            ring_err.append(None)
            continue
        outer = np.flatnonzero(rings < k)
        unknown = np.union1d(pix, np.setdiff1d(np.flatnonzero(touched[rays].any(axis=0)), outer))
        rows, cols, ocols = expand(rays, n), expand(unknown, n), expand(outer, n)
        if len(rows) < len(cols):
            log.warning("ring %d: %d equations for %d unknowns; refine the fan", k, len(rows), len(cols))
        rhs = data[rows] - op.matrix[np.ix_(rows, ocols)] @ x[ocols]
        sol, *_ = np.linalg.lstsq(op.matrix[np.ix_(rows, cols)], rhs, rcond=None)
        own = np.repeat(rings[unknown] == k, n)
        x[cols[own]] = sol[own]
        if truth is None:
            ring_err.append(None)
        else:
            kc = expand(pix, n)
            ring_err.append(_rel(x[kc], truth[kc]) if np.linalg.norm(truth[kc]) > 0
                            else float(np.max(np.abs(x[kc]))))
    final = _rel(x, truth) if truth is not None else None
    return StripResult(x, rings, ring_err, ring_rays, final, convex)


# ---------------------------------------------------------------------------
# Higgs fields


def higgs_scalar_constant(scatter: Sinogram):
    """``N = 1``: per-ray closed form ``c = log C / tau`` for a constant Higgs field."""
    c = np.asarray(scatter.values).reshape(len(scatter.fan))
    tau = np.asarray(scatter.tau)
    keep = tau > 0
    vals = np.log(c[keep]) / tau[keep]
    return complex(np.mean(vals)), float(np.max(np.abs(vals - np.mean(vals))))


@dataclass
class HiggsResult:
    coeffs: np.ndarray
    attenuation: PixelAttenuation
    report: ProbeReport
    history: list


HIGGS_THRESHOLDS = {"rel_error": 0.01, "max_iterations": 15}


def _misfit(c_phi, att, paths):
    c_psi = np.array(scattering_batch(att, paths))
    return c_phi @ inv_checked(c_psi) - np.eye(c_phi.shape[-1])


def higgs_recover(metric: Metric, scatter: Sinogram, basis: PixelBasis, init=None, iters=15,
                  truth=None, active=None, step=None, thresholds=None, misfit_tol=1e-12, misfit_rtol=1e-7,
                  cgls_iters=3000, cgls_tol=1e-10, threads=1):
    """Gauss-Newton recovery of a position-only field from scattering data.

    At iterate ``Psi`` the misfit ``C_Phi C_Psi^{-1} - Id`` equals
    ``I_{E(Phi, Psi)}(Phi - Psi)``; freezing ``E(Phi, Psi) ~ E(Psi, Psi)``
    gives a linear weighted transform with weight ``W_E^{-1}`` for the
    update.  ``active`` restricts the unknown pixels (local-data variant).
    """
    th = {**HIGGS_THRESHOLDS, **(thresholds or {})}
    c_phi = np.asarray(scatter.values, dtype=complex)
    n = c_phi.shape[-1]
    fan = scatter.fan
    step = step or float(scatter.metadata.get("step", 1e-2))
    hyp = check_hypotheses(metric, fan, step=step)
    paths = trace_fan(metric, fan, step)
    P = basis.n_pixels
    psi = np.zeros((P, n, n), dtype=complex) if init is None else np.array(
        init.coeffs if isinstance(init, PixelAttenuation) else init, dtype=complex).reshape(P, n, n)
    active = np.arange(P) if active is None else np.asarray(active)
    cols = (active[:, None] * n * n + np.arange(n * n)).ravel()
    att = PixelAttenuation(basis, psi)
    hyp.update(check_hypotheses(metric, attenuation=att, n_beta=8))
    mis = _misfit(c_phi, att, paths)
    history = [float(np.linalg.norm(mis) / math.sqrt(len(fan)))]
    damping, rises, it = 1.0, 0, 0
    done = lambda: history[-1] <= max(misfit_tol, misfit_rtol * history[0])
    while not done() and it < iters:
        jac = assemble(TransportWeight(PseudoAttenuation(att, att), inverse=True), basis, fan, metric,
                       step, paths=paths, threads=threads)
        a = jac.matrix[:, cols]
        # inexact Newton: the linear solve only needs to beat the linearisation error
        forcing = max(cgls_tol, min(0.1, history[-1] / history[0]))
        sol = cgls(a, mis.reshape(-1), max_iters=cgls_iters, tol=forcing)
        flat = psi.reshape(P, n * n).ravel().copy()
        flat[cols] += damping * sol.x
        psi = flat.reshape(P, n, n)
        att = PixelAttenuation(basis, psi)
        mis = _misfit(c_phi, att, paths)
        it += 1
        history.append(float(np.linalg.norm(mis) / math.sqrt(len(fan))))
        log.info("gauss-newton %d: misfit %.3e", it, history[-1])
        if history[-1] > history[-2]:
            rises += 1
            damping = 0.7
            if rises >= 3:
                raise DivergenceError(history)
        else:
            rises = 0
        if np.linalg.norm(sol.x) <= 1e-13 * max(np.linalg.norm(flat), 1.0):
            break
    metrics = {"iterations": it, "misfit": history[-1], "misfit_history": history,
               "n_rays": len(fan), "n_unknowns": len(cols)}
    passed = it <= th["max_iterations"]
    if truth is not None:
        t = np.asarray(truth.coeffs if isinstance(truth, PixelAttenuation) else truth, dtype=complex)
        err = _rel(psi.ravel(), t.ravel())
        metrics["rel_error"] = err
        passed = passed and err <= th["rel_error"]
    else:
        passed = passed and done()
    rep = ProbeReport("higgs-uniqueness", bool(passed), metrics, th, hyp,
                      {"scatter": _digest([scatter.metadata.get("attenuation", ""), len(fan)]),
                       "basis": basis.digest()})
    return HiggsResult(psi, att, rep, history)
