import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from geoxrt import ConformalBump, Euclidean, FbiResponse, PhaseSpacePoint, decay_fit, fbi, wave_packet, wf_probe
from geoxrt.microlocal import (DEFAULT_LAMBDAS, Dirac, DiskIndicator, Function1D, GaussianBump,
                               GeometryMismatch, HalfPlane, Interval, LineConstant,
                               QuadratureStepError, Separable, Zero, c_m, chord_sinogram,
                               interval_pairing, line_pairing, neighbourhood, preimages,
                               radon_wf_consistency)


def brute_pairing(fn, a, b, lam, z, zeta):
    """Adaptive quadrature of ``c_1 lam^(3/4) int f(w) e^{-i lam w zeta} e^{-lam (w-z)^2/2} dw``."""
    kern = lambda w: fn(w) * cmath.exp(-1j * lam * w * zeta - 0.5 * lam * (w - z) ** 2)
    lo, hi = max(a, z - 12 / math.sqrt(lam)), min(b, z + 12 / math.sqrt(lam))
    if lo >= hi:
        return 0j
    pts = np.linspace(lo, hi, 65)
    re = sum(quad(lambda w: kern(w).real, p, q, epsabs=1e-15, epsrel=1e-13)[0] for p, q in zip(pts[:-1], pts[1:]))
    im = sum(quad(lambda w: kern(w).imag, p, q, epsabs=1e-15, epsrel=1e-13)[0] for p, q in zip(pts[:-1], pts[1:]))
    return c_m(1) * lam ** 0.75 * (re + 1j * im)


def synthetic(mags, lams=DEFAULT_LAMBDAS):
    return FbiResponse(np.asarray(lams), np.asarray(mags, dtype=complex), PhaseSpacePoint(0.0, 1.0), c_m(1))


# wave packets


def test_normalisation_constant():
    assert c_m(1) == pytest.approx(2 ** -0.5 * math.pi ** -0.75)
    assert c_m(2) == pytest.approx(0.5 / math.pi ** 1.5)


def test_packet_peak_and_gaussian_profile():
    u = PhaseSpacePoint(0.3, 1.0)
    assert abs(wave_packet(u, 10.0, 0.3)) == pytest.approx(c_m(1) * 10 ** 0.75, rel=1e-14)
    ratio = abs(wave_packet(u, 10.0, 1.3)) / abs(wave_packet(u, 10.0, 0.3))
    assert ratio == pytest.approx(math.exp(-5), rel=1e-12)


def test_packet_two_dimensions():
    u = PhaseSpacePoint((0.1, -0.2), (1.0, 0.5))
    w = np.array([[0.1, -0.2], [0.4, 0.2]])
    v = wave_packet(u, 7.0, w)
    assert abs(v[0]) == pytest.approx(c_m(2) * 7 ** 1.5, rel=1e-14)
    assert abs(v[1]) / abs(v[0]) == pytest.approx(math.exp(-3.5 * 0.25), rel=1e-12)


def test_packet_phase_structure():
    # demodulating by e^{-i lam w.zeta} leaves a real positive Gaussian; 2 zeta doubles the phase
    lam, w = 5.0, np.linspace(-1, 1, 9)
    u, u2 = PhaseSpacePoint(0.2, 0.7), PhaseSpacePoint(0.2, 1.4)
    demod = wave_packet(u, lam, w) * np.exp(-1j * lam * w * 0.7)
    np.testing.assert_allclose(demod.imag, 0, atol=1e-15)
    assert np.all(demod.real > 0)
    p1 = wave_packet(u, lam, w) / np.abs(wave_packet(u, lam, w))
    p2 = wave_packet(u2, lam, w) / np.abs(wave_packet(u2, lam, w))
    np.testing.assert_allclose(p2, p1 ** 2, atol=1e-13)


def test_packet_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        wave_packet(PhaseSpacePoint(0, 1), 0.0, 0.0)


def test_phase_space_point_validation():
    with pytest.raises(ValueError):
        PhaseSpacePoint(0.0, 0.0)
    with pytest.raises(ValueError):
        PhaseSpacePoint((0.0, 1.0), (1.0,))
    assert PhaseSpacePoint((0, 0), (0, 1)).m == 2


# pairings against brute force


@pytest.mark.parametrize("a, b, lam, z, zeta", [
    (-1, 1, 20, 0.0, 1.0), (-1, 1, 50, 0.97, -0.4), (0.2, 0.5, 30, 0.35, 2.0),
    (0, math.inf, 40, 0.1, 0.3), (-math.inf, 0.3, 25, 0.0, -1.0), (-1, 1, 100, -1.0, 0.05)])
def test_interval_closed_form(a, b, lam, z, zeta):
    ref = brute_pairing(lambda w: 1.0, a, b, lam, z, zeta)
    assert interval_pairing(a, b, lam, z, zeta) == pytest.approx(ref, abs=1e-12)


def test_interval_closed_form_far_in_the_tail():
    # the Faddeeva form stays finite where exp(q^2) erf(...) would overflow; the value is
    # the endpoint contribution 2 Re[e^{-i lam zeta - lam/2} / (lam (1 + i zeta))] to leading order
    lam, zeta = 400.0, 3.0
    v = interval_pairing(-1, 1, lam, 0.0, zeta)
    lead = 2 * (cmath.exp(-1j * lam * zeta - lam / 2) / (lam * (1 + 1j * zeta))).real
    assert np.isfinite(v)
    assert v == pytest.approx(c_m(1) * lam ** 0.75 * lead, rel=2e-2)


def test_line_pairing_against_brute_force():
    ref = brute_pairing(lambda w: 1.0, -math.inf, math.inf, 30, 0.2, 0.5)
    assert line_pairing(30, 0.2, 0.5) == pytest.approx(ref, abs=1e-12)


def test_quadrature_pairing_matches_closed_form():
    f = Function1D(lambda w: np.ones_like(w), (-1.0, 1.0))
    for z, zeta in ((0.0, 1.0), (0.95, 0.3), (-1.02, -0.7)):
        u = PhaseSpacePoint(z, zeta)
        for lam in (20.0, 150.0, 400.0):
            assert f.pairing(u, lam) == pytest.approx(interval_pairing(-1, 1, lam, z, zeta), abs=1e-11)


def test_quadrature_pairing_square_root_edge():
    fn = lambda w: np.sqrt(np.maximum(0.25 - w * w, 0))
    f = Function1D(fn, (-0.5, 0.5))
    ref = brute_pairing(lambda w: math.sqrt(max(0.25 - w * w, 0)), -0.5, 0.5, 60, 0.45, 0.8)
    assert f.pairing(PhaseSpacePoint(0.45, 0.8), 60) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("m", [1, 2])
def test_gaussian_bump_quadrature_vs_closed_form(m):
    g = GaussianBump(center=(0.1, -0.2)[:m], width=0.3, amplitude=2.0)
    u = PhaseSpacePoint((0.3, 0.0)[:m], (0.25, -0.1)[:m])
    for lam in (20.0, 100.0, 400.0):
        assert g.pairing(u, lam) == pytest.approx(g.closed_form(u, lam), abs=1e-13)


def test_quadrature_step_limit():
    f = Function1D(lambda w: np.ones_like(w), (-1.0, 1.0))
    with pytest.raises(QuadratureStepError):
        f.pairing(PhaseSpacePoint(0.0, 1.0), 100.0, step=0.1)
    f.pairing(PhaseSpacePoint(0.0, 1.0), 100.0, step=0.0125)


def test_half_plane_matches_separable():
    hp = HalfPlane((1.0, 0.0), 0.2)
    sep = Separable([Interval(0.2, math.inf), LineConstant()])
    u = PhaseSpacePoint((0.3, -0.1), (0.8, 0.4))
    for lam in (20.0, 200.0):
        assert hp.pairing(u, lam) == pytest.approx(sep.pairing(u, lam), abs=1e-14)


def test_rotated_half_plane():
    # rotating the half plane and the probe together leaves the pairing unchanged
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    u = PhaseSpacePoint((0.3, -0.1), (0.8, 0.4))
    ur = PhaseSpacePoint(tuple(R @ u.z), tuple(R @ u.zeta))
    a = HalfPlane((1.0, 0.0), 0.2).pairing(u, 80.0)
    b = HalfPlane(tuple(R @ [1.0, 0.0]), 0.2).pairing(ur, 80.0)
    assert b == pytest.approx(a, abs=1e-14)


def test_disk_pairing_far_from_support_is_tiny():
    d = DiskIndicator((0.0, 0.0), 0.3)
    assert abs(d.pairing(PhaseSpacePoint((1.5, 0.0), (1.0, 0.0)), 200.0)) < 1e-60


@pytest.mark.slow
def test_disk_pairing_against_nested_quadrature():
    d = DiskIndicator((0.1, 0.0), 0.4)
    lam, z, zeta = 20.0, (0.45, 0.1), (0.6, -0.3)

    def row(y):
        h = math.sqrt(max(0.16 - y * y, 0.0))
        return brute_pairing(lambda w: 1.0, 0.1 - h, 0.1 + h, lam, z[0], zeta[0]) / (c_m(1) * lam ** 0.75)

    ref = c_m(1) * lam ** 0.75 * brute_pairing(row, -0.4, 0.4, lam, z[1], zeta[1])
    assert d.pairing(PhaseSpacePoint(z, zeta), lam) == pytest.approx(ref, abs=1e-8)


# FBI responses


def test_dirac_closed_form_scaling():
    d = Dirac((0.0,))
    u = PhaseSpacePoint(0.5, 1.0)
    r = fbi(d, u)
    np.testing.assert_allclose(r.magnitudes, c_m(1) * r.lambdas ** 0.75 * np.exp(-r.lambdas * 0.125),
                               rtol=1e-10)
    d2 = Dirac((0.0, 0.0))
    r2 = fbi(d2, PhaseSpacePoint((0.3, 0.4), (1.0, 0.0)))
    np.testing.assert_allclose(r2.magnitudes, c_m(2) * r2.lambdas ** 1.5 * np.exp(-r2.lambdas * 0.125),
                               rtol=1e-10)


@pytest.mark.parametrize("z", [0.25, 0.5])
def test_dirac_decay_exponent(z):
    fit = decay_fit(fbi(Dirac((0.0,)), PhaseSpacePoint(z, 1.0)))
    assert fit.epsilon == pytest.approx(z * z / 2, abs=1e-3)
    assert fit.r2 >= 0.99


def test_dirac_at_base_point_does_not_decay():
    for zeta in (1.0, -3.0, 0.1):
        fit = decay_fit(fbi(Dirac((0.0,)), PhaseSpacePoint(0.0, zeta)))
        assert abs(fit.epsilon) < 1e-10


def test_interval_interior_decays():
    fit = decay_fit(fbi(Interval(-1, 1), PhaseSpacePoint(0.0, 1.0)))
    assert fit.epsilon > 0.1


@given(st.floats(-1, 1), st.floats(-2, 2), st.floats(0.2, 2.0))
@settings(max_examples=25, deadline=None)
def test_translation_equivariance(shift, z, zeta):
    u, us = PhaseSpacePoint(z, zeta), PhaseSpacePoint(z + shift, zeta)
    for f, g in ((Interval(-0.5, 0.7), Interval(-0.5 + shift, 0.7 + shift)),
                 (Dirac((0.1,)), Dirac((0.1 + shift,)))):
        a, b = fbi(f, u).magnitudes, fbi(g, us).magnitudes
        np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-290)


def test_translation_equivariance_quadrature():
    u, us = PhaseSpacePoint(0.2, 0.3), PhaseSpacePoint(0.5, 0.3)
    a = fbi(GaussianBump((0.0,), 0.3), u).magnitudes
    b = fbi(GaussianBump((0.3,), 0.3), us).magnitudes
    np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-14)


def test_fbi_validation():
    with pytest.raises(ValueError):
        fbi(Dirac(), PhaseSpacePoint(0, 1), [1.0, 0.5])
    with pytest.raises(ValueError):
        fbi(Dirac(), PhaseSpacePoint(0, 1), [0.0, 1.0])
    with pytest.raises(ValueError):
        fbi(Dirac((0.0, 0.0)), PhaseSpacePoint(0, 1))


def test_response_csv():
    r = fbi(Dirac(), PhaseSpacePoint(0.5, 1.0), [20.0, 40.0])
    lines = r.to_csv().splitlines()
    assert lines[0] == "lambda,magnitude" and len(lines) == 3
    assert float(lines[1].split(",")[1]) == pytest.approx(r.magnitudes[0], rel=1e-16)


# decay fits


def test_fit_exact_exponential():
    lams = DEFAULT_LAMBDAS
    fit = decay_fit(synthetic(np.exp(-0.1 * lams)))
    assert fit.epsilon == pytest.approx(0.1, rel=1e-6)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


@given(st.floats(1e-3, 1.0), st.floats(-3, 3), st.floats(-5, 5))
def test_fit_exponential_times_power(eps, p, c):
    lams = DEFAULT_LAMBDAS
    fit = decay_fit(synthetic(np.exp(c - eps * lams) * lams ** p))
    assert fit.epsilon == pytest.approx(eps, rel=1e-6)
    assert fit.power == pytest.approx(p, abs=1e-5)


def test_fit_polynomial_decay_is_not_exponential():
    lams = DEFAULT_LAMBDAS
    fit = decay_fit(synthetic(lams ** -2.0))
    assert abs(fit.epsilon) < 1e-3
    longer = np.geomspace(20, 4000, 16)
    assert abs(decay_fit(synthetic(longer ** -2.0, longer)).epsilon) <= abs(fit.epsilon) + 1e-12


def test_fit_constant():
    assert decay_fit(synthetic(np.full(16, 3.0))).epsilon == pytest.approx(0.0, abs=1e-12)


def test_fit_zero_and_floor():
    fit = decay_fit(synthetic(np.zeros(16)))
    assert fit.epsilon == math.inf and fit.floored
    mags = np.exp(-0.1 * DEFAULT_LAMBDAS)
    mags[-1] = 0.0
    assert decay_fit(synthetic(mags)).floored


def test_fit_grid_requirements():
    with pytest.raises(ValueError):
        decay_fit(synthetic(np.ones(7), np.geomspace(20, 400, 7)))
    with pytest.raises(ValueError):
        decay_fit(synthetic(np.ones(16), np.linspace(20, 100, 16)))


# wavefront probes


def test_neighbourhood_shape():
    pts = neighbourhood(PhaseSpacePoint(0.5, 1.0))
    assert len(pts) == 25
    assert min(p.z[0] for p in pts) == pytest.approx(0.45)
    pts2 = neighbourhood(PhaseSpacePoint((0.0, 0.0), (1.0, 0.0)))
    assert len(pts2) == 25
    np.testing.assert_allclose([math.hypot(*p.zeta) for p in pts2], 1.0)


def test_dirac_probes():
    reg = wf_probe(Dirac((0.0,)), PhaseSpacePoint(0.5, 1.0))
    assert reg.regular
    assert reg.eps_min == pytest.approx(0.45 ** 2 / 2, abs=1e-3)
    sing = wf_probe(Dirac((0.0,)), PhaseSpacePoint(0.0, 1.0))
    assert not sing.regular
    json.dumps(sing.to_dict())


@pytest.mark.parametrize("zeta", [1.0, -1.0])
def test_interval_probes(zeta):
    f = Interval(-1, 1)
    assert wf_probe(f, PhaseSpacePoint(0.0, zeta)).regular
    assert not wf_probe(f, PhaseSpacePoint(1.0, zeta)).regular
    assert not wf_probe(f, PhaseSpacePoint(-1.0, zeta)).regular


@pytest.mark.parametrize("f, u", [
    (Dirac((0.0,)), PhaseSpacePoint(0.5, 1.0)), (Dirac((0.0,)), PhaseSpacePoint(0.0, 1.0)),
    (Interval(-1, 1), PhaseSpacePoint(1.0, 1.0)), (Interval(-1, 1), PhaseSpacePoint(0.3, -1.0))])
def test_conicity(f, u):
    u2 = PhaseSpacePoint(u.z, tuple(2 * np.asarray(u.zeta)))
    assert wf_probe(f, u).classification == wf_probe(f, u2).classification


def test_zero_is_regular_everywhere():
    res = wf_probe(Zero(), PhaseSpacePoint(0.0, 1.0))
    assert res.regular and res.eps_min == math.inf
    assert res.to_dict()["eps_min"] == "inf"


def test_smooth_bump_is_regular():
    assert wf_probe(GaussianBump((0.0,), 0.3), PhaseSpacePoint(0.1, 0.3)).regular


def test_half_plane_probes():
    hp = HalfPlane((1.0, 0.0), 0.0)
    assert not wf_probe(hp, PhaseSpacePoint((0.0, 0.0), (1.0, 0.0))).regular
    assert wf_probe(hp, PhaseSpacePoint((0.0, 0.0), (0.0, 1.0))).regular
    assert wf_probe(hp, PhaseSpacePoint((0.5, 0.0), (1.0, 0.0))).regular


@pytest.mark.slow
def test_disk_indicator_probes():
    d = DiskIndicator((0.0, 0.0), 0.5)
    assert not wf_probe(d, PhaseSpacePoint((0.5, 0.0), (1.0, 0.0))).regular
    assert wf_probe(d, PhaseSpacePoint((0.0, 0.0), (1.0, 0.0))).regular


# the Radon instance


def test_chord_sinogram_against_traced_rays():
    from geoxrt import IdentityWeight, influx_fan, trace_fan
    from geoxrt.transforms import CallableSource, weighted_batch
    m = Euclidean()
    fan = influx_fan(m, 3, 41, 0.05)
    paths = trace_fan(m, fan, 1e-3)
    src = CallableSource(lambda x: (np.sum(x * x, -1) < 0.25).astype(float))
    num = weighted_batch(IdentityWeight(1), src, paths)[:, 0].real
    np.testing.assert_allclose(num, chord_sinogram([z.alpha for z in fan], 0.5), atol=1e-2)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0, 2 * math.pi))
@settings(max_examples=30)
def test_preimages_are_conormal_lines_through_x(x1, x2, th):
    x = np.array([x1, x2])
    if np.linalg.norm(x) >= 0.95:
        return
    eta = np.array([math.cos(th), math.sin(th)])
    pre = preimages(x, eta)
    assert len(pre) == 2
    for beta, alpha, t, zeta in pre:
        e = np.array([math.cos(beta), math.sin(beta)])
        d = -np.array([math.cos(beta + alpha), math.sin(beta + alpha)])
        np.testing.assert_allclose(e + t * d, x, atol=1e-10)
        assert abs(d @ eta) < 1e-10
        assert abs(alpha) < math.pi / 2
        assert np.linalg.norm(zeta) > 0


@pytest.fixture(scope="module")
def radon_report():
    return radon_wf_consistency()


def test_radon_consistency(radon_report):
    rep = radon_report
    assert rep["passed"] and rep["violations"] == 0
    assert rep["sinogram_max_deviation"] < 1e-2
    json.dumps(rep)


def test_radon_boundary_normal_preimages_singular(radon_report):
    for e in radon_report["entries"]:
        classes = {p["classification"] for p in e["preimages"]}
        if e["label"] == "boundary-normal":
            assert not e["phantom_regular"]
            assert "singular" in classes
        if e["label"] == "interior":
            assert e["phantom_regular"] and classes == {"regular"}


def test_radon_zero_phantom():
    probes = [(np.array([0.5, 0.0]), np.array([1.0, 0.0]), "boundary-normal")]
    rep = radon_wf_consistency(zero_phantom=True, probes=probes)
    assert rep["passed"]
    assert all(p["classification"] == "regular" for p in rep["entries"][0]["preimages"])


def test_radon_geometry_mismatch():
    with pytest.raises(GeometryMismatch):
        radon_wf_consistency(metric=ConformalBump(0.05))
    with pytest.raises(GeometryMismatch):
        radon_wf_consistency(check_tol=1e-9, probes=[])
