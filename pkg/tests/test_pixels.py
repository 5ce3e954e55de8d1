import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geoxrt import PixelBasis


@pytest.mark.parametrize("m", [8, 16, 33])
def test_support_inside_disk(m):
    b = PixelBasis(m)
    h = b.spacing
    corners = np.hypot(np.abs(b.centers[:, 0]) + h, np.abs(b.centers[:, 1]) + h)
    assert np.all(corners < 1)
    assert np.all(b.radii() < 1 - b.delta_support)


def test_delta_default_and_override():
    assert PixelBasis(32).delta_support == pytest.approx(2 / 32)
    assert PixelBasis(32, 0.0).n_pixels >= PixelBasis(32).n_pixels


def test_empty_mask_rejected():
    with pytest.raises(ValueError):
        PixelBasis(2)
    with pytest.raises(ValueError):
        PixelBasis(1)


def test_interpolation_reproduces_nodes():
    b = PixelBasis(12)
    c = np.arange(b.n_pixels, dtype=float)
    np.testing.assert_allclose(b.interpolate(c, b.centers), c, atol=1e-12)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_interpolation_exact_for_affine(x1, x2):
    # bilinear tents reproduce affine functions away from the masked rim
    b = PixelBasis(16)
    fn = lambda x: 0.3 + 2 * x[..., 0] - x[..., 1]
    assert b.interpolate(b.project(fn), np.array([x1, x2])) == pytest.approx(fn(np.array([x1, x2])), abs=1e-12)


def test_vanishes_outside_support():
    b = PixelBasis(16)
    x = np.array([[0.999, 0.0], [0.0, -0.99], [0.7, 0.7], [2.0, 2.0]])
    assert np.all(b.interpolate(np.ones(b.n_pixels), x) == 0)


def test_stencil_partition_of_unity_inside():
    b = PixelBasis(20)
    x = np.random.default_rng(0).uniform(-0.5, 0.5, (50, 2))
    _, w = b.stencil(x)
    np.testing.assert_allclose(w.sum(axis=-1), 1.0, atol=1e-14)


def test_matrix_valued_coefficients():
    b = PixelBasis(8)
    c = np.random.default_rng(1).standard_normal((b.n_pixels, 2, 2))
    out = b.interpolate(c, b.centers[:3])
    np.testing.assert_allclose(out, c[:3], atol=1e-12)


def test_digest_depends_on_config():
    assert PixelBasis(8).digest() != PixelBasis(9).digest()
    assert PixelBasis(8).digest() == PixelBasis(8).digest()
