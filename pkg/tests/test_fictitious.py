import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from qavg.fictitious import channel_kernel, char_quad, gquad, rho_quad
from qavg.qpe import QpeSetting, qpe_kernel, shifted_settings


def gquad_quadrature(z, e0, w):
    a = w / 2
    re = quad(lambda u: (rho_quad(u, w) / (z - e0 - u)).real, -a, a, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    im = quad(lambda u: (rho_quad(u, w) / (z - e0 - u)).imag, -a, a, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return re + 1j * im


@given(st.floats(0.01, 3.0))
def test_density_normalized(w):
    a = w / 2
    assert quad(lambda u: rho_quad(u, w), -a, a, epsabs=1e-14)[0] == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-4, 4), st.floats(0.05, 3), st.floats(-2, 2), st.floats(0.01, 2.0))
def test_gquad_matches_quadrature(x, y, e0, w):
    z = x + 1j * y
    assert abs(gquad(z, e0, w) - gquad_quadrature(z, e0, w)) < 1e-8


def test_gquad_far_field_series():
    # both branches agree where they meet and decay as 1/z far away
    z = np.array([5.0 * 0.4 + 1e-3j, 5.0 * 0.4 - 1e-9 + 1e-3j])
    g = gquad(z, 0.0, 0.4)
    assert abs(g[0] - g[1]) < 1e-8
    assert abs(gquad(1e3j, 0.3, 0.5) * (1e3j - 0.3) - 1) < 1e-7


def test_gquad_zero_width_is_pole():
    z = np.array([0.3 + 0.1j, 2j])
    assert np.allclose(gquad(z, 0.7, 0.0), 1 / (z - 0.7))


def test_char_quad_limits():
    assert char_quad(0.0, 1.0) == pytest.approx(1.0)
    q = np.linspace(-20, 20, 11)
    ref = [quad(lambda u: rho_quad(u, 0.8) * np.cos(qq * u), -0.4, 0.4, epsabs=1e-13)[0] for qq in q]
    assert np.allclose(char_quad(q, 0.8), ref, atol=1e-12)
    assert np.allclose(char_quad(np.array([1e-4, 2e-2]), 1.0), [1 - 2.5e-9 / 10, 1 - 1e-4 / 10 + 1e-8 / 280],
                       atol=1e-14)


@given(st.floats(-1, 20), st.floats(0.0, 1.5))
def test_channel_kernel_is_averaged_fejer(e0, w):
    s = shifted_settings()[1]
    k = channel_kernel(e0, w, s)
    if w == 0:
        ref = qpe_kernel(e0, s)
    else:
        ref = np.array([quad(lambda u: rho_quad(u, w) * qpe_kernel(e0 + u, s)[j], -w / 2, w / 2,
                             epsabs=1e-13, limit=200)[0] for j in range(s.n_val)])
    assert np.abs(k - ref).max() < 1e-9
    assert k.sum() == pytest.approx(1.0, abs=1e-12)


def test_channel_kernel_shape():
    s = QpeSetting(6.0, -0.5, 4)
    assert channel_kernel(np.zeros((3, 2)), 0.1, s).shape == (3, 2, 16)


def test_invalid_width():
    with pytest.raises(ValueError):
        rho_quad(0.0, 0.0)
