import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaugewigner.grid import (BoundaryMassWarning, ComplexField, LayoutError, boundary_mass,
                              check_boundary, dft_array, dft_s_to_P, gradient_array,
                              idft_P_to_s, idft_array, make_grid, shift_array,
                              spectral_gradient, wavenumbers)


def test_axes_and_spacings(grid1):
    g = grid1
    assert g.dr == pytest.approx(0.25)
    assert g.ds == pytest.approx(0.25)
    assert g.dP == pytest.approx(2 * np.pi * g.hbar / (g.n_s * g.ds))
    assert g.s[0] == -g.L_s and g.s[g.n_s // 2] == 0.0
    assert g.P[g.n_s // 2] == 0.0
    assert g.shape == (64, 64)


def test_invalid_grids_rejected():
    with pytest.raises(ValueError):
        make_grid(1, 64, 63)
    with pytest.raises(ValueError):
        make_grid(3, 16, 16)
    with pytest.raises(ValueError):
        make_grid(1, 64, 64, L_r=-1.0)
    with pytest.raises(ValueError):
        make_grid(1, 64, 64, hbar=float("nan"))


def test_dft_of_gaussian_matches_continuous_transform():
    # int exp(-i s P / hbar) exp(-s^2/2) ds / sqrt(2 pi hbar) = hbar^-1/2 exp(-P^2 / 2 hbar^2)
    for hbar in (1.0, 0.5):
        g = make_grid(1, 16, 128, 4.0, 12.0, hbar)
        f = np.exp(-g.s[:, None] ** 2 / 2) * np.ones(g.n_r)
        F = dft_array(g, f)
        exact = np.exp(-g.P[:, None] ** 2 / (2 * hbar ** 2)) / np.sqrt(hbar)
        assert np.max(np.abs(F - exact)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), dim=st.sampled_from([1, 2]))
def test_dft_round_trip(seed, dim):
    g = make_grid(dim, 8, 8, 3.0, 4.0)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    assert np.max(np.abs(idft_array(g, dft_array(g, f)) - f)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_dft_is_unitary(seed):
    g = make_grid(1, 8, 16, 3.0, 4.0)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    F = dft_array(g, f)
    # Parseval: sum |f|^2 ds = sum |F|^2 dP
    assert np.sum(np.abs(f) ** 2) * g.ds == pytest.approx(np.sum(np.abs(F) ** 2) * g.dP, rel=1e-12)


def test_complex_field_layout_tags(grid1):
    f = ComplexField(grid1, np.zeros(grid1.shape))
    F = dft_s_to_P(f)
    assert F.layout == ("P", "r")
    assert idft_P_to_s(F).layout == ("s", "r")
    with pytest.raises(LayoutError):
        dft_s_to_P(F)
    with pytest.raises(LayoutError):
        ComplexField(grid1, np.zeros((3, 3)))
    with pytest.raises(LayoutError):
        spectral_gradient(f, 0)


def test_gradient_of_trig_is_exact():
    n, L = 32, np.pi
    x = -L + 2 * L / n * np.arange(n)
    for k in (1, 3, 7):
        d = gradient_array(np.sin(k * x), 0, 2 * L / n)
        assert np.max(np.abs(d - k * np.cos(k * x))) < 1e-12


def test_gradient_of_gaussian_spectral_accuracy(grid1):
    x = grid1.r
    d = gradient_array(np.exp(-x ** 2), 0, grid1.dr)
    assert np.max(np.abs(d + 2 * x * np.exp(-x ** 2))) < 1e-10


def test_nyquist_is_dropped():
    k = wavenumbers(8, 1.0)
    assert k[4] == 0.0
    assert wavenumbers(8, 1.0, zero_nyquist=False)[4] != 0.0


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-3.0, 3.0))
def test_shift_is_band_limited_translation(shift):
    g = make_grid(1, 64, 8, 8.0, 4.0)
    x = g.r
    out = shift_array(np.exp(-x ** 2), 0, g.dr, shift)
    assert np.max(np.abs(out - np.exp(-(x + shift) ** 2))) < 1e-9


def test_boundary_mass_and_warning():
    v = np.zeros((16, 16))
    v[8, 8] = 1.0
    assert boundary_mass(v, (0, 1)) == 0.0
    v[0, 8] = 1.0
    assert boundary_mass(v, (0, 1)) == pytest.approx(0.5)
    with pytest.warns(BoundaryMassWarning):
        check_boundary(v, (0, 1))
