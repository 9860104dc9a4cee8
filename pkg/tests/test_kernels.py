import functools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rel_l2, rel_sup
from gaugewigner.evolve import fs_from_psi
from gaugewigner.fields import (EMConfiguration, free, harmonic_well, linear_B, quartic_well,
                                uniform_B_landau, uniform_B_symmetric, uniform_E)
from gaugewigner.grid import gradient_array, make_grid
from gaugewigner.kernels import (KernelTailWarning, RealWeakOperator, SincOperatorSpec,
                                 TruncationWarning, apply_sinc_operator, apply_weak_rhs,
                                 build_kernels, circular_convolve, direct_convolve,
                                 liouville_generator, sinc_series_coeff, strong_rhs,
                                 weak_generator)
from gaugewigner.observe import momentum_integral
from gaugewigner.transforms import PhaseSpaceFunction, gaussian_wavefunction

#: n=32 lemma grid: L_r=7 balances the psi window tail against its spectral resolution,
#: L_s=12 leaves no weight on the unpaired edge separations
LEMMA_GRID = make_grid(2, 32, 32, 7.0, 12.0)


def _state(grid, cfg, center=(0.3, -0.2), momentum=(0.5, 0.2), sigma=1.0):
    if grid.dim == 1:
        center, momentum = center[0], momentum[0]
    return fs_from_psi(gaussian_wavefunction(grid, center, momentum, sigma, normalize=True), cfg)


def _poly(c):
    """Cubic polynomial with coefficient vector ``c`` (10 monomials in x, y)."""
    def g(r, t):
        x, y = r
        mons = [1 + 0 * x, x, y, x * x, x * y, y * y, x ** 3, x * x * y, x * y * y, y ** 3]
        return sum(ci * m for ci, m in zip(c, mons))
    return g


# ---------------------------------------------------------------- sinc series

def test_series_coefficients_match_sinc_taylor():
    x = np.linspace(-0.6, 0.6, 13)
    for kind, exact in (("sinc", np.sinc(x / np.pi)),
                        ("sinc_prime", np.where(x == 0, 0.0,
                                                (x * np.cos(x) - np.sin(x)) / np.where(x == 0, 1, x) ** 2))):
        series = sum(sinc_series_coeff(kind, n) * x ** n for n in range(20))
        assert np.max(np.abs(series - exact)) < 1e-14
    with pytest.raises(ValueError):
        sinc_series_coeff("cosc", 2)
    with pytest.raises(ValueError):
        SincOperatorSpec("cosc", lambda r, t: r[0])


@pytest.mark.parametrize("kind", ["sinc", "sinc_prime"])
def test_quadrature_equals_series_for_cubic(kind):
    g = _poly([1.0, 0.3, -0.2, 0.0, 0.1, 0.0, 0.05, 0.0, -0.02, 0.0])
    F = _state(LEMMA_GRID, uniform_B_symmetric(0.25))
    spec = SincOperatorSpec(kind, g, N_series=3, order=16)
    quad = apply_sinc_operator(spec, F, route="quadrature")
    series = apply_sinc_operator(spec, F, route="series")
    assert rel_sup(quad, series) <= 1e-9


@functools.lru_cache(maxsize=1)
def _lemma_state():
    return _state(LEMMA_GRID, free(2))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=10, max_size=10), st.sampled_from(["sinc", "sinc_prime"]))
def test_quadrature_equals_series_property(c, kind):
    F = _lemma_state()
    spec = SincOperatorSpec(kind, _poly(c), N_series=3, order=8)
    quad = apply_sinc_operator(spec, F, route="quadrature")
    series = apply_sinc_operator(spec, F, route="series")
    scale = max(np.max(np.abs(series)), 1e-3 * np.max(np.abs(F.data)))
    assert np.max(np.abs(quad - series)) / scale < 1e-8


def test_sinc_of_constant_and_linear_g(grid2):
    F = _state(grid2, free(2))
    const = SincOperatorSpec("sinc", lambda r, t: 2.5 + 0 * r[0])
    assert rel_sup(apply_sinc_operator(const, F), 2.5 * F.data) < 1e-12
    zero = apply_sinc_operator(SincOperatorSpec("sinc_prime", lambda r, t: 2.5 + 0 * r[0]), F)
    assert np.max(np.abs(zero)) < 1e-14
    # sinc has no first-order term: a linear g passes through as a plain product
    lin = lambda r, t: 0.3 * r[0] - 0.7 * r[1]  # noqa: E731
    out = apply_sinc_operator(SincOperatorSpec("sinc", lin), F)
    assert rel_sup(out, lin(grid2.r_components(), 0) * F.data) < 1e-10
    # sinc'(x) = -x/3 + ...: a linear g gives -(hbar/6) grad g . grad_P F
    outp = apply_sinc_operator(SincOperatorSpec("sinc_prime", lin), F)
    expect = -(grid2.hbar / 6.0) * (0.3 * gradient_array(F.data, 0, grid2.dP)
                                   - 0.7 * gradient_array(F.data, 1, grid2.dP))
    assert rel_sup(outp, expect) < 1e-10


def test_series_warns_for_non_polynomial_field(small2):
    cfg = EMConfiguration(dim=2, A=lambda r, t: [-np.sin(r[1]), 0 * r[0]],
                          phi=lambda r, t: 0 * r[0], name="sine_B")
    F = _state(small2, cfg)
    with pytest.warns(TruncationWarning):
        strong_rhs(F, cfg, small2)


def test_sinc_needs_grid_for_raw_arrays(grid1):
    spec = SincOperatorSpec("sinc", lambda r, t: r[0])
    with pytest.raises(ValueError):
        apply_sinc_operator(spec, np.zeros(grid1.shape))
    F = PhaseSpaceFunction(grid1, np.zeros(grid1.shape), kind="F_s")
    with pytest.raises(ValueError):
        apply_sinc_operator(spec, F, route="taylor")
    with pytest.raises(ValueError):
        apply_sinc_operator(spec, F, route="quadrature", hbar_scale=0.5)


# ---------------------------------------------------------------- kernel set

@pytest.mark.parametrize("make", [lambda: (harmonic_well(1, 1.0), 1), lambda: (uniform_E(1, 0.5), 1),
                                  lambda: (quartic_well(1), 1), lambda: (uniform_B_symmetric(1.0), 2),
                                  lambda: (linear_B(1.0, 0.1), 2),
                                  lambda: (harmonic_well(2, 1.0, B=0.5), 2)])
def test_kernel_annihilation(make, grid1, small2):
    cfg, dim = make()
    grid = grid1 if dim == 1 else small2
    K = build_kernels(cfg, grid)
    rhs = apply_weak_rhs(_state(grid, cfg), K)
    assert np.max(np.abs(momentum_integral(rhs, grid))) <= 1e-9


def test_kernels_are_real_and_gradient_kernels_vanish_for_uniform_B(small2):
    K = build_kernels(uniform_B_symmetric(1.0), small2)
    assert K.um1 is None and K.u2 is None and K.u0 is None
    for k in K.kernels().values():
        assert np.max(np.abs(k.imag)) <= 1e-12 * np.max(np.abs(k))
    Kg = build_kernels(linear_B(1.0, 0.1), small2)
    assert Kg.um1 is not None and Kg.u2 is not None
    assert set(Kg.kernels()) == {"ell1_x", "ell1_y", "mw1_x", "mw1_y", "mw2"}
    assert build_kernels(free(1), make_grid(1, 32, 32, 8.0, 8.0)).kernels() == {}


def test_build_kernels_rejects_dimension_mismatch(grid1):
    with pytest.raises(ValueError):
        build_kernels(uniform_B_symmetric(1.0), grid1)


def test_rapidly_varying_field_warns_about_tails():
    g = make_grid(1, 32, 32, 8.0, 8.0)
    cfg = EMConfiguration(dim=1, A=lambda r, t: [0 * r[0]], phi=lambda r, t: np.cos(6.0 * r[0]),
                          name="fast")
    with pytest.warns(KernelTailWarning):
        build_kernels(cfg, g)


def test_multiplier_equals_fft_and_direct_convolution():
    g = make_grid(2, 8, 8, 5.0, 6.0)
    cfg = linear_B(1.0, 0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelTailWarning)
        K = build_kernels(cfg, g)
    F = _state(g, cfg)
    mult = apply_weak_rhs(F, K)
    conv = apply_weak_rhs(F, K, route="convolution")
    assert rel_sup(conv, mult) < 1e-12
    k = K.ell1[0]
    assert rel_sup(circular_convolve(g, k, F.data), direct_convolve(g, k, F.data)) < 1e-12


def test_real_fast_operator_matches_reference(small2):
    cfg = linear_B(1.0, 0.1)
    K = build_kernels(cfg, small2)
    F = np.real(_state(small2, cfg).data)
    op = RealWeakOperator(K)
    fast = op.from_fft_order(op(op.to_fft_order(F)))
    assert rel_sup(fast, apply_weak_rhs(F, K)) < 1e-12


def test_apply_weak_rhs_validates_inputs(small2, grid1):
    K = build_kernels(uniform_B_symmetric(1.0), small2)
    with pytest.raises(ValueError):
        apply_weak_rhs(np.zeros(grid1.shape), K)
    with pytest.raises(ValueError):
        apply_weak_rhs(np.zeros(small2.shape), K, route="fourier")
    with pytest.raises(ValueError):
        apply_weak_rhs(PhaseSpaceFunction(make_grid(2, 16, 16, 5.0, 8.0),
                                          np.zeros(small2.shape), kind="F_s"), K)


# ---------------------------------------------------------------- generators

@pytest.mark.parametrize("cfg", [uniform_B_symmetric(1.0), uniform_B_landau(1.0),
                                 uniform_B_symmetric(0.7, E=(0.2, -0.1))],
                         ids=lambda c: c.name)
def test_uniform_fields_collapse_to_liouville(cfg, grid2):
    F = _state(grid2, cfg)
    K = build_kernels(cfg, grid2)
    assert rel_l2(weak_generator(F, K, cfg.m), liouville_generator(F, cfg, grid2)) < 1e-12


def test_harmonic_1d_collapses_to_liouville(grid1):
    cfg = harmonic_well(1, 1.3)
    F = _state(grid1, cfg)
    K = build_kernels(cfg, grid1)
    assert rel_l2(weak_generator(F, K), liouville_generator(F, cfg, grid1)) < 1e-12


def test_quartic_well_departs_from_liouville(grid1):
    cfg = quartic_well(1, 1.0, 0.2)
    F = _state(grid1, cfg, center=(1.2,), momentum=(0.0,))
    K = build_kernels(cfg, grid1)
    weak, classical = weak_generator(F, K), liouville_generator(F, cfg, grid1)
    strong = strong_rhs(F, cfg, grid1, N_series=3)
    assert rel_l2(weak, classical) > 1e-4
    assert rel_l2(strong, weak) < 1e-8


@pytest.mark.parametrize("cfg", [uniform_B_symmetric(1.0), linear_B(1.0, 0.1)], ids=lambda c: c.name)
def test_strong_equals_weak_generator(cfg, grid2):
    F = _state(grid2, cfg)
    K = build_kernels(cfg, grid2, order=16)
    assert rel_l2(strong_rhs(F, cfg, grid2, N_series=3), weak_generator(F, K, cfg.m)) < 1e-6


def test_hbar_scaling_of_quantum_corrections(grid1):
    """The first quantum correction of the quartic well scales as hbar^2."""
    cfg = quartic_well(1, 1.0, 0.2)
    F = _state(grid1, cfg, center=(1.2,), momentum=(0.0,))
    classical = liouville_generator(F, cfg, grid1)
    d1 = strong_rhs(F, cfg, grid1, hbar_scale=0.2) - classical
    d2 = strong_rhs(F, cfg, grid1, hbar_scale=0.1) - classical
    ratio = np.linalg.norm(d1) / np.linalg.norm(d2)
    assert ratio == pytest.approx(4.0, rel=1e-6)
    assert math.isfinite(ratio)
