import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rel_sup
from gaugewigner.fields import (EMConfiguration, free, uniform_B_landau, uniform_B_symmetric,
                                symmetric_to_landau_chi)
from gaugewigner.grid import BoundaryMassWarning, make_grid, shift_array
from gaugewigner.observe import momentum_integral, transform_identity_residuals
from gaugewigner.transforms import (DensityMatrix, NonHermitianError, PhaseSpaceFunction,
                                    Wavefunction, gauge_transform_rho, gaussian_wavefunction,
                                    inv_weyl, inv_ws, kinetic_shift, mix, psi_to_rho, superpose,
                                    symmetrize_edge, t_transform, weyl, ws)

#: separation window wide enough that the unpaired edge row carries < 1e-15 of the state
WIDE1 = make_grid(1, 64, 64, 8.0, 12.0)
WIDE2 = make_grid(2, 16, 16, 6.0, 12.0)


def _gauss(x, x0, p0, sigma, hbar=1.0):
    return (np.pi * sigma ** 2) ** -0.25 * np.exp(-(x - x0) ** 2 / (2 * sigma ** 2)
                                                  + 1j * p0 * (x - x0) / hbar)


def constant_A(dim, A0):
    A0 = list(A0)
    return EMConfiguration(dim=dim, A=lambda r, t: [a + 0 * r[0] for a in A0],
                           phi=lambda r, t: 0 * r[0], name="constant_A")


def pure_gauge_1d(c1=0.3, c2=0.1, c3=-0.02):
    """In one dimension every vector potential is a pure gauge."""
    return EMConfiguration(dim=1, A=lambda r, t: [c1 + c2 * r[0] + c3 * r[0] ** 2],
                           phi=lambda r, t: 0 * r[0], E_field=lambda r, t: [0 * r[0]],
                           name="pure_gauge")


# ---------------------------------------------------------------- psi_to_rho

def test_psi_to_rho_gaussian_pointwise(grid1):
    g = grid1
    psi = gaussian_wavefunction(g, 0.4, 0.7, 1.0)
    rho = psi_to_rho(psi)
    s, r = g.s[:, None], g.r[None, :]
    exact = _gauss(r + s / 2, 0.4, 0.7, 1.0) * np.conj(_gauss(r - s / 2, 0.4, 0.7, 1.0))
    inside = (np.abs(r + s / 2) < g.L_r - 1) & (np.abs(r - s / 2) < g.L_r - 1)
    assert np.max(np.abs(rho.data - exact)[inside]) < 1e-10


def test_psi_to_rho_phase_invariance_and_diagonal(grid1):
    psi = gaussian_wavefunction(grid1, -0.3, 1.1, 0.9, normalize=True)
    rho = psi_to_rho(psi)
    rho2 = psi_to_rho(Wavefunction(grid1, np.exp(0.83j) * psi.data))
    assert np.max(np.abs(rho.data - rho2.data)) < 1e-14
    assert np.max(np.abs(rho.diagonal() - np.abs(psi.data) ** 2)) < 1e-14
    assert rho.trace() == pytest.approx(1.0, abs=1e-8)
    assert rho.hermiticity_error() < 1e-10


def test_psi_to_rho_warns_on_boundary_mass():
    g = make_grid(1, 32, 32, 3.0, 4.0)
    with pytest.warns(BoundaryMassWarning):
        psi_to_rho(gaussian_wavefunction(g, 2.5, 0.0, 1.0))


@settings(max_examples=15, deadline=None)
@given(w=st.floats(0.05, 0.95), x0=st.floats(-1.0, 1.0))
def test_mixed_states_are_hermitian(w, x0):
    g = make_grid(1, 32, 32, 8.0, 8.0)
    r1 = psi_to_rho(gaussian_wavefunction(g, x0, 0.5, 1.0, normalize=True))
    r2 = psi_to_rho(gaussian_wavefunction(g, -x0, -0.3, 1.2, normalize=True))
    rho = mix([r1, r2], [w, 1 - w])
    assert rho.hermiticity_error() < 1e-10
    assert rho.trace() == pytest.approx(1.0, abs=1e-8)
    fw = weyl(rho)
    assert fw.imag_residue() < 1e-10
    assert fw.norm == pytest.approx(1.0, abs=1e-8)


# ---------------------------------------------------------------------- weyl

def test_weyl_ground_state_analytic(grid1):
    psi = gaussian_wavefunction(grid1, 0.0, 0.0, 1.0, normalize=True)
    fw = weyl(psi_to_rho(psi))
    exact = np.exp(-grid1.r[None, :] ** 2 - grid1.P[:, None] ** 2) / np.pi
    assert np.max(np.abs(fw.data - exact)) < 1e-8


def test_weyl_of_zero_is_zero(grid1):
    rho = DensityMatrix(grid1, np.zeros(grid1.shape, dtype=complex))
    assert np.all(weyl(rho).data == 0)


def test_weyl_cat_state_against_riemann_sum(grid1):
    g = grid1
    a = 1.5
    psi = superpose(g, [gaussian_wavefunction(g, a, 0, 0.7), gaussian_wavefunction(g, -a, 0, 0.7)],
                    [1, 1])
    fw = weyl(psi_to_rho(psi))
    # oracle: direct sum over s of the analytic wavefunction
    scale = psi.data[g.n_r // 2].real / (2 * _gauss(0.0, a, 0, 0.7).real)
    amp = lambda x: scale * (_gauss(x, a, 0, 0.7) + _gauss(x, -a, 0, 0.7))  # noqa: E731
    j0 = g.n_r // 2
    s, p = g.s[None, :], g.P[:, None]
    oracle = (np.exp(-1j * s * p) * amp(s / 2) * np.conj(amp(-s / 2))).sum(axis=1) * g.ds / (2 * np.pi)
    assert np.max(np.abs(fw.data[:, j0] - oracle)) < 1e-10
    # the fringe at the midpoint oscillates in p with wavevector (separation)/hbar = 2a
    spec = np.abs(np.fft.rfft(fw.data[:, j0].real))
    freq = np.fft.rfftfreq(g.n_s, d=g.dP) * 2 * np.pi
    peak = freq[1 + np.argmax(spec[1:])]
    assert abs(peak - 2 * a) <= 2 * np.pi / (g.n_s * g.dP)


def test_weyl_rejects_non_hermitian(grid1):
    data = np.zeros(grid1.shape, dtype=complex)
    data[20, 32] = 1j
    data[44, 32] = 1j
    with pytest.raises(NonHermitianError):
        weyl(DensityMatrix(grid1, data))


def test_inverse_weyl_round_trip_and_dual_widths(grid1):
    g = grid1
    rho = psi_to_rho(gaussian_wavefunction(g, 0.5, -0.6, 1.1, normalize=True))
    # exact on the Hermitian-edge subspace, and raw once the edge row is negligible
    assert rel_sup(inv_weyl(weyl(rho)).data, symmetrize_edge(g, rho.data)) < 1e-12
    wide = psi_to_rho(gaussian_wavefunction(WIDE1, 0.5, -0.6, 1.1, normalize=True))
    assert rel_sup(inv_weyl(weyl(wide)).data, wide.data) < 1e-12
    fw = weyl(rho)
    assert rel_sup(weyl(inv_weyl(fw)).data, fw.data) < 1e-12
    # f_w = exp(-x^2 - p^2)/pi  ->  rho = exp(-x^2 - s^2/4)/sqrt(pi); the s-window must
    # hold the wide separation profile, otherwise periodic aliasing sets the error floor
    g = WIDE1
    fw = PhaseSpaceFunction(g, np.exp(-g.r[None] ** 2 - g.P[:, None] ** 2) / np.pi, kind="f_w")
    exact = np.exp(-g.r[None] ** 2 - g.s[:, None] ** 2 / 4) / np.sqrt(np.pi)
    out = inv_weyl(fw).data
    assert np.max(np.abs(out - exact)) < 1e-10
    assert np.max(np.abs(out.imag)) < 1e-14


# ------------------------------------------------------------------------ ws

def test_ws_reduces_to_weyl_without_A(grid1):
    rho = psi_to_rho(gaussian_wavefunction(grid1, 0.3, 0.4, 1.0))
    assert np.max(np.abs(ws(rho, free(1)).data - weyl(rho).data)) == 0.0


@pytest.mark.parametrize("A0", [0.4, -1.3])
def test_ws_constant_A_is_momentum_shift(A0):
    g = WIDE1
    rho = psi_to_rho(gaussian_wavefunction(g, 0.3, 0.8, 1.0, normalize=True))
    cfg = constant_A(1, [A0])
    Fs = ws(rho, cfg)
    shifted = shift_array(weyl(rho).data.real, 0, g.dP, cfg.q * A0)
    assert np.max(np.abs(Fs.data.real - shifted)) < 1e-10
    # F_w coincides with F_s when A is constant
    Fw = kinetic_shift(weyl(rho), cfg)
    assert np.max(np.abs(Fw.data - Fs.data)) < 1e-10


def test_ws_inverse_round_trip():
    cfg = uniform_B_symmetric(1.0)
    rho = psi_to_rho(gaussian_wavefunction(WIDE2, [0.2, 0.1], [0.3, -0.2], 1.0))
    Fs = ws(rho, cfg)
    # the unpaired edge separations are projected onto their Hermitian part; elsewhere exact
    interior = ~WIDE2.s_nyquist_mask()
    back = inv_ws(Fs, cfg).data
    scale = np.max(np.abs(rho.data))
    assert np.max(np.abs(back - rho.data)[interior]) / scale < 1e-12
    assert rel_sup(ws(inv_ws(Fs, cfg), cfg).data, Fs.data) < 1e-12
    assert Fs.imag_residue() < 1e-10


def test_ws_gauge_invariance_symmetric_vs_landau(grid2):
    psi = gaussian_wavefunction(grid2, [0.6, -0.3], [0.4, 0.2], 1.0, normalize=True)
    rho = psi_to_rho(psi)
    sym = uniform_B_symmetric(1.0)
    chi = symmetric_to_landau_chi(1.0)
    F1 = ws(rho, sym)
    F2 = ws(gauge_transform_rho(rho, chi), uniform_B_landau(1.0))
    assert np.max(np.abs(F1.data - F2.data)) <= 1e-8


@settings(max_examples=8, deadline=None)
@given(c=st.lists(st.floats(-0.05, 0.05), min_size=4, max_size=4))
def test_ws_gauge_invariance_polynomial_chi(c):
    from gaugewigner.fields import gauge_transform
    g = make_grid(2, 16, 16, 6.0, 8.0)
    chi = lambda r, t: c[0] * r[0] ** 3 + c[1] * r[0] ** 2 * r[1] + c[2] * r[1] ** 3 + c[3] * r[0] * r[1]  # noqa: E731
    cfg = uniform_B_symmetric(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        rho = psi_to_rho(gaussian_wavefunction(g, [0.3, 0.2], [0.2, -0.1], 1.0, normalize=True))
    F1 = ws(rho, cfg)
    F2 = ws(gauge_transform_rho(rho, chi), gauge_transform(cfg, chi))
    assert np.max(np.abs(F1.data - F2.data)) <= 1e-8


def test_gauge_composite_reconstruction(grid2):
    sym, lan = uniform_B_symmetric(1.0), uniform_B_landau(1.0)
    rho = psi_to_rho(gaussian_wavefunction(grid2, [0.2, 0.1], [0.3, -0.2], 1.0, normalize=True))
    Fs = ws(rho, sym)
    rho_lan = inv_ws(Fs, lan)              # gauge-dependent matrix of the Landau gauge
    assert np.max(np.abs(ws(rho_lan, lan).data - Fs.data)) < 1e-8
    expected = gauge_transform_rho(rho, symmetric_to_landau_chi(1.0))
    interior = ~grid2.s_nyquist_mask()
    assert np.max(np.abs(rho_lan.data - expected.data)[interior]) < 1e-8


def test_marginal_is_density(grid2):
    psi = gaussian_wavefunction(grid2, [0.6, -0.3], [0.4, 0.2], 1.0, normalize=True)
    Fs = ws(psi_to_rho(psi), uniform_B_symmetric(1.0))
    assert np.max(np.abs(momentum_integral(Fs.data, grid2) - np.abs(psi.data) ** 2)) < 1e-8
    assert Fs.norm == pytest.approx(1.0, abs=1e-8)


# ------------------------------------------------------------- T and F_w

def test_t_transform_matches_direct_ws_and_is_linear():
    cfg = pure_gauge_1d()
    r1 = psi_to_rho(gaussian_wavefunction(WIDE1, 0.3, 0.5, 1.0, normalize=True))
    r2 = psi_to_rho(gaussian_wavefunction(WIDE1, -0.8, -0.5, 0.8, normalize=True))
    f1, f2 = weyl(r1), weyl(r2)
    assert rel_sup(t_transform(f1, cfg).data, ws(r1, cfg).data) < 1e-12
    lhs = t_transform(f1.with_data(0.3 * f1.data - 1.7 * f2.data), cfg).data
    rhs = 0.3 * ws(r1, cfg).data - 1.7 * ws(r2, cfg).data
    assert rel_sup(lhs, rhs) < 1e-12
    assert rel_sup(t_transform(f1, free(1)).data, f1.data) < 1e-12


def test_transform_identities_1d_pure_gauge(grid1):
    left = gaussian_wavefunction(grid1, 0.3, 0.5, 1.0, normalize=True)
    right = gaussian_wavefunction(grid1, -0.8, -0.5, 0.8, normalize=True)
    res = transform_identity_residuals(left, right, pure_gauge_1d())
    assert set(res) == {"linearity", "d_r_x", "d_P_x", "p_mult_x"}
    for key, val in res.items():
        assert val < 1e-6, key


def test_kinetic_shift_identity_without_A(grid1):
    fw = weyl(psi_to_rho(gaussian_wavefunction(grid1, 0.3, 0.5, 1.0)))
    assert np.max(np.abs(kinetic_shift(fw, free(1)).data - fw.data)) < 1e-14


def test_F_w_is_gauge_dependent_for_nonlinear_chi(small2):
    from gaugewigner.app.suites import cubic_chi
    from gaugewigner.observe import gauge_deviation
    psi = gaussian_wavefunction(small2, [0.6, -0.3], [0.4, 0.2], 1.0, normalize=True)
    dev = gauge_deviation(psi, uniform_B_landau(1.0), cubic_chi())
    assert dev["F_s"] < 1e-8
    assert dev["F_w"] > 1e-2
    assert dev["f_w"] > 1e-2


def test_F_w_equals_F_s_for_linear_potentials(grid2):
    psi = gaussian_wavefunction(grid2, [0.6, -0.3], [0.4, 0.2], 1.0, normalize=True)
    rho = psi_to_rho(psi)
    cfg = uniform_B_symmetric(1.0)
    Fw = kinetic_shift(weyl(rho), cfg)
    assert np.max(np.abs(Fw.data - ws(rho, cfg).data)) < 1e-6
