import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaugewigner.fields import (CATALOG, build_scenario, consistency_error,
                                electric_from_potentials, gauge_transform, gauss_legendre,
                                harmonic_well, line_avg_A, linear_B, magnetic_from_potentials,
                                moment_avg, partial_derivative, quartic_well,
                                symmetric_to_landau_chi, uniform_B_landau, uniform_B_symmetric,
                                uniform_E)


def _pts(dim, n=5, L=2.0):
    pts = np.linspace(-L, L, n)
    return list(np.meshgrid(*([pts] * dim), indexing="ij"))


def test_gauss_legendre_integrates_polynomials():
    x, w = gauss_legendre(8)
    for k in range(16):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.dot(w, x ** k) == pytest.approx(exact, abs=1e-14)


def test_partial_derivative_of_polynomial():
    g = lambda r, t: r[0] ** 3 * r[1] + 2 * r[1] ** 2  # noqa: E731
    r = _pts(2)
    assert np.allclose(partial_derivative(g, r, 0.0, (1, 0)), 3 * r[0] ** 2 * r[1], atol=1e-10)
    assert np.allclose(partial_derivative(g, r, 0.0, (1, 1)), 3 * r[0] ** 2, atol=1e-9)
    assert np.allclose(partial_derivative(g, r, 0.0, (0, 2)), 4.0, atol=1e-9)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_fields_are_consistent(name):
    dim = 2 if name in ("uniform_B_symmetric", "uniform_B_landau", "linear_B") else 1
    params = {"dim": dim} if name in ("free", "uniform_E", "harmonic_well", "quartic_well") else {}
    cfg = build_scenario(name, **params)
    assert cfg.dim == dim
    assert consistency_error(cfg, _pts(dim)) < 1e-8


def test_unknown_scenario_rejected():
    with pytest.raises(KeyError):
        build_scenario("no_such_field")


def test_uniform_B_gauges_share_fields():
    r = _pts(2)
    sym, lan = uniform_B_symmetric(1.3), uniform_B_landau(1.3)
    for cfg in (sym, lan):
        assert np.allclose(magnetic_from_potentials(cfg, r), 1.3, atol=1e-9)
    chi = symmetric_to_landau_chi(1.3)
    moved = gauge_transform(sym, chi)
    for a, b in zip(moved.vector_potential(r), lan.vector_potential(r)):
        assert np.allclose(a, b, atol=1e-9)


def test_linear_B_gauges_agree():
    r = _pts(2)
    for gauge in ("landau", "transverse"):
        cfg = linear_B(1.0, 0.2, gauge=gauge)
        assert np.allclose(magnetic_from_potentials(cfg, r), 1.0 + 0.2 * r[0], atol=1e-8)


def test_wells_and_uniform_E():
    r = _pts(1)
    cfg = harmonic_well(1, omega=2.0)
    assert np.allclose(cfg.E(r)[0], -4.0 * r[0])
    cfg = quartic_well(1, a=1.0, b=0.1)
    assert np.allclose(electric_from_potentials(cfg, r)[0], cfg.E(r)[0], atol=1e-8)
    cfg = uniform_E(1, E=0.5)
    assert np.allclose(cfg.E(r)[0], 0.5)


@settings(max_examples=25, deadline=None)
@given(c=st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_gauge_transform_preserves_E_and_B(c):
    chi = lambda r, t: c[0] * r[0] ** 3 + c[1] * r[0] * r[1] + c[2] * r[1] ** 2 * r[0] + c[3] * t * r[1]  # noqa: E731
    base = linear_B(1.0, 0.1)
    moved = gauge_transform(base, chi)
    r = _pts(2)
    assert consistency_error(moved, r, 0.3) < 1e-6
    assert np.allclose(magnetic_from_potentials(moved, r, 0.3),
                       magnetic_from_potentials(base, r, 0.3), atol=1e-6)


def test_line_average_of_linear_A_is_midpoint_value():
    cfg = uniform_B_symmetric(1.0)
    r, s = _pts(2), [0.7, -0.3]
    avg = line_avg_A(cfg, r, s)
    A = cfg.vector_potential(r)
    for a, b in zip(avg, A):
        assert np.allclose(a, b, atol=1e-14)


def test_moment_avg_of_cubic_is_exact():
    g = lambda r, t: r[0] ** 3  # noqa: E731
    r, s = [np.array(0.4)], [np.array(1.2)]
    # int_{-1}^{1} (r + s tau/2)^3 dtau and int (r + s tau/2)^3 tau dtau
    m0 = 2 * r[0] ** 3 + r[0] * s[0] ** 2 / 2
    m1 = r[0] ** 2 * s[0] + s[0] ** 3 / 20
    assert moment_avg(g, r, s, 0, order=4) == pytest.approx(m0, abs=1e-14)
    assert moment_avg(g, r, s, 1, order=4) == pytest.approx(m1, abs=1e-14)
