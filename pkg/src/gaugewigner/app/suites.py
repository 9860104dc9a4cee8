"""Named verification suites run by ``gaugewigner verify <suite>``.

Every suite runs at pinned grid sizes and returns :class:`CheckResult` rows
(measured value against tolerance).  The tolerances mirror the library's
acceptance targets; the grids are the smallest on which those targets are
meaningful.
"""
from __future__ import annotations

import warnings
from typing import Callable

import numpy as np

from ..evolve import EvolutionConfig, evolve_weak_giwe, fs_from_psi
from ..fields import (harmonic_well, linear_B, symmetric_to_landau_chi, uniform_B_landau,
                      uniform_B_symmetric)
from ..grid import make_grid
from ..kernels import (SincOperatorSpec, apply_sinc_operator, apply_weak_rhs, build_kernels,
                       strong_rhs, weak_generator)
from ..observe import (continuity_residual, gauge_deviation, momentum_integral,
                       transform_identity_residuals)
from ..transforms import (gaussian_wavefunction, inv_weyl, inv_ws, psi_to_rho, symmetrize_edge,
                          weyl, ws)
from .io import CheckResult, make_check


def _rel_l2(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _rel_sup(a, b) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def suite_transforms() -> list[CheckResult]:
    out = []
    g1 = make_grid(1, 64, 64, 8.0, 8.0)
    psi = gaussian_wavefunction(g1, 0.0, 0.0, 1.0, normalize=True)
    fw = weyl(psi_to_rho(psi))
    x = g1.r[None, :]
    p = g1.P[:, None]
    exact = np.exp(-x ** 2 - p ** 2) / (np.pi * g1.hbar)
    out.append(make_check("wigner_gaussian_analytic", np.max(np.abs(fw.data.real - exact)), 1e-8))

    g2 = make_grid(2, 32, 32, 6.0, 8.0)
    cfg = uniform_B_symmetric(0.25)
    psi2 = gaussian_wavefunction(g2, [0.3, -0.2], [0.5, 0.2], 1.0, normalize=True)
    rho = psi_to_rho(psi2)
    fw2 = weyl(rho)
    # separations without a -s partner are projected onto their Hermitian part, so
    # the matrix round trip is exact on the edge-symmetrized matrix
    out.append(make_check("weyl_round_trip",
                          _rel_sup(inv_weyl(fw2).data, symmetrize_edge(g2, rho.data)), 1e-12))
    out.append(make_check("weyl_inverse_round_trip",
                          _rel_sup(weyl(inv_weyl(fw2)).data, fw2.data), 1e-12))
    Fs = ws(rho, cfg)
    interior = ~g2.s_nyquist_mask()
    back = inv_ws(Fs, cfg).data
    out.append(make_check("ws_round_trip_interior",
                          float(np.max(np.abs(back - rho.data)[interior]) / np.max(np.abs(rho.data))),
                          1e-12))
    out.append(make_check("ws_inverse_round_trip", _rel_sup(ws(inv_ws(Fs, cfg), cfg).data, Fs.data),
                          1e-12))
    out.append(make_check("F_s_realness", Fs.imag_residue(), 1e-10))
    marg = momentum_integral(Fs.data, g2)
    out.append(make_check("F_s_marginal", np.max(np.abs(marg - np.abs(psi2.data) ** 2)), 1e-8))
    other = gaussian_wavefunction(g2, [-0.5, 0.4], [-0.3, 0.4], 1.0, normalize=True)
    for key, val in transform_identity_residuals(psi2, other, cfg).items():
        out.append(make_check(f"identity_{key}", val, 1e-6, "uniform_B_symmetric B=0.25"))
    return out


def _poly_g(r, t):
    x, y = r
    return 1.0 + 0.3 * x - 0.2 * y + 0.1 * x * y + 0.05 * x ** 3 - 0.02 * x * y ** 2


def suite_lemmas() -> list[CheckResult]:
    # L_r = 7 balances the r-window tail of psi against its spectral resolution, and
    # L_s = 12 leaves no weight on the unpaired edge separations, where the two
    # routes follow different (both legitimate) conventions
    g = make_grid(2, 32, 32, 7.0, 12.0)
    psi = gaussian_wavefunction(g, [0.3, -0.2], [0.5, 0.2], 1.0, normalize=True)
    F = fs_from_psi(psi, uniform_B_symmetric(0.25))
    out = []
    for kind in ("sinc", "sinc_prime"):
        spec = SincOperatorSpec(kind, _poly_g, N_series=3, order=16)
        quad = apply_sinc_operator(spec, F, route="quadrature")
        series = apply_sinc_operator(spec, F, route="series")
        out.append(make_check(f"{kind}_quadrature_vs_series", _rel_sup(quad, series), 1e-9,
                              "cubic polynomial g, n=32"))
    return out


def suite_kernels() -> list[CheckResult]:
    out = []
    g = make_grid(2, 32, 32, 6.0, 8.0)
    psi = gaussian_wavefunction(g, [0.3, -0.2], [0.5, 0.2], 1.0, normalize=True)
    for cfg in (uniform_B_symmetric(1.0), linear_B(1.0, 0.1)):
        K = build_kernels(cfg, g)
        F = fs_from_psi(psi, cfg)
        rhs = apply_weak_rhs(F, K)
        out.append(make_check(f"annihilation_{cfg.name}",
                              np.max(np.abs(momentum_integral(rhs, g))), 1e-9))
        imag = max(float(np.max(np.abs(np.imag(k)))) / float(np.max(np.abs(k)))
                   for k in K.kernels().values())
        out.append(make_check(f"kernel_realness_{cfg.name}", imag, 1e-10))
    K = build_kernels(uniform_B_symmetric(1.0), g)
    out.append(make_check("uniform_B_no_gradient_kernels",
                          float(K.um1 is not None or K.u2 is not None), 0.0))
    g1 = make_grid(1, 32, 32, 8.0, 8.0)
    cfg1 = harmonic_well(1, 1.0)
    K1 = build_kernels(cfg1, g1)
    F1 = fs_from_psi(gaussian_wavefunction(g1, 0.5, 0.3, 1.0, normalize=True), cfg1)
    out.append(make_check("multiplier_vs_convolution_1d",
                          _rel_sup(apply_weak_rhs(F1, K1, route="convolution"),
                                   apply_weak_rhs(F1, K1)), 1e-10))
    return out


def suite_equivalence() -> list[CheckResult]:
    g = make_grid(2, 32, 32, 6.0, 8.0)
    out = []
    for cfg in (uniform_B_symmetric(1.0), linear_B(1.0, 0.1)):
        psi = gaussian_wavefunction(g, [0.3, -0.2], [0.5, 0.2], 1.0, normalize=True)
        F = fs_from_psi(psi, cfg)
        K = build_kernels(cfg, g, order=16)
        weak = weak_generator(F, K, cfg.m)
        strong = strong_rhs(F, cfg, g, N_series=3)
        out.append(make_check(f"strong_vs_weak_{cfg.name}", _rel_l2(strong, weak), 1e-6))
    return out


def suite_conservation() -> list[CheckResult]:
    g = make_grid(1, 64, 64, 8.0, 8.0)
    cfg = harmonic_well(1, 1.0)
    psi = gaussian_wavefunction(g, 0.5, 0.3, 1.0, normalize=True)
    F0 = fs_from_psi(psi, cfg)
    K = build_kernels(cfg, g)
    res = []
    out = []
    for dt in (0.02, 0.01):
        traj = evolve_weak_giwe(F0, cfg, EvolutionConfig(dt=dt, t_final=0.4), kernels=K)
        res.append(float(np.max(continuity_residual(traj, cfg))))
        out.append(make_check(f"norm_drift_dt={dt}", traj.norm_drift, 1e-8))
        out.append(make_check(f"continuity_dt={dt}", res[-1], 1e-3))
    out.append(make_check("continuity_halving_ratio", res[0] / res[1], 3.0,
                          "expected ~4 for a centred difference", at_least=True))
    out.append(make_check("kernel_annihilation",
                          np.max(np.abs(momentum_integral(apply_weak_rhs(F0, K), g))), 1e-9))
    return out


def suite_gauge() -> list[CheckResult]:
    g = make_grid(2, 32, 32, 6.0, 8.0)
    psi = gaussian_wavefunction(g, [0.8, -0.4], [0.3, 0.5], 1.0, normalize=True)
    out = []

    def row(name, cfg, chi):
        dev = gauge_deviation(psi, cfg, chi)
        out.append(make_check(f"{name}_F_s", dev["F_s"], 1e-6,
                              f"F_w {dev['F_w']:.3e}, f_w {dev['f_w']:.3e}"))

    row("uniform_B_symmetric_to_landau", uniform_B_symmetric(1.0), symmetric_to_landau_chi(1.0))
    row("linear_B_landau_to_transverse", linear_B(1.0, 0.1),
        lambda r, t: (1.0 * r[0] + 0.05 * r[0] ** 2) * r[1])
    row("uniform_B_landau_cubic_chi", uniform_B_landau(1.0), cubic_chi())
    row("harmonic_cubic_chi", harmonic_well(2, 1.0, B=0.5), cubic_chi())
    return out


def cubic_chi(c: float = 0.05) -> Callable:
    """A generic cubic gauge function (the highest degree the kernels treat exactly)."""
    return lambda r, t: c * (r[0] ** 3 - 2.0 * r[0] * r[1] ** 2 + 0.5 * r[1] ** 3) + 0.1 * r[0] * r[1]


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "transforms": suite_transforms,
    "lemmas": suite_lemmas,
    "kernels": suite_kernels,
    "equivalence": suite_equivalence,
    "conservation": suite_conservation,
    "gauge": suite_gauge,
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SUITES[name]()
