"""Weyl, inverse Weyl and Weyl-Stratonovich transforms.

The density matrix is held in center/separation coordinates,
``rho(s, r) = <r + s/2| rho |r - s/2>``.  The gauge-invariant variant
``exp(-i q s.Abar / hbar) rho`` is never stored; the phase is applied on the
fly inside :func:`ws` and removed inside :func:`inv_ws`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .fields import DEFAULT_QUAD_ORDER, EMConfiguration, line_avg_A
from .grid import (BOUNDARY_WARN, BoundaryMassWarning, ComplexField, LayoutError,
                   PhaseGrid, boundary_mass, dft_array, idft_array)

#: accepted imaginary residue (relative) before a Weyl image is called non-Hermitian
HERMITIAN_TOL = 1e-6
KINDS = ("f_w", "F_w", "F_s")


class NonHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class Wavefunction:
    grid: PhaseGrid
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.shape != self.grid.r_shape:
            raise LayoutError(f"wavefunction shape {data.shape} != {self.grid.r_shape}")
        object.__setattr__(self, "data", data)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2) * self.grid.dV_r)

    def normalized(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.data / np.sqrt(self.norm), self.t)

    def density(self) -> np.ndarray:
        return np.abs(self.data) ** 2


@dataclass(frozen=True)
class DensityMatrix(ComplexField):
    """``rho(s, r)`` on the ``(s x r)`` grid."""

    t: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        self.require("s")

    def hermiticity_error(self) -> float:
        """``max |rho(-s, r) - conj rho(s, r)|`` over separations with a partner."""
        flipped = flip_s(self.grid, self.data)
        mask = ~self.grid.s_nyquist_mask()
        diff = np.abs(flipped - np.conj(self.data))[mask]
        return float(diff.max()) if diff.size else 0.0

    def diagonal(self) -> np.ndarray:
        """``rho(0, r)``, the position density."""
        idx = (self.grid.n_s // 2,) * self.grid.dim
        return self.data[idx]

    def trace(self) -> float:
        return float(np.real(self.diagonal().sum()) * self.grid.dV_r)


@dataclass(frozen=True)
class PhaseSpaceFunction(ComplexField):
    """Function on ``(P x r)``; ``kind`` is one of ``f_w``, ``F_w``, ``F_s``."""

    kind: str = "F_s"
    t: float = 0.0

    def __post_init__(self):
        if not self.layout:
            object.__setattr__(self, "layout", ("P",) * self.grid.dim + ("r",) * self.grid.dim)
        super().__post_init__()
        self.require("P")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def norm(self) -> float:
        return float(np.real(self.data.sum()) * self.grid.dV_P * self.grid.dV_r)

    def imag_residue(self) -> float:
        peak = np.max(np.abs(self.data))
        if peak == 0:
            return 0.0
        return float(np.max(np.abs(np.imag(self.data))) / peak)

    def real(self) -> "PhaseSpaceFunction":
        return self.with_data(np.real(self.data))

    def with_data(self, data, kind=None, t=None) -> "PhaseSpaceFunction":
        return PhaseSpaceFunction(self.grid, data, self.layout, kind=kind or self.kind,
                                  t=self.t if t is None else t)


def flip_s(grid: PhaseGrid, data: np.ndarray) -> np.ndarray:
    """``data(-s)`` for ``s`` on the grid (the unpaired edge maps onto itself)."""
    out = data
    for ax in grid.mom_axes:
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def gaussian_wavefunction(grid: PhaseGrid, center=0.0, momentum=0.0, sigma=1.0,
                          normalize=False) -> Wavefunction:
    """``(pi sigma^2)^(-d/4) exp(-|r-r0|^2 / 2 sigma^2 + i p0.(r - r0)/hbar)``.

    ``momentum`` is the canonical momentum ``p0``.
    """
    d = grid.dim
    r0 = np.broadcast_to(np.asarray(center, dtype=float), (d,))
    p0 = np.broadcast_to(np.asarray(momentum, dtype=float), (d,))
    r = grid.r_mesh()
    arg = sum(-(x - c) ** 2 / (2 * sigma ** 2) + 1j * p * (x - c) / grid.hbar
              for x, c, p in zip(r, r0, p0))
    psi = (np.pi * sigma ** 2) ** (-d / 4) * np.exp(arg)
    wf = Wavefunction(grid, psi)
    return wf.normalized() if normalize else wf


def superpose(grid: PhaseGrid, psis: Sequence[Wavefunction], coeffs: Sequence[complex],
              normalize=True) -> Wavefunction:
    data = sum(c * p.data for c, p in zip(coeffs, psis))
    wf = Wavefunction(grid, data)
    return wf.normalized() if normalize else wf


def _shifted_copies(grid: PhaseGrid, data: np.ndarray, sign: float) -> np.ndarray:
    """``data(r + sign * s / 2)`` for every ``s`` on the grid, shape ``grid.shape``.

    The input is zero-padded to twice its width before the band-limited shift,
    so points pushed past the edge read the (vanishing) tail instead of
    wrapping onto the opposite side of the box.
    """
    d, n = grid.dim, grid.n_r
    pad = n // 2
    padded = np.pad(data, [(pad, n - pad)] * d)
    npad = padded.shape[0]
    spec = sfft.fftn(padded, axes=tuple(range(d)))
    if npad % 2 == 0:
        # drop the unpaired Nyquist coefficient so real input stays real
        for a in range(d):
            idx = [slice(None)] * d
            idx[a] = npad // 2
            spec[tuple(idx)] = 0.0
    k = 2.0 * np.pi * sfft.fftfreq(npad, d=grid.dr)
    phase = np.ones((1,) * (2 * d), dtype=complex)
    for a in range(d):
        s_shape = [1] * (2 * d)
        s_shape[a] = grid.n_s
        k_shape = [1] * (2 * d)
        k_shape[d + a] = npad
        phase = phase * np.exp(0.5j * sign * grid.s.reshape(s_shape) * k.reshape(k_shape))
    full = sfft.ifftn(spec.reshape((1,) * d + spec.shape) * phase, axes=grid.r_axes)
    crop = (slice(None),) * d + (slice(pad, pad + n),) * d
    return full[crop]


def bilinear_rho(grid: PhaseGrid, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``left(r + s/2) * conj(right(r - s/2))`` with band-limited interpolation."""
    return _shifted_copies(grid, left, +1.0) * np.conj(_shifted_copies(grid, right, -1.0))


def psi_to_rho(psi: Wavefunction) -> DensityMatrix:
    """Pure-state density matrix ``psi(r + s/2) conj(psi(r - s/2))``."""
    grid = psi.grid
    bm = boundary_mass(np.abs(psi.data) ** 2, range(grid.dim))
    if bm > BOUNDARY_WARN:
        warnings.warn(f"wavefunction boundary mass {bm:.2e} exceeds {BOUNDARY_WARN:g}; "
                      "r +- s/2 wraps periodically", BoundaryMassWarning, stacklevel=2)
    return DensityMatrix(grid, bilinear_rho(grid, psi.data, psi.data), t=psi.t)


def mix(rhos: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    """Convex combination of density matrices (weights are renormalized)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("mixture weights must be non-negative")
    w = w / w.sum()
    data = sum(wi * r.data for wi, r in zip(w, rhos))
    return DensityMatrix(rhos[0].grid, data, t=rhos[0].t)


def gauge_transform_rho(rho: DensityMatrix, chi: Callable, q: float = 1.0,
                        t: float | None = None) -> DensityMatrix:
    """Density matrix in the gauge ``A + grad chi``.

    Multiplies by ``exp(i q [chi(r + s/2) - chi(r - s/2)] / hbar)`` with ``chi``
    evaluated analytically at the segment ends.
    """
    grid = rho.grid
    t = rho.t if t is None else t
    r = grid.r_components()
    s = grid.s_components()
    plus = [x + 0.5 * y for x, y in zip(r, s)]
    minus = [x - 0.5 * y for x, y in zip(r, s)]
    dchi = np.asarray(chi(plus, t)) - np.asarray(chi(minus, t))
    return DensityMatrix(grid, np.exp(1j * q * dchi / grid.hbar) * rho.data, t=rho.t)


def gauge_transform_psi(psi: Wavefunction, chi: Callable, q: float = 1.0,
                        t: float | None = None) -> Wavefunction:
    t = psi.t if t is None else t
    return Wavefunction(psi.grid, np.exp(1j * q * np.asarray(chi(psi.grid.r_mesh(), t))
                                         / psi.grid.hbar) * psi.data, psi.t)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _weyl_scale(grid: PhaseGrid) -> float:
    return (2.0 * np.pi * grid.hbar) ** (-grid.dim / 2)


def symmetrize_edge(grid: PhaseGrid, data: np.ndarray) -> np.ndarray:
    """Split each unpaired edge separation evenly between ``-L_s`` and ``+L_s``.

    On a periodic grid the sample at ``s = -L_s`` also stands for ``+L_s``;
    averaging it with its conjugate partner keeps the transform of a
    Hermitian matrix exactly real.  Interior rows are untouched.
    """
    mask = grid.s_nyquist_mask()
    if not np.any(mask):
        return data
    out = np.array(data, dtype=complex, copy=True)
    flipped = flip_s(grid, out)
    sel = np.broadcast_to(mask.reshape(mask.shape + (1,) * grid.dim), out.shape)
    out[sel] = 0.5 * (out[sel] + np.conj(flipped[sel]))
    return out


def _check_real(data: np.ndarray, what: str):
    peak = np.max(np.abs(data))
    if peak == 0:
        return
    resid = np.max(np.abs(np.imag(data))) / peak
    if resid > HERMITIAN_TOL:
        raise NonHermitianError(f"{what}: imaginary residue {resid:.2e} > {HERMITIAN_TOL:g}; "
                                "input density matrix is not Hermitian")


def weyl(rho: DensityMatrix, check=True) -> PhaseSpaceFunction:
    """Wigner function ``f_w(p, r) = (2 pi hbar)^-d sum_s exp(-i s.p/hbar) rho(s, r) ds^d``."""
    rho.require("s")
    out = _weyl_scale(rho.grid) * dft_array(rho.grid, symmetrize_edge(rho.grid, rho.data))
    if check:
        _check_real(out, "weyl")
    return PhaseSpaceFunction(rho.grid, out, kind="f_w", t=rho.t)


def inv_weyl(fw: PhaseSpaceFunction) -> DensityMatrix:
    """``rho(s, r) = sum_p exp(+i s.p/hbar) f_w(p, r) dp^d``."""
    if fw.kind != "f_w":
        raise ValueError(f"inv_weyl expects an f_w function, got {fw.kind}")
    data = idft_array(fw.grid, fw.data) / _weyl_scale(fw.grid)
    return DensityMatrix(fw.grid, data, t=fw.t)


def ws_phase(grid: PhaseGrid, cfg: EMConfiguration, t: float = 0.0,
             order: int = DEFAULT_QUAD_ORDER) -> np.ndarray:
    """``exp(-i q s.Abar(r, s) / hbar)`` on the full ``(s x r)`` grid."""
    if cfg.dim != grid.dim:
        raise ValueError(f"field dimension {cfg.dim} != grid dimension {grid.dim}")
    s = grid.s_components()
    abar = line_avg_A(cfg, grid.r_components(), s, t, order)
    s_dot = sum(a * b for a, b in zip(s, abar))
    return np.exp(-1j * cfg.q * s_dot / grid.hbar)


def kinetic_phase(grid: PhaseGrid, cfg: EMConfiguration, t: float = 0.0) -> np.ndarray:
    """``exp(-i q s.A(r) / hbar)``; shifts canonical into kinetic momentum locally."""
    s = grid.s_components()
    A = cfg.vector_potential(grid.r_components(), t)
    return np.exp(-1j * cfg.q * sum(a * b for a, b in zip(s, A)) / grid.hbar)


def ws(rho: DensityMatrix, cfg: EMConfiguration, t: float | None = None,
       order: int = DEFAULT_QUAD_ORDER, phase: np.ndarray | None = None,
       check=True) -> PhaseSpaceFunction:
    """Stratonovich function ``F_s(P, r)``; reduces to :func:`weyl` when ``A = 0``."""
    rho.require("s")
    t = rho.t if t is None else t
    if phase is None:
        phase = ws_phase(rho.grid, cfg, t, order)
    out = _weyl_scale(rho.grid) * dft_array(rho.grid, symmetrize_edge(rho.grid, phase * rho.data))
    if check:
        _check_real(out, "ws")
    return PhaseSpaceFunction(rho.grid, out, kind="F_s", t=rho.t)


def inv_ws(Fs: PhaseSpaceFunction, cfg: EMConfiguration, t: float | None = None,
           order: int = DEFAULT_QUAD_ORDER, phase: np.ndarray | None = None) -> DensityMatrix:
    """Reconstruct the gauge-dependent ``rho(s, r)`` belonging to ``cfg`` from ``F_s``."""
    if Fs.kind != "F_s":
        raise ValueError(f"inv_ws expects an F_s function, got {Fs.kind}")
    t = Fs.t if t is None else t
    if phase is None:
        phase = ws_phase(Fs.grid, cfg, t, order)
    data = idft_array(Fs.grid, Fs.data) / _weyl_scale(Fs.grid) / phase
    return DensityMatrix(Fs.grid, data, t=Fs.t)


def t_transform(fw: PhaseSpaceFunction, cfg: EMConfiguration, t: float | None = None,
                order: int = DEFAULT_QUAD_ORDER, check=True) -> PhaseSpaceFunction:
    """``ws(inv_weyl(f_w))``: maps a Wigner-type function to its Stratonovich image."""
    if fw.kind != "f_w":
        raise ValueError(f"t_transform expects an f_w function, got {fw.kind}")
    return ws(inv_weyl(fw), cfg, t=t, order=order, check=check)


def kinetic_shift(fw: PhaseSpaceFunction, cfg: EMConfiguration,
                  t: float | None = None) -> PhaseSpaceFunction:
    """``F_w(P, r) = f_w(P + q A(r), r)`` by a per-``r`` spectral shift in momentum."""
    if fw.kind != "f_w":
        raise ValueError(f"kinetic_shift expects an f_w function, got {fw.kind}")
    t = fw.t if t is None else t
    rho = inv_weyl(fw)
    out = _weyl_scale(fw.grid) * dft_array(fw.grid, symmetrize_edge(fw.grid, kinetic_phase(fw.grid, cfg, t) * rho.data))
    return PhaseSpaceFunction(fw.grid, out, kind="F_w", t=fw.t)
