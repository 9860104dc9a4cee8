"""Uniform phase-space grids and the spectral primitives shared by every module.

A phase-space array has ``d`` momentum-like (or separation-like) axes followed
by ``d`` position axes, i.e. shape ``(n_s,)*d + (n_r,)*d``.  Separation ``s``
and kinetic momentum ``P`` are exact DFT duals::

    F(P) = (2 pi hbar)^(-d/2) sum_s exp(-i s.P / hbar) f(s) ds^d

so that ``dP = 2 pi hbar / (n_s ds)``.  All boundaries are periodic.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

logger = logging.getLogger(__name__)

#: states must decay below this at the domain edge
BOUNDARY_WARN = 1e-8


class LayoutError(ValueError):
    """Raised when a field's axis tags do not match what an operation expects."""


class BoundaryMassWarning(UserWarning):
    """The state carries non-negligible weight near the periodic boundary."""


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid for position ``r``, separation ``s`` and kinetic momentum ``P``.

    ``L_r`` and ``L_s`` are half-widths: the axes are ``[-L, L)`` sampled with
    ``n`` points each, so ``dr = 2 L_r / n_r`` and ``ds = 2 L_s / n_s``.
    """

    dim: int
    n_r: int
    n_s: int
    L_r: float
    L_s: float
    hbar: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n_s % 2 or self.n_s < 8:
            raise ValueError(f"n_s must be even and >= 8, got {self.n_s}")
        if self.n_r < 8:
            raise ValueError(f"n_r must be >= 8, got {self.n_r}")
        for name in ("L_r", "L_s", "hbar"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite, got {v}")

    # spacings -----------------------------------------------------------
    @property
    def dr(self) -> float:
        return 2.0 * self.L_r / self.n_r

    @property
    def ds(self) -> float:
        return 2.0 * self.L_s / self.n_s

    @property
    def dP(self) -> float:
        return 2.0 * np.pi * self.hbar / (self.n_s * self.ds)

    @property
    def P_max(self) -> float:
        return self.dP * self.n_s / 2

    # 1D axes ------------------------------------------------------------
    @property
    def r(self) -> np.ndarray:
        return -self.L_r + self.dr * np.arange(self.n_r)

    @property
    def s(self) -> np.ndarray:
        return -self.L_s + self.ds * np.arange(self.n_s)

    @property
    def P(self) -> np.ndarray:
        return self.dP * (np.arange(self.n_s) - self.n_s // 2)

    # shapes / measures --------------------------------------------------
    @property
    def mom_shape(self) -> tuple[int, ...]:
        return (self.n_s,) * self.dim

    @property
    def r_shape(self) -> tuple[int, ...]:
        return (self.n_r,) * self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mom_shape + self.r_shape

    @property
    def mom_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    @property
    def r_axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim, 2 * self.dim))

    @property
    def dV_r(self) -> float:
        return self.dr ** self.dim

    @property
    def dV_s(self) -> float:
        return self.ds ** self.dim

    @property
    def dV_P(self) -> float:
        return self.dP ** self.dim

    def r_mesh(self) -> list[np.ndarray]:
        """Position components broadcastable against an r-only array."""
        return list(np.meshgrid(*([self.r] * self.dim), indexing="ij"))

    def _phase_mesh(self, axis_values: np.ndarray, offset: int) -> list[np.ndarray]:
        out = []
        for a in range(self.dim):
            shape = [1] * (2 * self.dim)
            shape[offset + a] = axis_values.shape[0]
            out.append(axis_values.reshape(shape))
        return out

    def s_components(self) -> list[np.ndarray]:
        """Separation components broadcastable against a phase-space array."""
        return self._phase_mesh(self.s, 0)

    def P_components(self) -> list[np.ndarray]:
        """Momentum components broadcastable against a phase-space array."""
        return self._phase_mesh(self.P, 0)

    def r_components(self) -> list[np.ndarray]:
        """Position components broadcastable against a phase-space array."""
        return self._phase_mesh(self.r, self.dim)

    def s_nyquist_mask(self) -> np.ndarray:
        """Boolean mask (mom_shape) of separations with no ``-s`` partner on the grid."""
        mask = np.zeros(self.mom_shape, dtype=bool)
        for a in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[a] = 0
            mask[tuple(idx)] = True
        return mask

    def to_dict(self) -> dict:
        return dict(dim=self.dim, n_r=self.n_r, n_s=self.n_s, L_r=self.L_r,
                    L_s=self.L_s, hbar=self.hbar)


def make_grid(dim=1, n_r=64, n_s=64, L_r=8.0, L_s=8.0, hbar=1.0) -> PhaseGrid:
    """Build a :class:`PhaseGrid`; odd ``n_s`` and non-positive extents are rejected."""
    return PhaseGrid(dim=int(dim), n_r=int(n_r), n_s=int(n_s), L_r=float(L_r),
                     L_s=float(L_s), hbar=float(hbar))


# ---------------------------------------------------------------------------
# tagged complex fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexField:
    """Array on a :class:`PhaseGrid` with one tag per axis (``'s'``, ``'P'`` or ``'r'``)."""

    grid: PhaseGrid
    data: np.ndarray
    layout: tuple[str, ...] = field(default=())

    def __post_init__(self):
        layout = tuple(self.layout) or self.default_layout(self.grid)
        object.__setattr__(self, "layout", layout)
        data = np.asarray(self.data)
        object.__setattr__(self, "data", data)
        if any(t not in ("s", "P", "r") for t in layout):
            raise LayoutError(f"unknown axis tag in {layout}")
        if len(layout) != data.ndim:
            raise LayoutError(f"layout {layout} has {len(layout)} axes, data has {data.ndim}")
        expected = tuple(self.grid.n_r if t == "r" else self.grid.n_s for t in layout)
        if data.shape != expected:
            raise LayoutError(f"data shape {data.shape} does not match grid {expected}")

    @staticmethod
    def default_layout(grid: PhaseGrid) -> tuple[str, ...]:
        return ("s",) * grid.dim + ("r",) * grid.dim

    @property
    def mom_tag(self) -> str:
        return self.layout[0]

    def require(self, tag: str):
        if self.layout[: self.grid.dim] != (tag,) * self.grid.dim:
            raise LayoutError(f"expected {tag}-tagged leading axes, got {self.layout}")

    def retag(self, tag: str, data: np.ndarray) -> "ComplexField":
        d = self.grid.dim
        return ComplexField(self.grid, data, (tag,) * d + self.layout[d:])


def _axis_prefactor(grid: PhaseGrid, delta: float, naxes: int) -> float:
    return (delta / np.sqrt(2.0 * np.pi * grid.hbar)) ** naxes


def dft_array(grid: PhaseGrid, f: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Forward s->P transform of a raw array (``exp(-i s.P/hbar)``, unitary scaling)."""
    axes = tuple(grid.mom_axes if axes is None else axes)
    out = sfft.fftshift(sfft.fftn(sfft.ifftshift(f, axes=axes), axes=axes), axes=axes)
    return out * _axis_prefactor(grid, grid.ds, len(axes))


def idft_array(grid: PhaseGrid, F: np.ndarray, axes: Sequence[int] | None = None) -> np.ndarray:
    """Inverse P->s transform of a raw array; exact inverse of :func:`dft_array`."""
    axes = tuple(grid.mom_axes if axes is None else axes)
    n_tot = grid.n_s ** len(axes)
    out = sfft.fftshift(sfft.ifftn(sfft.ifftshift(F, axes=axes), axes=axes), axes=axes)
    return out * (n_tot * _axis_prefactor(grid, grid.dP, len(axes)))


def dft_s_to_P(f: ComplexField) -> ComplexField:
    """Symmetric-normalized Fourier transform from separation to kinetic momentum."""
    if f.mom_tag != "s":
        raise LayoutError(f"dft_s_to_P needs s-tagged input, got {f.layout}")
    f.require("s")
    return f.retag("P", dft_array(f.grid, f.data))


def idft_P_to_s(F: ComplexField) -> ComplexField:
    """Inverse of :func:`dft_s_to_P` (kernel ``exp(+i s.P/hbar)``)."""
    if F.mom_tag != "P":
        raise LayoutError(f"idft_P_to_s needs P-tagged input, got {F.layout}")
    F.require("P")
    return F.retag("s", idft_array(F.grid, F.data))


# ---------------------------------------------------------------------------
# spectral derivatives and shifts
# ---------------------------------------------------------------------------

def wavenumbers(n: int, spacing: float, zero_nyquist: bool = True) -> np.ndarray:
    """Angular wavenumbers in FFT order."""
    k = 2.0 * np.pi * sfft.fftfreq(n, d=spacing)
    if zero_nyquist and n % 2 == 0:
        k[n // 2] = 0.0
    return k


def _broadcast(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def gradient_array(data: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Spectral derivative of a periodic array along one axis (Nyquist mode dropped)."""
    n = data.shape[axis]
    k = _broadcast(wavenumbers(n, spacing), axis, data.ndim)
    out = sfft.ifft(1j * k * sfft.fft(data, axis=axis), axis=axis)
    if np.isrealobj(data):
        out = out.real
    return out


def spectral_gradient(F: ComplexField, axis: int) -> ComplexField:
    """Derivative of ``F`` along array axis ``axis`` (an r-axis or a P-axis).

    Separation axes are rejected: differentiating in ``s`` is not a periodic
    operation on a grid whose edge breaks the ``s -> -s`` pairing.
    """
    tag = F.layout[axis]
    if tag == "s":
        raise LayoutError("spectral_gradient is defined on r- or P-axes only")
    spacing = F.grid.dr if tag == "r" else F.grid.dP
    return ComplexField(F.grid, gradient_array(F.data, axis, spacing), F.layout)


def shift_array(data: np.ndarray, axis: int, spacing: float, shift: float | np.ndarray) -> np.ndarray:
    """Band-limited evaluation ``g(x + shift)`` along one periodic axis.

    ``shift`` may be an array broadcastable against ``data``, e.g. one shift per
    slice of the orthogonal axes.  The Nyquist coefficient is discarded so a
    real input stays real.
    """
    n = data.shape[axis]
    k = _broadcast(2.0 * np.pi * sfft.fftfreq(n, d=spacing), axis, data.ndim)
    spec = sfft.fft(data, axis=axis)
    if n % 2 == 0:
        idx = [slice(None)] * data.ndim
        idx[axis] = n // 2
        spec[tuple(idx)] = 0.0
    out = sfft.ifft(spec * np.exp(1j * k * shift), axis=axis)
    return out.real if np.isrealobj(data) else out


def boundary_mass(values: np.ndarray, axes: Sequence[int], width: int = 2) -> float:
    """Fraction of ``sum |values|`` sitting in the outer ``width`` cells of ``axes``."""
    a = np.abs(values)
    total = a.sum()
    if total == 0:
        return 0.0
    edge = np.zeros(a.shape, dtype=bool)
    for ax in axes:
        idx = [slice(None)] * a.ndim
        idx[ax] = np.r_[0:width, a.shape[ax] - width:a.shape[ax]]
        edge[tuple(idx)] = True
    return float(a[edge].sum() / total)


def check_boundary(values: np.ndarray, axes: Sequence[int], what: str = "state") -> float:
    """Warn when the boundary mass exceeds :data:`BOUNDARY_WARN`; returns it."""
    bm = boundary_mass(values, axes)
    if bm > BOUNDARY_WARN:
        warnings.warn(f"{what}: boundary mass {bm:.2e} exceeds {BOUNDARY_WARN:g}",
                      BoundaryMassWarning, stacklevel=3)
    return bm
