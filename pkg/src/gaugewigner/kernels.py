"""Weak-form evolution kernels and the sinc pseudo-differential operators.

Every kernel is first built as a *multiplier* ``u(s, r)`` in separation
space; circular convolution over ``P`` with the kernel
``K = (2 pi hbar)^(-d/2) DFT_s[u]`` is then identical to multiplying the
separation-space image of ``F`` by ``u``.  The multipliers are

* ``u0  = -(q / 2 i hbar) int E(r + s tau/2) . s dtau``          (electric part of L)
* ``u1  = -(q / 2 i hbar m) int B x s dtau``                       (L = u0 + P . u1)
* ``um1 = -(q / 4 m) int (s x B) tau dtau``                        (acts on grad_r F)
* ``u2  = (q^2 / 8 i hbar m) int (s x B) dtau . int (s x B) eta deta``

so that ``dF/dt + (P/m).grad_r F = RHS`` reproduces the Lorentz transport
``-(qE + (q/m) P x B) . grad_P F`` for uniform fields.  In the plane,
``B = B_z e_z`` and ``B x s = (-B s_y, B s_x)``.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .fields import (DEFAULT_QUAD_ORDER, EMConfiguration, moment_avg,
                     partial_derivative)
from .grid import PhaseGrid, dft_array, gradient_array, idft_array
from .transforms import PhaseSpaceFunction, symmetrize_edge

logger = logging.getLogger(__name__)

#: kernel tails above this fraction of the peak trigger a warning
TAIL_TOL = 1e-8
SINC_KINDS = ("sinc", "sinc_prime")


class KernelTailWarning(UserWarning):
    """A kernel does not decay across the momentum window (circular wrap is visible)."""


class TruncationWarning(UserWarning):
    """The truncated sinc series is not exact for the supplied field."""


# ---------------------------------------------------------------------------
# separation-space helpers
# ---------------------------------------------------------------------------

def _to_s(grid: PhaseGrid, F: np.ndarray) -> np.ndarray:
    return idft_array(grid, F)


def _to_P(grid: PhaseGrid, f: np.ndarray, real: bool) -> np.ndarray:
    out = dft_array(grid, f)
    return out.real if real else out


def _symmetrize_edge(grid: PhaseGrid, u: np.ndarray) -> np.ndarray:
    """Hermitian-symmetrize the multiplier on the unpaired edge separations.

    Only the part that has no ``-s`` partner is removed, so e.g. ``i s_y`` loses
    its ``s_y = -L_s`` row but keeps the ``s_x = -L_s`` row; the multiplier then
    maps real functions to real functions and keeps skew generators skew.
    """
    return symmetrize_edge(grid, u)


def _full(grid: PhaseGrid, x) -> np.ndarray:
    return np.broadcast_to(np.asarray(x), grid.shape)


def _cross_Bs(B, s):
    """``B x s`` for ``B = B_z e_z`` and in-plane ``s``."""
    return [-B * s[1], B * s[0]]


def _cross_sB(s, B):
    return [s[1] * B, -s[0] * B]


# ---------------------------------------------------------------------------
# kernel set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSet:
    """Separation-space multipliers of the weak-form generator and their ``dP`` kernels.

    Zero kernels are stored as ``None`` and skipped during application.
    """

    grid: PhaseGrid
    u0: np.ndarray | None
    u1: list | None
    um1: list | None
    u2: np.ndarray | None
    order: int = DEFAULT_QUAD_ORDER
    name: str = ""
    tails: dict = field(default_factory=dict)

    def _kernel(self, u):
        if u is None:
            return None
        scale = (2.0 * np.pi * self.grid.hbar) ** (-self.grid.dim / 2)
        return scale * dft_array(self.grid, _full(self.grid, u))

    @cached_property
    def ell0(self) -> np.ndarray | None:
        return self._kernel(self.u0)

    @cached_property
    def ell1(self) -> list | None:
        return None if self.u1 is None else [self._kernel(u) for u in self.u1]

    @cached_property
    def mw1(self) -> list | None:
        return None if self.um1 is None else [self._kernel(u) for u in self.um1]

    @cached_property
    def mw2(self) -> np.ndarray | None:
        return self._kernel(self.u2)

    def kernels(self) -> dict:
        """All ``dP``-space kernels keyed by name (vector parts get a component suffix)."""
        out = {}
        for key in ("ell0", "mw2"):
            k = getattr(self, key)
            if k is not None:
                out[key] = k
        for key in ("ell1", "mw1"):
            ks = getattr(self, key)
            if ks is not None:
                for a, k in enumerate(ks):
                    out[f"{key}_{'xy'[a]}"] = k
        return out

    @property
    def max_rate(self) -> float:
        """Upper bound on ``|u|`` (sets the explicit time-step limit of the kernel step)."""
        P = self.grid.P_max
        total = 0.0
        if self.u0 is not None:
            total += float(np.max(np.abs(self.u0)))
        if self.u2 is not None:
            total += float(np.max(np.abs(self.u2)))
        if self.u1 is not None:
            total += P * sum(float(np.max(np.abs(u))) for u in self.u1)
        if self.um1 is not None:
            kmax = np.pi / self.grid.dr
            total += kmax * sum(float(np.max(np.abs(u))) for u in self.um1)
        return total


def _tail_ratio(grid: PhaseGrid, u, ref=None) -> float:
    """Largest edge value of the momentum-space kernel relative to its peak.

    A remainder at roundoff level relative to ``ref`` (the full kernel) counts as zero.
    """
    if ref is not None and np.max(np.abs(u)) <= 1e-12 * np.max(np.abs(ref)):
        return 0.0
    K = np.abs(dft_array(grid, _full(grid, u)))
    peak = K.max()
    if peak == 0:
        return 0.0
    edge = np.zeros(grid.mom_shape, dtype=bool)
    for a in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[a] = [0, 1, grid.n_s - 1]
        edge[tuple(idx)] = True
    return float(K[edge].max() / peak)


def build_kernels(cfg: EMConfiguration, grid: PhaseGrid, order: int = DEFAULT_QUAD_ORDER,
                  t: float = 0.0, tail_tol: float = TAIL_TOL, atol: float = 1e-14) -> KernelSet:
    """Quadrature of the field line integrals on the full ``(s x r)`` grid.

    The tail check covers the magnetic-gradient kernels and the part of the
    Lorentz kernel beyond its local (classical) value, because the classical
    part of a uniform field is a derivative stencil that never decays.
    """
    if cfg.dim != grid.dim:
        raise ValueError(f"field dimension {cfg.dim} != grid dimension {grid.dim}")
    q, m, hbar = cfg.q, cfg.m, grid.hbar
    r = grid.r_components()
    s = grid.s_components()

    def E_dot_s(pt, tt):
        return sum(e * c for e, c in zip(cfg.E(pt, tt), s))

    u0 = -(q / (2j * hbar)) * moment_avg(E_dot_s, r, s, 0, t, order)
    u0_loc = (1j * q / hbar) * E_dot_s(r, t)
    u1 = um1 = u2 = None
    tails = {}
    if grid.dim == 2:
        B0 = moment_avg(cfg.B, r, s, 0, t, order)
        B1 = moment_avg(cfg.B, r, s, 1, t, order)
        u1 = [-(q / (2j * hbar * m)) * c for c in _cross_Bs(B0, s)]
        um1 = [-(q / (4 * m)) * c for c in _cross_sB(s, B1)]
        s2 = s[0] ** 2 + s[1] ** 2
        u2 = (q ** 2 / (8j * hbar * m)) * s2 * B0 * B1
        B_loc = cfg.B(r, t)
        u1_loc = [(1j * q / (hbar * m)) * c for c in _cross_Bs(B_loc, s)]
        tails["ell1_remainder"] = max(_tail_ratio(grid, a - b, a) for a, b in zip(u1, u1_loc))
        u1 = [_symmetrize_edge(grid, _full(grid, u)) for u in u1]
        um1 = [_symmetrize_edge(grid, _full(grid, u)) for u in um1]
        u2 = _symmetrize_edge(grid, _full(grid, u2))
        if all(np.max(np.abs(u)) <= atol for u in um1):
            um1 = None
        else:
            tails["mw1"] = max(_tail_ratio(grid, u) for u in um1)
        if np.max(np.abs(u2)) <= atol:
            u2 = None
        else:
            tails["mw2"] = _tail_ratio(grid, u2)
        if all(np.max(np.abs(u)) <= atol for u in u1):
            u1 = None
    tails["ell0_remainder"] = _tail_ratio(grid, u0 - u0_loc, u0)
    u0 = _symmetrize_edge(grid, _full(grid, u0))
    if np.max(np.abs(u0)) <= atol:
        u0 = None
    for key, val in tails.items():
        if val > tail_tol:
            warnings.warn(f"kernel {key}: tail/peak {val:.1e} exceeds {tail_tol:g}; "
                          "field varies too fast for the momentum window",
                          KernelTailWarning, stacklevel=2)
    return KernelSet(grid, u0, u1, um1, u2, order=order, name=cfg.name, tails=tails)


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def apply_weak_rhs(Fs: PhaseSpaceFunction | np.ndarray, kernels: KernelSet,
                   route: str = "multiplier") -> np.ndarray:
    """Kernel part of the weak-form generator (everything but free streaming).

    ``route='multiplier'`` multiplies in separation space; ``route='convolution'``
    convolves with the stored ``dP`` kernels via FFT.  Both are the same
    circular convolution; the second exists to exercise the kernels as data.
    """
    grid = kernels.grid
    data = Fs.data if isinstance(Fs, PhaseSpaceFunction) else np.asarray(Fs)
    if isinstance(Fs, PhaseSpaceFunction) and Fs.grid != grid:
        raise ValueError("state and kernels live on different grids")
    if data.shape != grid.shape:
        raise ValueError(f"state shape {data.shape} != grid shape {grid.shape}")
    if route == "convolution":
        return _apply_by_convolution(data, kernels)
    if route != "multiplier":
        raise ValueError(f"unknown route {route!r}")
    real = np.isrealobj(data)
    f = _to_s(grid, data)
    acc = np.zeros(grid.shape, dtype=complex)
    if kernels.u0 is not None:
        acc += kernels.u0 * f
    if kernels.u2 is not None:
        acc += kernels.u2 * f
    if kernels.um1 is not None:
        for a, u in enumerate(kernels.um1):
            acc += u * gradient_array(f, grid.dim + a, grid.dr)
    out = _to_P(grid, acc, real)
    if kernels.u1 is not None:
        P = grid.P_components()
        for a, u in enumerate(kernels.u1):
            out = out + P[a] * _to_P(grid, u * f, real)
    return out


def circular_convolve(grid: PhaseGrid, kernel: np.ndarray, F: np.ndarray) -> np.ndarray:
    """``dP^d sum_P' K(P - P') F(P')`` over the momentum axes by FFT."""
    # with centred storage, dP = P - P' = 0 sits at index n/2; ifftshift moves it
    # to index 0 so an ordinary circular convolution over array indices results
    axes = grid.mom_axes
    Kf = np.fft.fftn(np.fft.ifftshift(kernel, axes=axes), axes=axes)
    Ff = np.fft.fftn(F, axes=axes)
    return np.fft.ifftn(Kf * Ff, axes=axes) * grid.dV_P


def direct_convolve(grid: PhaseGrid, kernel: np.ndarray, F: np.ndarray) -> np.ndarray:
    """O(N^2) direct circular sum; the reference for :func:`circular_convolve`."""
    n, d = grid.n_s, grid.dim
    out = np.zeros(np.broadcast_shapes(kernel.shape, F.shape), dtype=complex)
    for k in itertools.product(range(n), repeat=d):
        for kp in itertools.product(range(n), repeat=d):
            diff = tuple((a - b + n // 2) % n for a, b in zip(k, kp))
            out[k] += kernel[diff] * F[kp]
    return out * grid.dV_P


def _apply_by_convolution(data: np.ndarray, kernels: KernelSet) -> np.ndarray:
    grid = kernels.grid
    real = np.isrealobj(data)
    out = np.zeros(grid.shape, dtype=complex)
    if kernels.ell0 is not None:
        out += circular_convolve(grid, kernels.ell0, data)
    if kernels.mw2 is not None:
        out += circular_convolve(grid, kernels.mw2, data)
    if kernels.mw1 is not None:
        for a, k in enumerate(kernels.mw1):
            out += circular_convolve(grid, k, gradient_array(data, grid.dim + a, grid.dr))
    if kernels.ell1 is not None:
        P = grid.P_components()
        for a, k in enumerate(kernels.ell1):
            out += P[a] * circular_convolve(grid, k, data)
    return out.real if real else out


class RealWeakOperator:
    """Fast application of the kernel terms to *real* states held in FFT order.

    With the momentum axes in FFT (not centred) order, the centred transforms
    collapse to plain FFTs, and for a real ``F`` with Hermitian multipliers the
    kernel action is ``irfftn(conj(u) * rfftn(F))``.  Used inside the
    time-stepper; :func:`apply_weak_rhs` remains the reference path.
    """

    def __init__(self, kernels: KernelSet):
        g = kernels.grid
        self.grid = g
        self.axes = g.mom_axes
        self.nhalf = g.n_s // 2 + 1
        d = g.dim

        def prep(u):
            if u is None:
                return None
            full = np.fft.ifftshift(_full(g, u), axes=self.axes)
            idx = [slice(None)] * (2 * d)
            idx[d - 1] = slice(0, self.nhalf)
            return np.ascontiguousarray(np.conj(full[tuple(idx)]))

        local = None
        if kernels.u0 is not None or kernels.u2 is not None:
            local = sum(u for u in (kernels.u0, kernels.u2) if u is not None)
        self.local = prep(local)
        self.u1 = None if kernels.u1 is None else [prep(u) for u in kernels.u1]
        self.um1 = None if kernels.um1 is None else [prep(u) for u in kernels.um1]
        self.P = [np.fft.ifftshift(p, axes=self.axes) for p in g.P_components()]
        self.empty = self.local is None and self.u1 is None and self.um1 is None

    def to_fft_order(self, F: np.ndarray) -> np.ndarray:
        return np.fft.ifftshift(F, axes=self.axes)

    def from_fft_order(self, F: np.ndarray) -> np.ndarray:
        return np.fft.fftshift(F, axes=self.axes)

    def __call__(self, F: np.ndarray) -> np.ndarray:
        g, axes = self.grid, self.axes
        shape = (g.n_s,) * g.dim
        h = sfft.rfftn(F, axes=axes)
        out = np.zeros(F.shape)
        acc = None
        if self.local is not None:
            acc = self.local * h
        if self.um1 is not None:
            for a, u in enumerate(self.um1):
                dF = gradient_array(F, g.dim + a, g.dr)
                term = u * sfft.rfftn(dF, axes=axes)
                acc = term if acc is None else acc + term
        if acc is not None:
            out += sfft.irfftn(acc, s=shape, axes=axes)
        if self.u1 is not None:
            for a, u in enumerate(self.u1):
                out += self.P[a] * sfft.irfftn(u * h, s=shape, axes=axes)
        return out


def streaming(F: np.ndarray, grid: PhaseGrid, m: float = 1.0) -> np.ndarray:
    """``-(P/m) . grad_r F`` with spectral r-derivatives."""
    P = grid.P_components()
    return -sum(P[a] / m * gradient_array(F, grid.dim + a, grid.dr) for a in range(grid.dim))


def weak_generator(Fs: PhaseSpaceFunction | np.ndarray, kernels: KernelSet,
                   m: float = 1.0) -> np.ndarray:
    """Full ``dF_s/dt`` of the weak form: streaming plus kernel terms."""
    data = Fs.data if isinstance(Fs, PhaseSpaceFunction) else np.asarray(Fs)
    return streaming(data, kernels.grid, m) + apply_weak_rhs(data, kernels)


def liouville_generator(Fs: PhaseSpaceFunction | np.ndarray, cfg: EMConfiguration,
                        grid: PhaseGrid, t: float = 0.0) -> np.ndarray:
    """Classical ``-(P/m).grad_r F - (qE + (q/m) P x B).grad_P F``."""
    data = Fs.data if isinstance(Fs, PhaseSpaceFunction) else np.asarray(Fs)
    force = cfg.lorentz_force(grid.P_components(), grid.r_components(), t)
    out = streaming(data, grid, cfg.m)
    for a in range(grid.dim):
        out = out - force[a] * gradient_array(data, a, grid.dP)
    return out


# ---------------------------------------------------------------------------
# sinc operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SincOperatorSpec:
    """``g(r) sinc((hbar/2) grad_r<- . grad_P->)`` or its ``sinc'`` counterpart.

    The left gradient acts on ``g`` only; the right gradient on the target.
    """

    kind: str
    g: Callable
    N_series: int = 3
    order: int = DEFAULT_QUAD_ORDER
    t: float = 0.0

    def __post_init__(self):
        if self.kind not in SINC_KINDS:
            raise ValueError(f"unknown sinc kind {self.kind!r}; expected one of {SINC_KINDS}")


def sinc_series_coeff(kind: str, n: int) -> float:
    """Taylor coefficient of ``x^n`` in ``sinc`` or ``sinc'``."""
    if kind == "sinc":
        if n % 2:
            return 0.0
        k = n // 2
        return (-1) ** k / math.factorial(2 * k + 1)
    if kind == "sinc_prime":
        if n % 2 == 0:
            return 0.0
        k = (n + 1) // 2
        return (-1) ** k * 2 * k / math.factorial(2 * k + 1)
    raise ValueError(f"unknown sinc kind {kind!r}")


def sinc_multiplier(spec: SincOperatorSpec, grid: PhaseGrid) -> np.ndarray:
    """Separation-space form of the operator: a tau-average of ``g`` along the segment."""
    r, s = grid.r_components(), grid.s_components()
    if spec.kind == "sinc":
        u = 0.5 * moment_avg(spec.g, r, s, 0, spec.t, spec.order)
    else:
        u = 0.5j * moment_avg(spec.g, r, s, 1, spec.t, spec.order)
    return _symmetrize_edge(grid, _full(grid, u))


def apply_sinc_operator(spec: SincOperatorSpec, target, grid: PhaseGrid | None = None,
                        route: str = "quadrature", hbar_scale: float = 1.0) -> np.ndarray:
    """Apply a sinc-type operator to a ``(P x r)`` field.

    ``route='quadrature'`` uses the segment-average form and is exact for any
    smooth ``g``; ``route='series'`` sums the differential series to order
    ``spec.N_series`` and is exact for polynomial ``g`` of that degree.
    """
    if isinstance(target, PhaseSpaceFunction):
        grid, data = target.grid, target.data
    else:
        data = np.asarray(target)
        if grid is None:
            raise ValueError("grid is required for raw-array targets")
    if route == "quadrature":
        if hbar_scale != 1.0:
            raise ValueError("hbar_scale is only supported on the series route")
        u = sinc_multiplier(spec, grid)
        return _to_P(grid, u * _to_s(grid, data), np.isrealobj(data))
    if route == "series":
        return _sinc_series(spec, data, grid, hbar_scale)
    raise ValueError(f"unknown route {route!r}")


def _multi_indices(dim: int, k: int):
    for alpha in itertools.product(range(k + 1), repeat=dim):
        if sum(alpha) == k:
            yield alpha


def _sinc_series(spec: SincOperatorSpec, data: np.ndarray, grid: PhaseGrid,
                 hbar_scale: float = 1.0) -> np.ndarray:
    r = grid.r_components()
    h = 0.5 * grid.hbar * hbar_scale
    out = np.zeros(grid.shape, dtype=np.result_type(data, float))
    for k in range(spec.N_series + 1):
        c = sinc_series_coeff(spec.kind, k)
        if c == 0.0:
            continue
        for alpha in _multi_indices(grid.dim, k):
            mult = math.factorial(k) / math.prod(math.factorial(a) for a in alpha)
            dg = partial_derivative(spec.g, r, spec.t, alpha) if k else spec.g(r, spec.t)
            dT = data
            for ax, a in enumerate(alpha):
                for _ in range(a):
                    dT = gradient_array(dT, ax, grid.dP)
            out = out + c * h ** k * mult * np.asarray(dg) * dT
    return out


def _is_polynomial(g: Callable, grid: PhaseGrid, degree: int, t: float = 0.0,
                   rtol: float = 1e-8) -> bool:
    """Heuristic: all derivatives of order ``degree + 1`` vanish on a coarse sample."""
    pts = np.linspace(-grid.L_r, grid.L_r, 5)
    mesh = np.meshgrid(*([pts] * grid.dim), indexing="ij")
    scale = max(1.0, float(np.max(np.abs(g(mesh, t)))))
    for alpha in _multi_indices(grid.dim, degree + 1):
        d = partial_derivative(g, mesh, t, alpha, h=0.5, npts=max(7, degree + 3 + (degree % 2)))
        if np.max(np.abs(d)) > rtol * scale:
            return False
    return True


def strong_rhs(Fs: PhaseSpaceFunction | np.ndarray, cfg: EMConfiguration, grid: PhaseGrid,
               N_series: int = 3, t: float = 0.0, hbar_scale: float = 1.0,
               route: str = "series", check_polynomial: bool = True) -> np.ndarray:
    """``dF_s/dt`` implied by the local (pseudo-differential) form of the GIWE.

    Terms: streaming, the Lorentz force acting through ``sinc``, and the
    magnetic-gradient correction with prefactor ``-(q hbar / 2m)``.
    ``hbar_scale`` rescales ``hbar`` inside every quantum correction while
    the fields and the grid stay fixed.
    """
    data = Fs.data if isinstance(Fs, PhaseSpaceFunction) else np.asarray(Fs)
    q, m = cfg.q, cfg.m
    d = grid.dim
    if check_polynomial:
        gs = [lambda rr, tt, a=a: cfg.E(rr, tt)[a] for a in range(d)]
        if d == 2:
            gs.append(cfg.B)
        if not all(_is_polynomial(g, grid, N_series, t) for g in gs):
            warnings.warn(f"{cfg.name}: field is not polynomial of degree <= {N_series}; "
                          "series truncation is inexact", TruncationWarning, stacklevel=2)

    def op(kind, g, T):
        spec = SincOperatorSpec(kind, g, N_series=N_series, t=t)
        return apply_sinc_operator(spec, T, grid, route=route,
                                   **({"hbar_scale": hbar_scale} if route == "series" else {}))

    def dP(T, a):
        return gradient_array(T, a, grid.dP)

    out = streaming(data, grid, m)
    for a in range(d):
        Ea = lambda rr, tt, a=a: cfg.E(rr, tt)[a]  # noqa: E731
        out = out - q * op("sinc", Ea, dP(data, a))
    if d == 2:
        P = grid.P_components()
        B = cfg.B
        out = out - (q / m) * (P[1] * op("sinc", B, dP(data, 0))
                               - P[0] * op("sinc", B, dP(data, 1)))
        Vx = gradient_array(data, 2, grid.dr) - q * op("sinc", B, dP(data, 1))
        Vy = gradient_array(data, 3, grid.dr) + q * op("sinc", B, dP(data, 0))
        corr = op("sinc_prime", B, dP(Vx, 1)) - op("sinc_prime", B, dP(Vy, 0))
        out = out - (q * grid.hbar * hbar_scale / (2 * m)) * corr
    return out
