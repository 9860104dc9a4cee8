"""Observables and conservation diagnostics.

Densities and currents are available from a Stratonovich function (momentum
moments) and from a wavefunction (minimal-coupling formula), so each can act as
the other's oracle.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import DEFAULT_QUAD_ORDER, EMConfiguration, gauge_transform, partial_derivative
from .grid import PhaseGrid, gradient_array
from .kernels import KernelSet, SincOperatorSpec, apply_sinc_operator, apply_weak_rhs
from .transforms import (DensityMatrix, PhaseSpaceFunction, Wavefunction, gauge_transform_rho,
                         kinetic_shift, psi_to_rho, t_transform, weyl, ws)

#: regularization of normalized residuals (stationary states have ~0 denominators)
EPS = 1e-14


def _require_Fs(F: PhaseSpaceFunction):
    if F.kind != "F_s":
        raise ValueError(f"expected an F_s function, got {F.kind}")


def density(Fs: PhaseSpaceFunction) -> np.ndarray:
    """``P(r) = sum_P F_s dP^d``."""
    _require_Fs(Fs)
    return np.real(Fs.data.sum(axis=Fs.grid.mom_axes)) * Fs.grid.dV_P


def current_from_Fs(Fs: PhaseSpaceFunction, m: float = 1.0) -> list[np.ndarray]:
    """``j(r) = sum_P (P/m) F_s dP^d``, one array per component."""
    _require_Fs(Fs)
    g = Fs.grid
    return [np.real((P * Fs.data).sum(axis=g.mom_axes)) * g.dV_P / m for P in g.P_components()]


def current_from_psi(psi: Wavefunction, cfg: EMConfiguration, t: float | None = None) -> list[np.ndarray]:
    """``j = (hbar/m) Im(psi* grad psi) - (q/m)|psi|^2 A`` with spectral gradients."""
    g = psi.grid
    t = psi.t if t is None else t
    A = cfg.vector_potential(g.r_mesh(), t)
    rho = np.abs(psi.data) ** 2
    out = []
    for a in range(g.dim):
        grad = gradient_array(psi.data, a, g.dr)
        out.append(g.hbar / cfg.m * np.imag(np.conj(psi.data) * grad) - cfg.q / cfg.m * rho * A[a])
    return out


def divergence(j: Sequence[np.ndarray], grid: PhaseGrid) -> np.ndarray:
    return sum(gradient_array(c, a, grid.dr) for a, c in enumerate(j))


def _density_current(state, cfg: EMConfiguration):
    if isinstance(state, Wavefunction):
        return np.abs(state.data) ** 2, current_from_psi(state, cfg)
    return density(state), current_from_Fs(state, cfg.m)


def _uniform_spacing(times: Sequence[float]) -> float:
    t = np.asarray(times, dtype=float)
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ValueError("continuity residual needs uniformly spaced snapshots")
    return float(dts[0])


def continuity_residual(traj, cfg: EMConfiguration, route: str = "density",
                        kernels: KernelSet | None = None) -> np.ndarray:
    """Normalized ``||dP/dt + div j||_2 / (||div j||_2 + eps)`` at interior snapshots.

    ``dP/dt`` is a centred difference of neighbouring snapshots.
    ``route='density'`` uses (P, j); ``route='generator'`` integrates the
    finite-difference GIWE left-hand side minus the weak kernel terms over P,
    which needs ``F_s`` snapshots and ``kernels``.
    """
    if len(traj.times) < 3:
        raise ValueError("continuity residual needs at least 3 snapshots")
    dt = _uniform_spacing(traj.times)
    snaps = traj.snapshots
    out = []
    if route == "density":
        pairs = [_density_current(s, cfg) for s in snaps]
        grid = snaps[0].grid
        for n in range(1, len(snaps) - 1):
            dPdt = (pairs[n + 1][0] - pairs[n - 1][0]) / (2 * dt)
            div = divergence(pairs[n][1], grid)
            out.append(np.linalg.norm(dPdt + div) / (np.linalg.norm(div) + EPS))
    elif route == "generator":
        if kernels is None:
            raise ValueError("route='generator' needs the kernel set")
        if isinstance(snaps[0], Wavefunction):
            raise ValueError("route='generator' needs F_s snapshots")
        grid = kernels.grid
        P = grid.P_components()
        for n in range(1, len(snaps) - 1):
            F = np.real(snaps[n].data)
            dFdt = (np.real(snaps[n + 1].data) - np.real(snaps[n - 1].data)) / (2 * dt)
            stream = sum(P[a] / cfg.m * gradient_array(F, grid.dim + a, grid.dr)
                         for a in range(grid.dim))
            lhs = (dFdt + stream - apply_weak_rhs(F, kernels)).sum(axis=grid.mom_axes) * grid.dV_P
            div = divergence(current_from_Fs(snaps[n], cfg.m), grid)
            out.append(np.linalg.norm(lhs) / (np.linalg.norm(div) + EPS))
    else:
        raise ValueError(f"unknown route {route!r}")
    return np.asarray(out)


def momentum_integral(field: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """``sum_P field dP^d`` at every r (used for the kernel-annihilation check)."""
    return np.real(np.asarray(field).sum(axis=grid.mom_axes)) * grid.dV_P


def _sup_dev(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.max(np.abs(a))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(b)))


def gauge_deviation(state, cfg: EMConfiguration, chi: Callable,
                    grad_chi: Callable | None = None, dchi_dt: Callable | None = None,
                    t: float | None = None) -> dict:
    """Normalized sup-norm changes of ``F_s``, ``F_w`` and ``f_w`` under ``A -> A + grad chi``.

    ``state`` is a :class:`Wavefunction`, a :class:`DensityMatrix` or a
    trajectory of wavefunctions (the worst snapshot is reported).
    """
    if hasattr(state, "snapshots"):
        rows = [gauge_deviation(s, cfg, chi, grad_chi, dchi_dt) for s in state.snapshots]
        return {k: max(r[k] for r in rows) for k in rows[0]}
    rho = psi_to_rho(state) if isinstance(state, Wavefunction) else state
    t = rho.t if t is None else t
    cfg2 = gauge_transform(cfg, chi, grad_chi, dchi_dt)
    rho2 = gauge_transform_rho(rho, chi, cfg.q, t)
    Fs1, Fs2 = ws(rho, cfg, t), ws(rho2, cfg2, t)
    fw1, fw2 = weyl(rho), weyl(rho2)
    Fw1, Fw2 = kinetic_shift(fw1, cfg, t), kinetic_shift(fw2, cfg2, t)
    return {"F_s": _sup_dev(Fs1.data, Fs2.data),
            "F_w": _sup_dev(Fw1.data, Fw2.data),
            "f_w": _sup_dev(fw1.data, fw2.data)}


def transform_identity_residuals(left: Wavefunction, right: Wavefunction, cfg: EMConfiguration,
                                 t: float = 0.0, order: int = DEFAULT_QUAD_ORDER,
                                 coeffs=(0.7, -0.4)) -> dict:
    """Normalized sup-norm residuals of the algebraic properties of ``T = S o W^-1``.

    Each left-hand side is built on the Wigner side (spectral derivative or
    multiplication of ``f_w``) and pushed through :func:`t_transform`; each
    right-hand side is assembled from ``F_s`` with spectral derivatives and the
    quadrature sinc operators of :mod:`kernels`.  Keys: ``linearity``,
    ``d_r_<a>`` (position derivative), ``d_P_<a>`` (momentum derivative) and
    ``p_mult_<a>`` (multiplication by canonical momentum).
    """
    grid = left.grid
    d = grid.dim
    q, hbar = cfg.q, grid.hbar
    names = "xyz"
    rho = psi_to_rho(left)
    fw = weyl(rho).real()
    Fs = ws(rho, cfg, t, order).real()
    F = Fs.data

    def T(data):
        return np.real(t_transform(fw.with_data(data), cfg, t, order, check=False).data)

    def dA(b, alpha):
        return lambda r, tt: partial_derivative(
            lambda rr, t2: cfg.vector_potential(rr, t2)[b], r, tt, alpha)

    def sinc_op(kind, g, target):
        return np.real(apply_sinc_operator(SincOperatorSpec(kind, g, order=order, t=t),
                                           target, grid))

    dP = [gradient_array(F, b, grid.dP) for b in range(d)]
    out = {}
    fw2 = weyl(psi_to_rho(right)).real()
    Fs2 = ws(psi_to_rho(right), cfg, t, order).real()
    a, b = coeffs
    out["linearity"] = _sup_dev(a * F + b * Fs2.data, T(a * fw.data + b * fw2.data))
    for al in range(d):
        unit = tuple(int(i == al) for i in range(d))
        lhs = T(gradient_array(fw.data, d + al, grid.dr))
        rhs = gradient_array(F, d + al, grid.dr) - q * sum(
            sinc_op("sinc", dA(c, unit), dP[c]) for c in range(d))
        out[f"d_r_{names[al]}"] = _sup_dev(rhs, lhs)
        lhs = T(gradient_array(fw.data, al, grid.dP))
        out[f"d_P_{names[al]}"] = _sup_dev(dP[al], lhs)
        P = grid.P_components()[al]
        lhs = T(P * fw.data)
        A_al = lambda r, tt, al=al: cfg.vector_potential(r, tt)[al]  # noqa: E731
        rhs = P * F + q * sinc_op("sinc", A_al, F) + 0.5 * q * hbar * sum(
            sinc_op("sinc_prime", dA(c, unit), dP[c]) for c in range(d))
        out[f"p_mult_{names[al]}"] = _sup_dev(rhs, lhs)
    return out


@dataclass
class DiagnosticsReport:
    """Scalar diagnostics of one run; arrays go to separate export files."""

    times: list
    norm: list
    boundary_mass: list
    continuity_residual: list = field(default_factory=list)
    continuity_l2: float = float("nan")
    norm_drift: float = 0.0
    gauge_deviation: dict = field(default_factory=dict)
    density: np.ndarray | None = None
    current: list | None = None

    def __post_init__(self):
        for name in ("norm", "boundary_mass", "continuity_residual"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.size and not np.all(np.isfinite(vals)):
                raise ValueError(f"non-finite entries in {name}")

    @property
    def valid(self) -> bool:
        return all(abs(n - 1.0) <= 1e-6 for n in self.norm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("density")
        d.pop("current")
        d["valid"] = self.valid
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def diagnose(traj, cfg: EMConfiguration, chi: Callable | None = None) -> DiagnosticsReport:
    """Collect the standard diagnostics of a trajectory."""
    res = []
    if len(traj.times) >= 3:
        try:
            res = continuity_residual(traj, cfg).tolist()
        except ValueError:
            res = []
    final = traj.final
    rho, j = _density_current(final, cfg)
    gd = {}
    if chi is not None:
        first = traj.snapshots[0]
        if isinstance(first, Wavefunction):
            gd = gauge_deviation(first, cfg, chi)
    return DiagnosticsReport(
        times=list(traj.times), norm=list(traj.log["norm"]),
        boundary_mass=list(traj.log["boundary_mass"]), continuity_residual=res,
        continuity_l2=float(np.sqrt(np.mean(np.square(res)))) if res else float("nan"),
        norm_drift=traj.norm_drift, gauge_deviation=gd, density=rho, current=j)
