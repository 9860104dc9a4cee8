"""Time integration: the weak-form spectral integrator and two independent oracles.

* :func:`evolve_weak_giwe`: Strang splitting: exact spectral free streaming
  around an RK4 step of the kernel terms.
* :func:`evolve_schrodinger`: Crank-Nicolson for the minimal-coupling
  Hamiltonian with centred finite differences; the reference dynamics.
* :func:`evolve_liouville`: classical characteristics traced backward with
  RK4 and spectral (non-uniform FFT) interpolation at the foot points.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import EMConfiguration
from .grid import BoundaryMassWarning, PhaseGrid, boundary_mass, make_grid, wavenumbers
from .kernels import KernelSet, RealWeakOperator, apply_weak_rhs, build_kernels
from .transforms import PhaseSpaceFunction, Wavefunction, psi_to_rho, weyl, ws

logger = logging.getLogger(__name__)

ENGINES = ("weak_giwe", "schrodinger", "liouville")
CFL_LIMIT = 0.5
GROWTH_LIMIT = 10.0
#: relative size of a periodic image at out-of-box foot points that triggers a warning
OUTSIDE_TOL = 1e-8


class NumericalInstability(RuntimeError):
    """The state blew up during a step."""


class CFLWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    t_final: float
    scheme: str = "strang_rk4"
    stride: int = 1
    engine: str = "weak_giwe"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_final) and self.t_final >= 0):
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")
        if self.scheme != "strang_rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; expected one of {ENGINES}")
        if int(self.stride) < 1:
            raise ValueError("stride must be >= 1")

    @property
    def n_steps(self) -> int:
        n = self.t_final / self.dt
        steps = int(round(n))
        if abs(n - steps) > 1e-9 * max(1.0, n):
            raise ValueError(f"t_final={self.t_final} is not a multiple of dt={self.dt}")
        return steps

    def with_dt(self, dt: float) -> "EvolutionConfig":
        return EvolutionConfig(dt=dt, t_final=self.t_final, scheme=self.scheme,
                               stride=self.stride, engine=self.engine)


@dataclass
class Trajectory:
    """Snapshots in time order with a conserved-quantity log per snapshot."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    log: dict = field(default_factory=lambda: {"norm": [], "boundary_mass": []})
    engine: str = ""

    def append(self, t: float, state):
        if self.times and not t > self.times[-1]:
            raise ValueError(f"snapshot time {t} does not follow {self.times[-1]}")
        self.times.append(float(t))
        self.snapshots.append(state)
        if isinstance(state, Wavefunction):
            self.log["norm"].append(state.norm)
            self.log["boundary_mass"].append(boundary_mass(state.density(), range(state.grid.dim)))
        else:
            self.log["norm"].append(state.norm)
            self.log["boundary_mass"].append(
                boundary_mass(state.data, range(2 * state.grid.dim)))

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def norm_drift(self) -> float:
        n = np.asarray(self.log["norm"])
        return float(np.max(np.abs(n - n[0]))) if n.size else 0.0


def fs_from_psi(psi: Wavefunction, cfg: EMConfiguration) -> PhaseSpaceFunction:
    """Stratonovich function of a pure state."""
    return ws(psi_to_rho(psi), cfg, t=psi.t).real()


# ---------------------------------------------------------------------------
# weak-form integrator
# ---------------------------------------------------------------------------

def _stream_phase(grid: PhaseGrid, dt: float, m: float) -> np.ndarray:
    phase = np.ones((1,) * (2 * grid.dim), dtype=complex)
    k = wavenumbers(grid.n_r, grid.dr)
    for a, P in enumerate(grid.P_components()):
        shape = [1] * (2 * grid.dim)
        shape[grid.dim + a] = grid.n_r
        phase = phase * np.exp(-1j * P * k.reshape(shape) * dt / m)
    return phase


def free_stream(F: np.ndarray, grid: PhaseGrid, dt: float, m: float = 1.0,
                phase: np.ndarray | None = None) -> np.ndarray:
    """Exact solution of ``dF/dt = -(P/m).grad_r F`` over ``dt`` (spectral in r).

    The Nyquist mode does not move, matching the spectral gradient.
    """
    if phase is None:
        phase = _stream_phase(grid, dt, m)
    axes = grid.r_axes
    out = sfft.ifftn(sfft.fftn(F, axes=axes) * phase, axes=axes)
    return out.real if np.isrealobj(F) else out


def _rk4(F, rhs, dt):
    k1 = rhs(F)
    k2 = rhs(F + 0.5 * dt * k1)
    k3 = rhs(F + 0.5 * dt * k2)
    k4 = rhs(F + dt * k3)
    return F + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class _RealStrangStepper:
    """Strang steps for real states kept in FFT order on the momentum axes."""

    def __init__(self, kernels: KernelSet, dt: float, m: float):
        g = kernels.grid
        self.grid, self.dt = g, dt
        self.op = RealWeakOperator(kernels)
        d = g.dim
        k = wavenumbers(g.n_r, g.dr)
        kh = np.abs(k[: g.n_r // 2 + 1])
        arg = np.zeros((1,) * (2 * d))
        for a, P in enumerate(self.op.P):
            shape = [1] * (2 * d)
            shape[d + a] = g.n_r if a < d - 1 else kh.size
            kk = k if a < d - 1 else kh
            arg = arg + P * kk.reshape(shape)
        self.phase = np.exp(-0.5j * dt / m * arg)

    def stream(self, F):
        g = self.grid
        axes = g.r_axes
        return sfft.irfftn(sfft.rfftn(F, axes=axes) * self.phase, s=g.r_shape, axes=axes)

    def __call__(self, F):
        F = self.stream(F)
        if not self.op.empty:
            F = _rk4(F, self.op, self.dt)
        return self.stream(F)


def step_weak_giwe(Fs, kernels: KernelSet, dt: float, m: float = 1.0,
                   phase: np.ndarray | None = None):
    """One Strang step: half streaming, RK4 kernel step, half streaming.

    Accepts a :class:`PhaseSpaceFunction` or a raw array and returns the same type.
    """
    grid = kernels.grid
    data = Fs.data if isinstance(Fs, PhaseSpaceFunction) else np.asarray(Fs)
    if phase is None:
        phase = _stream_phase(grid, 0.5 * dt, m)
    before = np.max(np.abs(data))
    out = free_stream(data, grid, 0.5 * dt, m, phase)
    if any(u is not None for u in (kernels.u0, kernels.u1, kernels.um1, kernels.u2)):
        out = _rk4(out, lambda F: apply_weak_rhs(F, kernels), dt)
    out = free_stream(out, grid, 0.5 * dt, m, phase)
    _guard(before, np.max(np.abs(out)))
    if isinstance(Fs, PhaseSpaceFunction):
        return Fs.with_data(out, t=Fs.t + dt)
    return out


def _guard(before: float, after: float, span: str = "in one step"):
    if not np.isfinite(after) or (before > 0 and after > GROWTH_LIMIT * before):
        raise NumericalInstability(f"sup-norm grew from {before:.3e} to {after:.3e} {span}")


def check_cfl(grid: PhaseGrid, dt: float, m: float, kernels: KernelSet | None = None) -> float:
    """Warn when ``dt P_max / (m dr)`` exceeds the CFL limit; returns the number."""
    cfl = dt * grid.P_max / (m * grid.dr)
    if cfl > CFL_LIMIT:
        warnings.warn(f"CFL number {cfl:.3f} exceeds {CFL_LIMIT}", CFLWarning, stacklevel=3)
    if kernels is not None and dt * kernels.max_rate > 2.8:
        warnings.warn(f"kernel rate x dt = {dt * kernels.max_rate:.2f} is outside the "
                      "RK4 stability region", CFLWarning, stacklevel=3)
    return cfl


def evolve_weak_giwe(F0: PhaseSpaceFunction, cfg: EMConfiguration, evo: EvolutionConfig,
                     kernels: KernelSet | None = None, order: int | None = None) -> Trajectory:
    """Integrate the weak-form GIWE from ``F0`` over ``evo.t_final``."""
    grid = F0.grid
    if kernels is None:
        kernels = build_kernels(cfg, grid, **({} if order is None else {"order": order}))
    check_cfl(grid, evo.dt, cfg.m, kernels)
    traj = Trajectory(engine="weak_giwe")
    real = F0.imag_residue() < 1e-10
    F = np.real(F0.data) if real else F0.data
    traj.append(F0.t, F0.with_data(F))
    n = evo.n_steps
    if real:
        stepper = _RealStrangStepper(kernels, evo.dt, cfg.m)
        to_out = stepper.op.from_fft_order
        F = stepper.op.to_fft_order(F)
    else:
        phase = _stream_phase(grid, 0.5 * evo.dt, cfg.m)
        stepper = lambda G: step_weak_giwe(G, kernels, evo.dt, cfg.m, phase)  # noqa: E731
        to_out = lambda G: G  # noqa: E731
    initial = np.max(np.abs(F))
    for i in range(1, n + 1):
        before = np.max(np.abs(F))
        F = stepper(F)
        after = np.max(np.abs(F))
        _guard(before, after)
        # slow exponential growth (an RK4 rate just outside the stability region)
        # stays below the per-step limit; compare against the initial state as well
        _guard(initial, after, f"since t={F0.t:g} (step {i})")
        if i % evo.stride == 0 or i == n:
            t = F0.t + i * evo.dt
            traj.append(t, F0.with_data(to_out(F), t=t))
    return traj


# ---------------------------------------------------------------------------
# Schrodinger oracle
# ---------------------------------------------------------------------------

_FD1 = {2: [(1, 0.5)], 4: [(1, 2 / 3), (2, -1 / 12)],
        6: [(1, 3 / 4), (2, -3 / 20), (3, 1 / 60)]}
_FD2 = {2: (-2.0, [(1, 1.0)]), 4: (-5 / 2, [(1, 4 / 3), (2, -1 / 12)]),
        6: (-49 / 18, [(1, 3 / 2), (2, -3 / 20), (3, 1 / 90)])}


def _periodic_1d(n: int, h: float, fd_order: int):
    I = sp.identity(n, format="csr")
    D = sp.csr_matrix((n, n))
    for k, w in _FD1[fd_order]:
        D = D + w * (sp.eye(n, k=k) + sp.eye(n, k=k - n) - sp.eye(n, k=-k) - sp.eye(n, k=n - k))
    c0, offs = _FD2[fd_order]
    D2 = c0 * I
    for k, w in offs:
        D2 = D2 + w * (sp.eye(n, k=k) + sp.eye(n, k=k - n) + sp.eye(n, k=-k) + sp.eye(n, k=n - k))
    return D / h, D2 / h ** 2


def hamiltonian(grid: PhaseGrid, cfg: EMConfiguration, t: float = 0.0,
                fd_order: int = 4) -> sp.csr_matrix:
    """``(1/2m)[-hbar^2 lap + i hbar q (D.A + A.D) + q^2 A^2] + q phi`` (periodic, Hermitian)."""
    if fd_order not in _FD1:
        raise ValueError(f"fd_order must be one of {sorted(_FD1)}")
    n, d = grid.n_r, grid.dim
    D1, D2 = _periodic_1d(n, grid.dr, fd_order)
    I = sp.identity(n, format="csr")
    r = grid.r_mesh()
    A = cfg.vector_potential(r, t)
    hb, q, m = grid.hbar, cfg.q, cfg.m
    N = n ** d
    H = sp.csr_matrix((N, N), dtype=complex)
    for a in range(d):
        ops = [I] * d
        ops[a] = D1
        Da = ops[0] if d == 1 else sp.kron(ops[0], ops[1], format="csr")
        ops[a] = D2
        Laa = ops[0] if d == 1 else sp.kron(ops[0], ops[1], format="csr")
        Aa = sp.diags(A[a].ravel())
        H = H + (-hb ** 2 * Laa + 1j * hb * q * (Da @ Aa + Aa @ Da) + q ** 2 * Aa @ Aa) / (2 * m)
    H = H + sp.diags(q * cfg.scalar_potential(r, t).ravel())
    return H.tocsc()


def _refine_grid(grid: PhaseGrid, refine: int) -> PhaseGrid:
    return make_grid(grid.dim, grid.n_r * refine, grid.n_s, grid.L_r, grid.L_s, grid.hbar)


def _fourier_resample(data: np.ndarray, n_new: int) -> np.ndarray:
    """Band-limited resampling of a periodic array onto ``n_new`` points per axis."""
    n = data.shape[0]
    if n_new == n:
        return data
    spec = sfft.fftshift(sfft.fftn(data))
    pad = (n_new - n) // 2
    big = np.pad(spec, [(pad, n_new - n - pad)] * data.ndim)
    return sfft.ifftn(sfft.ifftshift(big)) * (n_new / n) ** data.ndim


class _CNPropagator:
    def __init__(self, H, dt: float, hbar: float):
        N = H.shape[0]
        I = sp.identity(N, format="csc", dtype=complex)
        a = 0.5j * dt / hbar
        self.lu = spla.splu((I + a * H).tocsc())
        self.rhs = (I - a * H).tocsr()

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        out = self.lu.solve(self.rhs @ psi)
        if not np.all(np.isfinite(out)):
            raise NumericalInstability("Crank-Nicolson solve returned non-finite values")
        return out


def evolve_schrodinger(psi0: Wavefunction, cfg: EMConfiguration, evo: EvolutionConfig,
                       fd_order: int = 4, refine: int = 1, substeps: int = 1) -> Trajectory:
    """Crank-Nicolson propagation of ``psi0``; snapshots live on ``psi0``'s grid.

    ``refine`` runs the solver on a grid ``refine`` times finer in r (initial
    state Fourier-interpolated, snapshots subsampled); ``substeps`` splits each
    ``dt`` into that many CN steps.  Both only sharpen the reference.
    """
    grid = psi0.grid
    fine = _refine_grid(grid, refine)
    psi = _fourier_resample(psi0.data, fine.n_r)
    prop = _CNPropagator(hamiltonian(fine, cfg, psi0.t, fd_order), evo.dt / substeps, grid.hbar)
    shape = psi.shape
    vec = psi.ravel()
    traj = Trajectory(engine="schrodinger")
    coarse = (slice(None, None, refine),) * grid.dim
    traj.append(psi0.t, psi0)
    n = evo.n_steps
    for i in range(1, n + 1):
        for _ in range(substeps):
            vec = prop(vec)
        if i % evo.stride == 0 or i == n:
            t = psi0.t + i * evo.dt
            traj.append(t, Wavefunction(grid, vec.reshape(shape)[coarse], t))
    return traj


def ground_state(grid: PhaseGrid, cfg: EMConfiguration, guess: Wavefunction | None = None,
                 dtau: float = 0.5, tol: float = 1e-12, max_iter: int = 5000,
                 fd_order: int = 4) -> tuple[Wavefunction, float]:
    """Lowest eigenstate of the discrete Hamiltonian by implicit imaginary-time relaxation.

    Returns the normalized state and its energy; stops when the eigen-residual
    ``||H psi - E psi||`` drops below ``tol``.
    """
    from .transforms import gaussian_wavefunction
    H = hamiltonian(grid, cfg, 0.0, fd_order)
    psi = (guess or gaussian_wavefunction(grid)).data.ravel().astype(complex)
    # backward Euler: 1/(1 + dtau E) decreases monotonically in E, so the lowest
    # level always dominates (the Crank-Nicolson factor tends to -1 for stiff modes
    # and would favour them over the ground state)
    N = H.shape[0]
    lu = spla.splu((sp.identity(N, format="csc", dtype=complex) + (dtau / grid.hbar) * H).tocsc())
    prop = lu.solve
    dV = grid.dV_r
    E = np.nan
    for it in range(max_iter):
        psi = prop(psi)
        psi /= np.sqrt(np.vdot(psi, psi).real * dV)
        Hpsi = H @ psi
        E = np.vdot(psi, Hpsi).real * dV
        res = np.sqrt(np.vdot(Hpsi - E * psi, Hpsi - E * psi).real * dV)
        if res < tol:
            logger.debug("ground state converged after %d iterations", it + 1)
            break
    else:
        warnings.warn(f"imaginary-time relaxation stopped at residual {res:.2e}", stacklevel=2)
    return Wavefunction(grid, psi.reshape(grid.r_shape)), float(E)


def gauge_dependent_reference(psi0: Wavefunction, cfg: EMConfiguration, evo: EvolutionConfig,
                              **kwargs) -> Trajectory:
    """Wigner functions ``f_w(t)`` of the Schrodinger flow (gauge-dependent by construction)."""
    traj = evolve_schrodinger(psi0, cfg, evo, **kwargs)
    out = Trajectory(engine="gauge_dependent_reference")
    for t, psi in zip(traj.times, traj.snapshots):
        out.append(t, weyl(psi_to_rho(psi)).real())
    return out


# ---------------------------------------------------------------------------
# Liouville characteristics
# ---------------------------------------------------------------------------

def _characteristics_rhs(cfg: EMConfiguration, d: int):
    def rhs(state, t):
        r, P = state[:d], state[d:]
        force = cfg.lorentz_force(list(P), list(r), t)
        return np.concatenate([np.stack([p / cfg.m for p in P]), np.stack(force)])
    return rhs


def trace_back(grid: PhaseGrid, cfg: EMConfiguration, duration: float, dt: float,
               t_end: float = 0.0) -> np.ndarray:
    """Foot points ``(r, P)`` reached by integrating backward from every grid node.

    Returns an array of shape ``(2d,) + grid.shape`` (positions first).
    """
    d = grid.dim
    r = [np.broadcast_to(c, grid.shape) for c in grid.r_components()]
    P = [np.broadcast_to(c, grid.shape) for c in grid.P_components()]
    state = np.stack(r + P).reshape(2 * d, -1).astype(float)
    rhs = _characteristics_rhs(cfg, d)
    n = max(1, int(round(duration / dt)))
    h = -duration / n
    t = t_end
    for _ in range(n):
        k1 = rhs(state, t)
        k2 = rhs(state + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(state + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(state + h * k3, t + h)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return state.reshape((2 * d,) + grid.shape)


def _to_angle(x: np.ndarray, lo: float, width: float) -> np.ndarray:
    return np.mod(x - lo, width) * (2 * np.pi / width) - np.pi


def spectral_interpolate(data: np.ndarray, grid: PhaseGrid, points: np.ndarray,
                         eps: float = 1e-10) -> np.ndarray:
    """Evaluate the band-limited interpolant of a real ``(P x r)`` array at ``points``.

    ``points`` has shape ``(2d, M)`` ordered ``(r..., P...)``.  Uses finufft
    type-2 transforms; the 4-D case contracts the last momentum axis after
    a batched 3-D transform.
    """
    import finufft

    d = grid.dim
    # array axis order is (P..., r...); reorder coordinates to match
    coords = [points[d + a] for a in range(d)] + [points[a] for a in range(d)]
    los = [-grid.P_max] * d + [-grid.L_r] * d
    widths = [grid.n_s * grid.dP] * d + [2 * grid.L_r] * d
    theta = [_to_angle(c, lo, w) for c, lo, w in zip(coords, los, widths)]
    spec = sfft.fftn(data)
    coeffs = spec
    for ax, n in enumerate(data.shape):
        sign = np.where(np.arange(n) % 2, -1.0, 1.0)
        shape = [1] * data.ndim
        shape[ax] = n
        coeffs = coeffs * sign.reshape(shape)
    coeffs = sfft.fftshift(coeffs) / data.size
    coeffs = np.ascontiguousarray(coeffs.astype(complex))
    if data.ndim == 2:
        out = finufft.nufft2d2(theta[0], theta[1], coeffs, eps=eps, isign=1)
    elif data.ndim == 4:
        n4 = data.shape[3]
        batch = np.ascontiguousarray(np.moveaxis(coeffs, 3, 0))
        partial = finufft.nufft3d2(theta[0], theta[1], theta[2], batch, eps=eps, isign=1)
        k4 = np.arange(n4) - n4 // 2
        out = np.zeros(theta[3].shape, dtype=complex)
        for j, k in enumerate(k4):
            out += partial[j] * np.exp(1j * k * theta[3])
    else:
        raise ValueError(f"unsupported dimensionality {data.ndim}")
    return out.real


def evolve_liouville(F0: PhaseSpaceFunction, cfg: EMConfiguration, evo: EvolutionConfig,
                     eps: float = 1e-10) -> Trajectory:
    """Semi-Lagrangian classical transport, one characteristic sweep per snapshot interval."""
    grid = F0.grid
    traj = Trajectory(engine="liouville")
    F = np.real(F0.data)
    traj.append(F0.t, F0.with_data(F))
    n = evo.n_steps
    marks = [i for i in range(1, n + 1) if i % evo.stride == 0 or i == n]
    prev = 0
    for i in marks:
        duration = (i - prev) * evo.dt
        feet = trace_back(grid, cfg, duration, evo.dt, t_end=F0.t + i * evo.dt)
        flat = feet.reshape(2 * grid.dim, -1)
        outside = (np.any(np.abs(flat[: grid.dim]) > grid.L_r, axis=0)
                   | np.any(np.abs(flat[grid.dim:]) > grid.P_max, axis=0))
        vals = spectral_interpolate(F, grid, flat, eps)
        if outside.any():
            # the state is assumed negligible outside the box; a foot point there
            # must not pick up the periodic image from the opposite side
            leak = float(np.max(np.abs(vals[outside])))
            if leak > OUTSIDE_TOL * float(np.max(np.abs(F))):
                warnings.warn(f"characteristic foot points left the domain where the state is "
                              f"not negligible (periodic image {leak:.1e}); zeroed",
                              BoundaryMassWarning, stacklevel=2)
            vals[outside] = 0.0
        F = vals.reshape(grid.shape)
        traj.append(F0.t + i * evo.dt, F0.with_data(F, t=F0.t + i * evo.dt))
        prev = i
    return traj
