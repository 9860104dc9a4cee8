"""Analytic electromagnetic configurations and tau-weighted segment averages.

Field closures take a list of position components (numpy arrays, all
broadcastable to one shape) and a time ``t``.  Vector-valued closures return a
list with one array per spatial component; scalar closures return one array.
In two dimensions the magnetic field is the scalar ``B_z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

Vector = list  # list[np.ndarray], one entry per spatial component
VectorField = Callable[[Sequence[np.ndarray], float], Vector]
ScalarField = Callable[[Sequence[np.ndarray], float], np.ndarray]

DEFAULT_QUAD_ORDER = 16


def _shape(r: Sequence[np.ndarray]) -> tuple[int, ...]:
    return np.broadcast_shapes(*(np.shape(c) for c in r))


def _const(value: float, r: Sequence[np.ndarray]) -> np.ndarray:
    return np.full(_shape(r), float(value))


def _zeros_vec(r, dim):
    return [_const(0.0, r) for _ in range(dim)]


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


# ---------------------------------------------------------------------------
# finite differences (exact for low-degree polynomials)
# ---------------------------------------------------------------------------

def _fd_weights(order: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Central stencil offsets and weights for the ``order``-th derivative."""
    half = npts // 2
    offs = np.arange(-half, half + 1, dtype=float)
    V = np.vander(offs, increasing=True).T
    rhs = np.zeros(len(offs))
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return offs, np.linalg.solve(V, rhs)


def partial_derivative(g: Callable, r: Sequence[np.ndarray], t: float,
                       orders: Sequence[int], h: float = 0.25, npts: int = 7):
    """Mixed partial ``d^orders g`` by tensor-product central differences.

    Exact (to round-off) for polynomials of total degree < ``npts``.  ``g`` may
    be scalar- or vector-valued.
    """
    stencils = [(_fd_weights(o, npts) if o else (np.zeros(1), np.ones(1))) for o in orders]
    total = None
    for idx in np.ndindex(*[len(st[0]) for st in stencils]):
        weight = 1.0
        pt = list(r)
        for a, (i, (offs, w)) in enumerate(zip(idx, stencils)):
            weight *= w[i]
            pt[a] = pt[a] + offs[i] * h
        if weight == 0.0:
            continue
        val = g(pt, t)
        scale = weight / h ** sum(orders)
        if isinstance(val, list):
            term = [scale * v for v in val]
            total = term if total is None else [x + y for x, y in zip(total, term)]
        else:
            total = scale * val if total is None else total + scale * val
    return total


def time_derivative(g: Callable, r, t: float, h: float = 1e-3):
    """Fourth-order central difference in time."""
    c = [(-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)]
    vals = [(w, g(r, t + k * h)) for k, w in c]
    if isinstance(vals[0][1], list):
        return [sum(w * v[a] for w, v in vals) / h for a in range(len(vals[0][1]))]
    return sum(w * v for w, v in vals) / h


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EMConfiguration:
    """Potentials ``(A, phi)`` with their fields ``E = -grad phi - dA/dt``, ``B = curl A``.

    ``E`` and ``B`` may be supplied analytically; otherwise they are derived
    from the potentials by central differences.  ``chi`` is the accumulated
    gauge function relating this configuration to the one it was built from.
    """

    dim: int
    A: VectorField
    phi: ScalarField
    E_field: VectorField | None = None
    B_field: ScalarField | None = None
    dA_dt: VectorField | None = None
    chi: ScalarField | None = None
    q: float = 1.0
    m: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)
    static: bool = True

    def vector_potential(self, r, t=0.0) -> Vector:
        return [np.broadcast_to(a, _shape(r)).astype(float) for a in self.A(r, t)]

    def scalar_potential(self, r, t=0.0) -> np.ndarray:
        return np.broadcast_to(self.phi(r, t), _shape(r)).astype(float)

    def vector_potential_rate(self, r, t=0.0) -> Vector:
        if self.dA_dt is not None:
            return [np.broadcast_to(a, _shape(r)).astype(float) for a in self.dA_dt(r, t)]
        if self.static:
            return _zeros_vec(r, self.dim)
        return time_derivative(self.vector_potential, r, t)

    def E(self, r, t=0.0) -> Vector:
        if self.E_field is not None:
            return [np.broadcast_to(e, _shape(r)).astype(float) for e in self.E_field(r, t)]
        return electric_from_potentials(self, r, t)

    def B(self, r, t=0.0) -> np.ndarray:
        """Scalar ``B_z`` in 2D, identically zero in 1D."""
        if self.dim == 1:
            return _const(0.0, r)
        if self.B_field is not None:
            return np.broadcast_to(self.B_field(r, t), _shape(r)).astype(float)
        return magnetic_from_potentials(self, r, t)

    def lorentz_force(self, P: Sequence[np.ndarray], r, t=0.0) -> Vector:
        """``qE + (q/m) P x B`` for in-plane ``P`` and ``B = B_z e_z``."""
        E = self.E(r, t)
        F = [self.q * e for e in E]
        if self.dim == 2:
            B = self.B(r, t)
            F[0] = F[0] + (self.q / self.m) * P[1] * B
            F[1] = F[1] - (self.q / self.m) * P[0] * B
        return F


def electric_from_potentials(cfg: EMConfiguration, r, t=0.0) -> Vector:
    grad_phi = [partial_derivative(cfg.scalar_potential, r, t, _unit(a, cfg.dim))
                for a in range(cfg.dim)]
    dA = cfg.vector_potential_rate(r, t)
    return [-g - a for g, a in zip(grad_phi, dA)]


def magnetic_from_potentials(cfg: EMConfiguration, r, t=0.0) -> np.ndarray:
    if cfg.dim == 1:
        return _const(0.0, r)
    dAy_dx = partial_derivative(lambda rr, tt: cfg.vector_potential(rr, tt)[1], r, t, (1, 0))
    dAx_dy = partial_derivative(lambda rr, tt: cfg.vector_potential(rr, tt)[0], r, t, (0, 1))
    return dAy_dx - dAx_dy


def _unit(a: int, dim: int) -> tuple[int, ...]:
    return tuple(1 if b == a else 0 for b in range(dim))


def consistency_error(cfg: EMConfiguration, r, t=0.0) -> float:
    """Sup-norm mismatch between the stored fields and those derived from the potentials."""
    E_a = cfg.E(r, t)
    E_fd = electric_from_potentials(cfg, r, t)
    err = max(float(np.max(np.abs(a - b))) for a, b in zip(E_a, E_fd))
    if cfg.dim == 2:
        err = max(err, float(np.max(np.abs(cfg.B(r, t) - magnetic_from_potentials(cfg, r, t)))))
    return err


def gauge_transform(cfg: EMConfiguration, chi: ScalarField,
                    grad_chi: VectorField | None = None,
                    dchi_dt: ScalarField | None = None) -> EMConfiguration:
    """``A' = A + grad chi``, ``phi' = phi - d chi/dt``; ``E`` and ``B`` carry over."""
    d = cfg.dim
    if grad_chi is None:
        def grad_chi(r, t):
            return [partial_derivative(chi, r, t, _unit(a, d)) for a in range(d)]
    if dchi_dt is None:
        def dchi_dt(r, t):
            return time_derivative(chi, r, t)

    chi0 = cfg.chi

    def A(r, t):
        return [a + g for a, g in zip(cfg.vector_potential(r, t), grad_chi(r, t))]

    def phi(r, t):
        return cfg.scalar_potential(r, t) - dchi_dt(r, t)

    def chi_total(r, t):
        base = chi0(r, t) if chi0 is not None else 0.0
        return base + chi(r, t)

    def dA_dt(r, t):
        base = cfg.vector_potential_rate(r, t)
        extra = [time_derivative(lambda rr, tt, a=a: grad_chi(rr, tt)[a], r, t) for a in range(d)]
        return [b + e for b, e in zip(base, extra)]

    E_field = cfg.E_field or (lambda r, t: electric_from_potentials(cfg, r, t))
    B_field = cfg.B_field
    if B_field is None and d == 2:
        B_field = lambda r, t: magnetic_from_potentials(cfg, r, t)  # noqa: E731
    return replace(cfg, A=A, phi=phi, dA_dt=dA_dt, chi=chi_total, static=cfg.static,
                   E_field=E_field, B_field=B_field, name=cfg.name + "+gauge")


# ---------------------------------------------------------------------------
# segment averages
# ---------------------------------------------------------------------------

def moment_avg(g: Callable, r: Sequence, s: Sequence, k: int, t: float = 0.0,
               order: int = DEFAULT_QUAD_ORDER):
    """``int_{-1}^{1} g(r + s tau / 2) tau^k dtau`` by Gauss-Legendre quadrature.

    ``r`` and ``s`` are lists of components; they only need to broadcast.  The
    result has the structure of ``g``'s output (array or list of arrays).
    """
    if k not in (0, 1):
        raise ValueError(f"moment order must be 0 or 1, got {k}")
    nodes, weights = gauss_legendre(order)
    total = None
    for tau, w in zip(nodes, weights):
        pt = [np.asarray(rc) + 0.5 * tau * np.asarray(sc) for rc, sc in zip(r, s)]
        val = g(pt, t)
        c = w * tau ** k
        if isinstance(val, list):
            term = [c * np.asarray(v) for v in val]
            total = term if total is None else [x + y for x, y in zip(total, term)]
        else:
            total = c * np.asarray(val) if total is None else total + c * np.asarray(val)
    return total


def line_avg_A(cfg: EMConfiguration, r, s, t: float = 0.0,
               order: int = DEFAULT_QUAD_ORDER) -> Vector:
    """Mean of ``A`` along the segment ``r - s/2 .. r + s/2``."""
    return [0.5 * a for a in moment_avg(cfg.vector_potential, r, s, 0, t, order)]


# ---------------------------------------------------------------------------
# scenario catalog
# ---------------------------------------------------------------------------

def _vec(values, dim):
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.size == 1 and dim > 1:
        v = np.concatenate([v, np.zeros(dim - 1)])
    if v.size != dim:
        raise ValueError(f"expected {dim} components, got {v.size}")
    return v


def free(dim=1, q=1.0, m=1.0) -> EMConfiguration:
    return EMConfiguration(
        dim=dim, A=lambda r, t: _zeros_vec(r, dim), phi=lambda r, t: _const(0.0, r),
        E_field=lambda r, t: _zeros_vec(r, dim), B_field=lambda r, t: _const(0.0, r),
        q=q, m=m, name="free", params={})


def uniform_E(dim=1, E=1.0, q=1.0, m=1.0) -> EMConfiguration:
    E0 = _vec(E, dim)
    return EMConfiguration(
        dim=dim, A=lambda r, t: _zeros_vec(r, dim),
        phi=lambda r, t: -sum(e * x for e, x in zip(E0, r)) + _const(0.0, r),
        E_field=lambda r, t: [_const(e, r) for e in E0],
        B_field=lambda r, t: _const(0.0, r),
        q=q, m=m, name="uniform_E", params={"E": E0.tolist()})


def uniform_B_symmetric(B=1.0, q=1.0, m=1.0, E=(0.0, 0.0)) -> EMConfiguration:
    E0 = _vec(E, 2)
    return EMConfiguration(
        dim=2, A=lambda r, t: [-0.5 * B * r[1] + 0 * r[0], 0.5 * B * r[0] + 0 * r[1]],
        phi=lambda r, t: -(E0[0] * r[0] + E0[1] * r[1]),
        E_field=lambda r, t: [_const(E0[0], r), _const(E0[1], r)],
        B_field=lambda r, t: _const(B, r),
        q=q, m=m, name="uniform_B_symmetric", params={"B": B, "E": E0.tolist()})


def uniform_B_landau(B=1.0, q=1.0, m=1.0, E=(0.0, 0.0)) -> EMConfiguration:
    E0 = _vec(E, 2)
    return EMConfiguration(
        dim=2, A=lambda r, t: [-B * r[1] + 0 * r[0], _const(0.0, r)],
        phi=lambda r, t: -(E0[0] * r[0] + E0[1] * r[1]),
        E_field=lambda r, t: [_const(E0[0], r), _const(E0[1], r)],
        B_field=lambda r, t: _const(B, r),
        q=q, m=m, name="uniform_B_landau", params={"B": B, "E": E0.tolist()})


def symmetric_to_landau_chi(B=1.0) -> ScalarField:
    """Gauge function taking the symmetric gauge to the Landau gauge ``A = (-B y, 0)``."""
    return lambda r, t: -0.5 * B * r[0] * r[1]


def linear_B(B0=1.0, g=0.1, q=1.0, m=1.0, gauge="landau") -> EMConfiguration:
    """``B_z = B0 + g x``; ``gauge`` is ``'landau'`` (A_x only) or ``'transverse'`` (A_y only)."""
    if gauge == "landau":
        def A(r, t):
            return [-(B0 + g * r[0]) * r[1], _const(0.0, r)]
    elif gauge == "transverse":
        def A(r, t):
            return [_const(0.0, r), B0 * r[0] + 0.5 * g * r[0] ** 2 + 0 * r[1]]
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    return EMConfiguration(
        dim=2, A=A, phi=lambda r, t: _const(0.0, r),
        E_field=lambda r, t: _zeros_vec(r, 2),
        B_field=lambda r, t: B0 + g * r[0] + 0 * r[1],
        q=q, m=m, name="linear_B", params={"B0": B0, "g": g, "gauge": gauge})


def harmonic_well(dim=1, omega=1.0, center=0.0, q=1.0, m=1.0, B=0.0) -> EMConfiguration:
    """``q phi = m omega^2 |r - c|^2 / 2``, optionally with a uniform symmetric-gauge ``B``."""
    c = _vec(center, dim)
    k = m * omega ** 2 / q

    def phi(r, t):
        return 0.5 * k * sum((x - ci) ** 2 for x, ci in zip(r, c))

    def E(r, t):
        return [-k * (x - ci) for x, ci in zip(r, c)]

    if dim == 2:
        def A(r, t):
            return [-0.5 * B * r[1] + 0 * r[0], 0.5 * B * r[0] + 0 * r[1]]
        B_field = lambda r, t: _const(B, r)  # noqa: E731
    else:
        A = lambda r, t: _zeros_vec(r, dim)  # noqa: E731
        B_field = None
    return EMConfiguration(dim=dim, A=A, phi=phi, E_field=E, B_field=B_field,
                           q=q, m=m, name="harmonic_well",
                           params={"omega": omega, "center": c.tolist(), "B": B})


def quartic_well(dim=1, a=1.0, b=0.05, q=1.0, m=1.0) -> EMConfiguration:
    """Anharmonic well ``q phi = a |r|^2 / 2 + b |r|^4 / 4`` (cubic force, nonclassical corrections)."""
    def phi(r, t):
        rr = sum(x ** 2 for x in r)
        return (0.5 * a * rr + 0.25 * b * rr ** 2) / q

    def E(r, t):
        rr = sum(x ** 2 for x in r)
        return [-(a + b * rr) * x / q for x in r]

    B_field = (lambda r, t: _const(0.0, r)) if dim == 2 else None
    return EMConfiguration(dim=dim, A=lambda r, t: _zeros_vec(r, dim), phi=phi, E_field=E,
                           B_field=B_field, q=q, m=m, name="quartic_well",
                           params={"a": a, "b": b})


CATALOG: dict[str, Callable[..., EMConfiguration]] = {
    "free": free,
    "uniform_E": uniform_E,
    "uniform_B_symmetric": uniform_B_symmetric,
    "uniform_B_landau": uniform_B_landau,
    "linear_B": linear_B,
    "harmonic_well": harmonic_well,
    "quartic_well": quartic_well,
}


def build_scenario(name: str, **params) -> EMConfiguration:
    """Look up a catalog builder by name."""
    try:
        builder = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(CATALOG)}") from None
    return builder(**params)
