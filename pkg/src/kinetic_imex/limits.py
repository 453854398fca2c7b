"""Fluid limits: Euler fluxes, Chapman-Enskog corrections and the limit scheme."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .bgk import CollisionFrequencyPolicy
from .kinetic import KineticError, MomentSet, SpatialGrid, VelocityGrid, maxwellian, moment_array
from .schemes import ImexMultistepScheme
from .transport import TransportConfig, advection_derivative, flux_derivative

log = logging.getLogger(__name__)


@dataclass
class EulerState:
    """Conserved fluid variables U = (rho, rho u, E) per cell."""

    mom: MomentSet
    grid: SpatialGrid

    def __post_init__(self):
        if len(self.mom) != self.grid.nx:
            raise KineticError(f"state has {len(self.mom)} cells, grid has {self.grid.nx}")
        self.mom.check()

    @property
    def U(self) -> np.ndarray:
        return self.mom.as_array()

    @property
    def dv(self) -> int:
        return self.mom.dv

    @classmethod
    def from_array(cls, U: np.ndarray, grid: SpatialGrid) -> "EulerState":
        return cls(MomentSet.from_array(U), grid)

    @classmethod
    def from_primitive(cls, rho, u, T, grid: SpatialGrid, dv: int) -> "EulerState":
        return cls(MomentSet.from_primitive(rho, u, T, dv), grid)


def euler_flux(U: EulerState) -> np.ndarray:
    """x-flux (rho u_x, rho u_x u + p e_x, (E + p) u_x), shape (nx, dv + 2)."""
    m = U.mom
    u, p = m.u, m.p
    ux = u[:, 0]
    mom_flux = m.rho[:, None] * ux[:, None] * u
    mom_flux[:, 0] += p
    return np.column_stack([m.rho * ux, mom_flux, (m.E + p) * ux])


def ddx(a: np.ndarray, dx: float) -> np.ndarray:
    """4th-order centred periodic derivative along axis 0."""
    r = lambda k: np.roll(a, -k, axis=0)  # noqa: E731
    return (8 * (r(1) - r(-1)) - (r(2) - r(-2))) / (12 * dx)


def strain(U: EulerState) -> np.ndarray:
    """sigma(u) = (grad u + grad u^T)/2 - (div u / dv) I, shape (nx, dv, dv); only d/dx is nonzero."""
    dv = U.dv
    du = ddx(U.mom.u, U.grid.dx)  # d u_j / dx
    grad = np.zeros((U.grid.nx, dv, dv))
    grad[:, 0, :] = du  # grad[i, j] = d_i u_j
    sig = 0.5 * (grad + np.swapaxes(grad, 1, 2))
    sig -= (du[:, 0] / dv)[:, None, None] * np.eye(dv)[None]
    return sig


def _scaled_velocity(U: EulerState, vgrid: VelocityGrid):
    pad = (slice(None),) + (None,) * vgrid.dv
    sT = np.sqrt(U.mom.T)[pad]
    V = [(vgrid.v[d][None] - U.mom.u[:, d][pad]) / sT for d in range(vgrid.dv)]
    V2 = sum(Vd * Vd for Vd in V)
    return V, V2


def ce_A(V, V2, dv):
    """A(V) = V V^T - |V|^2/dv I as a nested list of arrays."""
    return [[V[i] * V[j] - (V2 / dv if i == j else 0.0) for j in range(dv)] for i in range(dv)]


def ce_B(V, V2, dv):
    return [0.5 * (V2 - (dv + 2)) * Vi for Vi in V]


def chapman_enskog_g(U: EulerState, vgrid: VelocityGrid, mu: np.ndarray) -> np.ndarray:
    """First-order correction g = -(1/mu) M (A(V):sigma(u) + 2 B(V).grad sqrt T)."""
    dv = vgrid.dv
    if U.dv != dv:
        raise KineticError("state and velocity grid dimensions differ")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (U.grid.nx,))
    if np.any(~(mu > 0)):
        raise KineticError("collision frequency must be positive")
    pad = (slice(None),) + (None,) * dv
    V, V2 = _scaled_velocity(U, vgrid)
    sig = strain(U)
    dsT = ddx(np.sqrt(U.mom.T), U.grid.dx)
    if not (np.all(np.isfinite(sig)) and np.all(np.isfinite(dsT))):
        raise KineticError("non-finite gradients in Chapman-Enskog correction")
    A = ce_A(V, V2, dv)
    B = ce_B(V, V2, dv)
    inner = 2 * B[0] * dsT[pad]
    for i in range(dv):
        for j in range(dv):
            inner = inner + A[i][j] * sig[:, i, j][pad]
    return -maxwellian(U.mom, vgrid) * inner / mu[pad]


def maxwellian_tangent(mom: MomentSet, h: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """dM[U] applied to the moment increment of h: the projection of h onto the Maxwellian tangent space."""
    dv = vgrid.dv
    pad = (slice(None),) + (None,) * dv
    d = moment_array(h, vgrid)
    rho, u, T = mom.rho, mom.u, mom.T
    drho = d[:, 0]
    du = (d[:, 1:-1] - u * drho[:, None]) / rho[:, None]
    dT = (2.0 / (dv * rho)) * (d[:, -1] - 0.5 * np.sum(u * u, axis=1) * drho
                               - rho * np.sum(u * du, axis=1) - 0.5 * dv * T * drho)
    Vdu, V2 = 0.0, 0.0
    for k, vk in enumerate(vgrid.v):
        V = vk[None] - u[:, k][pad]
        Vdu = Vdu + V * du[:, k][pad]
        V2 = V2 + V * V
    Tp = T[pad]
    M = maxwellian(mom, vgrid)
    return M * (drho[pad] / rho[pad] + Vdu / Tp + (V2 / (2 * Tp * Tp) - dv / (2 * Tp)) * dT[pad])


def discrete_ce_g(U: EulerState, vgrid: VelocityGrid, mu: np.ndarray, cfg: TransportConfig) -> np.ndarray:
    """Chapman-Enskog correction with the solver's own transport operator.

    g = -(1/mu) (I - P) v d/dx M[U], P the tangent projection.  Agrees with
    :func:`chapman_enskog_g` up to the spatial discretization error, and puts
    M + eps g on the slow manifold of the discrete scheme to O(eps^2).
    """
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (U.grid.nx,))
    if np.any(~(mu > 0)):
        raise KineticError("collision frequency must be positive")
    TM = advection_derivative(maxwellian(U.mom, vgrid), cfg, vgrid)
    pad = (slice(None),) + (None,) * vgrid.dv
    return -(TM - maxwellian_tangent(U.mom, TM, vgrid)) / mu[pad]


def well_prepared_init(U0: EulerState, eps: float, regime: str, vgrid: VelocityGrid,
                       policy: CollisionFrequencyPolicy | None = None,
                       transport: TransportConfig | None = None) -> np.ndarray:
    """M[U0] (euler) or M[U0] + eps g (navier-stokes).

    With ``transport`` the correction g uses the discrete transport operator
    (:func:`discrete_ce_g`); otherwise the analytic gradients.
    """
    M = maxwellian(U0.mom, vgrid)
    if regime == "euler" or eps == 0:
        return M
    if regime != "navier-stokes":
        raise KineticError(f"regime must be 'euler' or 'navier-stokes', got {regime!r}")
    policy = policy or CollisionFrequencyPolicy()
    mu = policy(U0.mom)
    g = chapman_enskog_g(U0, vgrid, mu) if transport is None else discrete_ce_g(U0, vgrid, mu, transport)
    f0 = M + eps * g
    neg = f0 < -1e-12
    if np.any(neg):
        log.warning("well-prepared data has %d values below -1e-12 (min %.3e)", int(neg.sum()), f0.min())
    return f0


def kinetic_flux_divergence(U: EulerState, vgrid: VelocityGrid, cfg: TransportConfig) -> np.ndarray:
    """<phi v d/dx M[U]> with the kinetic transport discretization."""
    return moment_array(advection_derivative(maxwellian(U.mom, vgrid), cfg, vgrid), vgrid)


def direct_flux_divergence(U: EulerState, vgrid: VelocityGrid, cfg: TransportConfig) -> np.ndarray:
    """d/dx F(U) from split fluxes F = F+ + F-, F+- = <phi v^+- M[U]>, each upwinded component-wise."""
    M = maxwellian(U.mom, vgrid)
    vx = np.broadcast_to(vgrid.v[0], vgrid.shape)[None]
    Fp = moment_array(np.maximum(vx, 0) * M, vgrid)
    Fm = moment_array(np.minimum(vx, 0) * M, vgrid)
    return flux_derivative(Fp, cfg, +1) + flux_derivative(Fm, cfg, -1)


def euler_limit_step(scheme: ImexMultistepScheme, history: list[EulerState], cfg: TransportConfig,
                     dt: float, vgrid: VelocityGrid | None = None, flux: str = "kinetic") -> EulerState:
    """Explicit (a, b) multistep update U^{n+1} = -a.U - dt b.div F(U).

    ``history`` is newest first.  ``flux="kinetic"`` evaluates div F as the
    moments of the discrete transport of M[U] on ``vgrid`` (the operator the
    kinetic solver reduces to); ``flux="direct"`` differentiates the split
    fluxes F+ and F- component-wise.
    """
    if len(history) != scheme.s:
        raise KineticError(f"{scheme.name} needs {scheme.s} history states, got {len(history)}")
    a, b = scheme.a_real, scheme.b_real
    if vgrid is None:
        raise KineticError("the limit flux needs the velocity grid")
    if flux == "kinetic":
        divs = [kinetic_flux_divergence(U, vgrid, cfg) for U in history]
    elif flux == "direct":
        divs = [direct_flux_divergence(U, vgrid, cfg) for U in history]
    else:
        raise KineticError(f"flux must be 'kinetic' or 'direct', got {flux!r}")
    Us = [U.U for U in history]
    new = Us[0].copy()
    for aj, Uj in zip(a[1:], Us[1:]):
        new -= aj * (Uj - Us[0])
    for bj, dj in zip(b, divs):
        new -= dt * bj * dj
    return EulerState.from_array(new, history[0].grid)


def ns_diffusion(U: EulerState, policy: CollisionFrequencyPolicy) -> np.ndarray:
    """Navier-Stokes x-flux D = (0, 2 nu sigma e_x, kappa dT/dx + 2 nu (sigma u)_x).

    BGK coefficients nu = p/mu and kappa = (dv + 2) p / (2 mu), with sigma the
    symmetric trace-free half strain.
    """
    m = U.mom
    mu = policy(m)
    nu = m.p / mu
    kappa = 0.5 * (U.dv + 2) * m.p / mu
    sig = strain(U)
    dT = ddx(m.T, U.grid.dx)
    visc = 2 * nu[:, None] * sig[:, 0, :]
    heat = kappa * dT + np.sum(visc * m.u, axis=1)
    return np.column_stack([np.zeros(U.grid.nx), visc, heat])


def prandtl(dv: int) -> float:
    """Pr = 5 nu / (2 kappa) for the BGK coefficients."""
    return 5.0 / (dv + 2)


def section_initial_state(grid: SpatialGrid, dv: int = 1) -> EulerState:
    """rho = (2 + sin 8 pi x)/3, u = 0, T = (2 + cos 8 pi x)/3."""
    x = grid.x
    rho = (2 + np.sin(8 * np.pi * x)) / 3
    T = (2 + np.cos(8 * np.pi * x)) / 3
    return EulerState.from_primitive(rho, np.zeros((grid.nx, dv)), T, grid, dv)
