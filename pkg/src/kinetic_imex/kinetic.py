"""Phase-space grids, velocity moments, Maxwellians and entropy.

Distributions are numpy arrays of shape ``(nx,) + (nv,) * dv``; a space
homogeneous problem simply has ``nx == 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)


class KineticError(ValueError):
    pass


class DegenerateMomentsError(KineticError):
    """Raised when density or temperature is not positive in some cell."""

    def __init__(self, msg, cells=None):
        super().__init__(msg)
        self.cells = cells


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint grid on ``[-v_max, v_max]^dv``."""

    dv: int
    n: int
    v_max: float

    def __post_init__(self):
        if self.dv not in (1, 2, 3):
            raise KineticError(f"velocity dimension must be 1, 2 or 3, got {self.dv}")
        if self.n < 2:
            raise KineticError("need at least two velocity points per dimension")
        if not self.v_max > 0:
            raise KineticError("v_max must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.v_max / self.n

    @property
    def weight(self) -> float:
        return self.h**self.dv

    @cached_property
    def nodes(self) -> np.ndarray:
        return -self.v_max + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def v(self) -> tuple[np.ndarray, ...]:
        """Velocity components, each broadcastable to shape ``(nv,)*dv``."""
        out = []
        for d in range(self.dv):
            shape = [1] * self.dv
            shape[d] = self.n
            out.append(self.nodes.reshape(shape))
        return tuple(out)

    @cached_property
    def v2(self) -> np.ndarray:
        return sum(np.broadcast_to(c, self.shape) ** 2 for c in self.v)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dv

    @property
    def size(self) -> int:
        return self.n**self.dv


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic cell-centred grid on [0, 1)."""

    nx: int
    length: float = 1.0

    def __post_init__(self):
        if self.nx < 1:
            raise KineticError("nx must be >= 1")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def periodic(self) -> bool:
        return True


@dataclass
class MomentSet:
    """Conserved moments per cell: density, momentum (nx, dv), total energy."""

    rho: np.ndarray
    m: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        self.E = np.atleast_1d(np.asarray(self.E, dtype=float))
        m = np.asarray(self.m, dtype=float)
        if m.ndim < 2:
            m = m.reshape(self.rho.shape[0], -1)
        self.m = m

    @classmethod
    def from_primitive(cls, rho, u, T, dv: int) -> "MomentSet":
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            u = np.full((rho.shape[0], dv), float(u))
        elif u.ndim == 1:
            u = u.reshape(rho.shape[0], dv) if u.size == rho.shape[0] * dv and dv > 1 else (
                u.reshape(-1, 1) if dv == 1 else np.broadcast_to(u, (rho.shape[0], dv)))
        u = np.broadcast_to(u, (rho.shape[0], dv))
        T = np.broadcast_to(np.atleast_1d(np.asarray(T, dtype=float)), rho.shape)
        m = rho[:, None] * u
        E = 0.5 * rho * np.sum(u * u, axis=1) + 0.5 * dv * rho * T
        return cls(rho.copy(), m.copy(), E.copy())

    @property
    def dv(self) -> int:
        return self.m.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.m / self.rho[:, None]

    @property
    def T(self) -> np.ndarray:
        # E = rho|u|^2/2 + dv rho T/2
        return (2.0 * self.E - np.sum(self.m * self.m, axis=1) / self.rho) / (self.dv * self.rho)

    @property
    def p(self) -> np.ndarray:
        return self.rho * self.T

    def as_array(self) -> np.ndarray:
        """Stack as (nx, dv + 2): rho, m..., E."""
        return np.column_stack([self.rho, self.m, self.E])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "MomentSet":
        arr = np.atleast_2d(arr)
        return cls(arr[:, 0].copy(), arr[:, 1:-1].copy(), arr[:, -1].copy())

    def check(self) -> None:
        bad = ~(np.isfinite(self.rho) & (self.rho > 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            T = self.T
        bad |= ~(np.isfinite(T) & (T > 0))
        if np.any(bad):
            cells = np.flatnonzero(bad)
            raise DegenerateMomentsError(
                f"nonpositive density or temperature in {cells.size} cell(s), first {cells[:5].tolist()}",
                cells,
            )

    def __len__(self):
        return self.rho.shape[0]


def _vaxes(grid: VelocityGrid) -> tuple[int, ...]:
    return tuple(range(-grid.dv, 0))


def moment_array(f: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """<phi f> per cell as an (nx, dv + 2) array; no admissibility check."""
    ax = _vaxes(grid)
    w = grid.weight
    cols = [w * f.sum(axis=ax)]
    for c in grid.v:
        cols.append(w * (f * c).sum(axis=ax))
    cols.append(0.5 * w * (f * grid.v2).sum(axis=ax))
    return np.stack(cols, axis=-1)


def moments(f: np.ndarray, grid: VelocityGrid, check: bool = True) -> MomentSet:
    """Density, momentum and energy of f by midpoint quadrature.

    With ``check=True`` cells with rho <= 0 or T <= 0 raise
    :class:`DegenerateMomentsError` (the flagged cells are on ``.cells``).
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == grid.dv:
        f = f[None]
    if not np.all(np.isfinite(f)):
        raise KineticError("distribution has non-finite entries")
    mom = MomentSet.from_array(moment_array(f, grid))
    if check:
        mom.check()
    return mom


def maxwellian(mom: MomentSet, grid: VelocityGrid) -> np.ndarray:
    """Sample rho/(2 pi T)^(dv/2) exp(-|v-u|^2/(2T)) on the grid, per cell."""
    rho, u, T = mom.rho, mom.u, mom.T
    if np.any(~(rho > 0)) or np.any(~(T > 0)):
        raise KineticError("Maxwellian needs rho > 0 and T > 0")
    return maxwellian_from_primitive(rho, u, T, grid)


def maxwellian_from_primitive(rho, u, T, grid: VelocityGrid) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    T = np.broadcast_to(np.atleast_1d(np.asarray(T, dtype=float)), rho.shape)
    u = np.broadcast_to(np.asarray(u, dtype=float).reshape(rho.shape[0], -1) if np.ndim(u) else
                        np.full((rho.shape[0], grid.dv), float(u)), (rho.shape[0], grid.dv))
    if np.any(~(rho > 0)) or np.any(~(T > 0)):
        raise KineticError("Maxwellian needs rho > 0 and T > 0")
    pad = (slice(None),) + (None,) * grid.dv
    c2 = 0.0
    for d, vd in enumerate(grid.v):
        c2 = c2 + (vd[None] - u[:, d][pad]) ** 2
    Tp = T[pad]
    return rho[pad] / (2.0 * np.pi * Tp) ** (grid.dv / 2) * np.exp(-c2 / (2.0 * Tp))


def entropy(f: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """H = sum_k w f_k log f_k per cell, with 0 log 0 = 0."""
    f = np.asarray(f, dtype=float)
    if f.ndim == grid.dv:
        f = f[None]
    if np.any(f < 0):
        idx = np.unravel_index(int(np.argmin(f)), f.shape)
        raise KineticError(f"entropy needs f >= 0; f{tuple(int(i) for i in idx)} = {f[idx]:.3e}")
    with np.errstate(divide="ignore", invalid="ignore"):
        flogf = np.where(f > 0, f * np.log(np.where(f > 0, f, 1.0)), 0.0)
    return grid.weight * flogf.sum(axis=_vaxes(grid))


def l1_norm(f: np.ndarray, grid: VelocityGrid, dx: float = 1.0) -> float:
    return float(np.abs(f).sum() * grid.weight * dx)
