"""Periodic 1D discretizations of the advection term v d/dx f."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinetic import SpatialGrid, VelocityGrid, moment_array

METHODS = ("weno5", "upwind1", "central2")
_STENCIL = {"weno5": 5, "upwind1": 2, "central2": 3}
WENO_EPS = 1e-6


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportConfig:
    method: str
    grid: SpatialGrid

    def __post_init__(self):
        if self.method not in METHODS:
            raise TransportError(f"unknown transport method {self.method!r}; choose from {METHODS}")
        if self.grid.nx < _STENCIL[self.method]:
            raise TransportError(
                f"{self.method} needs nx >= {_STENCIL[self.method]}, got {self.grid.nx}")


def _weno5_left(fm2, fm1, f0, fp1, fp2):
    """Upwind-biased WENO5-JS value at i+1/2 from cells i-2..i+2."""
    b0 = 13 / 12 * (fm2 - 2 * fm1 + f0) ** 2 + 0.25 * (fm2 - 4 * fm1 + 3 * f0) ** 2
    b1 = 13 / 12 * (fm1 - 2 * f0 + fp1) ** 2 + 0.25 * (fm1 - fp1) ** 2
    b2 = 13 / 12 * (f0 - 2 * fp1 + fp2) ** 2 + 0.25 * (3 * f0 - 4 * fp1 + fp2) ** 2
    a0 = 0.1 / (WENO_EPS + b0) ** 2
    a1 = 0.6 / (WENO_EPS + b1) ** 2
    a2 = 0.3 / (WENO_EPS + b2) ** 2
    q0 = (2 * fm2 - 7 * fm1 + 11 * f0) / 6
    q1 = (-fm1 + 5 * f0 + 2 * fp1) / 6
    q2 = (2 * f0 + 5 * fp1 - fp2) / 6
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def _weno5_face(f: np.ndarray) -> np.ndarray:
    """Value at i+1/2 for positive speed, along axis 0 (periodic)."""
    r = lambda k: np.roll(f, -k, axis=0)  # noqa: E731  r(k)[i] = f[i+k]
    return _weno5_left(r(-2), r(-1), f, r(1), r(2))


def _diff_pos(f: np.ndarray, face) -> np.ndarray:
    """Undivided difference for positive speed (left-biased faces)."""
    h = face(f)  # at i+1/2
    return h - np.roll(h, 1, axis=0)


def _diff_neg(f: np.ndarray, face) -> np.ndarray:
    # mirror x, reconstruct, mirror back
    return -_diff_pos(f[::-1], face)[::-1]


def flux_derivative(F: np.ndarray, cfg: TransportConfig, upwind: int = 1) -> np.ndarray:
    """d/dx of a flux array (axis 0 = x) with the stencil for wind direction ``upwind`` (+1/-1)."""
    F = np.asarray(F, dtype=float)
    dx = cfg.grid.dx
    if cfg.method == "central2":
        return (np.roll(F, -1, axis=0) - np.roll(F, 1, axis=0)) / (2 * dx)
    face = (lambda g: g) if cfg.method == "upwind1" else _weno5_face
    return (_diff_pos(F, face) if upwind > 0 else _diff_neg(F, face)) / dx


def advection_derivative(f: np.ndarray, cfg: TransportConfig, vgrid: VelocityGrid) -> np.ndarray:
    """v d/dx f for f of shape (nx,) + (nv,)*dv; only the first velocity component advects."""
    f = np.asarray(f, dtype=float)
    nx = cfg.grid.nx
    if f.shape[0] != nx:
        raise TransportError(f"field has {f.shape[0]} cells, grid has {nx}")
    if nx == 1:
        return np.zeros_like(f)
    dx = cfg.grid.dx
    v = np.broadcast_to(vgrid.v[0], vgrid.shape)[None]
    if cfg.method == "central2":
        return v * (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2 * dx)
    if cfg.method == "upwind1":
        face = lambda g: g  # noqa: E731  first-order: upwind cell value
    else:
        face = _weno5_face
    pos = vgrid.v[0] > 0
    pos_b = np.broadcast_to(pos, vgrid.shape)
    out = np.empty_like(f)
    # split by sign of v so each half runs the reconstruction once
    fp = f[:, pos_b].reshape(nx, -1)
    fn = f[:, ~pos_b].reshape(nx, -1)
    out[:, pos_b] = (_diff_pos(fp, face) / dx).reshape(nx, -1) * v[:, pos_b]
    out[:, ~pos_b] = (_diff_neg(fn, face) / dx).reshape(nx, -1) * v[:, ~pos_b]
    return out


def transport_moments(f: np.ndarray, cfg: TransportConfig, vgrid: VelocityGrid) -> np.ndarray:
    """<phi v d/dx f> per cell, shape (nx, dv + 2)."""
    return moment_array(advection_derivative(f, cfg, vgrid), vgrid)
