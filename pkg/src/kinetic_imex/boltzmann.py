"""Fourier-Galerkin collision operator for 2D Maxwell molecules.

The distribution on ``[-v_max, v_max]^2`` is treated as periodic and
expanded in modes ``exp(i xi k.v)``, ``xi = pi / v_max``.  The collision
integral, truncated to relative speeds ``|g| <= R``, becomes the discrete
convolution

    Q_k = sum_{l + m = k} beta(l, m) f_l f_m,
    beta(l, m) = G(l, m) - G(m, m),
    G(l, m) = 2 pi B0 int_0^R r J0(xi r |l + m| / 2) J0(xi r |l - m| / 2) dr,

with ``B0`` the kernel integrated over the unit circle, so the loss rate is
``B0 * rho``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import j0, j1

from .kinetic import KineticError, VelocityGrid, moment_array

log = logging.getLogger(__name__)

LAMBDA = 2.0 / (3.0 + np.sqrt(2.0))
IMAG_TOL = 1e-10
MAX_KERNEL_BYTES = 2**31  # dense (N^2 x N^2) weights plus gather table


class SpectralError(KineticError):
    pass


def radial_integral(a: np.ndarray, b: np.ndarray, R: float) -> np.ndarray:
    """int_0^R r J0(a r) J0(b r) dr in closed form (a, b >= 0)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    J0a, J1a, J0b, J1b = j0(a * R), j1(a * R), j0(b * R), j1(b * R)
    same = np.isclose(a, b, rtol=0, atol=1e-14)
    d = np.where(same, 1.0, a * a - b * b)
    diff = R * (a * J1a * J0b - b * J0a * J1b) / d
    equal = 0.5 * R * R * (J0a**2 + J1a**2)
    return np.where(same, equal, diff)


def radial_integral_gl(a: np.ndarray, b: np.ndarray, R: float, tol: float = 1e-12,
                       n0: int = 32, n_max: int = 4096) -> np.ndarray:
    """Same integral by Gauss-Legendre, doubling the order until converged."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    prev = None
    n = n0
    while n <= n_max:
        x, w = np.polynomial.legendre.leggauss(n)
        r = 0.5 * R * (x + 1)
        val = (0.5 * R * w * r * j0(a * r) * j0(b * r)).sum(-1)
        if prev is not None and np.max(np.abs(val - prev)) < tol:
            return val
        prev, n = val, 2 * n
    raise SpectralError("Gauss-Legendre radial quadrature did not converge")


@dataclass
class SpectralKernel:
    n_modes: int
    v_max: float
    B0: float
    R: float
    weights: np.ndarray = field(repr=False)  # (N^2, N^2) real, beta(k - m, m)
    gather: np.ndarray = field(repr=False)  # (N^2, N^2) flat index of k - m, N^2 if out of range

    @property
    def xi(self) -> float:
        return np.pi / self.v_max

    @property
    def grid(self) -> VelocityGrid:
        return VelocityGrid(2, self.n_modes, self.v_max)

    @property
    def support(self) -> float:
        """Radius S of the velocity support assumed free of aliasing (R = 2 S)."""
        return 0.5 * self.R

    def key(self) -> str:
        return f"spectral-n{self.n_modes}-v{self.v_max:.17g}-B{self.B0:.17g}-R{self.R:.17g}"


def _modes(n: int) -> np.ndarray:
    return np.arange(-n // 2, n // 2)


def build_spectral_kernel(grid: VelocityGrid, B0: float = 1.0, R: float | None = None,
                          cache_dir: str | Path | None = None,
                          max_bytes: int = MAX_KERNEL_BYTES) -> SpectralKernel:
    """Precompute beta(k - m, m) for every output mode k and partner mode m.

    Storage is dense, 12 N^4 bytes; sizes beyond ``max_bytes`` are refused.
    """
    if grid.dv != 2:
        raise SpectralError("the spectral collision operator supports dv = 2 only")
    n = grid.n
    if n % 2:
        raise SpectralError("number of modes per dimension must be even")
    if not B0 > 0:
        raise SpectralError("kernel constant B0 must be positive")
    need = 12 * n**4
    if need > max_bytes:
        raise SpectralError(f"spectral kernel for N = {n} needs {need / 2**30:.1f} GiB "
                            f"(limit {max_bytes / 2**30:.1f} GiB); use a smaller velocity grid")
    R = 2.0 * LAMBDA * grid.v_max if R is None else float(R)
    cache = _cache_path(cache_dir, n, grid.v_max, B0, R)
    if cache is not None and cache.exists():
        data = np.load(cache)
        log.info("loaded spectral kernel from %s", cache)
        return SpectralKernel(n, grid.v_max, B0, R, data["weights"], data["gather"])

    xi = np.pi / grid.v_max
    ks = _modes(n)
    K1, K2 = np.meshgrid(ks, ks, indexing="ij")
    K1, K2 = K1.ravel(), K2.ravel()
    lo, hi = ks[0], ks[-1]

    # G depends on (|l+m|^2, |l-m|^2) only; tabulate the radial arguments
    pmax = 2 * (2 * (n // 2)) ** 2
    sq = np.sqrt(np.arange(pmax + 1, dtype=float)) * xi / 2

    def G(p, q):
        return 2 * np.pi * B0 * radial_integral(sq[p], sq[q], R)

    loss = G(4 * (K1**2 + K2**2), np.zeros_like(K1))  # G(m, m)
    W = np.zeros((n * n, n * n))
    gather = np.full((n * n, n * n), n * n, dtype=np.int32)
    step = max(1, 2**20 // (n * n))
    for r0 in range(0, n * n, step):
        rows = slice(r0, min(r0 + step, n * n))
        L1 = K1[rows, None] - K1[None, :]  # l = k - m
        L2 = K2[rows, None] - K2[None, :]
        valid = (L1 >= lo) & (L1 <= hi) & (L2 >= lo) & (L2 <= hi)
        P = np.where(valid, K1[rows, None] ** 2 + K2[rows, None] ** 2, 0)  # |l+m|^2 = |k|^2
        Qd = np.where(valid, (L1 - K1[None, :]) ** 2 + (L2 - K2[None, :]) ** 2, 0)
        W[rows] = np.where(valid, G(P, Qd) - loss[None, :], 0.0)
        gather[rows] = np.where(valid, (L1 - lo) * n + (L2 - lo), n * n)
    ker = SpectralKernel(n, grid.v_max, B0, R, W, gather)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache, weights=W, gather=gather)
        log.info("cached spectral kernel to %s", cache)
    return ker


def _cache_path(cache_dir, n, v_max, B0, R):
    if cache_dir is None:
        return None
    tag = hashlib.sha1(f"{n}|{v_max!r}|{B0!r}|{R!r}".encode()).hexdigest()[:16]
    return Path(cache_dir) / f"spectral_kernel_n{n}_{tag}.npz"


# --- transforms -------------------------------------------------------------

def _phase(n: int) -> np.ndarray:
    k = _modes(n)
    return np.exp(1j * np.pi * k) * np.exp(-1j * np.pi * k / n)


def to_modes(f: np.ndarray) -> np.ndarray:
    """Fourier coefficients on modes [-n/2, n/2)^2 of nodal values f (n, n); Nyquist zeroed."""
    n = f.shape[-1]
    F = np.fft.fftshift(np.fft.fft2(f), axes=(-2, -1)) / (n * n)
    ph = _phase(n)
    F = F * ph[:, None] * ph[None, :]
    F[..., 0, :] = 0.0
    F[..., :, 0] = 0.0
    return F


def from_modes(F: np.ndarray) -> np.ndarray:
    """Nodal values from mode coefficients; Nyquist modes are dropped."""
    n = F.shape[-1]
    ph = np.conj(_phase(n))
    G = F * ph[:, None] * ph[None, :]
    G[..., 0, :] = 0.0
    G[..., :, 0] = 0.0
    return np.fft.ifft2(np.fft.ifftshift(G, axes=(-2, -1))) * (n * n)


def _check_grid(f: np.ndarray, kernel: SpectralKernel) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    n = kernel.n_modes
    if f.shape[-2:] != (n, n):
        raise SpectralError(f"field velocity shape {f.shape[-2:]} does not match kernel ({n}, {n})")
    return f


def _q_modes(Fhat: np.ndarray, Ghat: np.ndarray, kernel: SpectralKernel) -> np.ndarray:
    """sum_m beta(k - m, m) F_{k-m} G_m over flat modes."""
    fpad = np.append(Fhat.ravel(), 0.0)
    return (kernel.weights * fpad[kernel.gather]) @ Ghat.ravel()


def _to_real(q: np.ndarray, scale: float) -> np.ndarray:
    # scale: size of the loss term, so an equilibrium (q ~ 0) is judged fairly
    scale = max(scale, np.max(np.abs(q.real)), 1e-300)
    resid = np.max(np.abs(q.imag))
    if resid > IMAG_TOL * scale:
        raise SpectralError(f"collision output has imaginary residue {resid:.3e} (relative {resid / scale:.3e})")
    return q.real


def q_bilinear(f: np.ndarray, g: np.ndarray, kernel: SpectralKernel) -> np.ndarray:
    """Symmetrized bilinear collision form; f, g of shape (n, n) or (nx, n, n)."""
    f = _check_grid(f, kernel)
    g = _check_grid(g, kernel)
    if f.shape != g.shape:
        raise SpectralError("q_bilinear arguments must have the same shape")
    single = f.ndim == 2
    fs = f[None] if single else f.reshape(-1, *f.shape[-2:])
    gs = g[None] if single else g.reshape(-1, *g.shape[-2:])
    n = kernel.n_modes
    h2 = kernel.grid.weight
    out = np.empty(fs.shape)
    same = f is g or np.array_equal(f, g)
    for c in range(fs.shape[0]):
        Fh = to_modes(fs[c])
        if same:
            qh = _q_modes(Fh, Fh, kernel)
        else:
            Gh = to_modes(gs[c])
            qh = 0.5 * (_q_modes(Fh, Gh, kernel) + _q_modes(Gh, Fh, kernel))
        scale = kernel.B0 * np.abs(fs[c]).max() * np.abs(gs[c]).sum() * h2
        out[c] = _to_real(from_modes(qh.reshape(n, n)), scale)
    return out[0] if single else out.reshape(f.shape)


def q_boltzmann(f: np.ndarray, kernel: SpectralKernel) -> np.ndarray:
    return q_bilinear(f, f, kernel)


def gain_loss_split(f: np.ndarray, kernel: SpectralKernel) -> tuple[np.ndarray, np.ndarray]:
    """(gain, loss_rate) with Q = gain - loss_rate * f and loss_rate = B0 rho per cell."""
    f = _check_grid(f, kernel)
    grid = kernel.grid
    ff = f[None] if f.ndim == 2 else f
    rho = moment_array(ff, grid)[:, 0]
    loss = kernel.B0 * rho
    gain = q_boltzmann(ff, kernel) + loss[:, None, None] * ff
    if f.ndim == 2:
        return gain[0], loss
    return gain, loss


# --- exact solution and quadrature oracle ----------------------------------

def bkw_rate(B0: float = 1.0) -> float:
    """Rate kappa in S(t) = 1 - exp(-kappa t)/2 (calibrated against the quadrature oracle)."""
    return B0 / 8.0


def bkw_profile(v2: np.ndarray, t: float, B0: float = 1.0) -> np.ndarray:
    if t < 0:
        raise KineticError("BKW profile is only nonnegative for t >= 0")
    S = 1.0 - 0.5 * np.exp(-bkw_rate(B0) * t)
    return np.exp(-v2 / (2 * S)) / (2 * np.pi * S * S) * (2 * S - 1 + (1 - S) * v2 / (2 * S))


def bkw_solution(t: float, grid: VelocityGrid, B0: float = 1.0) -> np.ndarray:
    """BKW self-similar solution (rho = 1, u = 0, T = 1) sampled on a 2D grid."""
    if grid.dv != 2:
        raise SpectralError("BKW solution is implemented for dv = 2")
    return bkw_profile(grid.v2, t, B0)


def dvm_collision(f, v_points: np.ndarray, v_max: float, n_star: int, n_angle: int,
                  B0: float = 1.0, R: float | None = None) -> np.ndarray:
    """Direct quadrature of Q(f, f) at given points for an analytic callable f(vx, vy).

    Midpoint rule over v* in [-v_max, v_max]^2 with n_star points per
    dimension and n_angle uniform directions; optionally restricted to |v - v*| <= R.
    """
    v_points = np.atleast_2d(np.asarray(v_points, dtype=float))
    h = 2 * v_max / n_star
    s = -v_max + (np.arange(n_star) + 0.5) * h
    sx, sy = np.meshgrid(s, s, indexing="ij")
    sx, sy = sx.ravel(), sy.ravel()
    th = 2 * np.pi * (np.arange(n_angle) + 0.5) / n_angle
    wx, wy = np.cos(th), np.sin(th)
    b = B0 / (2 * np.pi)
    fstar = f(sx, sy)
    out = np.empty(v_points.shape[0])
    for i, (vx, vy) in enumerate(v_points):
        gx, gy = vx - sx, vy - sy
        gn = np.hypot(gx, gy)
        keep = np.ones_like(gn, dtype=bool) if R is None else gn <= R
        cx, cy = 0.5 * (vx + sx), 0.5 * (vy + sy)
        # v' = (v+v*)/2 + |g| w/2, v'* = (v+v*)/2 - |g| w/2
        px = cx[:, None] + 0.5 * gn[:, None] * wx[None]
        py = cy[:, None] + 0.5 * gn[:, None] * wy[None]
        qx = cx[:, None] - 0.5 * gn[:, None] * wx[None]
        qy = cy[:, None] - 0.5 * gn[:, None] * wy[None]
        gain = (f(px, py) * f(qx, qy)).mean(axis=1)
        loss = f(vx, vy) * fstar
        out[i] = 2 * np.pi * b * h * h * np.sum(np.where(keep, gain - loss, 0.0))
    return out
