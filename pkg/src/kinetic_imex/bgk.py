"""BGK relaxation operator and its closed-form implicit solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinetic import KineticError, MomentSet, VelocityGrid, maxwellian, moments


@dataclass(frozen=True)
class CollisionFrequencyPolicy:
    """mu = value * rho ("rho") or mu = value ("const")."""

    mode: str = "rho"
    value: float = 1.0

    def __post_init__(self):
        if self.mode not in ("rho", "const"):
            raise KineticError(f"collision frequency mode must be 'rho' or 'const', got {self.mode!r}")
        if not (np.isfinite(self.value) and self.value > 0):
            raise KineticError("collision frequency parameter must be positive")

    @classmethod
    def parse(cls, text: str) -> "CollisionFrequencyPolicy":
        """Accepts ``rho``, ``rho:<k>`` or ``const:<v>``."""
        head, _, tail = text.strip().partition(":")
        head = head.strip().lower()
        try:
            val = float(tail) if tail else 1.0
        except ValueError:
            raise KineticError(f"bad collision frequency {text!r}") from None
        if head == "const" and not tail:
            raise KineticError("const collision frequency needs a value, e.g. const:1.0")
        return cls(head, val)

    def __call__(self, mom: MomentSet) -> np.ndarray:
        if self.mode == "const":
            return np.full(mom.rho.shape, self.value)
        return self.value * mom.rho

    def __str__(self):
        return f"{self.mode}:{self.value:g}"


def _pad(a: np.ndarray, dv: int) -> np.ndarray:
    return np.asarray(a)[(slice(None),) + (None,) * dv]


def q_bgk(f: np.ndarray, grid: VelocityGrid, policy: CollisionFrequencyPolicy) -> np.ndarray:
    """mu (M[f] - f) per cell."""
    f = np.asarray(f, dtype=float)
    if f.ndim == grid.dv:
        f = f[None]
    mom = moments(f, grid)
    return _pad(policy(mom), grid.dv) * (maxwellian(mom, grid) - f)


def implicit_relaxation_solve(
    explicit_part: np.ndarray,
    target_moments: MomentSet,
    mu_next: np.ndarray,
    eps: float,
    dt: float,
    c_minus1: float,
    grid: VelocityGrid,
    history_terms: np.ndarray | float = 0.0,
) -> np.ndarray:
    """Solve f = T + (dt/eps)(H + c_{-1} mu (M - f)) for f in closed form.

    ``explicit_part`` is T, ``history_terms`` collects the already-known
    collision contributions H (scheme weights applied).  The closed form
    ``(eps T + dt H + dt c_{-1} mu M) / (eps + c_{-1} mu dt)`` stays finite as
    eps -> 0, where it becomes a projection onto M.
    """
    mu = _pad(np.asarray(mu_next, dtype=float), grid.dv)
    denom = eps + c_minus1 * mu * dt
    if np.any(~(denom > 0)):
        raise KineticError("eps + c_{-1} mu dt must be positive")
    M = maxwellian(target_moments, grid)
    # same as (eps T + dt H + dt c mu M) / denom, written as T plus an increment
    # so that rounding scales with the update rather than with |f|
    return explicit_part + dt * (history_terms + c_minus1 * mu * (M - explicit_part)) / denom


def exact_relaxation(f0: np.ndarray, M: np.ndarray, mu: float, eps: float, t: float) -> np.ndarray:
    """Exact solution of df/dt = mu (M - f)/eps with fixed M (homogeneous BGK)."""
    w = np.exp(-mu * t / eps)
    return w * f0 + (1 - w) * M
