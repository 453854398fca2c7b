"""IMEX multistep time stepping for BGK and BGK-penalized Boltzmann problems.

Every step uses the conservative moment update to fix the new Maxwellian and
collision frequency, then closes with the explicit relaxation solve.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bgk import CollisionFrequencyPolicy, implicit_relaxation_solve
from .boltzmann import SpectralKernel, q_boltzmann
from .kinetic import (
    DegenerateMomentsError,
    KineticError,
    MomentSet,
    SpatialGrid,
    VelocityGrid,
    maxwellian,
    moment_array,
    moments,
)
from .schemes import ImexMultistepScheme, get_scheme
from .transport import TransportConfig, advection_derivative

log = logging.getLogger(__name__)

MODELS = ("bgk", "boltzmann")


class IntegrationError(RuntimeError):
    def __init__(self, msg, step=None, time=None):
        if step is not None:
            msg = f"step {step} (t = {time:.6g}): {msg}"
        super().__init__(msg)
        self.step = step
        self.time = time


class BootstrapError(IntegrationError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Everything needed to evaluate the operators of one kinetic problem."""

    eps: float
    vgrid: VelocityGrid
    xgrid: SpatialGrid = field(default_factory=lambda: SpatialGrid(1))
    model: str = "bgk"
    policy: CollisionFrequencyPolicy = field(default_factory=CollisionFrequencyPolicy)
    transport: str | None = "weno5"
    kernel: SpectralKernel | None = None

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise KineticError("epsilon must be positive")
        if self.model not in MODELS:
            raise KineticError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.model == "boltzmann":
            if self.vgrid.dv != 2:
                raise KineticError("the penalized Boltzmann model requires dv = 2")
            if self.kernel is None:
                raise KineticError("the penalized Boltzmann model needs a spectral kernel")
            if self.kernel.n_modes != self.vgrid.n or self.kernel.v_max != self.vgrid.v_max:
                raise KineticError("spectral kernel does not match the velocity grid")
        if self.homogeneous:
            object.__setattr__(self, "transport", None)
        else:
            # validates method and stencil width
            TransportConfig(self.transport, self.xgrid)

    @property
    def homogeneous(self) -> bool:
        return self.xgrid.nx == 1 or self.transport is None

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.xgrid.nx,) + self.vgrid.shape

    @property
    def transport_config(self) -> TransportConfig | None:
        return None if self.homogeneous else TransportConfig(self.transport, self.xgrid)

    # operators -------------------------------------------------------------
    def advection(self, f: np.ndarray) -> np.ndarray:
        if self.homogeneous:
            return np.zeros_like(f)
        return advection_derivative(f, self.transport_config, self.vgrid)

    def relaxation(self, f: np.ndarray, mom: MomentSet | None = None) -> np.ndarray:
        """mu (M[f] - f), i.e. the implicit (penalization) operator."""
        mom = moments(f, self.vgrid) if mom is None else mom
        return self._pad(self.policy(mom)) * (maxwellian(mom, self.vgrid) - f)

    def collision(self, f: np.ndarray) -> np.ndarray:
        """The full collision operator Q(f)."""
        if self.model == "bgk":
            return self.relaxation(f)
        return q_boltzmann(f, self.kernel)

    def penalty_remainder(self, f: np.ndarray, relax: np.ndarray | None = None) -> np.ndarray:
        """G_P(f, f) = Q_B(f, f) - mu (M[f] - f); zero for BGK."""
        if self.model == "bgk":
            return np.zeros_like(f)
        relax = self.relaxation(f) if relax is None else relax
        return q_boltzmann(f, self.kernel) - relax

    def _pad(self, a):
        return np.asarray(a)[(slice(None),) + (None,) * self.vgrid.dv]

    def totals(self, f: np.ndarray) -> np.ndarray:
        """Domain totals of (rho, m..., E)."""
        return moment_array(f, self.vgrid).sum(axis=0) * self.xgrid.dx


@dataclass
class Level:
    """A stored state with its cached explicit evaluations."""

    f: np.ndarray
    L: np.ndarray
    relax: np.ndarray
    G: np.ndarray

    @classmethod
    def evaluate(cls, f: np.ndarray, problem: ProblemSpec) -> "Level":
        mom = moments(f, problem.vgrid)
        relax = problem.relaxation(f, mom)
        return cls(f, problem.advection(f), relax, problem.penalty_remainder(f, relax))

    def checksum(self) -> float:
        return float(np.sum(self.f * self.f))


class StepHistory:
    """Ring buffer of the last s levels, newest first."""

    def __init__(self, s: int, dt: float, step: int = 0, t: float = 0.0):
        if s < 1:
            raise KineticError("history length must be >= 1")
        self.s = s
        self.dt = float(dt)
        self.step = step
        self.t = t
        self.levels: deque[Level] = deque(maxlen=s)
        self._sums: deque[float] = deque(maxlen=s)

    def push(self, level: Level) -> None:
        self.levels.appendleft(level)
        self._sums.appendleft(level.checksum())

    @property
    def full(self) -> bool:
        return len(self.levels) == self.s

    @property
    def newest(self) -> np.ndarray:
        return self.levels[0].f

    def verify(self) -> None:
        if not self.full:
            raise IntegrationError(f"history holds {len(self.levels)} of {self.s} states")
        for lev, c in zip(self.levels, self._sums):
            if lev.checksum() != c:
                raise IntegrationError("history state modified after its evaluations were cached")

    @classmethod
    def from_states(cls, states: list[np.ndarray], problem: ProblemSpec, dt: float,
                    t0: float = 0.0) -> "StepHistory":
        """Build from chronological states f^0..f^{s-1}."""
        h = cls(len(states), dt, step=len(states) - 1, t=t0 + (len(states) - 1) * dt)
        for f in states:
            h.push(Level.evaluate(np.array(f, dtype=float), problem))
        return h


def _coeffs(scheme: ImexMultistepScheme, s: int):
    if s != scheme.s:
        raise IntegrationError(f"history length {s} does not match {scheme.name} (s = {scheme.s})")
    return scheme.a_real, scheme.b_real, scheme.c_real, scheme.cm1


def _combine(w: np.ndarray, arrays) -> np.ndarray:
    out = None
    for wj, x in zip(w, arrays):
        if wj == 0.0:
            continue
        out = wj * x if out is None else out + wj * x
    return np.zeros_like(arrays[0]) if out is None else out


def _state_part(a: np.ndarray, fs) -> np.ndarray:
    """-sum a_j f_j written as f_0 - sum_{j>0} a_j (f_j - f_0).

    Exact because 1 + sum a_j = 0; working with differences keeps the
    rounding error proportional to dt instead of |f|.
    """
    out = fs[0].copy()
    for aj, fj in zip(a[1:], fs[1:]):
        if aj != 0.0:
            out -= aj * (fj - fs[0])
    return out


def _close(T, H, problem: ProblemSpec, dt, cm1, history) -> np.ndarray:
    """Moment update from T, then the explicit relaxation solve."""
    U = MomentSet.from_array(moment_array(T, problem.vgrid))
    try:
        U.check()
    except DegenerateMomentsError as exc:
        raise IntegrationError(str(exc), history.step + 1, history.t + dt) from exc
    mu = problem.policy(U)
    return implicit_relaxation_solve(T, U, mu, problem.eps, dt, cm1, problem.vgrid, H)


def imex_step(scheme: ImexMultistepScheme, history: StepHistory, problem: ProblemSpec) -> np.ndarray:
    """Advance one step; the history is rotated in place and the new state returned."""
    history.verify()
    a, b, c, cm1 = _coeffs(scheme, history.s)
    dt = history.dt
    lv = list(history.levels)
    T = _state_part(a, [x.f for x in lv]) - dt * _combine(b, [x.L for x in lv])
    H = _combine(c, [x.relax for x in lv])
    if problem.model == "boltzmann":
        H = H + _combine(b, [x.G for x in lv])
    f_new = _close(T, H, problem, dt, cm1, history)
    _advance(history, f_new, problem)
    return f_new


def bdf_splitting_step(scheme: ImexMultistepScheme, history: StepHistory, problem: ProblemSpec) -> np.ndarray:
    """IMEX-BDF as explicit transport stage followed by a backward-Euler relaxation."""
    if not scheme.is_bdf:
        raise IntegrationError(f"{scheme.name} is not an IMEX-BDF scheme (c must vanish)")
    history.verify()
    a, b, _, cm1 = _coeffs(scheme, history.s)
    dt = history.dt
    lv = list(history.levels)
    f_half = _state_part(a, [x.f for x in lv]) - dt * _combine(b, [x.L for x in lv])
    H = _combine(b, [x.G for x in lv]) if problem.model == "boltzmann" else 0.0
    f_new = _close(f_half, H, problem, dt, cm1, history)
    _advance(history, f_new, problem)
    return f_new


def _advance(history: StepHistory, f_new: np.ndarray, problem: ProblemSpec) -> None:
    step, t = history.step + 1, history.t + history.dt
    if not np.all(np.isfinite(f_new)):
        raise IntegrationError("non-finite values in the new state", step, t)
    try:
        history.push(Level.evaluate(f_new, problem))
    except KineticError as exc:
        raise IntegrationError(str(exc), step, t) from exc
    history.step, history.t = step, t


# --- start-up ----------------------------------------------------------------

def _bdf1_substeps(f0: np.ndarray, problem: ProblemSpec, dt: float, m: int) -> np.ndarray:
    bdf1 = get_scheme("IMEX-BDF1")
    h = StepHistory(1, dt / m)
    h.push(Level.evaluate(f0, problem))
    for _ in range(m):
        imex_step(bdf1, h, problem)
    return h.newest


def _bdf1_richardson(f0, problem, dt, tol, m_max):
    """Sub-stepped IMEX-BDF1 over dt, doubling m until |f_m - f_2m| <= tol."""
    m, err = 1, np.inf
    f_m = _bdf1_substeps(f0, problem, dt, m)
    while m < m_max:
        f_2m = _bdf1_substeps(f0, problem, dt, 2 * m)
        err = np.max(np.abs(f_2m - f_m))
        if err <= tol:
            return f_2m, 2 * m, err
        m, f_m = 2 * m, f_2m
    return None, m, err


def _bdf1_extrapolated(f0, problem, dt, tol, m_max):
    """Richardson table over m0, 2 m0, 4 m0, ... sub-steps.

    The error of sub-stepped IMEX-BDF1 expands in powers of dt/m only once the
    sub-step resolves the relaxation, so the table starts at dt mu / (eps m0) <= 1;
    when that is out of reach this falls back to the plain Richardson control.
    """
    mu = float(np.max(problem.policy(moments(f0, problem.vgrid))))
    m0 = 1 << max(0, math.ceil(math.log2(max(dt * mu / problem.eps, 1.0))))
    if 4 * m0 > m_max:
        return _bdf1_richardson(f0, problem, dt, tol, m_max)
    rows, m, err = [[_bdf1_substeps(f0, problem, dt, m0)]], m0, np.inf
    while m < m_max:
        m *= 2
        row = [_bdf1_substeps(f0, problem, dt, m)]
        for j, prev in enumerate(rows[-1][:5], start=1):
            row.append(row[-1] + (row[-1] - prev) / (2**j - 1))
        err = np.max(np.abs(row[-1] - row[-2]))
        rows.append(row)
        if err <= tol:
            return row[-1], m, err
    return None, m, err


def bootstrap(scheme: ImexMultistepScheme, f0: np.ndarray, problem: ProblemSpec, dt: float,
              method: str = "cascade", exact: Callable[[float], np.ndarray] | None = None,
              m: int | None = None, ratio: int = 4, m_max: int = 2**16) -> StepHistory:
    """History f^0..f^{s-1} for a multistep run.

    ``method``:
      * ``exact``: states from the callable ``exact(t)``;
      * ``bdf1``: sub-stepped IMEX-BDF1 with m chosen by a Richardson estimate
        below 0.01 dt^{p+1} ||f||, or the fixed ``m`` when given;
      * ``cascade``: the same scheme run at dt/ratio, itself started
        recursively, down to a level where extrapolated IMEX-BDF1 sub-steps
        meet the tolerance cheaply.
    """
    f0 = np.array(f0, dtype=float)
    s, p = scheme.s, scheme.declared_order
    if s == 1:
        return StepHistory.from_states([f0], problem, dt)
    if method == "exact":
        if exact is None:
            raise BootstrapError("exact bootstrap needs a callable exact(t)")
        return StepHistory.from_states([f0] + [exact(j * dt) for j in range(1, s)], problem, dt)
    scale = max(np.max(np.abs(f0)), 1e-300)
    tol = max(0.01 * dt ** (p + 1), 4 * np.finfo(float).eps) * scale
    if method == "bdf1":
        states = [f0]
        for j in range(1, s):
            if m is not None:
                states.append(_bdf1_substeps(states[-1], problem, dt, m))
                continue
            f_next, used, err = _bdf1_richardson(states[-1], problem, dt, tol, m_max)
            if f_next is None:
                raise BootstrapError(
                    f"IMEX-BDF1 start-up did not reach {tol:.2e} with m <= {m_max} "
                    f"(estimate {err:.2e}); use a smaller dt or the cascade/exact start")
            log.debug("bootstrap state %d: m = %d, estimate %.2e", j, used, err)
            states.append(f_next)
        return StepHistory.from_states(states, problem, dt)
    if method == "cascade":
        return StepHistory.from_states(_cascade(scheme, f0, problem, dt, tol, ratio), problem, dt)
    raise BootstrapError(f"unknown bootstrap method {method!r}")


def _cascade(scheme, f0, problem, dt, tol, ratio, depth=0, m_base=64):
    """States at 0, dt, ..., (s-1) dt."""
    s = scheme.s
    # a fine-level start error e acts on the coarse run like a slope error e / h over (s - 1) dt,
    # so the fine levels are held to tol / (ratio^depth (s - 1))
    tol_here = tol if depth == 0 else tol / (ratio**depth * (s - 1))
    states = [f0]
    ok = True
    for _ in range(1, s):
        f_next, _, _ = _bdf1_extrapolated(states[-1], problem, dt, tol_here, m_base)
        if f_next is None:
            ok = False
            break
        states.append(f_next)
    if ok:
        return states
    if depth > 30:
        raise BootstrapError("cascade start-up recursion too deep")
    h = dt / ratio
    fine = _cascade(scheme, f0, problem, h, tol, ratio, depth + 1, m_base)
    out = [f for j, f in enumerate(fine) if j % ratio == 0]
    hist = StepHistory.from_states(fine, problem, h)
    while len(out) < s:
        imex_step(scheme, hist, problem)
        if hist.step % ratio == 0:
            out.append(hist.newest)
    return out


# --- driver ------------------------------------------------------------------

DIAG_COLUMNS = ("step", "time", "mass", "momentum", "energy", "entropy", "min_f")


@dataclass
class Trajectory:
    scheme: str
    dt: float
    diagnostics: np.ndarray  # rows per DIAG_COLUMNS (momentum = x component)
    f: np.ndarray
    times: np.ndarray
    checkpoints: dict[int, np.ndarray] = field(default_factory=dict)
    totals: np.ndarray | None = None  # (steps + 1, dv + 2)

    def drift(self) -> dict[str, float]:
        """Relative drift of the conserved totals over the run.

        Momentum is measured against sqrt(mass * energy) when that is larger,
        since the total momentum itself is often zero.
        """
        t = self.totals
        scale = np.abs(t[0]).astype(float)
        scale[1:-1] = np.maximum(scale[1:-1], np.sqrt(abs(t[0, 0] * t[0, -1])))
        scale = np.where(scale > 0, scale, 1.0)
        d = np.max(np.abs(t - t[0]), axis=0) / scale
        names = ["mass"] + [f"momentum_{k}" for k in range(t.shape[1] - 2)] + ["energy"]
        return dict(zip(names, d.tolist()))


def _diag_row(step, t, f, problem: ProblemSpec):
    tot = problem.totals(f)
    fmin = float(f.min())
    if fmin >= 0:
        H = float((_entropy_sum(f, problem.vgrid)) * problem.xgrid.dx)
    else:
        H = np.nan
    return [step, t, tot[0], tot[1], tot[-1], H, fmin], tot


def _entropy_sum(f, grid):
    with np.errstate(divide="ignore", invalid="ignore"):
        return grid.weight * np.sum(np.where(f > 0, f * np.log(np.where(f > 0, f, 1.0)), 0.0))


def run(scheme: ImexMultistepScheme | str, problem: ProblemSpec, f0: np.ndarray, dt: float,
        n_steps: int, bootstrap_method: str = "cascade", exact=None, m: int | None = None,
        checkpoint_every: int | None = None, splitting: bool = False) -> Trajectory:
    """Start up and advance to step ``n_steps`` (counting the start-up states)."""
    if isinstance(scheme, str):
        scheme = get_scheme(scheme)
    if n_steps < 0:
        raise IntegrationError("n_steps must be >= 0")
    f0 = np.array(f0, dtype=float).reshape(problem.shape)
    diag, tots, times, ckpt = [], [], [], {}

    def record(step, t, f):
        row, tot = _diag_row(step, t, f, problem)
        diag.append(row)
        tots.append(tot)
        times.append(t)
        if checkpoint_every and step % checkpoint_every == 0:
            ckpt[step] = f.copy()

    if n_steps == 0:
        record(0, 0.0, f0)
        return Trajectory(scheme.name, dt, np.array(diag), f0, np.array(times), ckpt, np.array(tots))
    hist = bootstrap(scheme, f0, problem, dt, bootstrap_method, exact=exact, m=m)
    for j, lev in enumerate(reversed(hist.levels)):
        if j <= n_steps:
            record(j, j * dt, lev.f)
    stepper = bdf_splitting_step if splitting else imex_step
    if n_steps < scheme.s - 1:
        f_last = list(reversed(hist.levels))[n_steps].f
    else:
        while hist.step < n_steps:
            f_new = stepper(scheme, hist, problem)
            record(hist.step, hist.t, f_new)
        f_last = hist.newest
    return Trajectory(scheme.name, dt, np.array(diag), f_last, np.array(times), ckpt, np.array(tots))


def steady_state_residual(f: np.ndarray, problem: ProblemSpec) -> float:
    """|| eps v.grad f - Q(f) ||_inf with the problem's discrete operators."""
    f = np.asarray(f, dtype=float).reshape(problem.shape)
    return float(np.max(np.abs(problem.eps * problem.advection(f) - problem.collision(f))))


def relax_to_steady(scheme, problem, f0, dt, tol=1e-12, max_steps=200000):
    """March until ||f^{n+1} - f^n||_inf < tol; returns (f, history, steps)."""
    if isinstance(scheme, str):
        scheme = get_scheme(scheme)
    hist = bootstrap(scheme, f0, problem, dt)
    prev = hist.newest
    d = np.inf
    for k in range(max_steps):
        f = imex_step(scheme, hist, problem)
        d = np.max(np.abs(f - prev))
        if d < tol:
            return f, hist, k + 1
        prev = f
    raise IntegrationError(f"no steady state within {max_steps} steps (last change {d:.2e})")
