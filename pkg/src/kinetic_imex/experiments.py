"""Named experiment presets, convergence sweeps and order fitting."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bgk import CollisionFrequencyPolicy
from .boltzmann import build_spectral_kernel
from .integrator import IntegrationError, ProblemSpec, run
from .kinetic import KineticError, SpatialGrid, VelocityGrid, moment_array
from .limits import EulerState, section_initial_state, well_prepared_init
from .schemes import get_scheme, scheme_names

log = logging.getLogger(__name__)

ALL_SCHEMES = tuple(scheme_names())
TESTED_SCHEMES = ("IMEX-BDF2", "IMEX-SG2", "IMEX-BDF3", "IMEX-TVB3",
                  "IMEX-BDF4", "IMEX-TVB4", "IMEX-BDF5", "IMEX-TVB5")
STABILITY_XI = (-0.3, -0.15, 0.0, 0.15, 0.3)
INITS = ("section", "bimaxwellian")


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPreset:
    """Grids, physics and the time-step ladder of one study.

    ``dt_max`` of None means dx / (4 v_max).  The ladder lists divisors of
    dt_max; the reference run uses dt_min / ref_factor.  ``t_final`` is
    snapped to a whole number of dt_max steps so that every run of the ladder
    ends at the same time.
    """

    name: str
    model: str = "bgk"
    dv: int = 1
    nx: int = 128
    nv: int = 512
    v_max: float = 8.0
    length: float = 1.0
    eps: tuple[float, ...] = (1e-1, 1e-2, 1e-5)
    transport: str = "weno5"
    mu: str = "rho"
    B0: float = 1.0
    init: str = "section"
    t_final: float = 0.01
    dt_max: float | None = None
    ladder: tuple[int, ...] = (2, 4, 8)
    ref_factor: int = 16
    bootstrap: str = "cascade"
    schemes: tuple[str, ...] = TESTED_SCHEMES
    xi: tuple[float, ...] = STABILITY_XI
    description: str = ""

    def __post_init__(self):
        if self.init not in INITS:
            raise ExperimentError(f"init must be one of {INITS}, got {self.init!r}")
        if self.model == "boltzmann" and self.dv != 2:
            raise ExperimentError("Boltzmann presets need dv = 2")
        if not self.ladder or any(int(d) != d or d < 1 for d in self.ladder):
            raise ExperimentError("ladder entries must be positive integers")
        if self.ref_factor < 1 or not all(e > 0 for e in self.eps):
            raise ExperimentError("ref_factor and every epsilon must be positive")
        if not self.t_final > 0:
            raise ExperimentError("t_final must be positive")
        for s in self.schemes:
            get_scheme(s)
        # grids validate themselves
        self.vgrid
        self.xgrid
        CollisionFrequencyPolicy.parse(self.mu)

    @property
    def vgrid(self) -> VelocityGrid:
        return VelocityGrid(self.dv, self.nv, self.v_max)

    @property
    def xgrid(self) -> SpatialGrid:
        return SpatialGrid(self.nx, self.length)

    @property
    def homogeneous(self) -> bool:
        return self.nx == 1

    @property
    def base_dt(self) -> float:
        if self.dt_max is not None:
            return float(self.dt_max)
        return self.xgrid.dx / (4 * self.v_max)

    @property
    def base_steps(self) -> int:
        return max(1, int(round(self.t_final / self.base_dt)))

    def ladder_dts(self) -> list[tuple[float, int]]:
        """(dt, n_steps) per ladder entry, all ending at base_steps * base_dt."""
        return [(self.base_dt / d, self.base_steps * d) for d in self.ladder]

    def reference_dt(self) -> tuple[float, int]:
        d = max(self.ladder) * self.ref_factor
        return self.base_dt / d, self.base_steps * d

    def with_overrides(self, **kw) -> "ExperimentPreset":
        return replace(self, **kw)


PRESETS: dict[str, ExperimentPreset] = {
    p.name: p for p in [
        ExperimentPreset(
            "bgk-nonhomogeneous", description="BGK on [0,1] x [-8,8], WENO5, NS-prepared data, full size"),
        ExperimentPreset(
            "bgk-nonhomogeneous-desk", nx=64, nv=64,
            description="reduced-size variant of bgk-nonhomogeneous"),
        ExperimentPreset(
            "boltzmann-homogeneous", model="boltzmann", dv=2, nx=1, nv=64, v_max=10.0, eps=(1.0,),
            init="bimaxwellian", t_final=1.0, dt_max=0.1, ladder=(1, 2, 4, 8),
            schemes=("IMEX-BDF2", "IMEX-BDF3", "IMEX-BDF4", "IMEX-BDF5"),
            description="space homogeneous Boltzmann, Maxwell molecules, bi-Maxwellian data"),
        ExperimentPreset(
            "boltzmann-homogeneous-desk", model="boltzmann", dv=2, nx=1, nv=32, v_max=10.0, eps=(1.0,),
            init="bimaxwellian", t_final=1.0, dt_max=0.1, ladder=(1, 2, 4, 8),
            schemes=("IMEX-BDF2", "IMEX-BDF3", "IMEX-BDF4", "IMEX-BDF5"),
            description="reduced-size variant of boltzmann-homogeneous"),
        ExperimentPreset(
            "boltzmann-nonhomogeneous", model="boltzmann", dv=2, nx=128, nv=256, v_max=8.0,
            description="1D-x / 2D-v Boltzmann with BGK penalization, full size"),
        ExperimentPreset(
            "boltzmann-nonhomogeneous-desk", model="boltzmann", dv=2, nx=32, nv=16, v_max=8.0,
            t_final=0.005, schemes=("IMEX-BDF2", "IMEX-BDF3"),
            description="reduced-size variant of boltzmann-nonhomogeneous"),
        ExperimentPreset(
            "stability-figures", nx=1, nv=8, eps=(1.0,), init="bimaxwellian", ladder=(1,),
            schemes=ALL_SCHEMES, description="penalized stability boundaries per scheme and xi"),
    ]
}


def get_preset(name: str, **overrides) -> ExperimentPreset:
    try:
        p = PRESETS[name]
    except KeyError:
        raise ExperimentError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None
    return p.with_overrides(**overrides) if overrides else p


def bimaxwellian(grid: VelocityGrid, rho0=1.0, ux=1.0, uy=1.0, T0=1.0) -> np.ndarray:
    """Sum of two Maxwellians centred at (ux, uy) and (-3 ux, uy), total density rho0."""
    if grid.dv != 2:
        raise ExperimentError("the bi-Maxwellian data lives in 2D velocity space")
    vx, vy = grid.v
    e1 = np.exp(-((vx - ux) ** 2 + (vy - uy) ** 2) / (2 * T0))
    e2 = np.exp(-((vx + 3 * ux) ** 2 + (vy - uy) ** 2) / (2 * T0))
    return rho0 / (4 * np.pi * T0) * (e1 + e2)


def make_problem(preset: ExperimentPreset, eps: float, kernel=None, cache_dir=None) -> ProblemSpec:
    vg = preset.vgrid
    if preset.model == "boltzmann" and kernel is None:
        kernel = build_spectral_kernel(vg, B0=preset.B0, cache_dir=cache_dir)
    return ProblemSpec(eps, vg, preset.xgrid, preset.model, CollisionFrequencyPolicy.parse(preset.mu),
                       None if preset.homogeneous else preset.transport,
                       kernel if preset.model == "boltzmann" else None)


def initial_state(preset: ExperimentPreset, problem: ProblemSpec) -> np.ndarray:
    vg, xg = problem.vgrid, problem.xgrid
    if preset.init == "bimaxwellian":
        f = bimaxwellian(vg)
        return np.broadcast_to(f, problem.shape).copy()
    U0 = section_initial_state(xg, vg.dv)
    return well_prepared_init(U0, problem.eps, "navier-stokes", vg, problem.policy,
                              problem.transport_config)


def solution_error(f: np.ndarray, ref: np.ndarray, problem: ProblemSpec) -> float:
    """L1 error of rho (nonhomogeneous) or of f (homogeneous)."""
    if problem.homogeneous:
        return float(np.sum(np.abs(f - ref)) * problem.vgrid.weight)
    r = moment_array(f, problem.vgrid)[:, 0]
    r0 = moment_array(ref, problem.vgrid)[:, 0]
    return float(np.sum(np.abs(r - r0)) * problem.xgrid.dx)


@dataclass
class ErrorRow:
    scheme: str
    epsilon: float
    dt: float
    error: float
    flag: str = ""


def _safe_run(scheme, problem, f0, dt, n, bootstrap):
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            tr = run(scheme, problem, f0, dt, n, bootstrap_method=bootstrap)
        if not np.all(np.isfinite(tr.f)):
            return None, "nonfinite"
        return tr.f, ""
    except (IntegrationError, KineticError, FloatingPointError) as exc:
        log.warning("%s dt=%.3e failed: %s", scheme, dt, exc)
        return None, "diverged"


def _study_one(args):
    preset, scheme, eps, cache_dir = args
    problem = make_problem(preset, eps, cache_dir=cache_dir)
    f0 = initial_state(preset, problem)
    dt_ref, n_ref = preset.reference_dt()
    ref, flag = _safe_run(scheme, problem, f0, dt_ref, n_ref, preset.bootstrap)
    rows = []
    for dt, n in preset.ladder_dts():
        if ref is None:
            rows.append(ErrorRow(scheme, eps, dt, math.inf, "reference-" + flag))
            continue
        f, flag = _safe_run(scheme, problem, f0, dt, n, preset.bootstrap)
        err = math.inf if f is None else solution_error(f, ref, problem)
        rows.append(ErrorRow(scheme, eps, dt, err, flag))
    return rows


def convergence_study(preset: ExperimentPreset, schemes=None, eps_list=None, workers: int = 1,
                      cache_dir=None) -> list[ErrorRow]:
    """Error of every (scheme, eps, dt) against a same-scheme run at dt_min / ref_factor."""
    schemes = tuple(schemes or preset.schemes)
    eps_list = tuple(eps_list or preset.eps)
    for s in schemes:
        get_scheme(s)
    jobs = [(preset, s, e, cache_dir) for e in eps_list for s in schemes]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_study_one, jobs))
    else:
        parts = [_study_one(j) for j in jobs]
    return [r for p in parts for r in p]


@dataclass
class OrderFit:
    scheme: str
    epsilon: float
    slope: float
    residual: float
    n_points: int
    excluded: list = field(default_factory=list)  # dt values dropped for non-finite error


def fit_slope(dts, errors) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(dt) and the rms residual."""
    x, y = np.log(np.asarray(dts, float)), np.log(np.asarray(errors, float))
    if x.size < 2 or np.unique(x).size < 2:
        raise ExperimentError("need at least two distinct time steps with finite errors")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def fit_order(rows: list[ErrorRow]) -> list[OrderFit]:
    """Per (scheme, eps) slope over the finite, positive errors."""
    groups: dict[tuple[str, float], list[ErrorRow]] = {}
    for r in rows:
        groups.setdefault((r.scheme, r.epsilon), []).append(r)
    out = []
    for (s, e), rs in groups.items():
        good = [r for r in rs if np.isfinite(r.error) and r.error > 0]
        bad = [r.dt for r in rs if r not in good]
        if len({r.dt for r in good}) < 2:
            log.warning("%s eps=%g: fewer than two usable errors, no slope", s, e)
            slope, res = math.nan, math.nan
        else:
            slope, res = fit_slope([r.dt for r in good], [r.error for r in good])
        out.append(OrderFit(s, e, slope, res, len(good), bad))
    return out
