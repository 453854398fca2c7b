"""Linear stability and monotonicity of (penalized) IMEX multistep schemes.

Scalar test problem: f' = lambda_E f + lambda_I f, giving the characteristic
polynomial

    (1 - z_I c_{-1}) zeta^s + sum_j (a_j - z_E b_j - z_I c_j) zeta^{s-1-j}.

For the penalized relaxation with central transport the symbols are
``z_E = i a sin(2k) - xi z`` and ``z_I = -z`` with ``a = v dt / dx`` and
``z = mu dt / eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction as Fr

import numpy as np

from .schemes import ImexMultistepScheme, get_scheme

TOL_SIMPLE = 1e-9
TOL_CLUSTER = 1e-6
N_MODES = 64


class StabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class CharacteristicQuery:
    scheme: ImexMultistepScheme
    z_E: complex
    z_I: complex


def characteristic_coefficients(scheme: ImexMultistepScheme, z_E, z_I) -> np.ndarray:
    """Polynomial coefficients, highest degree first; broadcasts over z_E, z_I."""
    z_E = np.asarray(z_E, dtype=complex)
    z_I = np.asarray(z_I, dtype=complex)
    z_E, z_I = np.broadcast_arrays(z_E, z_I)
    a, b, c = scheme.a_real, scheme.b_real, scheme.c_real
    lead = 1 - z_I * scheme.cm1
    rest = a - z_E[..., None] * b - z_I[..., None] * c
    return np.concatenate([lead[..., None], rest], axis=-1)


def _roots_batch(coef: np.ndarray) -> np.ndarray:
    """Roots of many degree-s polynomials with a nonzero leading coefficient."""
    s = coef.shape[-1] - 1
    lead = coef[..., :1]
    if np.any(np.abs(lead) < 1e-300):
        raise StabilityError("degenerate leading coefficient in batch; use characteristic_stable")
    mon = coef[..., 1:] / lead
    comp = np.zeros(coef.shape[:-1] + (s, s), dtype=complex)
    comp[..., 0, :] = -mon
    if s > 1:
        idx = np.arange(s - 1)
        comp[..., idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


def _root_condition(roots: np.ndarray, tol_simple: float, tol_cluster: float) -> tuple[bool, float]:
    if roots.size == 0:
        return True, 0.0
    mods = np.abs(roots)
    rmax = float(mods.max())
    if rmax > 1 + tol_simple:
        return False, rmax
    d = np.where(np.eye(roots.size, dtype=bool), np.inf, np.abs(roots[:, None] - roots[None, :]))
    close = np.any(d < tol_cluster, axis=1)
    if np.any(close & (mods >= 1 - tol_cluster)):
        return False, rmax
    return True, rmax


def characteristic_stable(q: CharacteristicQuery, tol_simple: float = TOL_SIMPLE,
                          tol_cluster: float = TOL_CLUSTER) -> tuple[bool, float]:
    """Root condition for one (z_E, z_I): all |zeta| <= 1, repeated roots strictly inside."""
    coef = characteristic_coefficients(q.scheme, q.z_E, q.z_I)
    nz = np.flatnonzero(np.abs(coef) > 1e-14 * np.max(np.abs(coef)))
    if nz.size == 0:
        raise StabilityError("characteristic polynomial vanishes identically")
    coef = coef[nz[0]:]  # reduced degree when the leading term cancels
    roots = np.roots(coef)
    if not np.all(np.isfinite(roots)):
        raise StabilityError(f"root finder failed for z_E={q.z_E}, z_I={q.z_I}")
    resid = np.max(np.abs(np.polyval(coef, roots))) if roots.size else 0.0
    if resid > 1e-6 * np.sum(np.abs(coef)) * max(1.0, float(np.max(np.abs(roots), initial=1.0)) ** len(coef)):
        raise StabilityError(f"root finder residual {resid:.3e} too large")
    return _root_condition(roots, tol_simple, tol_cluster)


def mode_symbols(n_modes: int = N_MODES) -> np.ndarray:
    """sin(2k) on k uniform in [0, pi)."""
    k = np.pi * np.arange(n_modes) / n_modes
    return np.sin(2 * k)


def penalized_max_modulus(scheme: ImexMultistepScheme, xi: float, a: np.ndarray, z: float,
                          n_modes: int = N_MODES) -> np.ndarray:
    """Largest root modulus over sampled modes for each advection number a."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    sk = mode_symbols(n_modes)
    zE = 1j * a[:, None] * sk[None, :] - xi * z
    coef = characteristic_coefficients(scheme, zE, -z + 0 * zE)
    r = _roots_batch(coef)
    return np.abs(r).max(axis=(-1, -2))


def penalized_stable(scheme, xi, a, z, n_modes=N_MODES, tol_simple=TOL_SIMPLE, tol_cluster=TOL_CLUSTER):
    """Root condition over all sampled modes, vectorized in a."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    sk = mode_symbols(n_modes)
    zE = 1j * a[:, None] * sk[None, :] - xi * z
    r = _roots_batch(characteristic_coefficients(scheme, zE, -z + 0 * zE))
    mods = np.abs(r)
    ok = np.all(mods <= 1 + tol_simple, axis=(-1, -2))
    if r.shape[-1] > 1:
        d = np.where(np.eye(r.shape[-1], dtype=bool), np.inf, np.abs(r[..., :, None] - r[..., None, :]))
        bad = np.any((d < tol_cluster).any(-1) & (mods >= 1 - tol_cluster), axis=(-1, -2))
        ok &= ~bad
    return ok


def stable_advection_limit(scheme, xi, z, a_max=4.0, n_scan=128, n_modes=N_MODES, tol=1e-10):
    """Largest a* such that [0, a*] is stable at stiffness z (0 if a = 0 is unstable)."""
    grid = np.linspace(0.0, a_max, n_scan + 1)
    ok = penalized_stable(scheme, xi, grid, z, n_modes)
    if not ok[0]:
        return 0.0
    if ok.all():
        return a_max
    i = int(np.argmin(ok))  # first unstable scan point
    lo, hi = grid[i - 1], grid[i]
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if penalized_stable(scheme, xi, [mid], z, n_modes)[0]:
            lo = mid
        else:
            hi = mid
    return lo


def penalized_stability_boundary(scheme, xi: float, z_values, a_max: float = 4.0,
                                 n_modes: int = N_MODES) -> np.ndarray:
    """Boundary a*(z) of the stable region in the (z, a) plane.

    The stable set is taken as the region below the curve: for each stiffness
    z, all advection numbers 0 <= a <= a*(z) satisfy the root condition for
    every sampled mode.
    """
    if not xi > -1:
        raise StabilityError("penalization factor must satisfy xi > -1")
    return np.array([stable_advection_limit(scheme, xi, float(z), a_max, n_modes=n_modes)
                     for z in np.atleast_1d(z_values)])


def boundary_table(schemes, xis=(-0.3, -0.15, 0.0, 0.15, 0.3), z_values=None, a_max=4.0,
                   n_modes=N_MODES) -> list[tuple]:
    """Rows (scheme, xi, z, a_boundary) over a log-spaced stiffness sweep."""
    z_values = np.geomspace(1e-2, 1e2, 41) if z_values is None else np.asarray(z_values, float)
    rows = []
    for sch in schemes:
        sch = get_scheme(sch) if isinstance(sch, str) else sch
        for xi in xis:
            for z, a in zip(z_values, penalized_stability_boundary(sch, xi, z_values, a_max, n_modes)):
                rows.append((sch.name, float(xi), float(z), float(a)))
    return rows


# --- monotonicity --------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityRegion:
    scheme: str
    xi: object
    z_lo: object
    z_hi: object  # math.inf when unbounded
    feasible: bool
    limiting_hi: int | None = None  # history index defining z_hi
    limiting_lo: int | None = None

    def contains(self, z) -> bool:
        return self.feasible and self.z_lo <= z <= self.z_hi


def monotonicity_region(scheme: ImexMultistepScheme, xi=0) -> MonotonicityRegion:
    """Interval of z >= 0 with a_j + z (c_j + xi b_j) <= 0 for all j and (c.e + c_{-1})(1 + xi) >= 0.

    Exact when xi is a Fraction or int.
    """
    exact = isinstance(xi, (int, Fr))
    X = Fr(xi) if exact else float(xi)
    conv = (lambda q: q) if exact else float
    if not X > -1:
        raise StabilityError("penalization factor must satisfy xi > -1")
    lo, hi = conv(Fr(0)), math.inf
    jlo = jhi = None
    feasible = (sum(scheme.c) + scheme.c_minus1) * (1 + X) >= 0
    for j, (aj, bj, cj) in enumerate(zip(scheme.a, scheme.b, scheme.c)):
        aj, beta = conv(aj), conv(cj) + X * conv(bj)
        if beta == 0:
            if aj > 0:
                feasible = False
        elif beta > 0:
            bound = -aj / beta
            if bound < hi:
                hi, jhi = bound, j
        else:
            bound = -aj / beta
            if bound > lo:
                lo, jlo = bound, j
    if hi < lo:
        feasible = False
    return MonotonicityRegion(scheme.name, xi, lo, hi, bool(feasible), jhi, jlo)


def convex_weights(scheme: ImexMultistepScheme, xi: float, z: float) -> np.ndarray:
    """alpha_j = -(a_j + z (c_j + xi b_j)) / (1 + c_{-1} z)."""
    a, b, c = scheme.a_real, scheme.b_real, scheme.c_real
    return -(a + z * (c + xi * b)) / (1 + scheme.cm1 * z)


def homogeneous_penalized_step(scheme: ImexMultistepScheme, history: list[np.ndarray], M: np.ndarray,
                               xi: float, z: float) -> np.ndarray:
    """One step of the penalized scheme for Q = eta (M - f), history newest first."""
    alpha = convex_weights(scheme, xi, z)
    out = (1 - alpha.sum()) * M
    for aj, fj in zip(alpha, history):
        out = out + aj * fj
    return out


# --- the printed nonnegativity table --------------------------------------------

def _row(name, z_lo, z_hi, xi_lo, xi_hi, xi_lo_open=False, note=""):
    return dict(scheme=name, z_lo=z_lo, z_hi=z_hi, xi_lo=xi_lo, xi_hi=xi_hi,
                xi_lo_open=xi_lo_open, note=note)


def printed_table() -> list[dict]:
    """Nonnegativity restrictions as printed: z bounds as functions of xi plus the xi range."""
    return [
        _row("IMEX-BDF1", lambda x: Fr(0), lambda x: 1 / x, Fr(0), None, True),
        _row("IMEX-CN2", lambda x: Fr(0), lambda x: 2 / (1 + 3 * x), Fr(0), None),
        _row("IMEX-MCN2", lambda x: Fr(0), lambda x: 8 / (3 + 12 * x), Fr(1, 8), None),
        _row("IMEX-BDF2", lambda x: 1 / (2 * x), lambda x: 1 / x, Fr(0), None, True),
        _row("IMEX-SG2", lambda x: Fr(0), lambda x: min(Fr(1, 2), 1 / (2 * x)) if x else Fr(1, 2),
             Fr(0), None),
        _row("IMEX-AD3", lambda x: Fr(0), lambda x: 12 / (Fr(1551, 2500) + 23 * x),
             Fr(107, 2196), Fr(492, 4147)),
    ]


def derived_xi_range(scheme: ImexMultistepScheme) -> tuple[Fr | None, Fr | None]:
    """Exact xi range where the z-interval is nonempty for some z > 0 (linear constraints only)."""
    lo, hi = None, None
    for aj, bj, cj in zip(scheme.a, scheme.b, scheme.c):
        if aj == 0 and bj != 0:
            # z (c_j + xi b_j) <= 0 for z > 0  <=>  c_j + xi b_j <= 0
            bound = -cj / bj
            if bj > 0:
                hi = bound if hi is None else min(hi, bound)
            else:
                lo = bound if lo is None else max(lo, bound)
    return lo, hi


def table_comparison(samples_per_row: int = 7, tol: float = 1e-12) -> list[dict]:
    """Compare monotonicity_region with each printed row; discrepancies are flagged, not forced."""
    out = []
    for row in printed_table():
        sch = get_scheme(row["scheme"])
        lo = row["xi_lo"]
        hi = row["xi_hi"] if row["xi_hi"] is not None else lo + 4
        xs = [lo + (hi - lo) * Fr(k + 1, samples_per_row + 1) for k in range(samples_per_row)]
        worst_lo = worst_hi = 0.0
        for x in xs:
            reg = monotonicity_region(sch, x)
            worst_lo = max(worst_lo, abs(float(reg.z_lo - row["z_lo"](x))))
            worst_hi = max(worst_hi, abs(float(reg.z_hi - row["z_hi"](x))))
        dlo, dhi = derived_xi_range(sch)
        xi_dev = 0.0
        if row["xi_hi"] is not None or dhi is not None:
            if (row["xi_hi"] is None) != (dhi is None):
                xi_dev = math.inf
            else:
                xi_dev = max(abs(float(dlo - row["xi_lo"])) if dlo is not None else 0.0,
                             abs(float(dhi - row["xi_hi"])))
        ok = worst_lo <= tol and worst_hi <= tol and xi_dev <= tol
        out.append(dict(
            scheme=row["scheme"], max_dev_z_lo=worst_lo, max_dev_z_hi=worst_hi, max_dev_xi=xi_dev,
            derived_xi_lo=dlo, derived_xi_hi=dhi, match=ok,
            flag="" if ok else "DISCREPANCY",
            derived_z_hi=_z_hi_expression(sch) if not ok else "",
        ))
    return out


def _z_hi_expression(scheme: ImexMultistepScheme) -> str:
    """Text form of the j = 0 upper bound z <= 1/(c_0 + xi b_0), cleared of the denominator of b_0."""
    c0, b0 = Fr(scheme.c[0]), Fr(scheme.b[0])
    if b0 == 0:
        return f"z <= {1 / c0}"
    k = b0.denominator
    return f"z <= {k}/({c0 * k} + {b0 * k} xi)"


# --- positivity witnesses --------------------------------------------------------

def positivity_witness(scheme: ImexMultistepScheme, xi: float, M: np.ndarray, factor: float = 1.1,
                       spike: float = 1e3):
    """History that loses positivity at z = factor * z_hi.

    All states equal M except the one whose weight turns negative, which
    carries a large spike at the node where M is smallest.
    """
    reg = monotonicity_region(scheme, xi)
    if not reg.feasible or not np.isfinite(float(reg.z_hi)):
        raise StabilityError(f"{scheme.name}: no finite upper bound at xi={xi}")
    z = factor * float(reg.z_hi)
    alpha = convex_weights(scheme, float(xi), z)
    j = int(np.argmin(alpha))
    if alpha[j] >= 0:
        raise StabilityError("no negative weight beyond the upper bound")
    node = np.unravel_index(np.argmin(M), M.shape)
    hist = [M.copy() for _ in range(scheme.s)]
    hist[j][node] += spike * M.max()
    return z, hist, homogeneous_penalized_step(scheme, hist, M, float(xi), z)
