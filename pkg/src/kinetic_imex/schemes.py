"""IMEX linear multistep schemes and their order conditions.

A scheme advances ``f' = E(f) + I(f)`` as

    f^{n+1} + sum_j a_j f^{n-j} = dt sum_j b_j E(f^{n-j})
                                 + dt (c_{-1} I(f^{n+1}) + sum_j c_j I(f^{n-j}))

with ``j = 0..s-1``.  Coefficients are kept as exact fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction as Fr

import numpy as np


class SchemeError(ValueError):
    pass


def _fracs(values) -> tuple[Fr, ...]:
    return tuple(Fr(v) for v in values)


@dataclass(frozen=True)
class ImexMultistepScheme:
    name: str
    a: tuple[Fr, ...]
    b: tuple[Fr, ...]
    c: tuple[Fr, ...]
    c_minus1: Fr
    declared_order: int
    _checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "a", _fracs(self.a))
        object.__setattr__(self, "b", _fracs(self.b))
        object.__setattr__(self, "c", _fracs(self.c))
        object.__setattr__(self, "c_minus1", Fr(self.c_minus1))
        s = len(self.a)
        if s < 1 or len(self.b) != s or len(self.c) != s:
            raise SchemeError(f"{self.name}: a, b, c must all have length s >= 1")
        if self.c_minus1 == 0:
            raise SchemeError(f"{self.name}: c_minus1 must be nonzero")
        if self.declared_order < 1:
            raise SchemeError(f"{self.name}: declared order must be >= 1")
        if self._checked:
            res = order_residuals(self, self.declared_order)
            if np.max(np.abs(res)) > 1e-12:
                raise SchemeError(
                    f"{self.name}: order conditions fail at declared order "
                    f"{self.declared_order} (max residual {np.max(np.abs(res)):.3e})"
                )

    @property
    def s(self) -> int:
        return len(self.a)

    @property
    def is_bdf(self) -> bool:
        return all(cj == 0 for cj in self.c)

    @property
    def is_adams(self) -> bool:
        return self.a[0] == -1 and all(aj == 0 for aj in self.a[1:])

    # real-valued views
    @property
    def a_real(self) -> np.ndarray:
        return np.array([float(x) for x in self.a])

    @property
    def b_real(self) -> np.ndarray:
        return np.array([float(x) for x in self.b])

    @property
    def c_real(self) -> np.ndarray:
        return np.array([float(x) for x in self.c])

    @property
    def cm1(self) -> float:
        return float(self.c_minus1)


def order_residuals_exact(scheme: ImexMultistepScheme, p: int) -> list[Fr]:
    """Exact residuals of the 2p+1 order conditions.

    Row 0 is ``1 + sum a_j``.  For k = 1..p the explicit row is
    ``(1 + sum a_j (-j)^k)/k! - sum b_j (-j)^(k-1)/(k-1)!`` and the implicit row
    ``(1 + sum a_j (-j)^k)/k! - (c_{-1} + sum c_j (-j)^(k-1))/(k-1)!``.
    They express exactness of the method on polynomials of degree <= p.
    """
    if p < 1:
        raise SchemeError("order p must be >= 1")
    a, b, c = scheme.a, scheme.b, scheme.c
    rows = [1 + sum(a)]
    for k in range(1, p + 1):
        lhs = (1 + sum(aj * Fr(-j) ** k for j, aj in enumerate(a))) / math.factorial(k)
        expl = sum(bj * Fr(-j) ** (k - 1) for j, bj in enumerate(b)) / math.factorial(k - 1)
        impl = (scheme.c_minus1 + sum(cj * Fr(-j) ** (k - 1) for j, cj in enumerate(c))) / math.factorial(k - 1)
        rows.append(lhs - expl)
        rows.append(lhs - impl)
    return rows


def order_residuals(scheme: ImexMultistepScheme, p: int) -> np.ndarray:
    return np.array([float(r) for r in order_residuals_exact(scheme, p)])


def has_order(scheme: ImexMultistepScheme, p: int, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(order_residuals(scheme, p))) < tol)


def extrapolation_weights(scheme: ImexMultistepScheme) -> tuple[np.ndarray, bool]:
    """Return ``(b_j - c_j)/c_{-1}`` and whether they match the Lagrange weights.

    For full-order schemes (p = s) these are the weights extrapolating
    ``f^{n-j}`` to ``t^{n+1}``: ``prod_{k != j} (k+1)/(k-j)``.
    """
    s = scheme.s
    w = [(bj - cj) / scheme.c_minus1 for bj, cj in zip(scheme.b, scheme.c)]
    lag = lagrange_extrapolation_weights(s)
    ok = all(abs(float(wj - lj)) <= 1e-12 for wj, lj in zip(w, lag))
    return np.array([float(x) for x in w]), ok


def lagrange_extrapolation_weights(s: int) -> list[Fr]:
    out = []
    for j in range(s):
        wj = Fr(1)
        for k in range(s):
            if k != j:
                wj *= Fr(k + 1, k - j)
        out.append(wj)
    return out


def _S(name, a, b, cm1, c, p):
    return ImexMultistepScheme(name, a, b, c, cm1, p)


def _F(*args):
    return [Fr(x) if not isinstance(x, tuple) else Fr(*x) for x in args]


def builtin_schemes() -> list[ImexMultistepScheme]:
    """The twelve schemes of the standard IMEX multistep table (orders 1-5)."""
    return [
        _S("IMEX-BDF1", _F(-1), _F(1), 1, _F(0), 1),
        _S("IMEX-CN2", _F(-1, 0), _F((3, 2), (-1, 2)), Fr(1, 2), _F((1, 2), 0), 2),
        _S("IMEX-MCN2", _F(-1, 0), _F((3, 2), (-1, 2)), Fr(9, 16), _F((3, 8), (1, 16)), 2),
        _S("IMEX-BDF2", _F((-4, 3), (1, 3)), _F((4, 3), (-2, 3)), Fr(2, 3), _F(0, 0), 2),
        _S("IMEX-SG2", _F((-3, 4), 0, (-1, 4)), _F((3, 2), 0, 0), 1, _F(0, 0, (1, 2)), 2),
        _S("IMEX-BDF3", _F((-18, 11), (9, 11), (-2, 11)), _F((18, 11), (-18, 11), (6, 11)),
           Fr(6, 11), _F(0, 0, 0), 3),
        _S("IMEX-AD3", _F(-1, 0, 0), _F((23, 12), (-4, 3), (5, 12)), Fr(4661, 10000),
           _F((15551, 30000), (1949, 30000), (-1483, 30000)), 3),
        _S("IMEX-TVB3", _F((-3909, 2048), (1367, 1024), (-873, 2048)),
           _F((18463, 12288), (-1271, 768), (8233, 12288)), Fr(1089, 2048),
           _F((-1139, 12288), (-367, 6144), (1699, 12288)), 3),
        _S("IMEX-BDF4", _F((-48, 25), (36, 25), (-16, 25), (3, 25)),
           _F((48, 25), (-72, 25), (48, 25), (-12, 25)), Fr(12, 25), _F(0, 0, 0, 0), 4),
        _S("IMEX-TVB4", _F((-21531, 8192), (22753, 8192), (-12245, 8192), (2831, 8192)),
           _F((13261, 8192), (-75029, 24576), (54799, 24576), (-15245, 24576)), Fr(4207, 8192),
           _F((-3567, 8192), (697, 24576), (4315, 24576), (-41, 384)), 4),
        _S("IMEX-BDF5", _F((-300, 137), (300, 137), (-200, 137), (75, 137), (-12, 137)),
           _F((300, 137), (-600, 137), (600, 137), (-300, 137), (60, 137)), Fr(60, 137),
           _F(0, 0, 0, 0, 0), 5),
        _S("IMEX-TVB5",
           _F((-13553, 4096), (38121, 8192), (-7315, 2048), (6161, 4096), (-2269, 8192)),
           _F((10306951, 5898240), (-13656497, 2949120), (1249949, 245760),
              (-7937687, 2949120), (3387361, 5898240)),
           Fr(4007, 8192),
           _F((-4118249, 5898240), (768703, 2949120), (47849, 245760),
              (-725087, 2949120), (502321, 5898240)), 5),
    ]


# Commonly reprinted variants of two table rows that violate the order
# conditions: TVB3 with the implicit coefficients cyclically shifted and TVB4
# with two digits of a_1 transposed.  Kept so the discrepancy can be reported.
MISPRINTED_VARIANTS = {
    "IMEX-TVB3": dict(
        c_minus1=Fr(1699, 12288),
        c=(Fr(1089, 2048), Fr(-1139, 12288), Fr(-367, 6144)),
    ),
    "IMEX-TVB4": dict(
        a=(Fr(-21531, 8192), Fr(22573, 8192), Fr(-12245, 8192), Fr(2831, 8192)),
    ),
}


def misprint_report() -> list[dict]:
    """Rows describing each misprinted variant and its order-condition failure."""
    rows = []
    for sch in builtin_schemes():
        if sch.name not in MISPRINTED_VARIANTS:
            continue
        fields = dict(a=sch.a, b=sch.b, c=sch.c, c_minus1=sch.c_minus1)
        fields.update(MISPRINTED_VARIANTS[sch.name])
        bad = ImexMultistepScheme(sch.name + " (misprint)", fields["a"], fields["b"], fields["c"],
                                  fields["c_minus1"], sch.declared_order, _checked=False)
        for key, value in MISPRINTED_VARIANTS[sch.name].items():
            rows.append(dict(
                scheme=sch.name,
                field=key,
                misprinted=value,
                corrected=getattr(sch, key),
                misprint_max_residual=float(np.max(np.abs(order_residuals(bad, sch.declared_order)))),
            ))
    return rows


_REGISTRY: dict[str, ImexMultistepScheme] | None = None


def get_scheme(name: str) -> ImexMultistepScheme:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = {sch.name: sch for sch in builtin_schemes()}
    key = name.strip()
    if key in _REGISTRY:
        return _REGISTRY[key]
    for k, v in _REGISTRY.items():
        if k.lower() == key.lower() or k.lower() == f"imex-{key.lower()}":
            return v
    raise SchemeError(f"unknown scheme {name!r}; known: {', '.join(_REGISTRY)}")


def scheme_names() -> list[str]:
    return [s.name for s in builtin_schemes()]
