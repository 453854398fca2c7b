"""Run configuration: INI-style ``key = value`` lines grouped in sections.

Recognised sections and keys (all optional unless noted)::

    [problem]  scheme*, model, epsilon*, mu, init, B0, bootstrap
    [grid]     dv, nx, nv, v_max, length, transport
    [time]     dt*, n_steps | t_final
    [output]   dir, prefix, checkpoint_every, fields, figures

Overrides use ``section.key=value``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .bgk import CollisionFrequencyPolicy
from .integrator import MODELS
from .kinetic import SpatialGrid, VelocityGrid
from .schemes import SchemeError, get_scheme
from .transport import METHODS

RUN_INITS = ("section", "bimaxwellian", "maxwellian")

SCHEMA = {
    "problem": {"scheme": str, "model": str, "epsilon": float, "mu": str, "init": str,
                "B0": float, "bootstrap": str},
    "grid": {"dv": int, "nx": int, "nv": int, "v_max": float, "length": float, "transport": str},
    "time": {"dt": float, "n_steps": int, "t_final": float},
    "output": {"dir": str, "prefix": str, "checkpoint_every": int, "fields": bool, "figures": bool},
}
REQUIRED = (("problem", "scheme"), ("problem", "epsilon"), ("time", "dt"))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scheme: str
    epsilon: float
    dt: float
    n_steps: int
    model: str = "bgk"
    mu: str = "rho"
    init: str = "section"
    B0: float = 1.0
    bootstrap: str = "cascade"
    dv: int = 1
    nx: int = 64
    nv: int = 64
    v_max: float = 8.0
    length: float = 1.0
    transport: str = "weno5"
    out_dir: str = "."
    prefix: str = "run"
    checkpoint_every: int = 0
    fields: bool = False
    figures: bool = False

    @property
    def vgrid(self) -> VelocityGrid:
        return VelocityGrid(self.dv, self.nv, self.v_max)

    @property
    def xgrid(self) -> SpatialGrid:
        return SpatialGrid(self.nx, self.length)

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)


def _convert(section, key, raw, kind):
    try:
        if kind is bool:
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}") from None


def parse_override(text: str) -> tuple[str, str, str]:
    lhs, eq, rhs = text.partition("=")
    sec, dot, key = lhs.strip().partition(".")
    if not (eq and dot and sec and key):
        raise ConfigError(f"override must look like section.key=value, got {text!r}")
    return sec, key, rhs.strip()


def load_config(path: str | Path | None = None, overrides=()) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (B0)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        try:
            cp.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from None
    for text in overrides:
        sec, key, val = parse_override(text)
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, key, val)

    vals = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; expected one of {sorted(SCHEMA)}")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]; expected one of {sorted(SCHEMA[sec])}")
            vals[(sec, key)] = _convert(sec, key, raw, SCHEMA[sec][key])
    for req in REQUIRED:
        if req not in vals:
            raise ConfigError(f"missing required key [{req[0]}] {req[1]}")
    return _build(vals)


def _build(vals) -> RunConfig:
    g = lambda s, k, d=None: vals.get((s, k), d)  # noqa: E731
    dt = g("time", "dt")
    if not dt > 0:
        raise ConfigError("dt must be positive")
    n, tf = g("time", "n_steps"), g("time", "t_final")
    if n is not None and tf is not None:
        raise ConfigError("give either n_steps or t_final, not both")
    if n is None and tf is None:
        raise ConfigError("missing [time] n_steps or t_final")
    if n is None:
        n = int(round(tf / dt))
        if abs(n * dt - tf) > 1e-9 * max(1.0, tf):
            raise ConfigError(f"t_final = {tf} is not a whole number of steps of dt = {dt}")
    if n < 0:
        raise ConfigError("n_steps must be >= 0")
    try:
        scheme = get_scheme(g("problem", "scheme")).name
    except SchemeError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(
        scheme=scheme,
        epsilon=g("problem", "epsilon"), dt=dt, n_steps=n,
        model=g("problem", "model", "bgk"), mu=g("problem", "mu", "rho"),
        init=g("problem", "init", "section"), B0=g("problem", "B0", 1.0),
        bootstrap=g("problem", "bootstrap", "cascade"),
        dv=g("grid", "dv", 1), nx=g("grid", "nx", 64), nv=g("grid", "nv", 64),
        v_max=g("grid", "v_max", 8.0), length=g("grid", "length", 1.0),
        transport=g("grid", "transport", "weno5"),
        out_dir=g("output", "dir", "."), prefix=g("output", "prefix", "run"),
        checkpoint_every=g("output", "checkpoint_every", 0),
        fields=g("output", "fields", False), figures=g("output", "figures", False),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}")
    if cfg.transport not in METHODS:
        raise ConfigError(f"transport must be one of {METHODS}")
    if cfg.init not in RUN_INITS:
        raise ConfigError(f"init must be one of {RUN_INITS}")
    if cfg.bootstrap not in ("cascade", "bdf1"):
        raise ConfigError("bootstrap must be 'cascade' or 'bdf1'")
    if not cfg.epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if cfg.checkpoint_every < 0:
        raise ConfigError("checkpoint_every must be >= 0")
    CollisionFrequencyPolicy.parse(cfg.mu)
    cfg.vgrid
    cfg.xgrid
