"""Run configuration: `key = value` files with [bc], [adapt] and [output]
sections, plus presets for the reference experiments.

Grammar:
    # comment lines (or trailing comments) are ignored
    key = value                 top-level simulation keys
    [bc]                        eta/u/v = condition, or eta.left = condition
    [adapt]                     err, hmin, nbvx, cadence
    [output]                    dir, snapshot_every, fields, section entries
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .adapt import AdaptParams
from .assembly import DIRICHLET, NEUMANN, PERIODIC, BoundarySpec
from .mesh import SIDE_LABELS

_VARS = ("eta", "u", "v")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    family: str
    theta2: float | None = None
    nu: float | None = None
    mu: float | None = None
    xmin: float = -40.0
    xmax: float = 40.0
    ymin: float = -40.0
    ymax: float = 40.0
    nx: int = 160
    ny: int = 160
    dt: float = 0.1
    t_end: float = 10.0
    algorithm: int = 1
    reuse_operators: bool = True
    amplitude: float = 0.2
    width: float = 5.0
    bc: BoundarySpec = field(default_factory=BoundarySpec.all_dirichlet)
    adapt: AdaptParams | None = None
    out_dir: str = "out"
    snapshot_every: float | None = None
    snapshot_fields: tuple = ("eta",)
    sections: tuple = ()                 # ((axis, value), ...)
    n_list: tuple = (10, 20, 40, 80)     # converge subcommand only
    metadata: dict = field(default_factory=dict, compare=False)


_FAMILY_DEFAULTS = {
    "bbm-bbm": {},
    "bona-smith": {},
    "general": {},
    "kdv-kdv": {"dt": 0.001, "amplitude": 0.5,
                "bc": BoundarySpec.bi_periodic},
}

_BOOLS = {"true": True, "yes": True, "1": True, "on": True,
          "false": False, "no": False, "0": False, "off": False}


def _typed(raw, line, kind, key):
    try:
        if kind is bool:
            val = _BOOLS.get(raw.lower())
            if val is None:
                raise ValueError
            return val
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"line {line}: key '{key}' expects {kind.__name__}, "
            f"got {raw!r}") from None


_TOP_KEYS = {
    "family": str, "theta2": float, "nu": float, "mu": float,
    "xmin": float, "xmax": float, "ymin": float, "ymax": float,
    "nx": int, "ny": int, "dx": float, "dt": float, "t_end": float,
    "algorithm": int, "reuse_operators": bool,
    "amplitude": float, "width": float, "n_list": str,
}


def parse_config(text: str) -> RunConfig:
    """Parse config text; raises ConfigError with a line number on bad input."""
    sections: dict[str, dict] = {"": {}, "bc": {}, "adapt": {}, "output": {}}
    current = ""
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[] \t")
            if name not in ("bc", "adapt", "output"):
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        sections[current][key] = (raw, lineno)

    top = sections[""]
    if "family" not in top:
        raise ConfigError(
            "missing required key 'family' (one of bbm-bbm, bona-smith, "
            "kdv-kdv, general)")
    family = top["family"][0].lower()
    if family not in _FAMILY_DEFAULTS:
        raise ConfigError(f"line {top['family'][1]}: unknown family "
                          f"{family!r}")

    cfg = RunConfig(family=family)
    for attr, maker in _FAMILY_DEFAULTS[family].items():
        setattr(cfg, attr, maker() if callable(maker) else maker)

    dx = None
    for key, (raw, lineno) in top.items():
        if key == "family":
            continue
        if key not in _TOP_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "dx":
            dx = _typed(raw, lineno, float, key)
            continue
        if key == "n_list":
            try:
                cfg.n_list = tuple(int(s) for s in raw.split(","))
            except ValueError:
                raise ConfigError(f"line {lineno}: n_list expects "
                                  "comma-separated integers") from None
            continue
        setattr(cfg, key, _typed(raw, lineno, _TOP_KEYS[key], key))
    if dx is not None:
        cfg.nx = round((cfg.xmax - cfg.xmin) / dx)
        cfg.ny = round((cfg.ymax - cfg.ymin) / dx)
    if cfg.algorithm not in (1, 2):
        raise ConfigError("algorithm must be 1 or 2")
    if cfg.dt <= 0 or cfg.t_end < 0:
        raise ConfigError("dt must be > 0 and t_end >= 0")

    if sections["bc"]:
        cfg.bc = _parse_bc(sections["bc"], cfg.bc)
    if sections["adapt"]:
        cfg.adapt = _parse_adapt(sections["adapt"], cfg)
    _parse_output(sections["output"], cfg)
    return cfg


def _parse_bc(items, default_bc: BoundarySpec) -> BoundarySpec:
    conds = {v: dict(default_bc.for_variable(v)) for v in _VARS}
    for key, (raw, lineno) in items.items():
        cond = raw.lower()
        if cond not in (DIRICHLET, NEUMANN, PERIODIC):
            raise ConfigError(f"line {lineno}: bad condition {raw!r}")
        if "." in key:
            var, side = key.split(".", 1)
        else:
            var, side = key, None
        if var not in _VARS:
            raise ConfigError(f"line {lineno}: unknown bc variable {var!r}")
        if side is None:
            for s in SIDE_LABELS:
                conds[var][s] = cond
        elif side in SIDE_LABELS:
            conds[var][side] = cond
        else:
            raise ConfigError(f"line {lineno}: unknown side {side!r}")
    try:
        return BoundarySpec(conds["eta"], conds["u"], conds["v"])
    except ValueError as exc:
        raise ConfigError(f"[bc] section: {exc}") from None


def _parse_adapt(items, cfg: RunConfig) -> AdaptParams:
    kinds = {"err": float, "hmin": float, "nbvx": int, "cadence": int}
    vals = {"err": 1e-4, "hmin": (cfg.xmax - cfg.xmin) / cfg.nx,
            "nbvx": 1_000_000, "cadence": 1}
    for key, (raw, lineno) in items.items():
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown [adapt] key {key!r}")
        vals[key] = _typed(raw, lineno, kinds[key], key)
    try:
        return AdaptParams(**vals)
    except ValueError as exc:
        raise ConfigError(f"[adapt] section: {exc}") from None


def _parse_output(items, cfg: RunConfig):
    sections = []
    for key, (raw, lineno) in items.items():
        if key == "dir":
            cfg.out_dir = raw
        elif key == "snapshot_every":
            cfg.snapshot_every = _typed(raw, lineno, float, key)
        elif key == "fields":
            cfg.snapshot_fields = tuple(s.strip() for s in raw.split(","))
        elif key.startswith("section"):
            try:
                axis, value = raw.split(":")
                axis = axis.strip()
                if axis not in ("x", "y"):
                    raise ValueError
                sections.append((axis, float(value)))
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: section expects 'x:VALUE' or "
                    f"'y:VALUE', got {raw!r}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown [output] key {key!r}")
    if sections:
        cfg.sections = tuple(sections)


def render_config(cfg: RunConfig) -> str:
    """Config text that parses back to an equal RunConfig."""
    lines = [f"family = {cfg.family}"]
    for key in ("theta2", "nu", "mu"):
        val = getattr(cfg, key)
        if val is not None:
            lines.append(f"{key} = {val!r}")
    for key in ("xmin", "xmax", "ymin", "ymax", "nx", "ny", "dt", "t_end",
                "algorithm", "amplitude", "width"):
        lines.append(f"{key} = {getattr(cfg, key)!r}")
    lines.append(f"reuse_operators = {'true' if cfg.reuse_operators else 'false'}")
    lines.append(f"n_list = {','.join(str(n) for n in cfg.n_list)}")
    lines.append("[bc]")
    for var in _VARS:
        for side, cond in cfg.bc.for_variable(var).items():
            lines.append(f"{var}.{side} = {cond}")
    if cfg.adapt is not None:
        lines.append("[adapt]")
        for key in ("err", "hmin", "nbvx", "cadence"):
            lines.append(f"{key} = {getattr(cfg.adapt, key)!r}")
    lines.append("[output]")
    lines.append(f"dir = {cfg.out_dir}")
    if cfg.snapshot_every is not None:
        lines.append(f"snapshot_every = {cfg.snapshot_every!r}")
    lines.append(f"fields = {','.join(cfg.snapshot_fields)}")
    for i, (axis, value) in enumerate(cfg.sections):
        lines.append(f"section{i} = {axis}:{value!r}")
    return "\n".join(lines) + "\n"


def preset(name: str):
    """Configs for the reference experiments.

    "compare" returns a list of three configs (one per system family);
    the other presets return a single RunConfig.
    """
    if name == "reflection":
        bc = BoundarySpec(
            eta={s: NEUMANN for s in SIDE_LABELS},
            u={"left": DIRICHLET, "top": DIRICHLET,
               "right": NEUMANN, "bottom": NEUMANN},
            v={"left": DIRICHLET, "top": DIRICHLET,
               "right": NEUMANN, "bottom": NEUMANN})
        return RunConfig(family="bbm-bbm", amplitude=0.2, width=5.0,
                         t_end=70.0, bc=bc, out_dir="out-reflection",
                         snapshot_every=10.0)
    if name == "kdv-periodic":
        return RunConfig(family="kdv-kdv", amplitude=0.5, width=5.0,
                         dt=0.001, t_end=10.0,
                         bc=BoundarySpec.bi_periodic(),
                         out_dir="out-kdv-periodic", snapshot_every=2.0)
    if name == "compare":
        shared = dict(amplitude=0.5, width=5.0, t_end=25.0,
                      snapshot_every=5.0, sections=(("x", 0.0),))
        bbm = RunConfig(family="bbm-bbm", out_dir="out-compare-bbm-bbm",
                        **shared)
        bs = RunConfig(family="bona-smith", theta2=9.0 / 11.0,
                       out_dir="out-compare-bona-smith",
                       metadata={"theta2_assumed": 9.0 / 11.0}, **shared)
        kdv = RunConfig(family="kdv-kdv", dt=0.001,
                        bc=BoundarySpec.bi_periodic(),
                        out_dir="out-compare-kdv-kdv", **shared)
        return [bbm, bs, kdv]
    if name == "convergence":
        return RunConfig(family="bbm-bbm", xmin=0.0, xmax=1.0, ymin=0.0,
                         ymax=1.0, t_end=1.0, n_list=(10, 20, 40, 80),
                         out_dir="out-convergence")
    raise ConfigError(f"unknown preset {name!r}; expected reflection, "
                      "kdv-periodic, compare or convergence")
