"""Run configuration: an INI file with fixed sections.

Example::

    [system]
    n = 10
    dim = 2

    [model]
    variant = simplified
    kernel = singular

Only ``system.n``, ``system.dim``, ``model.variant`` and ``model.kernel`` are
required. Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields

from .initial import InitConfig
from .integrator import StepControl
from .model import KernelKind, KernelSpec, ModelParams, Variant


class ConfigError(ValueError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True)
class RunConfig:
    init: InitConfig
    params: ModelParams
    ctl: StepControl = field(default_factory=StepControl)
    t_end: float = 500.0
    sample_every: float = 0.5
    output_dir: str = "results"
    scenario: str | None = None


_REQUIRED = {("system", "n"), ("system", "dim"), ("model", "variant"), ("model", "kernel")}
_SCHEMA = {
    "system": ("n", "dim"),
    "init": ("pos_box", "vel_box", "seed"),
    "model": ("variant", "kernel", "alpha", "k1", "k2", "k_tilde", "big_r"),
    "control": tuple(f.name for f in fields(StepControl)),
    "run": ("t_end", "sample_every", "output_dir", "scenario"),
}


def _int(path, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(path, f"expected an integer, got {text!r}") from None


def _float(path, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(path, f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value


def _interval(path, text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(path, f"expected 'lo, hi', got {text!r}")
    lo, hi = (_float(path, p) for p in parts)
    if not lo < hi:
        raise ConfigError(path, "interval must be nonempty (lo < hi)")
    return (lo, hi)


def _positive(path, value):
    if not value > 0:
        raise ConfigError(path, f"must be > 0, got {value!r}")
    return value


def _nonneg(path, value):
    if not value >= 0:
        raise ConfigError(path, f"must be >= 0, got {value!r}")
    return value


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    for section, key in sorted(_REQUIRED):
        if not parser.has_option(section, key):
            raise ConfigError(f"{section}.{key}", "required key missing")

    def get(section, key):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return None

    n = _int("system.n", get("system", "n"))
    if n < 2:
        raise ConfigError("system.n", f"need N >= 2 particles, got {n}")
    dim = _int("system.dim", get("system", "dim"))
    if dim < 1:
        raise ConfigError("system.dim", f"need dimension >= 1, got {dim}")

    init_kw = {"n": n, "dim": dim}
    for key in ("pos_box", "vel_box"):
        if get("init", key) is not None:
            init_kw[key] = _interval(f"init.{key}", get("init", key))
    if get("init", "seed") is not None:
        seed = _int("init.seed", get("init", "seed"))
        if not 0 <= seed < 2**64:
            raise ConfigError("init.seed", "must fit in an unsigned 64-bit integer")
        init_kw["seed"] = seed

    variant_text = get("model", "variant").lower()
    try:
        variant = Variant(variant_text)
    except ValueError:
        raise ConfigError("model.variant", f"expected 'original' or 'simplified', got {variant_text!r}") from None
    kind_text = get("model", "kernel").lower()
    try:
        kind = KernelKind(kind_text)
    except ValueError:
        raise ConfigError("model.kernel", f"expected 'singular' or 'regular', got {kind_text!r}") from None
    alpha = 1.0 if get("model", "alpha") is None else _float("model.alpha", get("model", "alpha"))
    if kind is KernelKind.SINGULAR and alpha < 1.0:
        raise ConfigError("model.alpha", f"singular kernel requires alpha >= 1, got {alpha!r}")
    if kind is KernelKind.REGULAR and alpha <= 0.0:
        raise ConfigError("model.alpha", f"regular kernel requires alpha > 0, got {alpha!r}")

    model_kw = {"n": n, "dim": dim, "variant": variant, "kernel": KernelSpec(kind, alpha)}
    for key in ("k1", "k2", "k_tilde"):
        if get("model", key) is not None:
            model_kw[key] = _nonneg(f"model.{key}", _float(f"model.{key}", get("model", key)))
    if get("model", "big_r") is not None:
        model_kw["big_r"] = _positive("model.big_r", _float("model.big_r", get("model", "big_r")))

    ctl_kw = {}
    for key in _SCHEMA["control"]:
        if get("control", key) is not None:
            ctl_kw[key] = _positive(f"control.{key}", _float(f"control.{key}", get("control", key)))
    if ctl_kw.get("proximity_factor", 0.1) > 1.0:
        raise ConfigError("control.proximity_factor", "must lie in (0, 1]")
    try:
        ctl = StepControl(**ctl_kw)
    except ValueError as exc:
        raise ConfigError("control", str(exc)) from None

    run_kw = {}
    for key in ("t_end", "sample_every"):
        if get("run", key) is not None:
            run_kw[key] = _float(f"run.{key}", get("run", key))
    if "t_end" in run_kw:
        _nonneg("run.t_end", run_kw["t_end"])
    if "sample_every" in run_kw:
        _positive("run.sample_every", run_kw["sample_every"])
    if get("run", "output_dir") is not None:
        run_kw["output_dir"] = get("run", "output_dir")
    if get("run", "scenario"):
        run_kw["scenario"] = get("run", "scenario")

    return RunConfig(InitConfig(**init_kw), ModelParams(**model_kw), ctl, **run_kw)


def _num(value) -> str:
    # repr gives the shortest string that round-trips
    return repr(float(value)) if isinstance(value, float) else str(value)


def format_config(cfg: RunConfig) -> str:
    p, init, ctl = cfg.params, cfg.init, cfg.ctl
    lines = [
        "[system]",
        f"n = {p.n}",
        f"dim = {p.dim}",
        "",
        "[init]",
        f"pos_box = {_num(init.pos_box[0])}, {_num(init.pos_box[1])}",
        f"vel_box = {_num(init.vel_box[0])}, {_num(init.vel_box[1])}",
        f"seed = {init.seed}",
        "",
        "[model]",
        f"variant = {p.variant.value}",
        f"kernel = {p.kernel.kind.value}",
        f"alpha = {_num(p.kernel.alpha)}",
        f"k1 = {_num(p.k1)}",
        f"k2 = {_num(p.k2)}",
        f"k_tilde = {_num(p.k_tilde)}",
        f"big_r = {_num(p.big_r)}",
        "",
        "[control]",
    ]
    lines += [f"{f.name} = {_num(getattr(ctl, f.name))}" for f in fields(StepControl)]
    lines += [
        "",
        "[run]",
        f"t_end = {_num(float(cfg.t_end))}",
        f"sample_every = {_num(float(cfg.sample_every))}",
        f"output_dir = {cfg.output_dir}",
    ]
    if cfg.scenario:
        lines.append(f"scenario = {cfg.scenario}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply command-line style overrides (``n``, ``seed``, ``t_end``, ``kernel``, ``alpha``, ``variant``)."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if not overrides:
        return cfg
    text = format_config(cfg)
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    parser.read_string(text)
    location = {
        "n": ("system", "n"),
        "dim": ("system", "dim"),
        "seed": ("init", "seed"),
        "t_end": ("run", "t_end"),
        "sample_every": ("run", "sample_every"),
        "kernel": ("model", "kernel"),
        "alpha": ("model", "alpha"),
        "variant": ("model", "variant"),
        "output_dir": ("run", "output_dir"),
    }
    for key, value in overrides.items():
        section, option = location[key]
        parser.set(section, option, str(value))
    out = []
    for section in parser.sections():
        out.append(f"[{section}]")
        out += [f"{k} = {v}" for k, v in parser[section].items()]
        out.append("")
    return parse_config("\n".join(out))
