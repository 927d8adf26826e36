"""Run configuration files, figure presets and result files."""
from __future__ import annotations

import configparser
import dataclasses
import json
import math
import os
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import metrics
from .engine import EnsembleResult, RunConfig, run_ensemble
from .walk import MomentumDistribution, NumericalInvariantError

OUTPUT_ROOT_ENV = "KICKWALK_OUTPUT_ROOT"

SECTIONS = {
    "physics": ("k", "k2", "p_se", "ratio", "tau_p", "tau_se", "omega", "delta1", "delta2", "tau"),
    "walk": ("steps", "n_max", "coin_alpha", "coin_chi", "apply_phi_dyn"),
    "se": ("collapse_mode", "substeps", "finite_pulse_kinetics", "event_timing"),
    "ensemble": ("trajectories", "delta_beta", "beta_center", "seed"),
    "output": ("out_dir",),
}

_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


class ConfigError(ValueError):
    """Invalid configuration file or preset."""


@dataclass
class ParsedConfig:
    config: RunConfig
    provenance: dict = field(default_factory=dict)


# -- value parsing -------------------------------------------------------------

_PI = re.compile(r"^\s*([-+]?[\d.eE+-]*)\s*\*?\s*pi\s*$")


def _float(text: str) -> float:
    """Float, also accepting ``pi`` multiples such as ``4pi`` or ``0.25*pi``."""
    m = _PI.match(text)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return float(text)


def _ratio(text: str) -> tuple[float, float]:
    parts = re.split(r"[:,\s]+", text.strip())
    if len(parts) != 2:
        raise ValueError("expected two weights such as 70:30")
    a, b = (float(p) for p in parts)
    if a < 0 or b < 0 or a + b <= 0:
        raise ValueError("weights must be non-negative and not both zero")
    return a / (a + b), b / (a + b)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _convert(name: str, text: str):
    text = text.strip()
    if name == "ratio":
        return _ratio(text)
    if text.lower() in ("", "none") and _FIELDS[name].default is None:
        return None
    kind = type(_FIELDS[name].default) if _FIELDS[name].default is not None else float
    if name in ("n_max",):
        kind = int
    if name == "out_dir":
        return text
    if kind is bool:
        return _bool(text)
    if kind is int:
        value = float(text)
        if not value.is_integer():
            raise ValueError("expected an integer")
        return int(value)
    if kind is float:
        return _float(text)
    return text


def _line_of(raw: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(raw.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return i
    return None


def parse_config_text(raw: str, source: str = "<string>", strict: bool = True) -> ParsedConfig:
    """Parse INI text with sections ``physics``, ``walk``, ``se``,
    ``ensemble`` and ``output``.  Unknown sections or keys are errors in
    strict mode."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(raw, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    values, provenance = {}, {}
    for section in parser.sections():
        key_set = SECTIONS.get(section.lower())
        if key_set is None:
            if strict:
                raise ConfigError(f"{source}: unknown section [{section}]")
            continue
        for key, text in parser.items(section):
            line = _line_of(raw, section.lower(), key)
            where = f"{source}:{line}" if line else source
            if key not in key_set:
                if strict:
                    raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
                continue
            try:
                values[key] = _convert(key, text)
            except ValueError as exc:
                raise ConfigError(f"{where}: bad value for {key!r}: {text!r} ({exc})") from exc
            provenance[key] = where

    if all(values.get(k) is not None for k in ("omega", "delta1", "delta2")):
        targets = [k for k in ("k", "k2", "p_se", "ratio") if k in values]
        if targets:
            warnings.warn(
                f"{source}: explicit omega/delta1/delta2 take precedence over {', '.join(targets)}",
                UserWarning,
                stacklevel=2,
            )
    try:
        config = RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    for name in _FIELDS:
        provenance.setdefault(name, "default")
    return ParsedConfig(config, provenance)


def parse_config(path, strict: bool = True) -> ParsedConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), str(path), strict)


# -- presets ---------------------------------------------------------------------

_FIG3 = {"fig3a": (15, 0.037), "fig3b": (15, 0.11), "fig3c": (50, 0.037), "fig3d": (50, 0.11)}
_FIG5 = {"fig5a": (0.037, 0.025), "fig5b": (0.037, 0.01), "fig5c": (0.02, 0.01), "fig5d": (0.02, 0.02)}
_FIG4_RATIOS = {"50": (0.5, 0.5), "70": (0.7, 0.3), "99": (0.99, 0.01)}
_FIG4_RATES = {"a": 0.037, "b": 0.11}


def preset_names() -> list[str]:
    names = list(_FIG3)
    names += [f"fig4{p}-{r}" for p in _FIG4_RATES for r in _FIG4_RATIOS]
    return names + list(_FIG5)


def preset(name: str) -> RunConfig:
    """Figure presets: ``fig3a``-``fig3d``, ``fig4a-50|70|99`` (rate 0.037),
    ``fig4b-50|70|99`` (rate 0.11) and ``fig5a``-``fig5d``."""
    base = RunConfig(k=1.45, trajectories=1000)
    if name in _FIG3:
        steps, p = _FIG3[name]
        return base.replace(steps=steps, p_se=p)
    if name in _FIG5:
        p, width = _FIG5[name]
        return base.replace(steps=15, p_se=p, delta_beta=width)
    m = re.fullmatch(r"fig4([ab])-(\d+)", name)
    if m and m.group(2) in _FIG4_RATIOS:
        return base.replace(steps=15, p_se=_FIG4_RATES[m.group(1)], ratio=_FIG4_RATIOS[m.group(2)])
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")


def sweep_configs(name: str, custom: list[RunConfig] | None = None) -> dict[str, RunConfig]:
    """Named configs of a sweep: ``fig3`` (4 runs), ``fig4`` (6), ``fig5`` (4) or ``custom``."""
    if name == "custom":
        return {f"run{i}": c for i, c in enumerate(custom or [])}
    names = [n for n in preset_names() if n.startswith(name)]
    if name not in ("fig3", "fig4", "fig5") or not names:
        raise ConfigError(f"unknown sweep {name!r}")
    return {n: preset(n) for n in names}


@dataclass
class SweepOutcome:
    name: str
    out_dir: Path | None
    error: str | None = None


def sweep(
    name: str,
    out_root,
    custom: list[RunConfig] | None = None,
    n_jobs: int = 1,
    runner: Callable[[RunConfig], EnsembleResult] | None = None,
) -> list[SweepOutcome]:
    """Run every config of a sweep into ``out_root/<run name>``; a failing run
    is recorded and the sweep continues."""
    runner = runner or (lambda c: run_ensemble(c, n_jobs=n_jobs))
    outcomes = []
    for run_name, config in sweep_configs(name, custom).items():
        target = Path(out_root) / run_name
        try:
            result = runner(config)
            result.metadata["sweep"] = {"name": name, "run": run_name}
            write_results(result, target)
            outcomes.append(SweepOutcome(run_name, target))
        except (ValueError, NumericalInvariantError) as exc:
            outcomes.append(SweepOutcome(run_name, None, f"{type(exc).__name__}: {exc}"))
    return outcomes


# -- output ----------------------------------------------------------------------

DISTRIBUTION_HEADER = "step,n,p1,p2,p_total"
METRICS_HEADER = "step,mean,variance,peak_contrast,l1_gaussian,window,peak_positions,peak_heights"


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _g(x: float) -> str:
    return format(float(x), ".17g")


def write_results(result: EnsembleResult, out_dir, k: float | None = None) -> dict[str, Path]:
    """Write ``distribution.csv``, ``metrics.csv`` and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = k if k is not None else result.metadata.get("config", {}).get("k", 1.45)

    rows = [DISTRIBUTION_HEADER]
    for d in result.distributions:
        tot = d.p_total
        for n, a, b, t in zip(d.n, d.p1, d.p2, tot):
            rows.append(f"{d.step},{int(n)},{_g(a)},{_g(b)},{_g(t)}")
    paths = {"distribution": out / "distribution.csv"}
    paths["distribution"].write_text("\n".join(rows) + "\n")

    rows = [METRICS_HEADER]
    for d in result.distributions:
        m = metrics(d, k=k, steps=d.step)
        pos = " ".join(str(p) for p in m.peak_positions)
        hts = " ".join(_g(h) for h in m.peak_heights)
        rows.append(
            f"{d.step},{_g(m.mean)},{_g(m.variance)},{_g(m.peak_contrast)},"
            f"{_g(m.l1_gaussian)},{_g(m.window)},{pos},{hts}"
        )
    paths["metrics"] = out / "metrics.csv"
    paths["metrics"].write_text("\n".join(rows) + "\n")

    from . import __version__

    manifest = dict(result.metadata)
    manifest["version"] = __version__
    manifest["event_count_total"] = int(np.sum(result.event_counts)) if len(result.event_counts) else 0
    paths["manifest"] = out / "manifest.json"
    paths["manifest"].write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def read_distribution(path) -> list[MomentumDistribution]:
    """Read ``distribution.csv`` back into per-step distributions."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for step in np.unique(data[:, 0]).astype(int):
        rows = data[data[:, 0] == step]
        out.append(MomentumDistribution(rows[:, 1].astype(int), rows[:, 2], rows[:, 3], int(step)))
    return out


def config_from_manifest(path) -> RunConfig:
    """The run configuration recorded in ``manifest.json``."""
    data = json.loads(Path(path).read_text())
    cfg = dict(data["config"])
    if cfg.get("ratio") is not None:
        cfg["ratio"] = tuple(cfg["ratio"])
    unknown = set(cfg) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"manifest has unknown config keys: {sorted(unknown)}")
    return RunConfig(**cfg)
