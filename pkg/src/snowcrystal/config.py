"""Flat key-value parameter files and the packaged defaults.

A parameter file is UTF-8 text, one `key = value` per line, holding model
parameters and run settings together.  Blank lines and lines starting with
`#` are ignored; unknown keys are errors.  The shipped defaults live in
data/defaults.cfg and are versioned data, not code constants: they are the
calibration the reference datasets are generated with.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .lca import PARAM_ORDER, LcaParams, RunConfig

_INT_KEYS = ("side", "max_steps", "snapshot_every", "halt_margin", "seed")
_STR_KEYS = ("boundary_mode", "fold_mode")
_META_KEYS = ("config_version",)

RUN_KEYS = ("side", "max_steps", "snapshot_every", "halt_margin",
            "boundary_mode", "seed", "fold_mode")
KNOWN_KEYS = PARAM_ORDER + RUN_KEYS + _META_KEYS


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into typed values."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, value)
    return values


def _convert(key: str, value: str):
    try:
        if key in _INT_KEYS or key in _META_KEYS:
            return int(value)
        if key in _STR_KEYS:
            return value
        return float(value)
    except ValueError as exc:
        raise ValueError(f"bad value for {key!r}: {value!r}") from exc


def read_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def write_config_file(path, params: LcaParams, cfg: RunConfig) -> None:
    lines = ["# snowcrystal parameter file", "config_version = 1"]
    for name in PARAM_ORDER:
        lines.append(f"{name} = {getattr(params, name)!r}")
    for name in RUN_KEYS:
        value = getattr(cfg, name)
        lines.append(f"{name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def defaults_dict() -> dict:
    """The packaged default parameters and run settings."""
    text = resources.files("snowcrystal.data").joinpath("defaults.cfg").read_text("utf-8")
    return parse_config_text(text)


def materialize(values: dict) -> tuple[LcaParams, RunConfig]:
    """Build validated (LcaParams, RunConfig) from a merged key-value dict."""
    missing = [k for k in PARAM_ORDER if k not in values]
    if missing:
        raise ValueError(f"missing parameters: {', '.join(missing)}")
    params = LcaParams(**{k: float(values[k]) for k in PARAM_ORDER})
    run_kwargs = {k: values[k] for k in RUN_KEYS if k in values}
    cfg = RunConfig(**run_kwargs)
    params.validate()
    cfg.validate()
    return params, cfg


def default_params() -> LcaParams:
    return materialize(defaults_dict())[0]


def default_run_config() -> RunConfig:
    return materialize(defaults_dict())[1]
