"""Config parsing: flat sectioned key-value text into a validated RunConfig.

Format: `[section]` headers, `key = value` lines, '#' starts a comment at
the beginning of a line or after whitespace, blank lines ignored. Unknown
sections and keys are errors, never warnings, so typos cannot silently fall
back to defaults. Every error names the offending key and line.

Sections and keys (* = required):

  [model]    lambda_influx* mu* beta_I* beta_J* nu_I* nu_J*
  [profile]  kappa* rate*
  [grid]     da* a_max* truncation_tol
  [sim]      horizon output_stride start s_scale seed_i seed_j
  [sweep]    eps_list beta_I_list tol initials
  [fit]      samples kappa1 r1 s1
  [io]       out_dir formats
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, GridError, ParameterDomainError
from .model import (
    AgeGrid,
    ModelParams,
    SusceptibilityProfile,
    make_grid,
    make_profile,
)

__all__ = ["RunConfig", "parse_config"]

_REQUIRED = object()

# key -> (converter tag, default); converter tags: float, int, str, floats, words
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "model": {
        "lambda_influx": ("float", _REQUIRED),
        "mu": ("float", _REQUIRED),
        "beta_I": ("float", _REQUIRED),
        "beta_J": ("float", _REQUIRED),
        "nu_I": ("float", _REQUIRED),
        "nu_J": ("float", _REQUIRED),
    },
    "profile": {
        "kappa": ("float", _REQUIRED),
        "rate": ("float", _REQUIRED),
    },
    "grid": {
        "da": ("float", _REQUIRED),
        "a_max": ("float", _REQUIRED),
        "truncation_tol": ("float", 1e-6),
    },
    "sim": {
        "horizon": ("float", 200.0),
        "output_stride": ("int", 20),
        "start": ("str", "disease_free"),
        "s_scale": ("float", 1.0),
        "seed_i": ("float", 0.1),
        "seed_j": ("float", 0.0),
    },
    "sweep": {
        "eps_list": ("floats", (0.0, 1e-4, 1e-3, 1e-2)),
        "beta_I_list": ("floats", ()),
        "tol": ("float", 1e-3),
        "initials": ("int", 3),
    },
    "fit": {
        "samples": ("str", ""),
        "kappa1": ("float", 1.0),
        "r1": ("float", 0.645),
        "s1": ("float", 0.455),
    },
    "io": {
        "out_dir": ("str", "out"),
        "formats": ("words", ("json", "csv")),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for one command run."""

    params: ModelParams
    profile: SusceptibilityProfile
    grid: AgeGrid
    horizon: float
    output_stride: int
    start: str
    s_scale: float
    seed_i: float
    seed_j: float
    eps_list: tuple[float, ...]
    beta_I_list: tuple[float, ...]
    tol: float
    n_initials: int
    fit_samples: str
    kappa1: float
    r1: float
    s1: float
    out_dir: str
    formats: tuple[str, ...]


def _strip_comment(line: str) -> str:
    for index, char in enumerate(line):
        if char == "#" and (index == 0 or line[index - 1].isspace()):
            return line[:index]
    return line


def _convert(tag: str, raw: str, key: str, line_no: int):
    try:
        if tag == "float":
            return float(raw)
        if tag == "int":
            return int(raw)
        if tag == "floats":
            parts = [p.strip() for p in raw.split(",")]
            return tuple(float(p) for p in parts if p)
        if tag == "words":
            return tuple(p.strip() for p in raw.split(",") if p.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"cannot parse {key} value {raw!r} as {tag}", key=key, line=line_no
        ) from exc


def _parse_lines(text: str):
    """Raw (section, key) -> (value string, line number) mapping."""
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=line_no)
            continue
        if "=" not in line:
            raise ConfigError(
                f"expected 'key = value', got {line!r}", line=line_no
            )
        if section is None:
            raise ConfigError(
                f"key outside any section: {line!r}", line=line_no
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in section [{section}]",
                key=key,
                line=line_no,
            )
        if (section, key) in entries:
            raise ConfigError(
                f"duplicate key {key!r} in section [{section}]",
                key=key,
                line=line_no,
            )
        entries[(section, key)] = (value, line_no)
    return entries


def _collect(entries) -> tuple[dict, dict]:
    """Typed values plus a (section, key) -> line map, defaults filled in."""
    values: dict[tuple[str, str], object] = {}
    lines: dict[tuple[str, str], int | None] = {}
    for section, keys in _SCHEMA.items():
        for key, (tag, default) in keys.items():
            if (section, key) in entries:
                raw, line_no = entries[(section, key)]
                values[(section, key)] = _convert(tag, raw, key, line_no)
                lines[(section, key)] = line_no
            elif default is _REQUIRED:
                raise ConfigError(
                    f"missing required key {key!r} in section [{section}]",
                    key=key,
                )
            else:
                values[(section, key)] = default
                lines[(section, key)] = None
    return values, lines


def _build_section(builder, section: str, values, lines):
    """Construct a typed object, attributing domain errors to a key.

    Domain messages name the offending field, so the first schema key that
    appears in the message (as a whole word) carries the attribution.
    """
    try:
        return builder()
    except (ParameterDomainError, GridError) as exc:
        message = str(exc)
        for key in _SCHEMA[section]:
            if re.search(rf"\b{re.escape(key)}\b", message):
                raise ConfigError(message, key=key, line=lines[(section, key)]) from exc
        raise ConfigError(message, key=section) from exc


def _check(condition: bool, message: str, key: str, lines, section: str):
    if not condition:
        raise ConfigError(message, key=key, line=lines[(section, key)])


def parse_config(source) -> RunConfig:
    """Parse a config file path or raw config text into a RunConfig.

    A `Path` is always read from disk; a string is read from disk when it
    names an existing file (and contains no newline), otherwise it is
    treated as the config text itself.
    """
    if isinstance(source, Path):
        text = source.read_text()
    elif isinstance(source, str) and "\n" not in source and Path(source).is_file():
        text = Path(source).read_text()
    else:
        text = str(source)

    values, lines = _collect(_parse_lines(text))

    def v(section, key):
        return values[(section, key)]

    params = _build_section(
        lambda: ModelParams(
            lambda_influx=v("model", "lambda_influx"),
            mu=v("model", "mu"),
            beta_I=v("model", "beta_I"),
            beta_J=v("model", "beta_J"),
            nu_I=v("model", "nu_I"),
            nu_J=v("model", "nu_J"),
        ),
        "model",
        values,
        lines,
    )
    profile = _build_section(
        lambda: make_profile(v("profile", "kappa"), v("profile", "rate")),
        "profile",
        values,
        lines,
    )
    _check(v("grid", "da") > 0.0, "da must be positive", "da", lines, "grid")
    _check(v("grid", "a_max") > 0.0, "a_max must be positive", "a_max", lines, "grid")
    grid = _build_section(
        lambda: make_grid(
            v("grid", "da"),
            v("grid", "a_max"),
            params,
            truncation_tol=v("grid", "truncation_tol"),
        ),
        "grid",
        values,
        lines,
    )

    _check(v("sim", "horizon") > 0.0, "horizon must be positive", "horizon", lines, "sim")
    _check(
        v("sim", "output_stride") >= 1,
        "output_stride must be at least 1",
        "output_stride",
        lines,
        "sim",
    )
    _check(
        v("sim", "start") in ("disease_free", "endemic"),
        f"start must be 'disease_free' or 'endemic', got {v('sim', 'start')!r}",
        "start",
        lines,
        "sim",
    )
    _check(v("sim", "s_scale") > 0.0, "s_scale must be positive", "s_scale", lines, "sim")
    _check(v("sim", "seed_i") >= 0.0, "seed_i must be non-negative", "seed_i", lines, "sim")
    _check(v("sim", "seed_j") >= 0.0, "seed_j must be non-negative", "seed_j", lines, "sim")
    _check(v("sweep", "tol") > 0.0, "tol must be positive", "tol", lines, "sweep")
    _check(
        1 <= v("sweep", "initials") <= 8,
        "initials must lie in [1, 8]",
        "initials",
        lines,
        "sweep",
    )
    _check(
        0.0 <= v("fit", "kappa1") <= 1.0,
        "kappa1 must lie in [0, 1]",
        "kappa1",
        lines,
        "fit",
    )
    _check(v("fit", "r1") > 0.0, "r1 must be positive", "r1", lines, "fit")
    _check(v("fit", "s1") > 0.0, "s1 must be positive", "s1", lines, "fit")
    formats = v("io", "formats")
    _check(len(formats) > 0, "formats must not be empty", "formats", lines, "io")
    for fmt in formats:
        _check(
            fmt in ("json", "csv"),
            f"unknown format {fmt!r} (expected json and/or csv)",
            "formats",
            lines,
            "io",
        )

    return RunConfig(
        params=params,
        profile=profile,
        grid=grid,
        horizon=v("sim", "horizon"),
        output_stride=v("sim", "output_stride"),
        start=v("sim", "start"),
        s_scale=v("sim", "s_scale"),
        seed_i=v("sim", "seed_i"),
        seed_j=v("sim", "seed_j"),
        eps_list=v("sweep", "eps_list"),
        beta_I_list=v("sweep", "beta_I_list"),
        tol=v("sweep", "tol"),
        n_initials=v("sweep", "initials"),
        fit_samples=v("fit", "samples"),
        kappa1=v("fit", "kappa1"),
        r1=v("fit", "r1"),
        s1=v("fit", "s1"),
        out_dir=v("io", "out_dir"),
        formats=formats,
    )
