"""Flat key=value configuration with dotted namespaces.

Experiment settings live in plain text files such as

    # Halbach scan, April run
    spinmodel.d_zfs_MHz = 2870
    inversion.nominal_b_mT = 104.5
    assignment.lines = 1:dq,4:dq,3:minus,2:minus

One key per line, '#' starts a comment, values keep their raw string form
until a typed getter converts them.  Unknown keys are rejected so typos
fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import math

from .errors import ConfigError

__all__ = ["KNOWN_KEYS", "parse_kv_text", "load_kv_file"]

# Every accepted key with a short description of its value.
KNOWN_KEYS = {
    "spinmodel.d_zfs_MHz": "zero-field splitting in MHz",
    "spinmodel.gamma_MHz_per_mT": "gyromagnetic ratio in MHz per mT",
    "spectrum.components": "number of lines per sweep (1..8)",
    "inversion.nominal_b_mT": "nominal field magnitude in mT",
    "inversion.magnitude_band": "fractional half-width of the magnitude box",
    "inversion.theta0_deg": "latitude seed in degrees",
    "inversion.phi0_deg": "longitude seed in degrees",
    "inversion.multistart": "number of starting points",
    "inversion.angle_spread_deg": "angular spread of extra starts",
    "inversion.step_tol": "relative step convergence tolerance",
    "inversion.max_iterations": "iteration cap per start",
    "inversion.seed": "random seed for start placement",
    "assignment.lines": "comma list of axis:kind pairs, e.g. 1:dq,4:dq,3:minus,2:minus",
    "crystal.rotation_lab_to_crystal": "nine floats, row-major rotation matrix",
    "scan.y_step_mm": "grid step along y in mm",
    "scan.z_step_mm": "grid step along z in mm",
    "stats.region_mm": "central region as y0,y1,z0,z1 in mm",
    "pipeline.workers": "worker process count (1 = serial)",
    "pipeline.min_strength": "drive strength below which lines are ignored",
}


def parse_kv_text(text: str, source="<string>") -> dict:
    """Parse key=value lines into a {key: raw string} dict.

    Blank lines and '#' comments (full-line or trailing) are skipped.
    Raises ConfigError on lines without '=', unknown keys, or duplicates,
    naming the source and line number.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_kv_file(path) -> dict:
    """Read and parse a configuration file."""
    with open(path, encoding="utf-8") as fh:
        return parse_kv_text(fh.read(), source=str(path))


def get_float(cfg: dict, key: str, default=None) -> float:
    if key not in cfg:
        return default
    try:
        v = float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    return v


def get_int(cfg: dict, key: str, default=None) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {cfg[key]!r}") from None


def get_floats(cfg: dict, key: str, count: int, default=None):
    """Comma-separated float list of exactly ``count`` entries."""
    if key not in cfg:
        return default
    parts = [p for p in cfg[key].replace(",", " ").split() if p]
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: expected {count} numbers, got {cfg[key]!r}") from None
    if len(values) != count:
        raise ConfigError(f"{key}: expected {count} numbers, got {len(values)}")
    return values
