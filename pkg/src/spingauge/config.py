"""Flat ``key = value`` run configuration with dotted section names.

Example::

    # comment
    signature.mu = 1
    grid.n = 64
    solver.dt = 0.005

Every key is typed by ``SCHEMA``; unknown keys are rejected.  ``to_text``
writes a canonical form (sorted keys, ``repr`` floats) that parses back to
an equal configuration.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .errors import ConfigError

SCHEMA = {
    "command": (str, "simulate"),
    "seed": (int, 0),
    "signature.mu": (int, 1),
    "signature.epsilon": (int, 1),
    "grid.n": (int, 64),
    "grid.L": (float, 16.0),
    "data.kind": (str, "bump"),
    "data.amplitude": (float, 0.2),
    "data.width": (float, 1.0),
    "data.twist_re": (float, 0.5),
    "data.twist_im": (float, 0.3),
    "data.jitter": (float, 0.0),
    "gauge.substeps": (int, 1),
    "solver.dt": (float, 0.005),
    "solver.T": (float, 0.25),
    "solver.dealias": (bool, True),
    "solver.blowup_threshold": (float, math.inf),
    "solver.snapshot_stride": (int, 10),
    "oracle.dt": (float, 0.005),
    "outputs.snapshots": (bool, True),
    "outputs.diagnostics": (list, ["mass", "accumulator", "residuals"]),
    "sweep.deltas": (list, [1e-3, 3e-3, 1e-2]),
    "sweep.base": (str, "constant"),
}

DIAGNOSTICS = ("mass", "accumulator", "residuals", "mass_identity", "reconstruction")
SWEEP_BASES = ("constant", "bump")


def _parse(key, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is list:
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if key == "sweep.deltas":
                return [float(x) for x in items]
            return items
        return raw
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key {key!r}") from None


def _format(kind, value) -> str:
    if kind is bool:
        return "true" if value else "false"
    if kind is float:
        return repr(float(value))
    if kind is list:
        return ", ".join(repr(float(x)) if isinstance(x, float) else str(x) for x in value)
    return str(value)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: _copy(v[1]) for k, v in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_text() == other.to_text()

    @classmethod
    def from_text(cls, text: str, overrides: dict | None = None) -> "RunConfig":
        cfg = cls()
        seen = set()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, raw = (x.strip() for x in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            if key in seen:
                raise ConfigError(f"duplicate key {key!r}")
            seen.add(key)
            cfg.values[key] = _parse(key, SCHEMA[key][0], raw)
        for key, val in (overrides or {}).items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            cfg.values[key] = _parse(key, SCHEMA[key][0], str(val))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides=None) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), overrides)

    def to_text(self) -> str:
        lines = [f"{k} = {_format(SCHEMA[k][0], self.values[k])}" for k in sorted(SCHEMA)]
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def validate(self) -> None:
        v = self.values
        if v["signature.mu"] not in (1, -1) or v["signature.epsilon"] not in (1, -1):
            raise ConfigError("signature.mu and signature.epsilon must be +1 or -1")
        if v["grid.n"] < 8 or v["grid.n"] % 2:
            raise ConfigError("grid.n must be an even integer >= 8")
        if not v["grid.L"] > 0:
            raise ConfigError("grid.L must be positive")
        if v["data.kind"] not in ("bump", "constant"):
            raise ConfigError(f"unknown data.kind {v['data.kind']!r}")
        if v["solver.dt"] <= 0 or v["solver.T"] < 0 or v["oracle.dt"] <= 0:
            raise ConfigError("time steps must be positive and T non-negative")
        if v["solver.snapshot_stride"] < 1 or v["gauge.substeps"] < 1:
            raise ConfigError("solver.snapshot_stride and gauge.substeps must be >= 1")
        bad = [d for d in v["outputs.diagnostics"] if d not in DIAGNOSTICS]
        if bad:
            raise ConfigError(f"unknown diagnostics {bad}")
        if v["sweep.base"] not in SWEEP_BASES:
            raise ConfigError(f"sweep.base must be one of {SWEEP_BASES}")
        if any(d <= 0 for d in v["sweep.deltas"]):
            raise ConfigError("sweep.deltas must be positive")


def _copy(x):
    return list(x) if isinstance(x, list) else x
