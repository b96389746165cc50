"""Plain-text ``key = value`` configuration for the pipeline and synth scenarios.

Lines starting with ``#`` are comments; an inline `` #`` also starts a
comment. Keys are case-sensitive. Relative file paths resolve against the
directory holding the config file.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ingest import DEFAULT_CHECKIN_PATTERN, CrsMode, Source


def parse_text(text, origin="<config>"):
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(" #", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{origin}:{number}: empty key")
        if key in values:
            raise ConfigError(f"{origin}:{number}: duplicate key {key!r}")
        values[key] = value
    return values


def read_file(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path))


def _bool(value, key):
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _number(value, key, kind=float):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def parse_point(value, key="center"):
    parts = [p.strip() for p in str(value).split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'X,Y'")
    return (_number(parts[0], key), _number(parts[1], key))


@dataclass
class PipelineConfig:
    zones: Optional[str] = None
    crs: str = "projected"
    photo: Optional[str] = None
    tweet: Optional[str] = None
    checkin: Optional[str] = None
    checkin_pattern: str = DEFAULT_CHECKIN_PATTERN
    threshold_days: int = 7
    rescale: bool = True
    k: int = 6
    restarts: int = 50
    threshold_m: float = 500.0
    row_standardize: bool = False
    permutations: int = 999
    alpha: float = 0.05
    seed: int = 0
    center: Optional[tuple] = None
    ring_m: float = 1000.0
    out: str = "tourmap_out"
    jobs: int = 1
    names: dict = field(default_factory=dict)

    NON_HASHED = ("out", "jobs")

    @classmethod
    def from_mapping(cls, values, base_dir=None):
        """Build from raw string values; unknown keys are an error."""
        cfg = cls()
        base = Path(base_dir) if base_dir else None
        known = {f.name for f in fields(cls)}
        for key, value in values.items():
            if value is None:
                continue
            if key.startswith("name."):
                cfg.names[Source(key[5:]).value] = str(value)
                continue
            if key not in known or key == "names":
                raise ConfigError(f"unknown config key {key!r}")
            if key in ("zones", "photo", "tweet", "checkin", "out"):
                value = str(value)
                if value and base is not None and not os.path.isabs(value):
                    value = str(base / value)
                setattr(cfg, key, value or None)
            elif key in ("threshold_days", "k", "restarts", "permutations", "seed", "jobs"):
                setattr(cfg, key, value if isinstance(value, int) else _number(value, key, int))
            elif key in ("threshold_m", "alpha", "ring_m"):
                setattr(cfg, key, _number(value, key))
            elif key in ("rescale", "row_standardize"):
                setattr(cfg, key, value if isinstance(value, bool) else _bool(value, key))
            elif key == "center":
                setattr(cfg, key, value if isinstance(value, tuple) else parse_point(value))
            else:
                setattr(cfg, key, str(value))
        return cfg

    @classmethod
    def load(cls, path, overrides=None):
        values = read_file(path)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(values, Path(path).resolve().parent)

    def sources(self):
        """Raw input files as ``{Source: path}`` in canonical order."""
        out = {}
        for s in (Source.PHOTO, Source.TWEET, Source.CHECKIN):
            path = getattr(self, s.value)
            if path:
                out[s] = path
        return out

    def validate(self, check_files=True):
        try:
            CrsMode(self.crs)
        except ValueError:
            raise ConfigError(f"crs: expected 'geographic' or 'projected', got {self.crs!r}") from None
        if not self.zones:
            raise ConfigError("zones file is not configured")
        if not self.sources():
            raise ConfigError("no event source configured (photo, tweet or checkin)")
        checks = [
            (self.threshold_days >= 1, "threshold_days must be >= 1"),
            (self.k >= 1, "k must be >= 1"),
            (self.restarts >= 1, "restarts must be >= 1"),
            (self.threshold_m > 0, "threshold_m must be > 0"),
            (self.permutations >= 0, "permutations must be >= 0"),
            (0 < self.alpha < 1, "alpha must be in (0, 1)"),
            (self.ring_m > 0, "ring_m must be > 0"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if check_files:
            for label, path in [("zones", self.zones)] + [(s.value, p) for s, p in self.sources().items()]:
                if not os.path.isfile(path):
                    raise ConfigError(f"{label} file not found: {path}")
        return self

    def canonical(self):
        """Config as a JSON-ready dict without run-local settings."""
        d = asdict(self)
        for key in self.NON_HASHED:
            d.pop(key)
        d["center"] = list(self.center) if self.center else None
        for key in ("zones", "photo", "tweet", "checkin"):
            if d[key]:
                d[key] = os.path.basename(d[key])
        return d

    def hash(self, input_digests=None):
        payload = {"config": self.canonical(), "inputs": input_digests or {}}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
