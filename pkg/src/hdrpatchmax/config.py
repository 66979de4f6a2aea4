"""Toolkit configuration: INI file with [patchmax], [hdrmax], [stchips] and [regressor] sections."""

import configparser
import os
from dataclasses import dataclass, field, fields, replace

from .hdrmax import HdrMaxConfig
from .patchmax import PatchMaxConfig
from .stchips import StChipsConfig

THREADS_ENV = "HDRPATCHMAX_THREADS"


@dataclass(frozen=True)
class RegressorConfig:
    n_folds: int = 5
    n_estimators: tuple = (50, 100, 200)
    max_features: tuple = ("sqrt", "one_third", "all")

    @property
    def grid(self):
        return {"n_estimators": self.n_estimators, "max_features": self.max_features}


@dataclass(frozen=True)
class ToolkitConfig:
    patchmax: PatchMaxConfig = field(default_factory=PatchMaxConfig)
    hdrmax: HdrMaxConfig = field(default_factory=HdrMaxConfig)
    stchips: StChipsConfig = field(default_factory=StChipsConfig)
    regressor: RegressorConfig = field(default_factory=RegressorConfig)


SECTIONS = ("patchmax", "hdrmax", "stchips", "regressor")


def _coerce(default, text):
    if isinstance(default, tuple):
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(type(default[0])(t) for t in items) if default else tuple(items)
    return type(default)(text)


def load_config(path=None, overrides=None):
    """Defaults, then the INI file at ``path``, then ``{"section.key": value}`` overrides."""
    cfg = ToolkitConfig()
    values = {}
    if path:
        parser = configparser.ConfigParser()
        with open(path) as f:
            parser.read_file(f)
        for section in parser.sections():
            if section not in SECTIONS:
                raise ValueError(f"unknown config section [{section}]")
            for key, text in parser.items(section):
                values[(section, key)] = text
    for dotted, v in (overrides or {}).items():
        if v is None:
            continue
        section, key = dotted.split(".", 1)
        values[(section, key)] = v
    for section in SECTIONS:
        sub = getattr(cfg, section)
        known = {f.name: getattr(sub, f.name) for f in fields(sub)}
        changes = {}
        for (sec, key), v in values.items():
            if sec != section:
                continue
            if key not in known:
                raise ValueError(f"unknown config key {section}.{key}")
            changes[key] = v if not isinstance(v, str) else _coerce(known[key], v)
        if changes:
            cfg = replace(cfg, **{section: replace(sub, **changes)})
    return cfg


def describe_keys():
    """``section.key = default`` lines for every configurable value."""
    cfg = ToolkitConfig()
    lines = []
    for section in SECTIONS:
        sub = getattr(cfg, section)
        for f in fields(sub):
            v = getattr(sub, f.name)
            shown = ", ".join(map(str, v)) if isinstance(v, tuple) else v
            lines.append(f"  [{section}] {f.name} = {shown}")
    return "\n".join(lines)


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1
