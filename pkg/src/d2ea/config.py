"""Line-oriented ``key = value`` configuration files.

Keys before the first ``[section]`` header belong to the unnamed section
``""``.  ``#`` starts a comment.  Recognised sections: ``pso``, ``oracle``,
``stage1``, ``stage2``, ``data``.
"""

from __future__ import annotations

import configparser
import hashlib
import re

from .errors import ConfigError

_ROOT = "__root__"
SECTIONS = ("", "pso", "oracle", "stage1", "stage2", "data")


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        default_section="__defaults_unused__",
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{_ROOT}]\n" + text, source=source)
    except configparser.Error as exc:
        # line numbers are off by one because of the injected root header
        raise ConfigError(f"{source}: {_shift_lines(str(exc))}") from None
    out = {}
    for name in parser.sections():
        section = "" if name == _ROOT else name
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        out[section] = dict(parser.items(name))
    return out


def _shift_lines(msg):
    return re.sub(r"\[line\s+(\d+)\]", lambda m: f"[line {int(m.group(1)) - 1:2d}]", msg)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def section(cfg, name, fallback_root=False):
    """Keys of section ``name``; with ``fallback_root`` the unnamed section too."""
    merged = dict(cfg.get("", {})) if fallback_root else {}
    merged.update(cfg.get(name, {}))
    return merged


def digest(cfg):
    items = sorted((s, k, v) for s, kv in cfg.items() for k, v in kv.items())
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]
