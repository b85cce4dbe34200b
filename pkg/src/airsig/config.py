"""Plain-text key=value config files for the preprocessing and
reconstruction pipelines.

One file may carry both configs; key names do not collide.  Lines
starting with '#' and blank lines are ignored.  Unknown keys are an
error so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import ParseError
from .preprocessing import PreprocessConfig
from .trajectory import ReconstructConfig


def _coerce(field: dataclasses.Field, raw: str):
    text = raw.strip()
    if text.lower() in ("none", ""):
        return None
    ftype = field.type
    if ftype in ("int", int):
        return int(text)
    if ftype in ("bool", bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if ftype in ("str", str):
        return text
    return float(text)


def save_config(path, preprocess: PreprocessConfig | None = None,
                reconstruct: ReconstructConfig | None = None) -> None:
    lines = []
    for cfg in (preprocess, reconstruct):
        if cfg is None:
            continue
        for f in dataclasses.fields(cfg):
            value = getattr(cfg, f.name)
            lines.append(f"{f.name}={'none' if value is None else value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(path):
    """Parse a key=value file into (PreprocessConfig, ReconstructConfig)."""
    pre_fields = {f.name: f for f in dataclasses.fields(PreprocessConfig)}
    rec_fields = {f.name: f for f in dataclasses.fields(ReconstructConfig)}
    pre_kwargs, rec_kwargs = {}, {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        try:
            if key in pre_fields:
                pre_kwargs[key] = _coerce(pre_fields[key], raw)
            elif key in rec_fields:
                rec_kwargs[key] = _coerce(rec_fields[key], raw)
            else:
                raise ParseError(f"{path}:{lineno}: unknown config key {key!r}")
        except (ValueError, TypeError) as exc:
            raise ParseError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return PreprocessConfig(**pre_kwargs), ReconstructConfig(**rec_kwargs)
