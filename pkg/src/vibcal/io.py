"""Waveform CSV and JSON config/report files.

Waveform files start with one header line::

    # fs=<Hz> t0=<s> unit=<string> n=<count> [key=value ...]

followed by one sample per line.  Samples are written with 17 significant
digits, which round-trips every double.  ``n`` is optional on input; when
present, a short file is reported as truncated.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from .core import Waveform, exact, fraction_to_str

__all__ = [
    "WaveformFormatError",
    "read_waveform",
    "write_waveform",
    "format_waveform",
    "parse_waveform",
    "load_json",
    "dump_json",
]

RESERVED = ("fs", "t0", "unit", "n")


class WaveformFormatError(ValueError):
    """Malformed waveform file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int, source: str = "<text>"):
        super().__init__(f"{source}:{line}: {message}")
        self.line = line
        self.source = source


def _parse_header(text: str, source: str) -> dict[str, str]:
    if not text.startswith("#"):
        raise WaveformFormatError("missing header '# fs=<Hz> t0=<s> unit=<str>'", 1, source)
    fields = {}
    for token in text[1:].split():
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise WaveformFormatError(f"header token {token!r} is not key=value", 1, source)
        fields[key] = value
    if "fs" not in fields:
        raise WaveformFormatError("header lacks fs=<Hz>", 1, source)
    return fields


def parse_waveform(text: str, source: str = "<text>") -> Waveform:
    lines = text.splitlines()
    if not lines:
        raise WaveformFormatError("empty file", 1, source)
    head = _parse_header(lines[0].strip(), source)
    try:
        fs = exact(head["fs"])
        t0 = float(head.get("t0", "0"))
        declared = int(head["n"]) if "n" in head else None
    except (ValueError, ZeroDivisionError) as exc:
        raise WaveformFormatError(f"bad header value: {exc}", 1, source) from None
    if fs <= 0:
        raise WaveformFormatError("fs must be positive", 1, source)
    values = []
    for i, raw in enumerate(lines[1:], start=2):
        s = raw.strip()
        if not s:
            raise WaveformFormatError("blank line", i, source)
        try:
            v = float(s)
        except ValueError:
            raise WaveformFormatError(f"cannot parse sample {s!r}", i, source) from None
        if not np.isfinite(v):
            raise WaveformFormatError(f"non-finite sample {s!r}", i, source)
        values.append(v)
    if not values:
        raise WaveformFormatError("no samples", 2, source)
    if declared is not None and declared != len(values):
        where = len(values) + 2
        what = "truncated" if len(values) < declared else "too long"
        raise WaveformFormatError(
            f"{what}: header declares n={declared} but {len(values)} samples found", where, source)
    meta = {k: v for k, v in head.items() if k not in RESERVED}
    return Waveform(np.array(values), fs, t0, head.get("unit", ""), meta)


def format_waveform(w: Waveform) -> str:
    header = [f"fs={fraction_to_str(w.sample_rate)}", f"t0={w.start_time!r}"]
    if w.unit:
        header.append(f"unit={w.unit}")
    header.append(f"n={w.n}")
    for k, v in w.meta.items():
        if k in RESERVED or not k or any(c.isspace() for c in f"{k}{v}") or "=" in k:
            raise ValueError(f"meta entry {k!r}={v!r} cannot be written to the header")
        header.append(f"{k}={v}")
    body = "\n".join(format(float(x), ".17g") for x in w.samples)
    return "# " + " ".join(header) + "\n" + body + "\n"


def read_waveform(path: str | os.PathLike) -> Waveform:
    p = Path(path)
    return parse_waveform(p.read_text(encoding="utf-8"), str(p))


def write_waveform(w: Waveform, path: str | os.PathLike | TextIO) -> None:
    text = format_waveform(w)
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def load_json(path: str | os.PathLike) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dump_json(obj: Any, path: str | os.PathLike | TextIO | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"
    if path is None:
        return text
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text
