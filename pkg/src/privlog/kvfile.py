"""Line-oriented key=value files used for state, grants, offers and keys.

All on-disk secrets are base64; dates are ISO YYYY-MM-DD. Writers that
replace an existing file go through `atomic_write` (temp file, fsync,
rename) so a crash never leaves a half-written file in place.
"""

from __future__ import annotations

import base64
import os
from datetime import date
from pathlib import Path
from typing import Dict, Union

from .errors import CorruptState


def parse_kv(text: str, what: str = "file") -> Dict[str, str]:
    out: Dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CorruptState(f"{what}: malformed line {line!r}")
        key, _, value = line.partition("=")
        out[key] = value
    return out


def format_kv(fields) -> str:
    return "".join(f"{k}={v}\n" for k, v in fields)


def require(fields: Dict[str, str], key: str, what: str) -> str:
    if key not in fields:
        raise CorruptState(f"{what}: missing field {key!r}")
    return fields[key]


def b64_field(fields: Dict[str, str], key: str, what: str, length: int = 0) -> bytes:
    raw = require(fields, key, what)
    try:
        decoded = base64.b64decode(raw, validate=True)
    except Exception as exc:
        raise CorruptState(f"{what}: field {key!r} is not valid base64") from exc
    if length and len(decoded) != length:
        raise CorruptState(
            f"{what}: field {key!r} has {len(decoded)} bytes, expected {length}"
        )
    return decoded


def date_field(fields: Dict[str, str], key: str, what: str) -> date:
    raw = require(fields, key, what)
    try:
        return date.fromisoformat(raw)
    except ValueError as exc:
        raise CorruptState(f"{what}: field {key!r} is not an ISO date") from exc


def b64(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def atomic_write(path: Union[str, Path], text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
