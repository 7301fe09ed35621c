"""PII span detection, log-date extraction, and the protected-line format.

Detection is regex-based over ten field types. Pattern coverage here is a
pipeline stand-in, not a recall guarantee: the contract is that whatever a
pattern matches is protected, byte-for-byte in place, with all other
bytes preserved.

Wire grammar for a protected field, with no interior whitespace:

    <PII type="LABEL">BASE64</PII>

LABEL is one of the ten uppercase type names; BASE64 is the standard,
padded encoding of nonce||ciphertext (always 44 bytes, so always 60
characters for the 16-byte tokens this pipeline seals).
"""

from __future__ import annotations

import base64
import enum
import re
from dataclasses import dataclass
from datetime import date
from typing import List, Optional, Tuple

from .crypto import AeadBox
from .errors import InvalidSpans, MalformedBox

LogDate = date


class PiiType(enum.Enum):
    EMAIL = "EMAIL"
    PHONE = "PHONE"
    IMEI = "IMEI"
    MAC = "MAC"
    IPV4 = "IPV4"
    IPV6 = "IPV6"
    URL = "URL"
    SSN = "SSN"
    CREDIT_CARD = "CREDIT_CARD"
    DEVICE_SERIAL = "DEVICE_SERIAL"


# Source of truth for the detection patterns (also tabulated in README).
PATTERNS = {
    PiiType.EMAIL: re.compile(r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}\b"),
    PiiType.PHONE: re.compile(
        r"(?<!\d)(?:\+\d{1,2}[ .-])?\(?\d{3}\)?[ .-]\d{3}[ .-]\d{4}(?!\d)"
    ),
    PiiType.IMEI: re.compile(r"(?<!\d)\d{15}(?!\d)"),
    PiiType.MAC: re.compile(r"\b(?:[0-9A-Fa-f]{2}[:-]){5}[0-9A-Fa-f]{2}\b"),
    PiiType.IPV4: re.compile(
        r"(?<!\d)(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}"
        r"(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)(?!\d)"
    ),
    PiiType.IPV6: re.compile(
        r"\b(?:(?:[0-9A-Fa-f]{1,4}:){7}[0-9A-Fa-f]{1,4}"
        r"|(?:[0-9A-Fa-f]{1,4}:){1,6}:(?:[0-9A-Fa-f]{1,4}(?::[0-9A-Fa-f]{1,4}){0,5})?)\b"
    ),
    PiiType.URL: re.compile(r"\bhttps?://[^\s<>\"']+"),
    PiiType.SSN: re.compile(r"(?<![\d-])\d{3}-\d{2}-\d{4}(?![\d-])"),
    PiiType.CREDIT_CARD: re.compile(
        r"(?<![\d-])(?:\d{4}-){3}\d{4}(?![\d-])|(?<!\d)\d{16}(?!\d)"
    ),
    PiiType.DEVICE_SERIAL: re.compile(r"\bSN-[A-Z0-9]{10,16}\b"),
}

# Tie-break order when overlapping candidates have equal length and start.
PRIORITY = (
    PiiType.URL,
    PiiType.EMAIL,
    PiiType.IPV6,
    PiiType.IPV4,
    PiiType.MAC,
    PiiType.IMEI,
    PiiType.CREDIT_CARD,
    PiiType.SSN,
    PiiType.PHONE,
    PiiType.DEVICE_SERIAL,
)
_PRIORITY_INDEX = {t: i for i, t in enumerate(PRIORITY)}


@dataclass(frozen=True)
class PiiSpan:
    pii_type: PiiType
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class ProtectedField:
    pii_type: PiiType
    box: AeadBox


def detect_pii(line: str) -> List[PiiSpan]:
    """Run all ten patterns and resolve overlaps.

    Longer spans win, then earlier starts, then the fixed priority order,
    so e.g. a URL absorbs any address-like substrings inside it.
    """
    candidates = []
    for pii_type, pattern in PATTERNS.items():
        for m in pattern.finditer(line):
            candidates.append(
                PiiSpan(pii_type, m.start(), m.end(), m.group())
            )
    candidates.sort(
        key=lambda s: (-(s.end - s.start), s.start, _PRIORITY_INDEX[s.pii_type])
    )
    chosen: List[PiiSpan] = []
    for span in candidates:
        if all(span.end <= kept.start or span.start >= kept.end for kept in chosen):
            chosen.append(span)
    chosen.sort(key=lambda s: s.start)
    return chosen


_ISO_PREFIX = re.compile(r"^(\d{4})-(\d{2})-(\d{2})\b")
_LOGCAT_PREFIX = re.compile(r"^(\d{2})-(\d{2}) \d{2}:\d{2}:\d{2}\.\d{3}")


def extract_date(line: str, assumed_year: int) -> Optional[LogDate]:
    """Date of a log line: ISO prefix, else logcat MM-DD prefix (year-less).

    Logcat timestamps carry no year, so the caller supplies one; getting
    it wrong shifts every line by whole years. Returns None when the line
    starts with neither form or names an impossible date.
    """
    if not 1970 <= assumed_year <= 9999:
        raise ValueError(f"assumed_year {assumed_year} outside [1970, 9999]")
    m = _ISO_PREFIX.match(line)
    if m:
        try:
            return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
        except ValueError:
            return None
    m = _LOGCAT_PREFIX.match(line)
    if m:
        try:
            return date(assumed_year, int(m.group(1)), int(m.group(2)))
        except ValueError:
            return None
    return None


def render_field(field: ProtectedField) -> str:
    payload = base64.b64encode(field.box.to_bytes()).decode("ascii")
    return f'<PII type="{field.pii_type.value}">{payload}</PII>'


def encode_protected_line(
    line: str, spans: List[PiiSpan], fields: List[ProtectedField]
) -> str:
    """Replace each span with its protected element; other bytes unchanged."""
    if len(spans) != len(fields):
        raise InvalidSpans(f"{len(spans)} spans but {len(fields)} fields")
    pairs = sorted(zip(spans, fields), key=lambda p: p[0].start)
    pos = 0
    parts = []
    for span, field in pairs:
        if span.start < pos:
            raise InvalidSpans(f"overlapping span at {span.start}")
        if not 0 <= span.start < span.end <= len(line):
            raise InvalidSpans(f"span [{span.start}, {span.end}) out of bounds")
        parts.append(line[pos : span.start])
        parts.append(render_field(field))
        pos = span.end
    parts.append(line[pos:])
    return "".join(parts)


_ELEMENT = re.compile(r'<PII type="([^"]*)">([^<]*)</PII>')
_LABELS = {t.value: t for t in PiiType}


def parse_protected_line(
    line: str,
) -> Tuple[str, List[ProtectedField], List[str]]:
    """Extract protected fields; malformed elements stay in the template.

    Returns (template, fields, warnings). The template holds a <PII#i>
    placeholder per recovered field; substituting each field back (via
    render_field) reproduces the input line exactly.
    """
    fields: List[ProtectedField] = []
    warnings: List[str] = []
    parts = []
    pos = 0
    for m in _ELEMENT.finditer(line):
        label, payload = m.group(1), m.group(2)
        pii_type = _LABELS.get(label)
        if pii_type is None:
            warnings.append(f"Malformed element at {m.start()}: unknown type {label!r}")
            continue
        try:
            raw = base64.b64decode(payload, validate=True)
            if base64.b64encode(raw).decode("ascii") != payload:
                raise ValueError("non-canonical base64")
            box = AeadBox.from_bytes(raw)
        except (ValueError, MalformedBox) as exc:
            warnings.append(f"Malformed element at {m.start()}: {exc}")
            continue
        parts.append(line[pos : m.start()])
        parts.append(f"<PII#{len(fields)}>")
        fields.append(ProtectedField(pii_type=pii_type, box=box))
        pos = m.end()
    parts.append(line[pos:])
    return "".join(parts), fields, warnings


def fill_template(template: str, fields: List[ProtectedField]) -> str:
    """Inverse of parse_protected_line for round-trip checks."""
    out = template
    for i, field in enumerate(fields):
        out = out.replace(f"<PII#{i}>", render_field(field), 1)
    return out
