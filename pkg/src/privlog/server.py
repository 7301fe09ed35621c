"""Forensic side: grant ingestion, token recovery, linkage analysis.

The server never holds the pseudonym hash key, so everything it recovers
is a 16-byte correlation token: good for equality linkage and timelines,
useless for learning the underlying value. Day keys come from replaying
the one-way chain forward from the granted start key, which structurally
cannot reach any day before the window start.
"""

from __future__ import annotations

import csv
import secrets
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Dict, Iterable, List, Optional, Tuple

from .crypto import DhKeyPair, SecretKey32, aead_open, dh_derive_keypair, dh_shared, kdf, ratchet_step
from .errors import AuthFailure, ContextMismatch, CorruptState, InvalidWindow, UnsupportedVersion
from .grant import Grant, grant_aad, unpack_window_payload
from .kvfile import b64, b64_field, format_kv, parse_kv, require
from .pii import PiiType, extract_date, parse_protected_line

KEYSTORE_VERSION = "1"
WINDOW_VERSION = "1"

TOKEN_LEN = 16

EVENTS_HEADER = ["line_no", "date", "pii_type", "token_b64", "template"]
LINKAGE_HEADER = ["token_b64", "pii_type", "count", "first_date", "last_date"]


@dataclass
class ServerKeys:
    server_id: str
    longterm: DhKeyPair
    ephemeral: Dict[str, DhKeyPair] = field(default_factory=dict)


def keygen(server_id: str, seed: Optional[bytes] = None) -> ServerKeys:
    seed = seed if seed is not None else secrets.token_bytes(32)
    return ServerKeys(
        server_id=server_id,
        longterm=dh_derive_keypair(seed, b"server-longterm"),
    )


def create_offer(keys: ServerKeys, grant_id: str, seed: Optional[bytes] = None) -> bytes:
    """Mint the single-use ephemeral keypair for one grant; returns its public key."""
    if not grant_id or not all(c.isalnum() or c in "._-" for c in grant_id):
        raise InvalidWindow(f"grant_id {grant_id!r} must be [A-Za-z0-9._-]+")
    if grant_id in keys.ephemeral:
        raise InvalidWindow(f"grant_id {grant_id!r} already has an outstanding offer")
    seed = seed if seed is not None else secrets.token_bytes(32)
    pair = dh_derive_keypair(seed, b"server-ephemeral")
    keys.ephemeral[grant_id] = pair
    return pair.public


@dataclass
class WindowKeys:
    grant_id: str
    days: Dict[date, SecretKey32]

    def span(self) -> Tuple[Optional[date], Optional[date]]:
        if not self.days:
            return None, None
        ordered = sorted(self.days)
        return ordered[0], ordered[-1]


def accept_grant(
    keys: ServerKeys,
    grant: Grant,
    expected_server_id: str,
    expected_device_id: str,
    expected_attest: Optional[bytes] = None,
) -> WindowKeys:
    """Open a grant, verify its context, and replay day keys for its window.

    AEAD failure (tampering, wrong ephemeral) raises AuthFailure; a grant
    that authenticates but was issued for a different server/device/
    attestation raises ContextMismatch. The single-use ephemeral keypair
    is consumed only when ingestion fully succeeds.
    """
    eph = keys.ephemeral.get(grant.grant_id)
    if eph is None:
        raise ContextMismatch(f"no outstanding offer for grant {grant.grant_id!r}")
    z = dh_shared(eph.private, grant.client_eph_pub)
    k_exp = SecretKey32(kdf(None, z, b"export-kdf", 32))
    payload = aead_open(k_exp, grant.box, grant_aad(grant))

    if grant.server_id != expected_server_id:
        raise ContextMismatch(
            f"grant is for server {grant.server_id!r}, expected {expected_server_id!r}"
        )
    if grant.device_id != expected_device_id:
        raise ContextMismatch(
            f"grant is from device {grant.device_id!r}, expected {expected_device_id!r}"
        )
    if expected_attest is not None and grant.attest_digest != expected_attest:
        raise ContextMismatch("attestation digest does not match the pinned value")

    start_ck, start = unpack_window_payload(payload)
    if start > grant.grant_date:
        raise InvalidWindow(f"window start {start} after grant date {grant.grant_date}")
    # Consumed only on full success; a failed accept leaves the offer usable.
    del keys.ephemeral[grant.grant_id]

    days: Dict[date, SecretKey32] = {}
    ck = start_ck
    day = start
    while day <= grant.grant_date:
        ck, mk = ratchet_step(ck)
        days[day] = mk
        day += timedelta(days=1)
    return WindowKeys(grant_id=grant.grant_id, days=days)


@dataclass(frozen=True)
class RecoveredEvent:
    line_no: int
    date: date
    pii_type: PiiType
    token: bytes
    template: str


def recover_tokens(
    window: WindowKeys, lines: Iterable[str], assumed_year: int
) -> Tuple[List[RecoveredEvent], Dict[str, int]]:
    """Decrypt every in-window protected field; tally everything else.

    Failures are per field, never fatal: a mixed corpus is expected to
    contain lines outside the window and fields sealed under other
    epochs, and those must not abort recovery of the rest.
    """
    events: List[RecoveredEvent] = []
    skipped = {
        "lines_no_pii": 0,
        "lines_no_date": 0,
        "lines_out_of_window": 0,
        "fields_auth_failed": 0,
        "fields_malformed": 0,
    }
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        template, fields, warnings = parse_protected_line(line)
        skipped["fields_malformed"] += len(warnings)
        if not fields:
            skipped["lines_no_pii"] += 1
            continue
        day = extract_date(line, assumed_year)
        if day is None:
            skipped["lines_no_date"] += 1
            continue
        key = window.days.get(day)
        if key is None:
            skipped["lines_out_of_window"] += 1
            continue
        for f in fields:
            try:
                token = aead_open(key, f.box)
            except AuthFailure:
                skipped["fields_auth_failed"] += 1
                continue
            if len(token) != TOKEN_LEN:
                skipped["fields_malformed"] += 1
                continue
            events.append(
                RecoveredEvent(
                    line_no=line_no,
                    date=day,
                    pii_type=f.pii_type,
                    token=token,
                    template=template,
                )
            )
    return events, skipped


@dataclass
class LinkageGroup:
    token: bytes
    pii_type: PiiType
    count: int
    first_date: date
    last_date: date
    per_day: Dict[date, int]


@dataclass
class LinkageReport:
    groups: List[LinkageGroup]
    total_events: int


def linkage_report(events: List[RecoveredEvent]) -> LinkageReport:
    """Group events by token; most frequent first, token bytes break ties."""
    by_token: Dict[bytes, List[RecoveredEvent]] = {}
    for ev in events:
        by_token.setdefault(ev.token, []).append(ev)
    groups = []
    for token, evs in by_token.items():
        per_day: Dict[date, int] = {}
        for ev in evs:
            per_day[ev.date] = per_day.get(ev.date, 0) + 1
        groups.append(
            LinkageGroup(
                token=token,
                pii_type=evs[0].pii_type,
                count=len(evs),
                first_date=min(ev.date for ev in evs),
                last_date=max(ev.date for ev in evs),
                per_day=per_day,
            )
        )
    groups.sort(key=lambda g: (-g.count, g.token))
    return LinkageReport(groups=groups, total_events=len(events))


def timeline(
    events: List[RecoveredEvent], token: bytes
) -> List[Tuple[date, int, str]]:
    hits = [(ev.date, ev.line_no, ev.template) for ev in events if ev.token == token]
    hits.sort(key=lambda t: (t[0], t[1]))
    return hits


# --- persistence -------------------------------------------------------


def save_server_keys(keys: ServerKeys) -> str:
    rows = [
        ("v", KEYSTORE_VERSION),
        ("server_id", keys.server_id),
        ("longterm_priv", b64(keys.longterm.private)),
        ("longterm_pub", b64(keys.longterm.public)),
    ]
    for grant_id in sorted(keys.ephemeral):
        pair = keys.ephemeral[grant_id]
        rows.append((f"eph.{grant_id}", f"{b64(pair.private)},{b64(pair.public)}"))
    return format_kv(rows)


def load_server_keys(text: str) -> ServerKeys:
    fields = parse_kv(text, "server keystore")
    if require(fields, "v", "server keystore") != KEYSTORE_VERSION:
        raise UnsupportedVersion(f"server keystore version {fields['v']!r}")
    keys = ServerKeys(
        server_id=require(fields, "server_id", "server keystore"),
        longterm=DhKeyPair(
            private=b64_field(fields, "longterm_priv", "server keystore", 32),
            public=b64_field(fields, "longterm_pub", "server keystore", 32),
        ),
    )
    import base64

    for key, value in fields.items():
        if not key.startswith("eph."):
            continue
        grant_id = key[len("eph.") :]
        try:
            priv_b64, pub_b64 = value.split(",")
            pair = DhKeyPair(
                private=base64.b64decode(priv_b64, validate=True),
                public=base64.b64decode(pub_b64, validate=True),
            )
        except Exception as exc:
            raise CorruptState(f"server keystore: bad ephemeral entry {key!r}") from exc
        keys.ephemeral[grant_id] = pair
    return keys


def save_window_keys(window: WindowKeys) -> str:
    rows = [("v", WINDOW_VERSION), ("grant_id", window.grant_id)]
    for day in sorted(window.days):
        rows.append((f"key.{day.isoformat()}", b64(window.days[day].bytes)))
    return format_kv(rows)


def load_window_keys(text: str) -> WindowKeys:
    fields = parse_kv(text, "window keys file")
    if require(fields, "v", "window keys file") != WINDOW_VERSION:
        raise UnsupportedVersion(f"window keys file version {fields['v']!r}")
    days: Dict[date, SecretKey32] = {}
    for key in fields:
        if not key.startswith("key."):
            continue
        try:
            day = date.fromisoformat(key[len("key.") :])
        except ValueError as exc:
            raise CorruptState(f"window keys file: bad date in {key!r}") from exc
        days[day] = SecretKey32(b64_field(fields, key, "window keys file", 32))
    return WindowKeys(grant_id=require(fields, "grant_id", "window keys file"), days=days)


def write_events_csv(events: List[RecoveredEvent], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(EVENTS_HEADER)
    for ev in events:
        writer.writerow(
            [ev.line_no, ev.date.isoformat(), ev.pii_type.value, b64(ev.token), ev.template]
        )


def read_events_csv(fh) -> List[RecoveredEvent]:
    import base64

    reader = csv.reader(fh)
    header = next(reader, None)
    if header != EVENTS_HEADER:
        raise CorruptState(f"events csv: unexpected header {header!r}")
    events = []
    try:
        for row in reader:
            line_no, day, pii_type, token_b64, template = row
            events.append(
                RecoveredEvent(
                    line_no=int(line_no),
                    date=date.fromisoformat(day),
                    pii_type=PiiType(pii_type),
                    token=base64.b64decode(token_b64, validate=True),
                    template=template,
                )
            )
    except (ValueError, KeyError) as exc:
        raise CorruptState(f"events csv: bad row: {exc}") from exc
    return events


def write_linkage_csv(report: LinkageReport, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(LINKAGE_HEADER)
    for g in report.groups:
        writer.writerow(
            [
                b64(g.token),
                g.pii_type.value,
                g.count,
                g.first_date.isoformat(),
                g.last_date.isoformat(),
            ]
        )
