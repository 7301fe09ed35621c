"""Device-side engine: bootstrap, daily chain, line protection, grants.

State model: `chain_key` is the chain key for `chain_date`, so stepping it
yields that day's message key and the next day's chain key. Advancing
discards the chain keys of the days it passes; once a day is behind the
chain position its message key exists only in the in-memory day-key cache
(never on disk), which is what makes compromise of the persisted state
useless against earlier days.

Creating a grant is the one deliberate disclosure of chain material. It
is immediately followed by a root rotation that mixes the grant's fresh
DH secret into the new root, moves the epoch to the day after the grant,
and drops the old root, chain key and DH private key. Only the long-term
pseudonym hash key survives rotations, which is what keeps tokens for the
same plaintext stable across grants.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, replace
from datetime import date, timedelta
from time import perf_counter_ns
from typing import Dict, List, Optional, Tuple

from .crypto import (
    DhKeyPair,
    SecretKey32,
    aead_seal,
    dh_derive_keypair,
    dh_shared,
    kdf,
    pseudonymize,
    ratchet_step,
)
from .dice import DeviceIdentity, attestation_digest, derive_cdi
from .errors import CorruptState, InvalidLength, InvalidWindow, OutOfOrderDate, UnsupportedVersion
from .grant import Grant, canonical_aad, pack_window_payload
from .kvfile import b64, b64_field, date_field, format_kv, parse_kv, require
from .pii import PiiSpan, ProtectedField, detect_pii, encode_protected_line, extract_date

STATE_VERSION = "1"

MODE_STREAM = "stream"
MODE_BATCH = "batch"


@dataclass(frozen=True)
class ClientState:
    root_key: SecretKey32
    hash_key: SecretKey32
    dh_pair: DhKeyPair
    chain_key: SecretKey32
    chain_date: date
    epoch_date: date
    init_nonce: bytes

    def __post_init__(self):
        if self.chain_date < self.epoch_date:
            raise CorruptState("chain_date precedes epoch_date")
        if len(self.init_nonce) != 32:
            raise InvalidLength("init_nonce must be 32 bytes")


@dataclass(frozen=True)
class GrantRequest:
    server_pub: bytes
    start_date: date
    server_id: str
    grant_id: str

    def __post_init__(self):
        if len(self.server_pub) != 32:
            raise InvalidLength("server ephemeral public key must be 32 bytes")
        if not self.server_id or not self.grant_id:
            raise InvalidWindow("server_id and grant_id must be non-empty")


def _chain_key_for(root_key: SecretKey32, epoch: date) -> SecretKey32:
    return SecretKey32(kdf(None, root_key, b"ck-init" + epoch.isoformat().encode(), 32))


def init_client(
    identity: DeviceIdentity,
    server_longterm_pub: bytes,
    today: date,
    rng_seed: Optional[bytes] = None,
) -> ClientState:
    """Bootstrap all client secrets from the device's CDI.

    The pseudonym hash key depends only on the CDI; the root key also
    binds the DH agreement with the server's long-term key, so the server
    alone can never reconstruct it (it never learns the CDI).
    """
    cdi = derive_cdi(identity)
    hash_key = SecretKey32(kdf(None, cdi, b"hmac-key", 32))
    init_nonce = rng_seed if rng_seed is not None else secrets.token_bytes(32)
    if len(init_nonce) != 32:
        raise InvalidLength("rng_seed must be 32 bytes")
    dh_pair = dh_derive_keypair(init_nonce, b"dh-init")
    z = dh_shared(dh_pair.private, server_longterm_pub)
    root_key = SecretKey32(kdf(cdi, z, b"root-key", 32))
    return ClientState(
        root_key=root_key,
        hash_key=hash_key,
        dh_pair=dh_pair,
        chain_key=_chain_key_for(root_key, today),
        chain_date=today,
        epoch_date=today,
        init_nonce=init_nonce,
    )


def advance_to(
    state: ClientState, target: date
) -> Tuple[ClientState, Dict[date, SecretKey32]]:
    """Ratchet forward to `target`, returning message keys per day passed.

    Covers every day from the current chain date through `target`
    inclusive. The returned state keeps only `target`'s chain key;
    earlier chain keys are gone, so the chain can never be rewound.
    """
    if target < state.chain_date:
        raise OutOfOrderDate(
            f"cannot rewind chain from {state.chain_date} to {target}"
        )
    keys: Dict[date, SecretKey32] = {}
    ck = state.chain_key
    day = state.chain_date
    while True:
        ck_next, mk = ratchet_step(ck)
        keys[day] = mk
        if day == target:
            break
        ck = ck_next
        day += timedelta(days=1)
    return replace(state, chain_key=ck, chain_date=day), keys


@dataclass
class LineStats:
    """Nanosecond stage timings and counters for one protected line."""

    key_derivation_ns: int = 0
    format_processing_ns: int = 0
    hashing_ns: int = 0
    encryption_ns: int = 0
    total_ns: int = 0
    pii_count: int = 0
    skipped_pre_epoch: bool = False


class ProtectSession:
    """Mutable wrapper advancing one client state across a log stream.

    Stream mode keeps only the newest day key and insists on
    non-decreasing line dates. Batch mode caches every day key derived
    during this session so out-of-order lines within the advanced range
    still protect; nothing from the cache is ever persisted. Dates before
    the session's starting chain position are unreachable in both modes
    because those chain keys no longer exist.
    """

    def __init__(self, state: ClientState, mode: str = MODE_STREAM, assumed_year: int = 2024):
        if mode not in (MODE_STREAM, MODE_BATCH):
            raise ValueError(f"unknown mode {mode!r}")
        self._state = state
        self.mode = mode
        self.assumed_year = assumed_year
        self._cache: Dict[date, SecretKey32] = {}

    @property
    def state(self) -> ClientState:
        return self._state

    @property
    def day_keys(self) -> Dict[date, SecretKey32]:
        return dict(self._cache)

    def _key_for(self, day: date) -> SecretKey32:
        key = self._cache.get(day)
        if key is not None:
            return key
        if day < self._state.chain_date:
            raise OutOfOrderDate(
                f"no key for {day}: chain already at {self._state.chain_date}"
            )
        self._state, new_keys = advance_to(self._state, day)
        if self.mode == MODE_STREAM:
            self._cache = {day: new_keys[day]}
        else:
            self._cache.update(new_keys)
        return self._cache[day]

    def protect_line(
        self, line: str, spans: Optional[List[PiiSpan]] = None
    ) -> Tuple[Optional[str], LineStats]:
        """Protect one line; returns (protected line or None if skipped, stats).

        Lines dated before the epoch are skipped (returned as None) and
        flagged in the stats: their keys were destroyed by a rotation and
        emitting them unprotected would leak. Passing `spans` bypasses
        detection for caller-tagged fields.
        """
        stats = LineStats()
        t_start = perf_counter_ns()

        t0 = perf_counter_ns()
        line_date = extract_date(line, self.assumed_year)
        if line_date is not None and line_date < self._state.epoch_date:
            stats.skipped_pre_epoch = True
            stats.total_ns = perf_counter_ns() - t_start
            return None, stats
        key = self._key_for(line_date if line_date is not None else self._state.chain_date)
        stats.key_derivation_ns = perf_counter_ns() - t0

        t1 = perf_counter_ns()
        if spans is None:
            spans = detect_pii(line)
        stats.format_processing_ns = perf_counter_ns() - t1
        if not spans:
            stats.total_ns = perf_counter_ns() - t_start
            return line, stats

        t2 = perf_counter_ns()
        tokens = [pseudonymize(self._state.hash_key, s.text.encode("utf-8")) for s in spans]
        stats.hashing_ns = perf_counter_ns() - t2

        t3 = perf_counter_ns()
        fields = [
            ProtectedField(span.pii_type, aead_seal(key, token))
            for span, token in zip(spans, tokens)
        ]
        stats.encryption_ns = perf_counter_ns() - t3

        t4 = perf_counter_ns()
        out = encode_protected_line(line, spans, fields)
        stats.format_processing_ns += perf_counter_ns() - t4

        stats.pii_count = len(spans)
        stats.total_ns = perf_counter_ns() - t_start
        return out, stats


def create_grant(
    state: ClientState,
    req: GrantRequest,
    identity: DeviceIdentity,
    today: date,
    rng_seed: Optional[bytes] = None,
) -> Tuple[Grant, ClientState]:
    """Issue a time-window grant and rotate the root.

    The window runs from `req.start_date` through `today`. The start
    chain key is re-derived from the root rather than taken from the live
    chain, so the live position is irrelevant as long as it has not
    passed `today`. The returned state starts a fresh epoch at today+1
    under a rotated root; nothing derivable from the grant can decrypt
    anything protected after it.
    """
    if not state.epoch_date <= req.start_date <= state.chain_date:
        raise InvalidWindow(
            f"start {req.start_date} outside [{state.epoch_date}, {state.chain_date}]"
        )
    if req.start_date > today or state.chain_date > today:
        raise InvalidWindow(
            f"grant on {today} impossible: chain at {state.chain_date}, "
            f"start {req.start_date}"
        )

    seed = rng_seed if rng_seed is not None else secrets.token_bytes(32)
    eph_pair = dh_derive_keypair(seed, b"export-keygen")
    z = dh_shared(eph_pair.private, req.server_pub)
    k_exp = SecretKey32(kdf(None, z, b"export-kdf", 32))

    ck = _chain_key_for(state.root_key, state.epoch_date)
    day = state.epoch_date
    while day < req.start_date:
        ck, _ = ratchet_step(ck)
        day += timedelta(days=1)

    aad = canonical_aad(
        req.server_id,
        identity.device_id,
        attestation_digest(identity),
        req.grant_id,
        today,
    )
    box = aead_seal(k_exp, pack_window_payload(ck, req.start_date), aad)
    grant = Grant(
        client_eph_pub=eph_pair.public,
        box=box,
        server_id=req.server_id,
        device_id=identity.device_id,
        attest_digest=attestation_digest(identity),
        grant_id=req.grant_id,
        grant_date=today,
    )

    new_root = SecretKey32(kdf(state.root_key, z, b"root-key-rotate", 32))
    new_epoch = today + timedelta(days=1)
    rotated = ClientState(
        root_key=new_root,
        hash_key=state.hash_key,
        dh_pair=eph_pair,
        chain_key=_chain_key_for(new_root, new_epoch),
        chain_date=new_epoch,
        epoch_date=new_epoch,
        init_nonce=state.init_nonce,
    )
    return grant, rotated


def save_state(state: ClientState) -> str:
    return format_kv(
        [
            ("v", STATE_VERSION),
            ("root_key", b64(state.root_key.bytes)),
            ("hash_key", b64(state.hash_key.bytes)),
            ("dh_priv", b64(state.dh_pair.private)),
            ("dh_pub", b64(state.dh_pair.public)),
            ("chain_key", b64(state.chain_key.bytes)),
            ("chain_date", state.chain_date.isoformat()),
            ("epoch_date", state.epoch_date.isoformat()),
            ("init_nonce", b64(state.init_nonce)),
        ]
    )


def load_state(text: str) -> ClientState:
    fields = parse_kv(text, "state file")
    version = require(fields, "v", "state file")
    if version != STATE_VERSION:
        raise UnsupportedVersion(f"state file version {version!r}")
    return ClientState(
        root_key=SecretKey32(b64_field(fields, "root_key", "state file", 32)),
        hash_key=SecretKey32(b64_field(fields, "hash_key", "state file", 32)),
        dh_pair=DhKeyPair(
            private=b64_field(fields, "dh_priv", "state file", 32),
            public=b64_field(fields, "dh_pub", "state file", 32),
        ),
        chain_key=SecretKey32(b64_field(fields, "chain_key", "state file", 32)),
        chain_date=date_field(fields, "chain_date", "state file"),
        epoch_date=date_field(fields, "epoch_date", "state file"),
        init_nonce=b64_field(fields, "init_nonce", "state file", 32),
    )
