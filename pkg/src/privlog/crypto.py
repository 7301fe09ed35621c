"""Cryptographic primitives and the key schedule.

Primitive choices, fixed for interoperability:

* KDF: HKDF-SHA256. Calls that bind two secrets pass the first as the
  HKDF salt and the second as the IKM; single-secret calls use an empty
  salt.
* Pseudonym tokens: HMAC-SHA256 truncated to its first 16 bytes.
* Field/grant AEAD: ChaCha20-Poly1305 (IETF), 32-byte key, 12-byte
  random nonce, 16-byte tag.
* Key agreement: X25519; private scalars are derived from 32-byte seeds
  through the KDF and clamped.

Everything in this module is a pure function or locally randomized, so
concurrent callers need no locking.
"""

from __future__ import annotations

import hmac as _hmac
import hashlib
import os
from dataclasses import dataclass
from typing import Tuple, Union

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import AuthFailure, EmptyInput, InvalidLength, MalformedBox, WeakKey

KEY_LEN = 32
NONCE_LEN = 12
TAG_LEN = 16
TOKEN_LEN = 16

KDF_MIN_LEN = 16
KDF_MAX_LEN = 64


class SecretKey32:
    """A 32-byte secret. Never reveals its value through repr/str.

    Zeroization is best effort: the backing buffer is wiped on `wipe()`
    and on garbage collection, but copies handed out via `.bytes` are
    ordinary immutable bytes.
    """

    __slots__ = ("_buf",)

    def __init__(self, data: Union[bytes, bytearray, "SecretKey32"]):
        if isinstance(data, SecretKey32):
            data = data.bytes
        if len(data) != KEY_LEN:
            raise InvalidLength(f"secret key must be {KEY_LEN} bytes, got {len(data)}")
        self._buf = bytearray(data)

    @property
    def bytes(self) -> bytes:
        return bytes(self._buf)

    def wipe(self) -> None:
        for i in range(len(self._buf)):
            self._buf[i] = 0

    def __del__(self):
        try:
            self.wipe()
        except Exception:
            pass

    def __eq__(self, other) -> bool:
        if isinstance(other, SecretKey32):
            return _hmac.compare_digest(self.bytes, other.bytes)
        return NotImplemented

    def __repr__(self) -> str:
        return "SecretKey32(<redacted>)"

    __str__ = __repr__


@dataclass(frozen=True)
class DhKeyPair:
    """X25519 keypair; `private` is the clamped scalar."""

    private: bytes
    public: bytes

    def __post_init__(self):
        if len(self.private) != 32 or len(self.public) != 32:
            raise InvalidLength("X25519 keys must be 32 bytes")

    def __repr__(self) -> str:
        return f"DhKeyPair(public={self.public.hex()}, private=<redacted>)"


@dataclass(frozen=True)
class AeadBox:
    """One sealed value: 12-byte nonce plus ciphertext-with-tag."""

    nonce: bytes
    ct: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_LEN:
            raise MalformedBox(f"nonce must be {NONCE_LEN} bytes")
        if len(self.ct) < TAG_LEN:
            raise MalformedBox("ciphertext shorter than the authentication tag")

    def to_bytes(self) -> bytes:
        return self.nonce + self.ct

    @classmethod
    def from_bytes(cls, raw: bytes) -> "AeadBox":
        if len(raw) < NONCE_LEN + TAG_LEN:
            raise MalformedBox(f"box too short: {len(raw)} bytes")
        return cls(nonce=raw[:NONCE_LEN], ct=raw[NONCE_LEN:])


def _as_bytes(value: Union[bytes, bytearray, SecretKey32, None]) -> bytes:
    if value is None:
        return b""
    if isinstance(value, SecretKey32):
        return value.bytes
    return bytes(value)


def _as_info(label: Union[bytes, str]) -> bytes:
    return label.encode("utf-8") if isinstance(label, str) else bytes(label)


def kdf(
    salt_key: Union[bytes, SecretKey32, None],
    ikm: Union[bytes, SecretKey32],
    info: Union[bytes, str],
    out_len: int,
) -> bytes:
    """HKDF-SHA256 with a domain-separation label as the info field."""
    if not KDF_MIN_LEN <= out_len <= KDF_MAX_LEN:
        raise InvalidLength(
            f"kdf output length {out_len} outside [{KDF_MIN_LEN}, {KDF_MAX_LEN}]"
        )
    salt = _as_bytes(salt_key)
    return HKDF(
        algorithm=hashes.SHA256(),
        length=out_len,
        salt=salt or None,
        info=_as_info(info),
    ).derive(_as_bytes(ikm))


def ratchet_step(ck: SecretKey32) -> Tuple[SecretKey32, SecretKey32]:
    """One-way chain advance: returns (next chain key, this step's message key)."""
    x = kdf(None, ck, b"ratchet", 64)
    return SecretKey32(x[:32]), SecretKey32(x[32:])


def pseudonymize(hash_key: SecretKey32, plaintext: bytes) -> bytes:
    """Stable 16-byte correlation token for a sensitive value."""
    if not plaintext:
        raise EmptyInput("cannot pseudonymize empty input")
    return _hmac.new(hash_key.bytes, plaintext, hashlib.sha256).digest()[:TOKEN_LEN]


def aead_seal(key: SecretKey32, plaintext: bytes, aad: bytes = b"") -> AeadBox:
    nonce = os.urandom(NONCE_LEN)
    ct = ChaCha20Poly1305(key.bytes).encrypt(nonce, plaintext, aad)
    return AeadBox(nonce=nonce, ct=ct)


def aead_open(key: SecretKey32, box: AeadBox, aad: bytes = b"") -> bytes:
    try:
        return ChaCha20Poly1305(key.bytes).decrypt(box.nonce, box.ct, aad)
    except InvalidTag as exc:
        raise AuthFailure("AEAD authentication failed") from exc


def clamp_scalar(raw: bytes) -> bytes:
    b = bytearray(raw)
    b[0] &= 248
    b[31] &= 127
    b[31] |= 64
    return bytes(b)


def dh_derive_keypair(seed: bytes, label: Union[bytes, str]) -> DhKeyPair:
    """Deterministic X25519 keypair from a 32-byte seed and a label."""
    if len(seed) != 32:
        raise InvalidLength("keypair seed must be 32 bytes")
    private = clamp_scalar(kdf(None, seed, label, 32))
    public = (
        X25519PrivateKey.from_private_bytes(private)
        .public_key()
        .public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
    )
    return DhKeyPair(private=private, public=public)


def dh_shared(private: bytes, peer_public: bytes) -> SecretKey32:
    """Raw X25519 agreement. Rejects the all-zero (low order) result."""
    if len(private) != 32 or len(peer_public) != 32:
        raise InvalidLength("X25519 inputs must be 32 bytes")
    try:
        shared = X25519PrivateKey.from_private_bytes(private).exchange(
            X25519PublicKey.from_public_bytes(peer_public)
        )
    except ValueError as exc:
        raise WeakKey("X25519 produced a weak shared secret") from exc
    if shared == b"\x00" * 32:
        raise WeakKey("X25519 produced an all-zero shared secret")
    return SecretKey32(shared)
