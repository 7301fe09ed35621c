"""Simulated DICE provider.

Stands in for the hardware root: compounds a unique device secret with a
firmware measurement into a CDI, and produces the attestation digest that
grants bind into their context. Any change to the measurement changes
both outputs, which is what ties derived keys to measured device state.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass

from .crypto import SecretKey32, kdf
from .errors import CorruptState, InvalidLength

DIGEST_LEN = 32
MAX_DEVICE_ID_LEN = 64


@dataclass(frozen=True)
class DeviceIdentity:
    uds: bytes
    measurement: bytes
    device_id: str

    def __post_init__(self):
        if len(self.uds) != 32 or len(self.measurement) != 32:
            raise InvalidLength("uds and measurement must be 32 bytes")
        if not self.device_id or len(self.device_id) > MAX_DEVICE_ID_LEN:
            raise InvalidLength("device_id must be 1..64 characters")
        if not self.device_id.isascii() or not self.device_id.isprintable():
            raise InvalidLength("device_id must be printable ASCII")

    def __repr__(self) -> str:
        return f"DeviceIdentity(device_id={self.device_id!r}, uds=<redacted>)"


def derive_cdi(identity: DeviceIdentity) -> SecretKey32:
    """Compound device identifier: secret x measurement."""
    return SecretKey32(kdf(identity.uds, identity.measurement, b"dice-cdi", 32))


def _prefixed(raw: bytes) -> bytes:
    return len(raw).to_bytes(2, "big") + raw


def attestation_digest(identity: DeviceIdentity) -> bytes:
    """SHA-256 over length-prefixed (device_id, measurement).

    Length prefixes keep distinct (id, measurement) pairs from colliding
    by concatenation. A verifier holding the same inputs recomputes it.
    """
    return hashlib.sha256(
        _prefixed(identity.device_id.encode()) + _prefixed(identity.measurement)
    ).digest()


def parse_identity(text: str) -> DeviceIdentity:
    """Parse the identity file format: uds=, measurement=, device_id=."""
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CorruptState(f"identity file: bad line {line!r}")
        key, _, value = line.partition("=")
        fields[key] = value
    try:
        uds = base64.b64decode(fields["uds"], validate=True)
        measurement = base64.b64decode(fields["measurement"], validate=True)
        device_id = fields["device_id"]
    except KeyError as exc:
        raise CorruptState(f"identity file: missing field {exc}") from exc
    except Exception as exc:
        raise CorruptState("identity file: invalid base64") from exc
    try:
        return DeviceIdentity(uds=uds, measurement=measurement, device_id=device_id)
    except InvalidLength as exc:
        raise CorruptState(str(exc)) from exc


def format_identity(identity: DeviceIdentity) -> str:
    return (
        f"uds={base64.b64encode(identity.uds).decode()}\n"
        f"measurement={base64.b64encode(identity.measurement).decode()}\n"
        f"device_id={identity.device_id}\n"
    )
