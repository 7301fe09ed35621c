"""Simulated DICE provider: determinism, sensitivity, file format."""

import os

import pytest

from privlog import CorruptState, DeviceIdentity, attestation_digest, derive_cdi
from privlog.dice import format_identity, parse_identity
from privlog.errors import InvalidLength


def test_cdi_deterministic(identity):
    assert derive_cdi(identity) == derive_cdi(identity)


def test_cdi_golden(golden, identity):
    assert derive_cdi(identity).bytes.hex() == golden["cdi"]["cdi"]


def test_attestation_digest_golden(golden, identity):
    assert attestation_digest(identity).hex() == golden["attestation_digest"]["digest"]
    assert attestation_digest(identity) == attestation_digest(identity)


def test_attestation_digest_varies_with_device_id(identity):
    other = DeviceIdentity(
        uds=identity.uds, measurement=identity.measurement, device_id="other-device"
    )
    assert attestation_digest(other) != attestation_digest(identity)


def test_measurement_sensitivity(identity):
    # Any single-byte change to the measurement must move both outputs.
    base_cdi = derive_cdi(identity).bytes
    base_attest = attestation_digest(identity)
    for _ in range(100):
        idx = os.urandom(1)[0] % 32
        mutated = bytearray(identity.measurement)
        mutated[idx] ^= 1 + os.urandom(1)[0] % 255
        other = DeviceIdentity(
            uds=identity.uds, measurement=bytes(mutated), device_id=identity.device_id
        )
        assert derive_cdi(other).bytes != base_cdi
        assert attestation_digest(other) != base_attest


def test_identity_constraints():
    with pytest.raises(InvalidLength):
        DeviceIdentity(uds=b"\x01" * 31, measurement=b"\x02" * 32, device_id="x")
    with pytest.raises(InvalidLength):
        DeviceIdentity(uds=b"\x01" * 32, measurement=b"\x02" * 32, device_id="")
    with pytest.raises(InvalidLength):
        DeviceIdentity(uds=b"\x01" * 32, measurement=b"\x02" * 32, device_id="a" * 65)
    with pytest.raises(InvalidLength):
        DeviceIdentity(uds=b"\x01" * 32, measurement=b"\x02" * 32, device_id="naïve")


def test_identity_repr_hides_uds(identity):
    assert identity.uds.hex() not in repr(identity)


def test_identity_file_roundtrip(identity):
    assert parse_identity(format_identity(identity)) == identity


def test_identity_file_errors():
    with pytest.raises(CorruptState):
        parse_identity("uds=!!notb64!!\nmeasurement=AA==\ndevice_id=x\n")
    with pytest.raises(CorruptState):
        parse_identity("uds=AAAA\n")
    with pytest.raises(CorruptState):
        parse_identity("garbage line without equals")
