"""Server side: grant ingestion, window enforcement, recovery, reports."""

import dataclasses
import io
from datetime import date, timedelta

import pytest
from hypothesis import given, settings, strategies as st

from privlog import (
    AuthFailure,
    ContextMismatch,
    GrantRequest,
    InvalidWindow,
    ProtectSession,
    SecretKey32,
    accept_grant,
    advance_to,
    aead_seal,
    create_grant,
    create_offer,
    dh_shared,
    init_client,
    kdf,
    keygen,
    linkage_report,
    recover_tokens,
    timeline,
)
from privlog.grant import Grant, canonical_aad, pack_window_payload
from privlog.pii import PiiType
from privlog.server import (
    RecoveredEvent,
    WindowKeys,
    load_server_keys,
    load_window_keys,
    read_events_csv,
    save_server_keys,
    save_window_keys,
    write_events_csv,
    write_linkage_csv,
)

DAY1 = date(2024, 5, 1)


def D(n: int) -> date:
    return DAY1 + timedelta(days=n - 1)


def logcat(day: date, msg: str) -> str:
    return f"{day.month:02d}-{day.day:02d} 12:00:00.000  1000  1000 I TestTag: {msg}"


@pytest.fixture()
def interop(identity, server_keys, client_state):
    """Client advanced through day 7, grant covering days 1..7."""
    state, client_mks = advance_to(client_state, D(7))
    offer_pub = create_offer(server_keys, "g-interop", seed=b"\x51" * 32)
    grant, rotated = create_grant(
        state,
        GrantRequest(offer_pub, D(1), "lab-server", "g-interop"),
        identity,
        D(7),
        rng_seed=b"\x52" * 32,
    )
    return client_mks, grant, rotated


def test_replay_matches_client_keys(identity, server_keys, interop):
    client_mks, grant, _ = interop
    window = accept_grant(server_keys, grant, "lab-server", identity.device_id)
    assert sorted(window.days) == [D(n) for n in range(1, 8)]
    for day, mk in window.days.items():
        assert mk.bytes == client_mks[day].bytes


def test_accept_checks_attestation(identity, server_keys, interop):
    from privlog import attestation_digest

    _, grant, _ = interop
    window = accept_grant(
        server_keys, grant, "lab-server", identity.device_id,
        expected_attest=attestation_digest(identity),
    )
    assert len(window.days) == 7


def test_accept_wrong_expected_device(identity, server_keys, interop):
    _, grant, _ = interop
    with pytest.raises(ContextMismatch):
        accept_grant(server_keys, grant, "lab-server", "some-other-device")
    # offer not consumed by the failed attempt
    window = accept_grant(server_keys, grant, "lab-server", identity.device_id)
    assert len(window.days) == 7


def test_accept_wrong_expected_server(identity, server_keys, interop):
    _, grant, _ = interop
    with pytest.raises(ContextMismatch):
        accept_grant(server_keys, grant, "other-server", identity.device_id)


def test_accept_wrong_expected_attest(identity, server_keys, interop):
    _, grant, _ = interop
    with pytest.raises(ContextMismatch):
        accept_grant(
            server_keys, grant, "lab-server", identity.device_id,
            expected_attest=b"\x00" * 32,
        )


def test_accept_unknown_grant_id(identity, server_keys, interop):
    _, grant, _ = interop
    stranger = dataclasses.replace(grant, grant_id="never-offered")
    with pytest.raises(ContextMismatch):
        accept_grant(server_keys, stranger, "lab-server", identity.device_id)


def test_accept_is_single_use(identity, server_keys, interop):
    _, grant, _ = interop
    accept_grant(server_keys, grant, "lab-server", identity.device_id)
    with pytest.raises(ContextMismatch):
        accept_grant(server_keys, grant, "lab-server", identity.device_id)


@settings(max_examples=1000, deadline=None)
@given(field_idx=st.integers(min_value=0, max_value=4), byte_seed=st.integers(min_value=1, max_value=2**31))
def test_grant_context_tamper_always_auth_failure(field_idx, byte_seed):
    """Flipping any byte of any AAD field breaks authentication."""
    identity_uds = b"\x01" * 32
    from privlog import DeviceIdentity

    identity = DeviceIdentity(uds=identity_uds, measurement=b"\x02" * 32, device_id="golden-device")
    sk = keygen("lab-server", seed=b"\x42" * 32)
    state = init_client(identity, sk.longterm.public, DAY1, rng_seed=b"\x07" * 32)
    offer_pub = create_offer(sk, "g-tamper", seed=b"\x51" * 32)
    grant, _ = create_grant(
        state, GrantRequest(offer_pub, DAY1, "lab-server", "g-tamper"),
        identity, DAY1, rng_seed=b"\x52" * 32,
    )

    if field_idx == 0:
        tampered = dataclasses.replace(grant, server_id="lab-serveR")
    elif field_idx == 1:
        tampered = dataclasses.replace(grant, device_id="golden-devicf")
    elif field_idx == 2:
        digest = bytearray(grant.attest_digest)
        digest[byte_seed % 32] ^= 1 + byte_seed % 255
        tampered = dataclasses.replace(grant, attest_digest=bytes(digest))
    elif field_idx == 3:
        tampered = dataclasses.replace(grant, grant_id="g-tamper")  # same id, flip date below
        tampered = dataclasses.replace(tampered, grant_date=DAY1 + timedelta(days=1 + byte_seed % 30))
    else:
        box = grant.box
        ct = bytearray(box.ct)
        ct[byte_seed % len(ct)] ^= 1 + byte_seed % 255
        tampered = dataclasses.replace(grant, box=dataclasses.replace(box, ct=bytes(ct)))

    with pytest.raises(AuthFailure):
        accept_grant(sk, tampered, tampered.server_id, tampered.device_id,
                     expected_attest=tampered.attest_digest)


def test_forged_window_start_rejected(identity, server_keys):
    """A hand-built grant whose window start is after its date is refused."""
    state = init_client(identity, server_keys.longterm.public, DAY1, rng_seed=b"\x07" * 32)
    offer_pub = create_offer(server_keys, "g-forged", seed=b"\x51" * 32)

    from privlog import dh_derive_keypair

    eph = dh_derive_keypair(b"\x52" * 32, b"export-keygen")
    z = dh_shared(eph.private, offer_pub)
    k_exp = SecretKey32(kdf(None, z, b"export-kdf", 32))
    bad_start = DAY1 + timedelta(days=5)
    aad = canonical_aad("lab-server", identity.device_id, b"\x00" * 32, "g-forged", DAY1)
    box = aead_seal(k_exp, pack_window_payload(state.chain_key, bad_start), aad)
    forged = Grant(
        client_eph_pub=eph.public,
        box=box,
        server_id="lab-server",
        device_id=identity.device_id,
        attest_digest=b"\x00" * 32,
        grant_id="g-forged",
        grant_date=DAY1,
    )
    with pytest.raises(InvalidWindow):
        accept_grant(server_keys, forged, "lab-server", identity.device_id)


# --- recovery ---------------------------------------------------------------


def _protected_corpus(identity, server_keys, client_state):
    session = ProtectSession(client_state, assumed_year=2024)
    lines = []
    for n in range(1, 8):
        lines.append(session.protect_line(logcat(D(n), f"mail user{n}@test.org seen"))[0])
    offer_pub = create_offer(server_keys, "g-rec", seed=b"\x51" * 32)
    grant, rotated = create_grant(
        session.state, GrantRequest(offer_pub, D(3), "lab-server", "g-rec"),
        identity, D(7), rng_seed=b"\x52" * 32,
    )
    window = accept_grant(server_keys, grant, "lab-server", identity.device_id)
    return lines, window, rotated


def test_recover_window_enforcement(identity, server_keys, client_state):
    lines, window, _ = _protected_corpus(identity, server_keys, client_state)
    events, skipped = recover_tokens(window, lines, 2024)
    assert sorted({e.date for e in events}) == [D(n) for n in range(3, 8)]
    assert len(events) == 5
    assert skipped["lines_out_of_window"] == 2  # days 1-2
    assert skipped["fields_auth_failed"] == 0


def test_recover_no_date_line(identity, server_keys, client_state):
    _, window, _ = _protected_corpus(identity, server_keys, client_state)
    session_lines = ['<PII type="EMAIL">' + "A" * 59 + "=</PII> no timestamp"]
    events, skipped = recover_tokens(window, session_lines, 2024)
    assert events == []
    assert skipped["lines_no_date"] == 1


def test_recover_tampered_field_counts_auth(identity, server_keys, client_state):
    lines, window, _ = _protected_corpus(identity, server_keys, client_state)
    import base64
    import re

    target = lines[3]  # day 4, inside the window
    m = re.search(r'<PII type="EMAIL">([A-Za-z0-9+/=]{60})</PII>', target)
    raw = bytearray(base64.b64decode(m.group(1)))
    raw[20] ^= 0xFF
    tampered = target.replace(m.group(1), base64.b64encode(bytes(raw)).decode())
    events, skipped = recover_tokens(window, [tampered], 2024)
    assert events == []
    assert skipped["fields_auth_failed"] == 1


def test_recover_post_rotation_lines_fail_auth(identity, server_keys, client_state):
    """Lines protected after rotation stay dark even with extended replay."""
    lines, window, rotated = _protected_corpus(identity, server_keys, client_state)
    session = ProtectSession(rotated, assumed_year=2024)
    post_lines = [
        session.protect_line(logcat(D(n), f"mail post{n}@test.org seen"))[0]
        for n in range(8, 11)
    ]
    # Adversarial server: extend the replay far past the granted window.
    extended = dict(window.days)
    ck_like = window.days[max(window.days)]
    day = max(window.days)
    ck = ck_like
    from privlog import ratchet_step

    for _ in range(400):
        day += timedelta(days=1)
        ck, mk = ratchet_step(ck)
        extended[day] = mk
    big_window = WindowKeys(grant_id=window.grant_id, days=extended)
    events, skipped = recover_tokens(big_window, post_lines, 2024)
    assert events == []
    assert skipped["fields_auth_failed"] == 3


def test_recover_empty_window_skips_everything(identity, server_keys, client_state):
    lines, _, _ = _protected_corpus(identity, server_keys, client_state)
    empty = WindowKeys(grant_id="g-none", days={})
    events, skipped = recover_tokens(empty, lines, 2024)
    assert events == []
    assert skipped["lines_out_of_window"] == len(lines)


def test_recover_malformed_element(identity, server_keys, client_state):
    _, window, _ = _protected_corpus(identity, server_keys, client_state)
    line = logcat(D(3), 'broken <PII type="EMAIL">!!</PII> marker')
    events, skipped = recover_tokens(window, [line], 2024)
    assert events == []
    assert skipped["fields_malformed"] == 1
    assert skipped["lines_no_pii"] == 1


def test_recovered_tokens_never_contain_plaintext(identity, server_keys, client_state):
    lines, window, _ = _protected_corpus(identity, server_keys, client_state)
    events, _ = recover_tokens(window, lines, 2024)
    for ev in events:
        assert b"test.org" not in ev.token
        assert "user" not in ev.template or "@" not in ev.template


# --- reports -----------------------------------------------------------------


def _event(line_no, day, token, pii=PiiType.EMAIL, template="t"):
    return RecoveredEvent(line_no=line_no, date=day, pii_type=pii, token=token, template=template)


def test_linkage_groups_and_sorting():
    tok_a, tok_b = b"\x01" * 16, b"\x02" * 16
    events = [
        _event(1, D(1), tok_a),
        _event(2, D(2), tok_a),
        _event(3, D(4), tok_a),
        _event(4, D(2), tok_b),
    ]
    report = linkage_report(events)
    assert report.total_events == 4
    assert [g.token for g in report.groups] == [tok_a, tok_b]
    g = report.groups[0]
    assert (g.count, g.first_date, g.last_date) == (3, D(1), D(4))
    assert g.per_day == {D(1): 1, D(2): 1, D(4): 1}
    assert sum(g.count for g in report.groups) == report.total_events


def test_linkage_tie_broken_by_token_bytes():
    tok_a, tok_b = b"\xff" * 16, b"\x00" * 16
    events = [_event(1, D(1), tok_a), _event(2, D(1), tok_b)]
    report = linkage_report(events)
    assert [g.token for g in report.groups] == [tok_b, tok_a]


def test_timeline_order_and_unknown_token():
    tok = b"\x03" * 16
    events = [
        _event(9, D(5), tok, template="later"),
        _event(2, D(2), tok, template="earlier"),
        _event(5, D(2), b"\x04" * 16, template="other"),
    ]
    rows = timeline(events, tok)
    assert rows == [(D(2), 2, "earlier"), (D(5), 9, "later")]
    assert timeline(events, b"\x05" * 16) == []


# --- persistence --------------------------------------------------------------


def test_server_keystore_roundtrip(server_keys):
    create_offer(server_keys, "g-keep", seed=b"\x51" * 32)
    text = save_server_keys(server_keys)
    loaded = load_server_keys(text)
    assert loaded.server_id == server_keys.server_id
    assert loaded.longterm == server_keys.longterm
    assert loaded.ephemeral.keys() == server_keys.ephemeral.keys()
    assert loaded.ephemeral["g-keep"] == server_keys.ephemeral["g-keep"]


def test_window_keys_roundtrip(identity, server_keys, client_state):
    _, window, _ = _protected_corpus(identity, server_keys, client_state)
    loaded = load_window_keys(save_window_keys(window))
    assert loaded.grant_id == window.grant_id
    assert sorted(loaded.days) == sorted(window.days)
    for day in window.days:
        assert loaded.days[day] == window.days[day]


def test_events_csv_roundtrip(identity, server_keys, client_state):
    lines, window, _ = _protected_corpus(identity, server_keys, client_state)
    events, _ = recover_tokens(window, lines, 2024)
    buf = io.StringIO()
    write_events_csv(events, buf)
    buf.seek(0)
    assert read_events_csv(buf) == events


def test_linkage_csv_shape():
    events = [_event(1, D(1), b"\x01" * 16), _event(2, D(2), b"\x01" * 16)]
    buf = io.StringIO()
    write_linkage_csv(linkage_report(events), buf)
    rows = buf.getvalue().strip().splitlines()
    assert rows[0] == "token_b64,pii_type,count,first_date,last_date"
    assert rows[1].endswith("EMAIL,2,2024-05-01,2024-05-02")
