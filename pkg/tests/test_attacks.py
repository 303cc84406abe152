import random

import pytest

from conftest import SENDER, fixture_frame
from goosesec.attacks import (
    Archive,
    AttackKind,
    AttackSpec,
    drop_attack,
    flood_attack,
    masquerade_attack,
    replay_attack,
)
from goosesec.bussim import Bus
from goosesec.codec import decode_frame, encode_frame
from goosesec.secure import AuthVerdict, frame_extension, mac_input, sign_frame, verify_bytes


def archive_of(frames):
    a = Archive()
    for i, f in enumerate(frames):
        a.record(i * 1000.0, encode_frame(f))
    return a


def test_select():
    frames = [fixture_frame(st_num=1, sq_num=0), fixture_frame(st_num=2, sq_num=0), fixture_frame(st_num=2, sq_num=1)]
    a = archive_of(frames)
    assert decode_frame(a.select("event")[1]) == frames[1]
    assert decode_frame(a.select("last")[1]) == frames[2]
    assert decode_frame(a.select(0)[1]) == frames[0]
    with pytest.raises(IndexError):
        Archive().select("last")
    with pytest.raises(ValueError):
        a.select("nope")


def test_replay_is_bit_exact(keystore):
    f = sign_frame(fixture_frame(), keystore, SENDER)
    a = archive_of([f])
    ((t, data),) = replay_attack(a, AttackSpec(AttackKind.REPLAY, 5500, select="last"))
    assert t == 5500 and data == encode_frame(f)


def test_masquerade_fields_and_tag_fails(keystore):
    f = sign_frame(fixture_frame(st_num=4, sq_num=7, all_data=(False, False)), keystore, SENDER)
    t, data = masquerade_attack(archive_of([f]), AttackSpec(AttackKind.MASQUERADE, 5500, value=True))
    got = decode_frame(data)
    a = got.pdu.apdu
    assert (a.st_num, a.sq_num, a.all_data) == (5, 0, (True, True))
    assert got.extension == f.extension
    assert verify_bytes(mac_input(got.pdu), frame_extension(got), keystore) is AuthVerdict.FORGED


@pytest.mark.parametrize("payload", ["unauthentic", "verbatim", "increment"])
def test_flood(keystore, payload):
    f = sign_frame(fixture_frame(sq_num=3), keystore, SENDER)
    spec = AttackSpec(AttackKind.FLOOD, 100, rate_hz=1000, duration_ms=50, payload=payload)
    out = flood_attack(archive_of([f]), spec, random.Random(1))
    assert len(out) == 50
    assert [t for t, _ in out[:3]] == [100, 101, 102]
    frames = [decode_frame(d) for _, d in out]
    verdicts = {verify_bytes(mac_input(x.pdu), frame_extension(x), keystore) for x in frames}
    if payload == "verbatim":
        assert verdicts == {AuthVerdict.AUTHENTIC}
    else:
        assert verdicts == {AuthVerdict.FORGED}
    if payload == "increment":
        assert [x.pdu.apdu.sq_num for x in frames[:3]] == [4, 5, 6]


def test_flood_is_seeded(keystore):
    f = sign_frame(fixture_frame(), keystore, SENDER)
    spec = AttackSpec(AttackKind.FLOOD, 0, rate_hz=100, duration_ms=100)
    a = flood_attack(archive_of([f]), spec, random.Random(3))
    b = flood_attack(archive_of([f]), spec, random.Random(3))
    assert a == b


def test_drop_rule():
    bus = Bus()
    rule = drop_attack(bus, AttackSpec(AttackKind.DROP, 10, count=3))
    assert rule in bus.rules and rule.max_count == 3 and rule.end == float("inf")
    rule = drop_attack(bus, AttackSpec(AttackKind.DROP, 10, duration_ms=5))
    assert rule.end == 15


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind=AttackKind.FLOOD, trigger_at=0, duration_ms=None),
        dict(kind=AttackKind.FLOOD, trigger_at=0, duration_ms=10, rate_hz=0),
        dict(kind=AttackKind.FLOOD, trigger_at=0, duration_ms=10, payload="x"),
        dict(kind=AttackKind.DROP, trigger_at=0),
        dict(kind=AttackKind.DROP, trigger_at=0, count=-1),
    ],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        AttackSpec(**kw)
