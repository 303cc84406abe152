import io
import struct

import dpkt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pyasn1.codec.ber import decoder as ber_decoder
from pyasn1.type import char, namedtype, tag, univ
from scapy.layers.l2 import Dot1Q, Ether
from scapy.utils import rdpcap

from conftest import DST, SRC, fixture_apdu, fixture_frame, frames
from goosesec.codec import (
    EncodeError,
    EthernetHeader,
    GooseFrame,
    GoosePdu,
    MacAddress,
    Malformed,
    NotGoose,
    Truncated,
    VlanTag,
    decode_apdu,
    decode_frame,
    encode_apdu,
    encode_frame,
    encode_pdu,
    frame_to_pcap,
)


# goosePdu schema written for pyasn1, used as a second decoder of our APDUs


def _ctx(n, base, constructed=False):
    fmt = tag.tagFormatConstructed if constructed else tag.tagFormatSimple
    return base.subtype(implicitTag=tag.Tag(tag.tagClassContext, fmt, n))


class Data(univ.Choice):
    componentType = namedtype.NamedTypes(namedtype.NamedType("boolean", _ctx(3, univ.Boolean())))


class AllData(univ.SequenceOf):
    componentType = Data()


class IecGoosePdu(univ.Sequence):
    tagSet = univ.Sequence.tagSet.tagImplicitly(tag.Tag(tag.tagClassApplication, tag.tagFormatConstructed, 1))
    componentType = namedtype.NamedTypes(
        namedtype.NamedType("gocbRef", _ctx(0, char.VisibleString())),
        namedtype.NamedType("timeAllowedtoLive", _ctx(1, univ.Integer())),
        namedtype.NamedType("datSet", _ctx(2, char.VisibleString())),
        namedtype.NamedType("goID", _ctx(3, char.VisibleString())),
        namedtype.NamedType("t", _ctx(4, univ.OctetString())),
        namedtype.NamedType("stNum", _ctx(5, univ.Integer())),
        namedtype.NamedType("sqNum", _ctx(6, univ.Integer())),
        namedtype.NamedType("simulation", _ctx(7, univ.Boolean())),
        namedtype.NamedType("confRev", _ctx(8, univ.Integer())),
        namedtype.NamedType("ndsCom", _ctx(9, univ.Boolean())),
        namedtype.NamedType("numDatSetEntries", _ctx(10, univ.Integer())),
        namedtype.NamedType(
            "allData",
            AllData().subtype(implicitTag=tag.Tag(tag.tagClassContext, tag.tagFormatConstructed, 11)),
        ),
    )


def asn1_fields(apdu_bytes: bytes) -> dict:
    pdu, rest = ber_decoder.decode(apdu_bytes, asn1Spec=IecGoosePdu())
    assert rest == b""
    t = bytes(pdu["t"])
    return {
        "gocb_ref": str(pdu["gocbRef"]),
        "time_allowed_to_live": int(pdu["timeAllowedtoLive"]),
        "dat_set": str(pdu["datSet"]),
        "go_id": str(pdu["goID"]),
        "seconds": int.from_bytes(t[:4], "big"),
        "quality": t[7],
        "st_num": int(pdu["stNum"]),
        "sq_num": int(pdu["sqNum"]),
        "test": bool(pdu["simulation"]),
        "conf_rev": int(pdu["confRev"]),
        "nds_com": bool(pdu["ndsCom"]),
        "entries": int(pdu["numDatSetEntries"]),
        "all_data": tuple(bool(d["boolean"]) for d in pdu["allData"]),
    }


# -- round trip ----------------------------------------------------------------


@settings(max_examples=10_000)
@given(frames())
def test_roundtrip_randomized(frame):
    assert decode_frame(encode_frame(frame)) == frame


@settings(max_examples=300)
@given(frames(secured=False), st.integers(1, 40))
def test_zero_padding_is_ignored(frame, pad):
    assert decode_frame(encode_frame(frame) + bytes(pad)) == frame


def test_fixture_bytes():
    wire = encode_frame(fixture_frame())
    assert wire[:6] == bytes.fromhex("010ccd010010")
    assert wire[6:12] == bytes.fromhex("dc37520acfc2")
    assert wire[12:18] == bytes.fromhex("8100800088b8")
    appid, length, r1, r2 = struct.unpack("!HHHH", wire[18:26])
    assert (appid, r1, r2) == (0x1000, 0, 0)
    assert length == len(wire) - 18
    assert wire[26] == 0x61
    # first field: gocbRef, tag 0x80
    assert wire[28] == 0x80


def test_integer_high_bit_gets_leading_zero():
    apdu = fixture_apdu(st_num=0x80)
    raw = encode_apdu(apdu)
    assert b"\x85\x02\x00\x80" in raw
    assert decode_apdu(raw) == apdu


def test_time_quality_and_resolution():
    apdu = fixture_apdu(t=1_750_000_002_123)
    raw = encode_apdu(apdu)
    i = raw.index(b"\x84\x08")
    assert raw[i + 9] == 0x0A
    assert int.from_bytes(raw[i + 2 : i + 6], "big") == 1_750_000_002
    assert decode_apdu(raw).t == apdu.t


def test_length_excludes_extension():
    frame = fixture_frame()
    pdu = frame.pdu.with_security_bit()
    secured = GooseFrame(frame.eth, pdu, bytes(32))
    wire = encode_frame(secured)
    (length,) = struct.unpack_from("!H", wire, 20)
    assert length == len(encode_pdu(pdu))
    assert len(wire) == 18 + length + 32
    assert decode_frame(wire) == secured


# -- encode errors ---------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"st_num": -1},
        {"sq_num": 2**32},
        {"time_allowed_to_live": 0},
        {"go_id": "x" * 130},
        {"dat_set": "tab\there"},
        {"gocb_ref": "é"},
        {"t": -1},
    ],
)
def test_encode_rejects_bad_fields(kw):
    with pytest.raises(EncodeError):
        encode_frame(fixture_frame(**kw))


def test_encode_rejects_unicast_destination():
    frame = fixture_frame()
    bad = GooseFrame(EthernetHeader(SRC, SRC, None), frame.pdu)
    with pytest.raises(EncodeError):
        encode_frame(bad)


def test_encode_security_bit_must_match_extension():
    frame = fixture_frame()
    with pytest.raises(EncodeError):
        encode_frame(GooseFrame(frame.eth, frame.pdu, bytes(32)))
    with pytest.raises(EncodeError):
        encode_frame(GooseFrame(frame.eth, frame.pdu.with_security_bit(), None))
    with pytest.raises(EncodeError):
        encode_frame(GooseFrame(frame.eth, frame.pdu.with_security_bit(), b""))


# -- decode errors ---------------------------------------------------------------


def test_decode_errors():
    wire = encode_frame(fixture_frame())
    with pytest.raises(Truncated):
        decode_frame(wire[:10])
    with pytest.raises(Truncated):
        decode_frame(wire[:-1])
    with pytest.raises(NotGoose):
        decode_frame(wire[:16] + b"\x08\x00" + wire[18:])
    unicast = SRC.octets + wire[6:]
    with pytest.raises(NotGoose):
        decode_frame(unicast)
    dei = bytearray(wire)
    dei[14] |= 0x10
    with pytest.raises(Malformed):
        decode_frame(bytes(dei))
    with pytest.raises(Malformed):
        decode_frame(wire + b"\x01")


def test_decode_rejects_non_canonical_length():
    apdu = encode_apdu(fixture_apdu())
    # re-encode the goosePdu length in long form
    body = apdu[2:] if apdu[1] < 0x80 else apdu[3:]
    long_form = bytes([0x61, 0x82]) + len(body).to_bytes(2, "big") + body
    with pytest.raises(Malformed):
        decode_apdu(long_form)


def test_decode_rejects_count_mismatch():
    raw = bytearray(encode_apdu(fixture_apdu(all_data=(True, False))))
    i = raw.index(b"\x8a\x01\x02")
    raw[i + 2] = 3
    with pytest.raises(Malformed):
        decode_apdu(bytes(raw))


@settings(max_examples=3000)
@given(st.binary(max_size=200))
def test_decode_is_total_on_garbage(data):
    try:
        decode_frame(data)
    except (Truncated, NotGoose, Malformed):
        pass


@settings(max_examples=2000)
@given(frames(), st.data())
def test_decode_is_total_on_mutations(frame, data):
    wire = bytearray(encode_frame(frame))
    for _ in range(data.draw(st.integers(1, 4))):
        i = data.draw(st.integers(0, len(wire) - 1))
        wire[i] = data.draw(st.integers(0, 255))
    cut = data.draw(st.integers(0, len(wire)))
    try:
        got = decode_frame(bytes(wire[:cut]))
    except (Truncated, NotGoose, Malformed):
        return
    # anything accepted must re-encode to the bytes that were read
    assert encode_frame(got) == bytes(wire[: len(encode_frame(got))])


def test_mac_address_parse():
    assert str(MacAddress.parse("01:0C:CD:01:00:10")) == "01:0c:cd:01:00:10"
    assert MacAddress.parse("01-0c-cd-01-00-10") == DST
    with pytest.raises(ValueError):
        MacAddress.parse("01:0c:cd")
    assert DST.is_multicast and not SRC.is_multicast


# -- third-party dissectors -------------------------------------------------------


@settings(max_examples=200)
@given(frames())
def test_apdu_matches_asn1_schema_decoder(frame):
    a = frame.pdu.apdu
    got = asn1_fields(encode_apdu(a))
    assert got == {
        "gocb_ref": a.gocb_ref,
        "time_allowed_to_live": a.time_allowed_to_live,
        "dat_set": a.dat_set,
        "go_id": a.go_id,
        "seconds": a.t // 1000,
        "quality": 0x0A,
        "st_num": a.st_num,
        "sq_num": a.sq_num,
        "test": a.test,
        "conf_rev": a.conf_rev,
        "nds_com": a.nds_com,
        "entries": len(a.all_data),
        "all_data": a.all_data,
    }


def _sample_capture():
    plain = fixture_frame()
    untagged = GooseFrame(EthernetHeader(DST, SRC, None), GoosePdu(0x3fff, fixture_apdu(st_num=7, sq_num=300)))
    secured = GooseFrame(
        EthernetHeader(DST, SRC, VlanTag(5, 12)), plain.pdu.with_security_bit(), bytes(range(32))
    )
    return [(0.0, plain), (1.5, untagged), (1000.25, secured)]


def test_pcap_opens_in_dpkt():
    entries = _sample_capture()
    records = list(dpkt.pcap.Reader(io.BytesIO(frame_to_pcap(entries))))
    assert len(records) == len(entries)
    for (ts, frame), (got_ts, buf) in zip(entries, records):
        assert got_ts == pytest.approx(ts / 1000, abs=1e-6)
        eth = dpkt.ethernet.Ethernet(buf)
        assert eth.dst == frame.eth.dst.octets and eth.src == frame.eth.src.octets
        if frame.eth.vlan is None:
            assert eth.type == 0x88B8
            assert not getattr(eth, "vlan_tags", [])
        else:
            assert eth.type == 0x8100
            (vt,) = eth.vlan_tags
            assert (vt.pri, vt.id, vt.type) == (frame.eth.vlan.priority, frame.eth.vlan.vid, 0x88B8)
        payload = bytes(eth.data)
        appid, length, r1, _ = struct.unpack_from("!HHHH", payload)
        assert appid == frame.pdu.appid
        assert bool(r1 & 0x8000) == frame.pdu.secured
        assert asn1_fields(payload[8:length])["st_num"] == frame.pdu.apdu.st_num
        assert payload[length:] == (frame.extension or b"")


def test_pcap_opens_in_scapy(tmp_path):
    entries = _sample_capture()
    path = tmp_path / "cap.pcap"
    path.write_bytes(frame_to_pcap(entries))
    packets = rdpcap(str(path))
    assert len(packets) == len(entries)
    for (ts, frame), pkt in zip(entries, packets):
        assert float(pkt.time) == pytest.approx(ts / 1000, abs=1e-6)
        assert pkt[Ether].dst == str(frame.eth.dst)
        assert pkt[Ether].src == str(frame.eth.src)
        if frame.eth.vlan is not None:
            assert pkt[Dot1Q].prio == frame.eth.vlan.priority
            assert pkt[Dot1Q].vlan == frame.eth.vlan.vid
            assert pkt[Dot1Q].type == 0x88B8
            payload = bytes(pkt[Dot1Q].payload)
        else:
            assert pkt[Ether].type == 0x88B8
            payload = bytes(pkt[Ether].payload)
        assert asn1_fields(payload[8 : struct.unpack_from("!H", payload, 2)[0]])["go_id"] == frame.pdu.apdu.go_id


def test_pcap_rejects_decreasing_timestamps():
    with pytest.raises(ValueError):
        frame_to_pcap([(2.0, fixture_frame()), (1.0, fixture_frame())])


def test_pcap_header():
    raw = frame_to_pcap([])
    magic, major, minor, _, _, snap, link = struct.unpack("<IHHiIII", raw)
    assert (magic, major, minor, link) == (0xA1B2C3D4, 2, 4, 1)
