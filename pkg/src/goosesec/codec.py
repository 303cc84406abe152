"""GOOSE Ethernet frame codec.

Frames are Ethernet II (optionally 802.1Q tagged) carrying the GOOSE PDU:
APPID, Length, Reserved1, Reserved2 and a BER-encoded ``goosePdu``.  Only
the subset of BER needed for the modelled fields is supported: definite
lengths (short form, ``0x81`` and ``0x82`` long forms), one fixed
context-specific tag per field, fields in standard order, boolean data set
members.

Decoding is strict: a buffer is accepted only if it is the canonical
encoding of the frame it decodes to (apart from zero Ethernet padding), so
``encode_frame(decode_frame(b))`` reproduces the wire bytes a MAC was
computed over.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Union

ETHERTYPE_GOOSE = 0x88B8
TPID_8021Q = 0x8100
SECURITY_BIT = 0x8000
MAX_STRING = 129
UINT32_MAX = 0xFFFFFFFF
UINT16_MAX = 0xFFFF

PCAP_MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1

# goosePdu ::= [APPLICATION 1] IMPLICIT SEQUENCE
TAG_GOOSE_PDU = 0x61
TAG_GOCB_REF = 0x80
TAG_TTL = 0x81
TAG_DAT_SET = 0x82
TAG_GO_ID = 0x83
TAG_T = 0x84
TAG_ST_NUM = 0x85
TAG_SQ_NUM = 0x86
TAG_TEST = 0x87
TAG_CONF_REV = 0x88
TAG_NDS_COM = 0x89
TAG_NUM_ENTRIES = 0x8A
TAG_ALL_DATA = 0xAB
TAG_DATA_BOOLEAN = 0x83

# 10 bits of sub-second accuracy, clock synchronised.
TIME_QUALITY = 0x0A


class CodecError(Exception):
    """Base class for every codec failure."""


class EncodeError(CodecError):
    pass


class DecodeError(CodecError):
    pass


class Truncated(DecodeError):
    """Buffer ends before the structure it declares."""


class NotGoose(DecodeError):
    """Well-formed Ethernet, but not a GOOSE frame."""


class Malformed(DecodeError):
    """GOOSE framing present but the content violates the encoding rules."""


@dataclass(frozen=True)
class MacAddress:
    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, (bytes, bytearray)) or len(self.octets) != 6:
            raise ValueError("a MAC address is exactly six octets")
        object.__setattr__(self, "octets", bytes(self.octets))

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.replace("-", ":").split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


@dataclass(frozen=True)
class VlanTag:
    priority: int = 4
    vid: int = 0

    def __post_init__(self):
        if not 0 <= self.priority <= 7:
            raise ValueError("VLAN priority is 3 bits")
        if not 0 <= self.vid <= 4095:
            raise ValueError("VLAN id is 12 bits")


@dataclass(frozen=True)
class EthernetHeader:
    dst: MacAddress
    src: MacAddress
    vlan: VlanTag | None = None
    ethertype: int = ETHERTYPE_GOOSE


@dataclass(frozen=True)
class GooseApdu:
    gocb_ref: str
    time_allowed_to_live: int
    dat_set: str
    go_id: str
    t: int
    st_num: int
    sq_num: int
    test: bool = False
    conf_rev: int = 1
    nds_com: bool = False
    all_data: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "all_data", tuple(bool(v) for v in self.all_data))

    @property
    def num_dat_set_entries(self) -> int:
        return len(self.all_data)


@dataclass(frozen=True)
class GoosePdu:
    appid: int
    apdu: GooseApdu
    reserved1: int = 0
    reserved2: int = 0

    @property
    def secured(self) -> bool:
        return bool(self.reserved1 & SECURITY_BIT)

    @property
    def length(self) -> int:
        """Value of the Length field: header octets plus the encoded APDU."""
        return 8 + len(encode_apdu(self.apdu))

    def with_security_bit(self, on: bool = True) -> "GoosePdu":
        r1 = self.reserved1 | SECURITY_BIT if on else self.reserved1 & ~SECURITY_BIT
        return GoosePdu(self.appid, self.apdu, r1, self.reserved2)


@dataclass(frozen=True)
class GooseFrame:
    eth: EthernetHeader
    pdu: GoosePdu
    extension: bytes | None = field(default=None)


# -- BER primitives ---------------------------------------------------------


def _length_octets(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    if n <= 0xFF:
        return bytes([0x81, n])
    if n <= 0xFFFF:
        return bytes([0x82]) + n.to_bytes(2, "big")
    raise EncodeError(f"value of {n} octets is too long")


def _tlv(tag: int, value: bytes) -> bytes:
    return bytes([tag]) + _length_octets(len(value)) + value


def _uint(n: int, limit: int, name: str) -> bytes:
    if not isinstance(n, int) or isinstance(n, bool) or not 0 <= n <= limit:
        raise EncodeError(f"{name}={n!r} out of range 0..{limit}")
    # non-negative BER INTEGER: leading zero octet when the top bit is set
    return n.to_bytes(max(1, (n.bit_length() + 8) // 8), "big")


def _visible(s: str, name: str) -> bytes:
    try:
        raw = s.encode("ascii")
    except (UnicodeEncodeError, AttributeError):
        raise EncodeError(f"{name} must be a visible ASCII string") from None
    if len(raw) > MAX_STRING:
        raise EncodeError(f"{name} is {len(raw)} octets, limit {MAX_STRING}")
    if any(b < 0x20 or b > 0x7E for b in raw):
        raise EncodeError(f"{name} contains non-visible characters")
    return raw


def _utc_time(ms: int) -> bytes:
    if not isinstance(ms, int) or ms < 0 or ms // 1000 > UINT32_MAX:
        raise EncodeError(f"t={ms!r} not representable as UtcTime")
    seconds, rem = divmod(ms, 1000)
    fraction = (rem * (1 << 24) + 500) // 1000
    return seconds.to_bytes(4, "big") + fraction.to_bytes(3, "big") + bytes([TIME_QUALITY])


def _bool(v: bool) -> bytes:
    return b"\x01" if v else b"\x00"


def encode_apdu(apdu: GooseApdu) -> bytes:
    if apdu.time_allowed_to_live <= 0:
        raise EncodeError("timeAllowedToLive must be positive")
    body = b"".join(
        (
            _tlv(TAG_GOCB_REF, _visible(apdu.gocb_ref, "gocbRef")),
            _tlv(TAG_TTL, _uint(apdu.time_allowed_to_live, UINT32_MAX, "timeAllowedToLive")),
            _tlv(TAG_DAT_SET, _visible(apdu.dat_set, "datSet")),
            _tlv(TAG_GO_ID, _visible(apdu.go_id, "goID")),
            _tlv(TAG_T, _utc_time(apdu.t)),
            _tlv(TAG_ST_NUM, _uint(apdu.st_num, UINT32_MAX, "stNum")),
            _tlv(TAG_SQ_NUM, _uint(apdu.sq_num, UINT32_MAX, "sqNum")),
            _tlv(TAG_TEST, _bool(apdu.test)),
            _tlv(TAG_CONF_REV, _uint(apdu.conf_rev, UINT32_MAX, "confRev")),
            _tlv(TAG_NDS_COM, _bool(apdu.nds_com)),
            _tlv(TAG_NUM_ENTRIES, _uint(apdu.num_dat_set_entries, UINT32_MAX, "numDatSetEntries")),
            _tlv(TAG_ALL_DATA, b"".join(_tlv(TAG_DATA_BOOLEAN, _bool(v)) for v in apdu.all_data)),
        )
    )
    return _tlv(TAG_GOOSE_PDU, body)


def encode_pdu(pdu: GoosePdu) -> bytes:
    """APPID .. APDU, the octets covered by the Length field."""
    apdu = encode_apdu(pdu.apdu)
    length = 8 + len(apdu)
    if length > UINT16_MAX:
        raise EncodeError("PDU longer than the 16-bit Length field")
    for name, v in (("appid", pdu.appid), ("reserved1", pdu.reserved1), ("reserved2", pdu.reserved2)):
        if not 0 <= v <= UINT16_MAX:
            raise EncodeError(f"{name}={v} is not a 16-bit value")
    return struct.pack("!HHHH", pdu.appid, length, pdu.reserved1, pdu.reserved2) + apdu


def encode_eth_header(eth: EthernetHeader) -> bytes:
    if not eth.dst.is_multicast:
        raise EncodeError(f"GOOSE destination {eth.dst} is not multicast")
    out = eth.dst.octets + eth.src.octets
    if eth.vlan is not None:
        out += struct.pack("!HH", TPID_8021Q, (eth.vlan.priority << 13) | eth.vlan.vid)
    return out + struct.pack("!H", eth.ethertype)


def encode_frame(frame: GooseFrame) -> bytes:
    if frame.eth.ethertype != ETHERTYPE_GOOSE:
        raise EncodeError(f"ethertype 0x{frame.eth.ethertype:04x} is not GOOSE")
    has_ext = bool(frame.extension)
    if frame.extension is not None and not frame.extension:
        raise EncodeError("empty security extension")
    if has_ext != frame.pdu.secured:
        raise EncodeError("reserved1 security bit disagrees with extension presence")
    out = encode_eth_header(frame.eth) + encode_pdu(frame.pdu)
    return out + frame.extension if has_ext else out


# -- decoding ---------------------------------------------------------------


def _read_tlv(buf: bytes, pos: int, end: int) -> tuple[int, int, int]:
    """Return ``(tag, value_start, value_end)`` of the TLV at ``pos``."""
    if pos + 2 > end:
        raise Malformed(f"TLV header overruns its container at offset {pos}")
    tag = buf[pos]
    first = buf[pos + 1]
    pos += 2
    if first < 0x80:
        n = first
    elif first in (0x81, 0x82):
        width = first - 0x80
        if pos + width > end:
            raise Malformed("long-form length overruns its container")
        n = int.from_bytes(buf[pos : pos + width], "big")
        pos += width
    else:
        raise Malformed(f"unsupported length octet 0x{first:02x}")
    if pos + n > end:
        raise Malformed(f"value of tag 0x{tag:02x} overruns its container")
    return tag, pos, pos + n


def _expect(buf, pos, end, tag):
    got, vs, ve = _read_tlv(buf, pos, end)
    if got != tag:
        raise Malformed(f"expected tag 0x{tag:02x}, found 0x{got:02x}")
    return buf[vs:ve], ve


def _dec_uint(v: bytes, name: str) -> int:
    if not v or len(v) > 5 or v[0] & 0x80:
        raise Malformed(f"{name} is not a valid unsigned integer")
    n = int.from_bytes(v, "big")
    if n > UINT32_MAX:
        raise Malformed(f"{name} exceeds 32 bits")
    return n


def _dec_bool(v: bytes, name: str) -> bool:
    if v not in (b"\x00", b"\x01"):
        raise Malformed(f"{name} is not a one-octet boolean")
    return v == b"\x01"


def _dec_str(v: bytes, name: str) -> str:
    if len(v) > MAX_STRING or any(b < 0x20 or b > 0x7E for b in v):
        raise Malformed(f"{name} is not a visible string")
    return v.decode("ascii")


def decode_apdu(buf: bytes) -> GooseApdu:
    tag, vs, ve = _read_tlv(buf, 0, len(buf))
    if tag != TAG_GOOSE_PDU:
        raise Malformed(f"APDU tag 0x{tag:02x} is not goosePdu")
    if ve != len(buf):
        raise Malformed("goosePdu length disagrees with the PDU Length field")
    pos = vs
    gocb_ref, pos = _expect(buf, pos, ve, TAG_GOCB_REF)
    ttl, pos = _expect(buf, pos, ve, TAG_TTL)
    dat_set, pos = _expect(buf, pos, ve, TAG_DAT_SET)
    go_id, pos = _expect(buf, pos, ve, TAG_GO_ID)
    t, pos = _expect(buf, pos, ve, TAG_T)
    st, pos = _expect(buf, pos, ve, TAG_ST_NUM)
    sq, pos = _expect(buf, pos, ve, TAG_SQ_NUM)
    test, pos = _expect(buf, pos, ve, TAG_TEST)
    conf_rev, pos = _expect(buf, pos, ve, TAG_CONF_REV)
    nds_com, pos = _expect(buf, pos, ve, TAG_NDS_COM)
    num_entries, pos = _expect(buf, pos, ve, TAG_NUM_ENTRIES)
    all_data, pos = _expect(buf, pos, ve, TAG_ALL_DATA)
    if pos != ve:
        raise Malformed("unexpected trailing fields in goosePdu")

    if len(t) != 8:
        raise Malformed("UtcTime must be 8 octets")
    seconds = int.from_bytes(t[:4], "big")
    fraction = int.from_bytes(t[4:7], "big")
    ms = seconds * 1000 + (fraction * 1000 + (1 << 23)) // (1 << 24)

    values = []
    dpos = 0
    while dpos < len(all_data):
        v, dpos = _expect(all_data, dpos, len(all_data), TAG_DATA_BOOLEAN)
        values.append(_dec_bool(v, "allData member"))
    if _dec_uint(num_entries, "numDatSetEntries") != len(values):
        raise Malformed("numDatSetEntries disagrees with allData")

    apdu = GooseApdu(
        gocb_ref=_dec_str(gocb_ref, "gocbRef"),
        time_allowed_to_live=_dec_uint(ttl, "timeAllowedToLive"),
        dat_set=_dec_str(dat_set, "datSet"),
        go_id=_dec_str(go_id, "goID"),
        t=ms,
        st_num=_dec_uint(st, "stNum"),
        sq_num=_dec_uint(sq, "sqNum"),
        test=_dec_bool(test, "test"),
        conf_rev=_dec_uint(conf_rev, "confRev"),
        nds_com=_dec_bool(nds_com, "ndsCom"),
        all_data=tuple(values),
    )
    if apdu.time_allowed_to_live == 0:
        raise Malformed("timeAllowedToLive is zero")
    try:
        canonical = encode_apdu(apdu)
    except EncodeError as exc:
        raise Malformed(str(exc)) from None
    if canonical != buf:
        raise Malformed("non-canonical APDU encoding")
    return apdu


def decode_frame(buf: bytes) -> GooseFrame:
    buf = bytes(buf)
    if len(buf) < 14:
        raise Truncated("shorter than an Ethernet header")
    dst = MacAddress(buf[0:6])
    src = MacAddress(buf[6:12])
    (ethertype,) = struct.unpack_from("!H", buf, 12)
    pos = 14
    vlan = None
    if ethertype == TPID_8021Q:
        if len(buf) < 18:
            raise Truncated("802.1Q tag cut short")
        tci, ethertype = struct.unpack_from("!HH", buf, 14)
        if tci & 0x1000:
            raise Malformed("drop-eligible indicator set")
        vlan = VlanTag(priority=tci >> 13, vid=tci & 0x0FFF)
        pos = 18
    if ethertype != ETHERTYPE_GOOSE:
        raise NotGoose(f"ethertype 0x{ethertype:04x}")
    if not dst.is_multicast:
        raise NotGoose(f"destination {dst} is not multicast")
    if len(buf) < pos + 8:
        raise Truncated("GOOSE header cut short")
    appid, length, reserved1, reserved2 = struct.unpack_from("!HHHH", buf, pos)
    if length < 8:
        raise Malformed(f"Length field {length} smaller than the header")
    end = pos + length
    if len(buf) < end:
        raise Truncated(f"Length field declares {length} octets, {len(buf) - pos} present")
    apdu = decode_apdu(buf[pos + 8 : end])
    pdu = GoosePdu(appid, apdu, reserved1, reserved2)
    trailer = buf[end:]
    if pdu.secured:
        if not trailer:
            raise Malformed("security bit set but no extension present")
        extension = trailer
    else:
        if any(trailer):
            raise Malformed("trailing octets without the security bit")
        extension = None
    return GooseFrame(EthernetHeader(dst, src, vlan, ethertype), pdu, extension)


# -- capture files ----------------------------------------------------------


def frame_to_pcap(entries: Iterable[tuple[float, Union[GooseFrame, bytes]]]) -> bytes:
    """Serialise ``(timestamp_ms, frame)`` pairs as a classic pcap file.

    Frames may be given decoded or as raw wire bytes.  Timestamps are in
    milliseconds and must not decrease.
    """
    out = [struct.pack("<IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET)]
    last = None
    for ts, frame in entries:
        if last is not None and ts < last:
            raise ValueError("pcap timestamps must be nondecreasing")
        last = ts
        data = frame if isinstance(frame, (bytes, bytearray)) else encode_frame(frame)
        usec_total = round(ts * 1000)
        sec, usec = divmod(usec_total, 1_000_000)
        out.append(struct.pack("<IIII", sec, usec, len(data), len(data)))
        out.append(bytes(data))
    return b"".join(out)
