"""
Building, signing and checking one GOOSE frame
==============================================

A trip status frame is encoded, given an AES-GMAC trailer, put on the
wire and verified again on the receiving side.  Flipping one bit anywhere
in the signed octets makes the tag check fail.
"""

from goosesec import (
    EthernetHeader, GooseApdu, GooseFrame, GoosePdu, KeyStore, MacAddress, VlanTag,
    decode_frame, encode_frame, sign_frame,
)
from goosesec.secure import frame_extension, mac_input, verify_bytes

keys = KeyStore()
keys.add_key(0x0A, bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c"))
keys.set_active(sender=1, key_id=0x0A)

apdu = GooseApdu(
    gocb_ref="IED1LD0/LLN0$GO$gcbTrip", time_allowed_to_live=2000,
    dat_set="IED1LD0/LLN0$TripStatus", go_id="IED1_GOOSE1",
    t=1_750_000_002_000, st_num=1, sq_num=0, all_data=(True,),
)
eth = EthernetHeader(MacAddress.parse("01:0c:cd:01:00:10"), MacAddress.parse("dc:37:52:0a:cf:c2"), VlanTag(4, 0))
frame = sign_frame(GooseFrame(eth, GoosePdu(0x1000, apdu)), keys, sender=1)

wire = encode_frame(frame)
print(f"{len(wire)} octets on the wire, last 32 are the security trailer")
print(wire.hex(" ", 8))

received = decode_frame(wire)
ext = frame_extension(received)
print("iv", ext.iv.hex(), "key id", hex(ext.key_id), "tag", ext.tag.hex())
print("untouched:", verify_bytes(mac_input(received.pdu), ext, keys).name)

# flip the low bit of the stNum value and check again
signed = bytearray(mac_input(received.pdu))
signed[signed.index(b"\x85\x01") + 2] ^= 1
print("one bit flipped:", verify_bytes(bytes(signed), ext, keys).name)
