"""Authentication extension for GOOSE frames (AES-GMAC-128).

The sender appends ``IV || key ID || tag`` after the PDU and sets the
security bit in Reserved1.  The tag is AES-GCM over an empty plaintext with
the PDU octets (APPID through the end of the APDU, security bit set) as
additional authenticated data.
"""

from __future__ import annotations

import enum
import hmac
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .codec import GooseFrame, GoosePdu, encode_pdu

IV_LEN = 12
KEY_ID_LEN = 4
TAG_LEN = 16
KEY_LEN = 16
EXTENSION_LEN = IV_LEN + KEY_ID_LEN + TAG_LEN
COUNTER_MAX = (1 << 64) - 1


class AuthVerdict(enum.Enum):
    AUTHENTIC = "authentic"
    FORGED = "forged"
    UNKNOWN_KEY = "unknown_key"


class UnknownKeyError(KeyError):
    pass


@dataclass(frozen=True)
class SecurityExtension:
    iv: bytes
    key_id: int
    tag: bytes

    def __post_init__(self):
        if len(self.iv) != IV_LEN:
            raise ValueError(f"IV must be {IV_LEN} octets")
        if len(self.tag) != TAG_LEN:
            raise ValueError(f"tag must be {TAG_LEN} octets")
        if not 0 <= self.key_id <= 0xFFFFFFFF:
            raise ValueError("key ID is a 32-bit value")

    def to_bytes(self) -> bytes:
        return self.iv + self.key_id.to_bytes(KEY_ID_LEN, "big") + self.tag

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SecurityExtension":
        if len(raw) != EXTENSION_LEN:
            raise ValueError(f"extension is {len(raw)} octets, expected {EXTENSION_LEN}")
        return cls(
            iv=bytes(raw[:IV_LEN]),
            key_id=int.from_bytes(raw[IV_LEN : IV_LEN + KEY_ID_LEN], "big"),
            tag=bytes(raw[IV_LEN + KEY_ID_LEN :]),
        )


@dataclass
class KeyStore:
    """Pre-shared keys by key ID, plus the key and IV counter of each sender.

    Senders are 32-bit identifiers; they form the fixed half of every IV
    they produce.
    """

    keys: dict[int, bytes] = field(default_factory=dict)
    active: dict[int, int] = field(default_factory=dict)
    _counters: dict[int, int] = field(default_factory=dict, repr=False)
    _aead: dict[int, AESGCM] = field(default_factory=dict, repr=False)

    def add_key(self, key_id: int, key: bytes) -> None:
        if len(key) != KEY_LEN:
            raise ValueError("AES-GMAC-128 keys are 16 octets")
        if not 0 <= key_id <= 0xFFFFFFFF:
            raise ValueError("key ID is a 32-bit value")
        self.keys[key_id] = bytes(key)
        self._aead.pop(key_id, None)

    def set_active(self, sender: int, key_id: int) -> None:
        if key_id not in self.keys:
            raise UnknownKeyError(key_id)
        self.active[sender] = key_id

    def aead(self, key_id: int) -> AESGCM:
        try:
            return self._aead[key_id]
        except KeyError:
            pass
        if key_id not in self.keys:
            raise UnknownKeyError(key_id)
        aead = self._aead[key_id] = AESGCM(self.keys[key_id])
        return aead

    def next_iv(self, sender: int) -> bytes:
        n = self._counters.get(sender, 0)
        if n > COUNTER_MAX:
            raise OverflowError(f"IV counter of sender {sender:08x} exhausted")
        self._counters[sender] = n + 1
        return sender.to_bytes(4, "big") + n.to_bytes(8, "big")

    @classmethod
    def loads(cls, text: str) -> "KeyStore":
        """Parse ``<key id: 8 hex digits> = <key: 32 hex digits>`` lines.

        Blank lines and ``#`` comments are ignored.
        """
        store = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"([0-9a-fA-F]{8})\s*[=:\s]\s*([0-9a-fA-F]{32})", line)
            if m is None:
                raise ValueError(f"line {lineno}: expected '<8 hex digits> = <32 hex digits>'")
            key_id = int(m.group(1), 16)
            if key_id in store.keys:
                raise ValueError(f"line {lineno}: duplicate key id {m.group(1)}")
            store.add_key(key_id, bytes.fromhex(m.group(2)))
        return store

    @classmethod
    def load(cls, path) -> "KeyStore":
        return cls.loads(Path(path).read_text())

    def dumps(self) -> str:
        return "".join(f"{k:08x} = {v.hex()}\n" for k, v in sorted(self.keys.items()))


def gmac(key: bytes, iv: bytes, data: bytes) -> bytes:
    """AES-GMAC-128 tag of ``data`` (GCM with empty plaintext)."""
    return AESGCM(key).encrypt(iv, b"", data)


def mac_input(pdu: GoosePdu) -> bytes:
    return encode_pdu(pdu.with_security_bit())


def sign(pdu: GoosePdu, keystore: KeyStore, sender: int) -> SecurityExtension:
    try:
        key_id = keystore.active[sender]
    except KeyError:
        raise UnknownKeyError(f"sender {sender:08x} has no active key") from None
    aead = keystore.aead(key_id)
    iv = keystore.next_iv(sender)
    return SecurityExtension(iv, key_id, aead.encrypt(iv, b"", mac_input(pdu)))


def verify_bytes(pdu_bytes: bytes, ext: SecurityExtension, keystore: KeyStore) -> AuthVerdict:
    """Check ``ext`` against PDU octets exactly as received."""
    try:
        aead = keystore.aead(ext.key_id)
    except UnknownKeyError:
        return AuthVerdict.UNKNOWN_KEY
    expected = aead.encrypt(ext.iv, b"", pdu_bytes)
    if hmac.compare_digest(expected, ext.tag):
        return AuthVerdict.AUTHENTIC
    return AuthVerdict.FORGED


def verify(pdu: GoosePdu, ext: SecurityExtension, keystore: KeyStore) -> AuthVerdict:
    return verify_bytes(mac_input(pdu), ext, keystore)


def sign_frame(frame: GooseFrame, keystore: KeyStore, sender: int) -> GooseFrame:
    """Return ``frame`` with the security bit set and a fresh extension."""
    pdu = frame.pdu.with_security_bit()
    ext = sign(pdu, keystore, sender)
    return replace(frame, pdu=pdu, extension=ext.to_bytes())


def frame_extension(frame: GooseFrame) -> SecurityExtension | None:
    """Parse the trailer of a decoded frame; ``None`` if absent or not 32 octets."""
    if not frame.extension or len(frame.extension) != EXTENSION_LEN:
        return None
    return SecurityExtension.from_bytes(frame.extension)
