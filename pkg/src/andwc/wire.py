"""Packet and frame types for the ANDWC control plane, with a binary codec.

LAN packets (``IappPacket``) travel between APs over the wired distribution
system; management frames (``MgmtFrame``) travel over the air.

Byte layout, all integers big-endian::

    IAPP packet   | command u8 | body length u16 | src ip (4) | dst ip (4) | fields...
    mgmt frame    | subtype u8 | body length u16 | src mac (6) | dst mac (6) | channel u8 | fields...
    AP entry      | length u8 | ssid len u8 | ssid | bssid (6) | mac (6) | ip (4)
                  | channel u8 | beacon interval u16 | flags u8 | [rss i16]

RSS travels as a signed count of half-decibels. Decoding is strict: unknown
flag bits, trailing bytes and out-of-range values are rejected, so every
accepted byte string is the canonical encoding of exactly one value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from ipaddress import IPv4Address
from typing import ClassVar, Optional, Union

IAPP_MULTICAST = IPv4Address("224.0.1.178")

MAX_SSID_BYTES = 32
MAX_CHANNEL = 32
RESERVED_COMMANDS = range(0, 7)

CMD_APINFO_REQ = 7
CMD_APINFO_RES = 8
CMD_PERMISSION = 9
CMD_NEW_NEIGHBOUR_REQ = 10
CMD_NEW_NEIGHBOUR_RES = 11


class WireError(ValueError):
    """Raised when bytes cannot be decoded into a packet or frame."""


class ReservedCommandError(WireError):
    pass


class UnknownCommandError(WireError):
    pass


class TruncatedPayloadError(WireError):
    pass


class UnknownSubtypeError(WireError):
    pass


class MalformedBeaconError(WireError):
    pass


class MalformedPayloadError(WireError):
    pass


def quantize_rss(value: float) -> float:
    """Round an RSS reading to the 0.5 dB grid used on the wire."""
    return round(value * 2) / 2


def _check_rss(rss: float) -> None:
    if not -32768 <= rss * 2 <= 32767:
        raise ValueError(f"rss {rss} out of range")
    if rss * 2 != int(rss * 2):
        raise ValueError(f"rss {rss} is not on the 0.5 dB grid")


@dataclass(frozen=True, order=True)
class MacAddress:
    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, bytes) or len(self.octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {self.octets!r}")

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.replace("-", ":").split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddress({str(self)!r})"


BROADCAST_MAC = MacAddress(b"\xff" * 6)


@dataclass(frozen=True)
class ApInfoEntry:
    """One AP's advertised identity plus what neighbours learned about it."""

    ssid: str
    bssid: MacAddress
    mac: MacAddress
    ip: IPv4Address
    channel: int
    beacon_interval: int
    real_neighbor: bool = False
    rss: Optional[float] = None

    def __post_init__(self):
        if len(self.ssid.encode("utf-8")) > MAX_SSID_BYTES:
            raise ValueError(f"SSID longer than {MAX_SSID_BYTES} bytes: {self.ssid!r}")
        if not 1 <= self.channel <= MAX_CHANNEL:
            raise ValueError(f"channel {self.channel} outside 1..{MAX_CHANNEL}")
        if not 0 < self.beacon_interval <= 0xFFFF:
            raise ValueError(f"beacon interval {self.beacon_interval} out of range")
        if self.rss is not None:
            _check_rss(self.rss)

    def with_measurement(self, real: bool, rss: Optional[float]) -> "ApInfoEntry":
        return ApInfoEntry(self.ssid, self.bssid, self.mac, self.ip, self.channel,
                           self.beacon_interval, real,
                           None if rss is None else quantize_rss(rss))

    def bare(self) -> "ApInfoEntry":
        """The entry with neighbour-side measurements stripped."""
        return self.with_measurement(False, None)


# -- IAPP packets (LAN) -------------------------------------------------------


@dataclass(frozen=True)
class IappPacket:
    src_ip: IPv4Address
    dst_ip: IPv4Address

    command: ClassVar[int]


@dataclass(frozen=True)
class ApInfoReq(IappPacket):
    sender: ApInfoEntry

    command: ClassVar[int] = CMD_APINFO_REQ


@dataclass(frozen=True)
class ApInfoRes(IappPacket):
    sender: ApInfoEntry
    new_ap: bool = False
    i_am_the_last: bool = False

    command: ClassVar[int] = CMD_APINFO_RES


@dataclass(frozen=True)
class Permission(IappPacket):
    i_am_the_last: bool = False

    command: ClassVar[int] = CMD_PERMISSION


@dataclass(frozen=True)
class NewNeighbourReq(IappPacket):
    sender: ApInfoEntry

    command: ClassVar[int] = CMD_NEW_NEIGHBOUR_REQ


@dataclass(frozen=True)
class NewNeighbourRes(IappPacket):
    sender: ApInfoEntry

    command: ClassVar[int] = CMD_NEW_NEIGHBOUR_RES


IAPP_TYPES = {cls.command: cls for cls in
              (ApInfoReq, ApInfoRes, Permission, NewNeighbourReq, NewNeighbourRes)}


# -- management frames (air) --------------------------------------------------


@dataclass(frozen=True)
class MgmtFrame:
    src_mac: MacAddress
    dst_mac: MacAddress
    channel: int

    subtype: ClassVar[int]

    def __post_init__(self):
        if not 1 <= self.channel <= MAX_CHANNEL:
            raise ValueError(f"channel {self.channel} outside 1..{MAX_CHANNEL}")


@dataclass(frozen=True)
class ApInfoReqFrame(MgmtFrame):
    sender: ApInfoEntry

    subtype: ClassVar[int] = 0x01


@dataclass(frozen=True)
class ApInfoResFrame(MgmtFrame):
    sender: ApInfoEntry
    measured_rss_of_req: float

    subtype: ClassVar[int] = 0x02

    def __post_init__(self):
        super().__post_init__()
        _check_rss(self.measured_rss_of_req)


@dataclass(frozen=True)
class ApInfoAckFrame(MgmtFrame):
    sender: ApInfoEntry
    rss_of_response: float

    subtype: ClassVar[int] = 0x03

    def __post_init__(self):
        super().__post_init__()
        _check_rss(self.rss_of_response)


@dataclass(frozen=True)
class ApInfoUpdateFrame(MgmtFrame):
    old_ap: ApInfoEntry

    subtype: ClassVar[int] = 0x04


@dataclass(frozen=True)
class Beacon(MgmtFrame):
    ap: ApInfoEntry
    neighbor_list: tuple[ApInfoEntry, ...] = ()

    subtype: ClassVar[int] = 0x08

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "neighbor_list", tuple(self.neighbor_list))
        if len(self.neighbor_list) > 255:
            raise ValueError("beacon carries at most 255 neighbours")
        _check_beacon_order(self.neighbor_list, ValueError)


@dataclass(frozen=True)
class ProbeReq(MgmtFrame):
    subtype: ClassVar[int] = 0x10


@dataclass(frozen=True)
class ProbeRes(MgmtFrame):
    ap: ApInfoEntry

    subtype: ClassVar[int] = 0x11


@dataclass(frozen=True)
class AuthReq(MgmtFrame):
    ms_id: MacAddress

    subtype: ClassVar[int] = 0x20


@dataclass(frozen=True)
class AuthRes(MgmtFrame):
    accepted: bool

    subtype: ClassVar[int] = 0x21


@dataclass(frozen=True)
class AssocReq(MgmtFrame):
    ms_id: MacAddress

    subtype: ClassVar[int] = 0x30


@dataclass(frozen=True)
class AssocRes(MgmtFrame):
    accepted: bool

    subtype: ClassVar[int] = 0x31


FRAME_TYPES = {cls.subtype: cls for cls in
               (ApInfoReqFrame, ApInfoResFrame, ApInfoAckFrame, ApInfoUpdateFrame,
                Beacon, ProbeReq, ProbeRes, AuthReq, AuthRes, AssocReq, AssocRes)}

# frames exchanged between APs while they verify each other over the air
AIR_VERIFICATION_FRAMES = (ApInfoReqFrame, ApInfoResFrame, ApInfoAckFrame)

AnyPacket = Union[ApInfoReq, ApInfoRes, Permission, NewNeighbourReq, NewNeighbourRes]


def _check_beacon_order(entries, exc):
    prev = None
    for e in entries:
        if e.rss is None:
            raise exc(f"beacon neighbour {e.mac} has no rss")
        if prev is not None and e.rss > prev:
            raise exc("beacon neighbour list is not sorted by descending rss")
        prev = e.rss


# -- encoding -----------------------------------------------------------------

_FLAG_REAL = 0x01
_FLAG_RSS = 0x02
_FLAG_NEW_AP = 0x01
_FLAG_LAST = 0x02


def _rss_bytes(rss: float) -> bytes:
    return struct.pack(">h", int(rss * 2))


def _entry_bytes(e: ApInfoEntry) -> bytes:
    ssid = e.ssid.encode("utf-8")
    flags = (_FLAG_REAL if e.real_neighbor else 0) | (_FLAG_RSS if e.rss is not None else 0)
    body = (bytes([len(ssid)]) + ssid + e.bssid.octets + e.mac.octets + e.ip.packed
            + struct.pack(">BHB", e.channel, e.beacon_interval, flags))
    if e.rss is not None:
        body += _rss_bytes(e.rss)
    return bytes([len(body)]) + body


def _with_header(tag: int, body: bytes) -> bytes:
    return struct.pack(">BH", tag, len(body)) + body


def encode_iapp(packet: IappPacket) -> bytes:
    body = packet.src_ip.packed + packet.dst_ip.packed
    if isinstance(packet, ApInfoRes):
        flags = (_FLAG_NEW_AP if packet.new_ap else 0) | (_FLAG_LAST if packet.i_am_the_last else 0)
        body += _entry_bytes(packet.sender) + bytes([flags])
    elif isinstance(packet, Permission):
        body += bytes([_FLAG_LAST if packet.i_am_the_last else 0])
    elif isinstance(packet, (ApInfoReq, NewNeighbourReq, NewNeighbourRes)):
        body += _entry_bytes(packet.sender)
    else:
        raise TypeError(f"not an IAPP packet: {packet!r}")
    return _with_header(packet.command, body)


def encode_frame(frame: MgmtFrame) -> bytes:
    body = frame.src_mac.octets + frame.dst_mac.octets + bytes([frame.channel])
    if isinstance(frame, (ApInfoReqFrame,)):
        body += _entry_bytes(frame.sender)
    elif isinstance(frame, ApInfoResFrame):
        body += _entry_bytes(frame.sender) + _rss_bytes(frame.measured_rss_of_req)
    elif isinstance(frame, ApInfoAckFrame):
        body += _entry_bytes(frame.sender) + _rss_bytes(frame.rss_of_response)
    elif isinstance(frame, ApInfoUpdateFrame):
        body += _entry_bytes(frame.old_ap)
    elif isinstance(frame, Beacon):
        body += _entry_bytes(frame.ap) + bytes([len(frame.neighbor_list)])
        body += b"".join(_entry_bytes(e) for e in frame.neighbor_list)
    elif isinstance(frame, ProbeReq):
        pass
    elif isinstance(frame, ProbeRes):
        body += _entry_bytes(frame.ap)
    elif isinstance(frame, (AuthReq, AssocReq)):
        body += frame.ms_id.octets
    elif isinstance(frame, (AuthRes, AssocRes)):
        body += bytes([1 if frame.accepted else 0])
    else:
        raise TypeError(f"not a management frame: {frame!r}")
    return _with_header(frame.subtype, body)


# -- decoding -----------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayloadError(
                f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def rss(self) -> float:
        return self.unpack(">h")[0] / 2

    def mac(self) -> MacAddress:
        return MacAddress(self.take(6))

    def flag(self) -> bool:
        v = self.u8()
        if v > 1:
            raise MalformedPayloadError(f"boolean byte {v:#04x}")
        return v == 1

    def flags(self, allowed: int) -> int:
        v = self.u8()
        if v & ~allowed:
            raise MalformedPayloadError(f"unknown flag bits {v:#04x}")
        return v

    def entry(self) -> ApInfoEntry:
        sub = _Reader(self.take(self.u8()))
        raw_ssid = sub.take(sub.u8())
        try:
            ssid = raw_ssid.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayloadError("SSID is not UTF-8") from exc
        bssid, mac = sub.mac(), sub.mac()
        ip = IPv4Address(sub.take(4))
        channel, interval, flags = sub.unpack(">BHB")
        if flags & ~(_FLAG_REAL | _FLAG_RSS):
            raise MalformedPayloadError(f"unknown entry flag bits {flags:#04x}")
        rss = sub.rss() if flags & _FLAG_RSS else None
        sub.done()
        try:
            return ApInfoEntry(ssid, bssid, mac, ip, channel, interval,
                               bool(flags & _FLAG_REAL), rss)
        except ValueError as exc:
            raise MalformedPayloadError(str(exc)) from exc

    def done(self):
        if self.pos != len(self.data):
            raise MalformedPayloadError(f"{len(self.data) - self.pos} trailing bytes")


def _split_header(data: bytes) -> tuple[int, _Reader]:
    head = _Reader(data)
    tag, length = head.unpack(">BH")
    body = _Reader(head.take(length))
    head.done()
    return tag, body


def decode_iapp(data: bytes) -> AnyPacket:
    if not data:
        raise TruncatedPayloadError("empty input")
    if data[0] in RESERVED_COMMANDS:
        raise ReservedCommandError(f"IAPP command {data[0]} is reserved")
    if data[0] not in IAPP_TYPES:
        raise UnknownCommandError(f"unknown IAPP command {data[0]}")
    cmd, r = _split_header(data)
    src, dst = IPv4Address(r.take(4)), IPv4Address(r.take(4))
    if cmd == CMD_APINFO_RES:
        sender = r.entry()
        flags = r.flags(_FLAG_NEW_AP | _FLAG_LAST)
        pkt = ApInfoRes(src, dst, sender, bool(flags & _FLAG_NEW_AP), bool(flags & _FLAG_LAST))
    elif cmd == CMD_PERMISSION:
        pkt = Permission(src, dst, bool(r.flags(_FLAG_LAST) & _FLAG_LAST))
    else:
        pkt = IAPP_TYPES[cmd](src, dst, r.entry())
    r.done()
    return pkt


def decode_frame(data: bytes) -> MgmtFrame:
    if not data:
        raise TruncatedPayloadError("empty input")
    if data[0] not in FRAME_TYPES:
        raise UnknownSubtypeError(f"unknown management subtype {data[0]:#04x}")
    subtype, r = _split_header(data)
    cls = FRAME_TYPES[subtype]
    src, dst = r.mac(), r.mac()
    channel = r.u8()
    if not 1 <= channel <= MAX_CHANNEL:
        raise MalformedPayloadError(f"channel {channel} outside 1..{MAX_CHANNEL}")
    if cls is ApInfoReqFrame or cls is ProbeRes or cls is ApInfoUpdateFrame:
        frame = cls(src, dst, channel, r.entry())
    elif cls is ApInfoResFrame or cls is ApInfoAckFrame:
        frame = cls(src, dst, channel, r.entry(), r.rss())
    elif cls is Beacon:
        ap = r.entry()
        neighbors = tuple(r.entry() for _ in range(r.u8()))
        _check_beacon_order(neighbors, MalformedBeaconError)
        frame = Beacon(src, dst, channel, ap, neighbors)
    elif cls is ProbeReq:
        frame = ProbeReq(src, dst, channel)
    elif cls is AuthReq or cls is AssocReq:
        frame = cls(src, dst, channel, r.mac())
    else:
        frame = cls(src, dst, channel, r.flag())
    r.done()
    return frame
