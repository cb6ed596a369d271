from __future__ import annotations

from ipaddress import IPv4Address
from pathlib import Path

import pytest
from hypothesis import given
import hypothesis.strategies as st

from andwc import wire
from andwc.wire import (
    IAPP_MULTICAST,
    ApInfoEntry,
    ApInfoReq,
    ApInfoRes,
    Beacon,
    MacAddress,
    MalformedBeaconError,
    MalformedPayloadError,
    NewNeighbourRes,
    Permission,
    ReservedCommandError,
    TruncatedPayloadError,
    UnknownCommandError,
    UnknownSubtypeError,
    decode_frame,
    decode_iapp,
    encode_frame,
    encode_iapp,
)

from helpers import iapp_packets, mac, macs, mgmt_frames

FIXTURES = Path(__file__).parent / "fixtures"


def load_hex(name: str) -> bytes:
    lines = (line.split("#")[0] for line in (FIXTURES / name).read_text().splitlines())
    return bytes.fromhex("".join(lines).replace(" ", ""))


def entry(n: int, channel: int, rss=None) -> ApInfoEntry:
    e = ApInfoEntry(f"ap{n}", mac(n), mac(n), IPv4Address(f"10.0.0.{n}"), channel, 100)
    return e if rss is None else e.with_measurement(True, rss)


class TestMacAddress:
    def test_parse_and_format(self):
        m = MacAddress.parse("02:00:00:00:0A:ff")
        assert str(m) == "02:00:00:00:0a:ff"

    @pytest.mark.parametrize("bad", ["02:00:00", "zz:00:00:00:00:00", "02:00:00:00:00:00:00"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            MacAddress.parse(bad)

    @given(macs, macs)
    def test_order_is_bytewise_and_antisymmetric(self, a, b):
        assert (a < b) == (a.octets < b.octets)
        assert not (a < b and b < a)
        assert (a == b) == (not a < b and not b < a)


class TestEntryValidation:
    def test_ssid_over_32_bytes_rejected(self):
        with pytest.raises(ValueError):
            ApInfoEntry("x" * 33, mac(1), mac(1), IPv4Address("10.0.0.1"), 1, 100)

    @pytest.mark.parametrize("channel", [0, 33])
    def test_channel_range(self, channel):
        with pytest.raises(ValueError):
            ApInfoEntry("a", mac(1), mac(1), IPv4Address("10.0.0.1"), channel, 100)

    def test_beacon_interval_positive(self):
        with pytest.raises(ValueError):
            ApInfoEntry("a", mac(1), mac(1), IPv4Address("10.0.0.1"), 1, 0)

    def test_measurement_is_quantized(self):
        assert entry(1, 1, rss=-86.12).rss == -86.0
        assert entry(1, 1, rss=-86.3).rss == -86.5


class TestIapp:
    def test_permission_starts_with_command_9(self):
        pkt = Permission(IPv4Address("10.0.0.1"), IPv4Address("10.0.0.2"), False)
        assert encode_iapp(pkt)[0] == 0x09

    def test_apinfo_req_starts_with_command_7(self):
        pkt = ApInfoReq(IPv4Address("10.0.0.1"), IAPP_MULTICAST, entry(1, 1))
        assert encode_iapp(pkt)[0] == 0x07

    def test_command_11_decodes_to_new_neighbour_res(self):
        pkt = NewNeighbourRes(IPv4Address("10.0.0.3"), IPv4Address("10.0.0.1"), entry(3, 11))
        data = encode_iapp(pkt)
        assert data[0] == 0x0B
        assert decode_iapp(data) == pkt

    def test_command_bijection(self):
        assert sorted(wire.IAPP_TYPES) == [7, 8, 9, 10, 11]
        assert len(set(wire.IAPP_TYPES.values())) == 5

    @given(iapp_packets())
    def test_roundtrip(self, pkt):
        assert decode_iapp(encode_iapp(pkt)) == pkt

    @given(iapp_packets(), st.integers(0, 6))
    def test_reserved_commands_rejected(self, pkt, cmd):
        data = bytes([cmd]) + encode_iapp(pkt)[1:]
        with pytest.raises(ReservedCommandError):
            decode_iapp(data)

    @given(st.integers(0, 6), st.binary(max_size=64))
    def test_reserved_commands_never_decode(self, cmd, tail):
        with pytest.raises(ReservedCommandError):
            decode_iapp(bytes([cmd]) + tail)

    @pytest.mark.parametrize("cmd", [12, 100, 255])
    def test_unknown_command(self, cmd):
        with pytest.raises(UnknownCommandError):
            decode_iapp(bytes([cmd, 0, 0]))

    @given(iapp_packets())
    def test_every_truncation_is_detected(self, pkt):
        data = encode_iapp(pkt)
        for cut in range(len(data)):
            with pytest.raises(TruncatedPayloadError):
                decode_iapp(data[:cut])

    @given(iapp_packets())
    def test_trailing_bytes_rejected(self, pkt):
        data = encode_iapp(pkt)
        # grow the declared length so the extra byte sits inside the body
        n = int.from_bytes(data[1:3], "big") + 1
        with pytest.raises(MalformedPayloadError):
            decode_iapp(data[:1] + n.to_bytes(2, "big") + data[3:] + b"\x00")

    def test_unknown_flag_bits_rejected(self):
        pkt = ApInfoRes(IPv4Address("10.0.0.1"), IPv4Address("10.0.0.2"), entry(1, 1))
        data = bytearray(encode_iapp(pkt))
        data[-1] = 0x04
        with pytest.raises(MalformedPayloadError):
            decode_iapp(bytes(data))


class TestFrames:
    def test_beacon_rss_4_then_3_roundtrips(self):
        b = Beacon(mac(2), wire.BROADCAST_MAC, 6, entry(2, 6),
                   (entry(3, 11, rss=4), entry(1, 1, rss=3)))
        assert decode_frame(encode_frame(b)) == b

    def test_beacon_construction_enforces_order(self):
        with pytest.raises(ValueError):
            Beacon(mac(2), wire.BROADCAST_MAC, 6, entry(2, 6),
                   (entry(1, 1, rss=3), entry(3, 11, rss=4)))

    def test_beacon_neighbour_needs_rss(self):
        with pytest.raises(ValueError):
            Beacon(mac(2), wire.BROADCAST_MAC, 6, entry(2, 6), (entry(1, 1),))

    @given(mgmt_frames())
    def test_roundtrip(self, frame):
        assert decode_frame(encode_frame(frame)) == frame

    @given(mgmt_frames())
    def test_every_truncation_is_detected(self, frame):
        data = encode_frame(frame)
        for cut in range(len(data)):
            with pytest.raises(TruncatedPayloadError):
                decode_frame(data[:cut])

    @pytest.mark.parametrize("subtype", [0x00, 0x05, 0x12, 0xFF])
    def test_unknown_subtype(self, subtype):
        with pytest.raises(UnknownSubtypeError):
            decode_frame(bytes([subtype, 0, 0]))

    def test_update_frame_carries_old_ap_ip(self):
        old = entry(1, 1, rss=-80)
        f = wire.ApInfoUpdateFrame(mac(9), mac(3), 11, old)
        assert decode_frame(encode_frame(f)).old_ap.ip == IPv4Address("10.0.0.1")


class TestGoldenVectors:
    def test_permission(self):
        pkt = Permission(IPv4Address("10.0.0.1"), IPv4Address("10.0.0.2"), True)
        assert encode_iapp(pkt) == load_hex("permission_last.hex")
        assert decode_iapp(load_hex("permission_last.hex")) == pkt

    def test_apinfo_req(self):
        pkt = ApInfoReq(IPv4Address("10.0.0.1"), IAPP_MULTICAST, entry(1, 1))
        assert encode_iapp(pkt) == load_hex("apinfo_req_multicast.hex")
        assert decode_iapp(load_hex("apinfo_req_multicast.hex")) == pkt

    def test_beacon(self):
        b = Beacon(mac(2), wire.BROADCAST_MAC, 6, entry(2, 6),
                   (entry(3, 11, rss=4), entry(1, 1, rss=3)))
        assert encode_frame(b) == load_hex("beacon_sorted.hex")
        assert decode_frame(load_hex("beacon_sorted.hex")) == b

    def test_forged_beacon_order(self):
        with pytest.raises(MalformedBeaconError):
            decode_frame(load_hex("beacon_forged_order.hex"))
