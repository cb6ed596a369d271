"""Shared hypothesis strategies and scenario builders for the test suite."""

from __future__ import annotations

import math
from ipaddress import IPv4Address

import hypothesis.strategies as st

from andwc.ms_agent import Strategy
from andwc.scenario import ApSpec, MsSpec, Scenario, Timing, TrafficSpec
from andwc.wire import (
    ApInfoAckFrame,
    ApInfoEntry,
    ApInfoReq,
    ApInfoReqFrame,
    ApInfoRes,
    ApInfoResFrame,
    ApInfoUpdateFrame,
    AssocReq,
    AssocRes,
    AuthReq,
    AuthRes,
    Beacon,
    MacAddress,
    NewNeighbourReq,
    NewNeighbourRes,
    Permission,
    ProbeReq,
    ProbeRes,
)

# -- hypothesis strategies ------------------------------------------------------

macs = st.binary(min_size=6, max_size=6).map(MacAddress)
ips = st.integers(0, 2**32 - 1).map(IPv4Address)
channels = st.integers(1, 32)
rss_values = st.integers(-32768, 32767).map(lambda n: n / 2)
ssids = st.text(max_size=32).filter(lambda s: len(s.encode("utf-8")) <= 32)


@st.composite
def entries(draw, with_rss=None):
    has_rss = draw(st.booleans()) if with_rss is None else with_rss
    return ApInfoEntry(
        ssid=draw(ssids), bssid=draw(macs), mac=draw(macs), ip=draw(ips),
        channel=draw(channels), beacon_interval=draw(st.integers(1, 0xFFFF)),
        real_neighbor=draw(st.booleans()), rss=draw(rss_values) if has_rss else None,
    )


@st.composite
def iapp_packets(draw):
    src, dst = draw(ips), draw(ips)
    kind = draw(st.sampled_from(["req", "res", "perm", "nreq", "nres"]))
    if kind == "res":
        return ApInfoRes(src, dst, draw(entries()), draw(st.booleans()), draw(st.booleans()))
    if kind == "perm":
        return Permission(src, dst, draw(st.booleans()))
    cls = {"req": ApInfoReq, "nreq": NewNeighbourReq, "nres": NewNeighbourRes}[kind]
    return cls(src, dst, draw(entries()))


@st.composite
def beacons(draw, src, dst, ch):
    neigh = draw(st.lists(entries(with_rss=True), max_size=6))
    neigh.sort(key=lambda e: -e.rss)
    return Beacon(src, dst, ch, draw(entries()), tuple(neigh))


@st.composite
def mgmt_frames(draw):
    src, dst, ch = draw(macs), draw(macs), draw(channels)
    kind = draw(st.sampled_from(range(11)))
    if kind == 0:
        return ApInfoReqFrame(src, dst, ch, draw(entries()))
    if kind == 1:
        return ApInfoResFrame(src, dst, ch, draw(entries()), draw(rss_values))
    if kind == 2:
        return ApInfoAckFrame(src, dst, ch, draw(entries()), draw(rss_values))
    if kind == 3:
        return ApInfoUpdateFrame(src, dst, ch, draw(entries()))
    if kind == 4:
        return draw(beacons(src, dst, ch))
    if kind == 5:
        return ProbeReq(src, dst, ch)
    if kind == 6:
        return ProbeRes(src, dst, ch, draw(entries()))
    if kind in (7, 8):
        return (AuthReq if kind == 7 else AssocReq)(src, dst, ch, draw(macs))
    return (AuthRes if kind == 9 else AssocRes)(src, dst, ch, draw(st.booleans()))


# -- scenario builders ------------------------------------------------------------


def mac(n: int) -> MacAddress:
    return MacAddress(bytes([2, 0, 0, 0, 0, n]))


def ap(n: int, channel: int, pos, power_on_ms: float = 0.0, window=None) -> ApSpec:
    return ApSpec(f"AP{n}", mac(n), IPv4Address(f"10.0.0.{n + 1}"), channel, pos,
                  power_on_ms=power_on_ms, power_on_window_ms=window)


def ms(mode=Strategy.ANDWC, start=(90.0, 0.0), velocity=(5.0, 0.0), threshold=-80.0,
       initial_ap="AP1") -> MsSpec:
    return MsSpec("MS1", MacAddress(bytes([2, 0, 0, 0, 1, 1])), mode, start, velocity,
                  threshold, initial_ap)


def scenario(aps, mss=(), duration_ms=500.0, traffic=(), **timing) -> Scenario:
    return Scenario("test", "bg11", duration_ms, list(aps), list(mss), list(traffic),
                    Timing(**timing), seed=7)


def stream(total=100, interval=1.6) -> TrafficSpec:
    return TrafficSpec("MS1", interval, total)


def ring(n: int, radius: float = 30.0):
    """n APs close enough that every pair hears each other, channels cycling 1/6/11."""
    out = []
    for i in range(n):
        a = 2 * math.pi * i / n
        out.append(ap(i + 1, (1, 6, 11)[i % 3], (radius * math.cos(a), radius * math.sin(a))))
    return out


class FakePort:
    """Stands in for a simulator port: records traffic, lets tests fire timers by hand."""

    def __init__(self, channel: int = 1, air_delay_ms: float = 0.1):
        self.now = 0.0
        self.air_delay_ms = air_delay_ms
        self.channel = channel
        self.air: list = []
        self.lan: list = []
        self.timers: list[list] = []
        self.notes: list[tuple[str, str]] = []
        self.rss: dict = {}

    def tune(self, channel: int) -> None:
        self.channel = channel

    def send_air(self, frame):
        assert frame.channel == self.channel, "sent on a channel the radio is not tuned to"
        self.air.append(frame)
        return []

    def send_lan(self, packet):
        self.lan.append(packet)
        return []

    def timer(self, delay_ms, kind, action, detail=""):
        t = [self.now + delay_ms, kind, action, False]
        self.timers.append(t)
        return t

    def cancel(self, t) -> None:
        if t is not None:
            t[3] = True

    def rss_to(self, mac):
        return self.rss.get(mac)

    def note(self, kind, detail=""):
        self.notes.append((kind, detail))

    def fire(self, kind: str) -> None:
        """Advance to the earliest live timer of ``kind`` and run it."""
        live = [t for t in self.timers if t[1] == kind and not t[3]]
        t = min(live, key=lambda t: t[0])
        t[3] = True
        self.now = max(self.now, t[0])
        t[2]()

    def pending(self, kind: str) -> int:
        return sum(1 for t in self.timers if t[1] == kind and not t[3])


# -- acceptance reporting -----------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


class criterion:
    """Records PASS/FAIL for numbered acceptance criterion ``n`` and re-raises failures."""

    def __init__(self, n: int, title: str):
        self.n = n
        self.title = title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        previous = ACCEPTANCE.get(self.n, "PASS")
        verdict = "PASS" if ok and previous.startswith("PASS") else "FAIL"
        ACCEPTANCE[self.n] = f"{verdict} criterion {self.n:>2}: {self.title}"
        print(ACCEPTANCE[self.n])
        return False
