"""Deterministic discrete-event core and the shared media.

Time is kept on an integer microsecond grid; every public API speaks
milliseconds. Events run in ``(time, seq)`` order, where ``seq`` is a
monotone counter assigned at scheduling time, so equal-time events run in
the order they were scheduled.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from typing import Callable, Optional

from . import wire
from .wire import BROADCAST_MAC, IAPP_MULTICAST, IappPacket, MacAddress, MgmtFrame

log = logging.getLogger(__name__)

US_PER_MS = 1000


def to_us(ms: float) -> int:
    return round(ms * US_PER_MS)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current simulated time."""


@dataclass(order=True)
class SimEvent:
    time_us: int
    seq: int
    target: str = field(compare=False)
    kind: str = field(compare=False)
    action: Optional[Callable[[], None]] = field(compare=False, repr=False, default=None)
    detail: str = field(compare=False, default="")
    cancelled: bool = field(compare=False, default=False)

    @property
    def time(self) -> float:
        return self.time_us / US_PER_MS


class Scheduler:
    def __init__(self, record_log: bool = True):
        self._queue: list[SimEvent] = []
        self._seq = 0
        self.now_us = 0
        self.record_log = record_log
        self.log: list[str] = []

    @property
    def now(self) -> float:
        return self.now_us / US_PER_MS

    def schedule_at(self, time_ms: float, target: str, kind: str,
                    action: Optional[Callable[[], None]] = None, detail: str = "") -> SimEvent:
        t = to_us(time_ms)
        if t < self.now_us or math.isnan(time_ms):
            raise SchedulingError(
                f"{kind} for {target} at {time_ms} ms is before now ({self.now} ms)")
        ev = SimEvent(t, self._seq, target, kind, action, detail)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule(self, delay_ms: float, target: str, kind: str,
                 action: Optional[Callable[[], None]] = None, detail: str = "") -> SimEvent:
        if delay_ms < 0:
            raise SchedulingError(f"negative delay {delay_ms} for {kind}")
        return self.schedule_at(self.now + delay_ms, target, kind, action, detail)

    @staticmethod
    def cancel(event: Optional[SimEvent]) -> None:
        if event is not None:
            event.cancelled = True

    def note(self, target: str, kind: str, detail: str = "") -> None:
        """Append a log line for something that happened inside the current event."""
        if self.record_log:
            self.log.append(f"{self.now:.3f}\t-\t{target}\t{kind}\t{detail}")

    def run_until(self, t_end_ms: float) -> list[str]:
        """Execute every event with time <= t_end_ms; return the log lines produced."""
        end = to_us(t_end_ms)
        first_line = len(self.log)
        while self._queue and self._queue[0].time_us <= end:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now_us = ev.time_us
            if self.record_log:
                self.log.append(f"{ev.time:.3f}\t{ev.seq}\t{ev.target}\t{ev.kind}\t{ev.detail}")
            if ev.action is not None:
                ev.action()
        self.now_us = max(self.now_us, end)
        return self.log[first_line:]

    def pending(self) -> int:
        return sum(1 for ev in self._queue if not ev.cancelled)


@dataclass
class RadioModel:
    """Log-distance path loss; distances under 1 m are clamped to 1 m."""

    tx_power_dbm: float = 20.0
    path_loss_exponent: float = 3.0
    reference_loss_db: float = 40.0
    range_cutoff_dbm: float = -90.0
    air_delay_ms: float = 0.1
    frame_loss_probability: float = 0.0

    def rss(self, distance_m: float) -> float:
        d = max(distance_m, 1.0)
        return self.tx_power_dbm - self.reference_loss_db - 10 * self.path_loss_exponent * math.log10(d)

    def distance_for(self, rss_dbm: float) -> float:
        """Distance at which the received power equals ``rss_dbm``."""
        return 10 ** ((self.tx_power_dbm - self.reference_loss_db - rss_dbm)
                      / (10 * self.path_loss_exponent))

    @property
    def range_m(self) -> float:
        return self.distance_for(self.range_cutoff_dbm)


@dataclass(frozen=True)
class LinearMobility:
    origin: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    start_time: float = 0.0

    def position(self, t_ms: float) -> tuple[float, float]:
        dt = max(t_ms - self.start_time, 0.0) / 1000.0
        return (self.origin[0] + self.velocity[0] * dt, self.origin[1] + self.velocity[1] * dt)


@dataclass(frozen=True)
class TrafficSource:
    packet_interval: float
    total_packets: int
    destination: str
    start_time: float = 0.0

    @property
    def end_time(self) -> float:
        return self.start_time + self.packet_interval * (self.total_packets - 1)


@dataclass
class StreamRecord:
    destination: str
    total_packets: int
    outcomes: bytearray = field(default_factory=bytearray)

    @property
    def sent(self) -> int:
        return len(self.outcomes)

    @property
    def delivered(self) -> int:
        return sum(self.outcomes)

    @property
    def lost(self) -> int:
        return self.sent - self.delivered


@dataclass
class Node:
    id: str
    mac: MacAddress
    mobility: LinearMobility
    agent: object
    ip: Optional[IPv4Address] = None
    channel: int = 1
    powered: bool = False

    def position(self, t_ms: float) -> tuple[float, float]:
        return self.mobility.position(t_ms)


class Port:
    """A node's handle on the network: clock, radio, LAN and timers."""

    def __init__(self, net: "Network", node_id: str):
        self.net = net
        self.node_id = node_id

    @property
    def now(self) -> float:
        return self.net.sim.now

    @property
    def air_delay_ms(self) -> float:
        return self.net.radio.air_delay_ms

    @property
    def channel(self) -> int:
        return self.net.nodes[self.node_id].channel

    def tune(self, channel: int) -> None:
        self.net.nodes[self.node_id].channel = channel

    def send_air(self, frame: MgmtFrame) -> list[tuple[str, float]]:
        return self.net.deliver_wireless(self.node_id, frame)

    def send_lan(self, packet: IappPacket) -> list[str]:
        return self.net.deliver_lan(self.node_id, packet)

    def timer(self, delay_ms: float, kind: str, action: Callable[[], None],
              detail: str = "") -> SimEvent:
        return self.net.sim.schedule(delay_ms, self.node_id, kind, action, detail)

    def cancel(self, event: Optional[SimEvent]) -> None:
        self.net.sim.cancel(event)

    def rss_to(self, mac: MacAddress) -> Optional[float]:
        return self.net.rss_between(self.node_id, mac)

    def note(self, kind: str, detail: str = "") -> None:
        self.net.sim.note(self.node_id, kind, detail)


def describe(obj) -> str:
    name = type(obj).__name__
    if isinstance(obj, MgmtFrame):
        return f"{name} {obj.src_mac}->{obj.dst_mac} ch{obj.channel}"
    if isinstance(obj, IappPacket):
        return f"{name} {obj.src_ip}->{obj.dst_ip}"
    return name


class Network:
    """Wireless medium, wired LAN and traffic sources around one scheduler."""

    def __init__(self, radio: Optional[RadioModel] = None, lan_latency_ms: float = 0.2,
                 seed: int = 0, record_log: bool = True):
        self.sim = Scheduler(record_log=record_log)
        self.radio = radio or RadioModel()
        self.lan_latency_ms = lan_latency_ms
        self.rng = random.Random(seed)
        self.nodes: dict[str, Node] = {}
        self._by_mac: dict[MacAddress, str] = {}
        self._by_ip: dict[IPv4Address, str] = {}
        self.frames_sent: Counter[str] = Counter()
        self.packets_sent: Counter[str] = Counter()
        self.streams: list[StreamRecord] = []

    def add_node(self, node: Node) -> Port:
        if node.id in self.nodes:
            raise ValueError(f"duplicate node id {node.id}")
        if node.mac in self._by_mac:
            raise ValueError(f"duplicate MAC {node.mac}")
        if node.ip is not None:
            if node.ip in self._by_ip:
                raise ValueError(f"duplicate IP {node.ip}")
            self._by_ip[node.ip] = node.id
        self.nodes[node.id] = node
        self._by_mac[node.mac] = node.id
        return Port(self, node.id)

    def node_by_mac(self, mac: MacAddress) -> Optional[Node]:
        nid = self._by_mac.get(mac)
        return self.nodes[nid] if nid is not None else None

    def distance(self, a: Node, b: Node) -> float:
        t = self.sim.now
        (ax, ay), (bx, by) = a.position(t), b.position(t)
        return math.hypot(ax - bx, ay - by)

    def rss_between(self, node_id: str, mac: MacAddress) -> Optional[float]:
        """Current RSS between a node and the node owning ``mac``, None if out of range."""
        other = self.node_by_mac(mac)
        if other is None or not other.powered:
            return None
        rss = self.radio.rss(self.distance(self.nodes[node_id], other))
        return rss if rss >= self.radio.range_cutoff_dbm else None

    def deliver_wireless(self, sender_id: str, frame: MgmtFrame) -> list[tuple[str, float]]:
        """Transmit ``frame`` on its channel; returns the scheduled (receiver, rss) pairs.

        Receivers are chosen at send time by range and address; the channel is
        checked again on arrival, so a receiver that retunes misses the frame.
        """
        sender = self.nodes[sender_id]
        if sender.channel != frame.channel:
            raise ValueError(f"{sender_id} tuned to {sender.channel}, sending on {frame.channel}")
        self.frames_sent[type(frame).__name__] += 1
        data = wire.encode_frame(frame)
        out = []
        for node in self.nodes.values():
            if node.id == sender_id or not node.powered or node.channel != frame.channel:
                continue
            if frame.dst_mac != BROADCAST_MAC and frame.dst_mac != node.mac:
                continue
            rss = self.radio.rss(self.distance(sender, node))
            if rss < self.radio.range_cutoff_dbm:
                continue
            if self.radio.frame_loss_probability and self.rng.random() < self.radio.frame_loss_probability:
                continue
            out.append((node.id, rss))
            self.sim.schedule(self.radio.air_delay_ms, node.id, "rx-air",
                              self._air_arrival(node, data, frame.channel, rss), describe(frame))
        return out

    def _air_arrival(self, node: Node, data: bytes, channel: int, rss: float):
        def arrive():
            if node.powered and node.channel == channel:
                node.agent.on_air(wire.decode_frame(data), rss)
        return arrive

    def deliver_lan(self, sender_id: str, packet: IappPacket) -> list[str]:
        """Unicast to the owner of dst_ip, or multicast to every other powered AP."""
        self.packets_sent[type(packet).__name__] += 1
        data = wire.encode_iapp(packet)
        if packet.dst_ip == IAPP_MULTICAST:
            receivers = [n for n in self.nodes.values()
                         if n.ip is not None and n.id != sender_id and n.powered]
        else:
            nid = self._by_ip.get(packet.dst_ip)
            if nid is None:
                log.warning("LAN packet to unknown ip %s dropped", packet.dst_ip)
                self.sim.note(sender_id, "lan-drop", describe(packet))
                return []
            receivers = [self.nodes[nid]]
        for node in receivers:
            self.sim.schedule(self.lan_latency_ms, node.id, "rx-lan",
                              self._lan_arrival(node, data), describe(packet))
        return [n.id for n in receivers]

    @staticmethod
    def _lan_arrival(node: Node, data: bytes):
        def arrive():
            if node.powered:
                node.agent.on_lan(wire.decode_iapp(data))
        return arrive

    def add_traffic(self, source: TrafficSource) -> StreamRecord:
        """Constant-rate UDP stream; a packet counts as lost if the receiver is not able to take it."""
        record = StreamRecord(source.destination, source.total_packets)
        self.streams.append(record)
        target = self.nodes[source.destination]

        def emit(i: int):
            def fire():
                record.outcomes.append(1 if target.agent.receiving() else 0)
                if i + 1 < source.total_packets:
                    self.sim.schedule_at(source.start_time + (i + 1) * source.packet_interval,
                                         target.id, "udp", emit(i + 1))
            return fire

        if source.total_packets > 0:
            self.sim.schedule_at(source.start_time, target.id, "udp", emit(0))
        return record

    def run_until(self, t_end_ms: float) -> list[str]:
        return self.sim.run_until(t_end_ms)
