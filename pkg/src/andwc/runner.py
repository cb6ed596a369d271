"""Build a simulated network from a scenario, run it and collect metrics."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .ap_agent import ApAgent, ApTiming
from .ms_agent import HandoffRecord, MsAgent, MsTiming, Strategy
from .scanning import ScanConfig, ScanMode
from .scenario import Expectation, Scenario
from .simnet import LinearMobility, Network, Node, StreamRecord, TrafficSource
from .wire import AIR_VERIFICATION_FRAMES, ApInfoEntry


@dataclass
class ApVerification:
    ap: str
    mac: str
    sequence: int
    power_on: float
    start: Optional[float]
    end: Optional[float]
    verified: int
    failed: int
    real_neighbours: int

    @property
    def duration(self) -> Optional[float]:
        if self.start is None or self.end is None:
            return None
        return round(self.end - self.start, 6)


@dataclass
class StreamSummary:
    destination: str
    sent: int
    delivered: int
    lost: int


@dataclass
class ExpectationResult:
    expectation: Expectation
    value: Optional[float]

    @property
    def passed(self) -> bool:
        e = self.expectation
        if self.value is None:
            return False
        return (e.min is None or self.value >= e.min) and (e.max is None or self.value <= e.max)


@dataclass
class Metrics:
    scenario: str
    seed: int
    mode: Optional[str]
    handoffs: list[HandoffRecord] = field(default_factory=list)
    failed_handoffs: list[HandoffRecord] = field(default_factory=list)
    verifications: list[ApVerification] = field(default_factory=list)
    streams: list[StreamSummary] = field(default_factory=list)
    air_verification_frames: int = 0
    probes_sent: int = 0
    overlaps: list[tuple[str, str]] = field(default_factory=list)

    @property
    def verification_time(self) -> Optional[float]:
        """From the first AP starting verification to the last one finishing."""
        spans = [(v.start, v.end) for v in self.verifications if v.start is not None]
        if not spans or any(end is None for _, end in spans):
            return None
        return round(max(e for _, e in spans) - min(s for s, _ in spans), 6)

    def values(self) -> dict[str, Optional[float]]:
        lat = [h.latency for h in self.handoffs]
        raw = {
            "handoffs": len(self.handoffs),
            "failed_handoffs": len(self.failed_handoffs),
            "mean_handoff_latency_ms": sum(lat) / len(lat) if lat else None,
            "max_handoff_latency_ms": max(lat) if lat else None,
            "min_handoff_latency_ms": min(lat) if lat else None,
            "air_verification_frames": self.air_verification_frames,
            "air_verification_time_ms": self.verification_time,
            "verification_overlaps": len(self.overlaps),
            "unfinished_aps": sum(1 for v in self.verifications if v.end is None),
            "probes_sent": self.probes_sent,
            "packets_sent": sum(s.sent for s in self.streams),
            "packets_lost": sum(s.lost for s in self.streams),
        }
        return {k: None if v is None else float(v) for k, v in raw.items()}

    def scalar(self, name: str) -> Optional[float]:
        values = self.values()
        if name not in values:
            raise KeyError(f"unknown metric {name!r}; known: {sorted(values)}")
        return values[name]


METRIC_NAMES = tuple(Metrics("", 0, None).values())


@dataclass
class Simulation:
    scenario: Scenario
    seed: int
    net: Network
    aps: dict[str, ApAgent]
    mss: dict[str, MsAgent]
    streams: dict[str, StreamRecord]
    power_on: dict[str, float]

    def run(self) -> list[str]:
        return self.net.run_until(self.scenario.duration_ms)

    def metrics(self) -> Metrics:
        sc = self.scenario
        m = Metrics(sc.name, self.seed, sc.declared_mode.value if sc.declared_mode else None)
        for agent in self.mss.values():
            m.handoffs.extend(agent.handoffs)
            m.failed_handoffs.extend(agent.failed_handoffs)
            m.probes_sent += agent.probes_sent
        m.handoffs.sort(key=lambda h: (h.trigger_time, h.ms))
        ordered = sorted(self.aps.items(),
                         key=lambda kv: (kv[1].verify_started is None, kv[1].verify_started or 0.0))
        for seq, (ap_id, agent) in enumerate(ordered, start=1):
            m.verifications.append(ApVerification(
                ap=ap_id, mac=str(agent.mac),
                sequence=seq if agent.verify_started is not None else 0,
                power_on=self.power_on[ap_id],
                start=agent.verify_started, end=agent.verify_finished,
                verified=len(agent.verified_peers), failed=len(agent.failed_peers),
                real_neighbours=len(agent.state.real_neighbour_list),
            ))
        for dest, rec in self.streams.items():
            m.streams.append(StreamSummary(dest, rec.sent, rec.delivered, rec.lost))
        m.air_verification_frames = sum(self.net.frames_sent[cls.__name__]
                                        for cls in AIR_VERIFICATION_FRAMES)
        m.overlaps = verification_overlaps(self.aps)
        return m


def verification_overlaps(aps: dict[str, ApAgent]) -> list[tuple[str, str]]:
    """Pairs of APs whose verification intervals intersect (should be none)."""
    spans = []
    for ap_id, agent in aps.items():
        if agent.verify_started is None:
            continue
        end = agent.verify_finished if agent.verify_finished is not None else float("inf")
        spans.append((agent.verify_started, end, ap_id))
    spans.sort()
    out = []
    for i, (s1, e1, a) in enumerate(spans):
        for s2, e2, b in spans[i + 1:]:
            if s2 < e1:
                out.append((a, b))
    return out


def _scan_config(sc: Scenario, mode: Strategy) -> ScanConfig:
    t = sc.timing
    return ScanConfig.for_band(
        sc.band,
        min_channel_time=t.min_channel_time_ms,
        max_channel_time=t.max_channel_time_ms,
        beacon_interval=t.beacon_interval_ms,
        channel_switch_time=t.channel_switch_ms,
        mode=ScanMode.SELECTIVE_ACTIVE if mode is Strategy.BASELINE_SELECTIVE else ScanMode.ACTIVE,
        selective_channels=sc.selective_channels,
    )


def build(sc: Scenario, seed: Optional[int] = None, record_log: bool = True) -> Simulation:
    seed = sc.seed if seed is None else seed
    t = sc.timing
    net = Network(radio=sc.radio, lan_latency_ms=t.lan_latency_ms, seed=seed, record_log=record_log)
    ap_timing = ApTiming(
        collection_window_ms=t.collection_window_ms,
        air_frame_timeout_ms=t.air_frame_timeout_ms,
        air_retransmissions=t.air_retransmissions,
        channel_switch_ms=t.channel_switch_ms,
        auth_service_ms=t.auth_service_ms,
        assoc_service_ms=t.assoc_service_ms,
        probe_response_ms=t.probe_response_ms,
    )
    aps: dict[str, ApAgent] = {}
    infos: dict[str, ApInfoEntry] = {}
    power_on: dict[str, float] = {}
    for item in sc.aps:
        info = ApInfoEntry(item.ssid, item.mac, item.mac, item.ip, item.channel, t.beacon_interval_ms)
        node = Node(item.id, item.mac, LinearMobility(item.position_m), None, ip=item.ip, channel=item.channel)
        port = net.add_node(node)
        agent = ApAgent(info, port, ap_timing)
        node.agent = agent
        aps[item.id] = agent
        infos[item.id] = info
        if item.power_on_window_ms is not None:
            lo, hi = item.power_on_window_ms
            at = round(net.rng.uniform(lo, hi), 3)
        else:
            at = item.power_on_ms
        power_on[item.id] = at
        net.sim.schedule_at(at, item.id, "power-on", _powerer(node, agent))

    ms_timing = MsTiming(
        auth_timeout_ms=t.auth_timeout_ms,
        auth_retransmissions=t.auth_retransmissions,
        rss_sample_interval_ms=t.rss_sample_interval_ms,
        rescan_backoff_ms=t.rescan_backoff_ms,
        hysteresis_db=t.hysteresis_db,
        channel_switch_ms=t.channel_switch_ms,
    )
    mss: dict[str, MsAgent] = {}
    for item in sc.mss:
        initial = infos[item.initial_ap] if item.initial_ap is not None else None
        mobility = LinearMobility(item.start_m, item.velocity_mps)
        node = Node(item.id, item.mac, mobility, None, channel=initial.channel if initial else 1)
        port = net.add_node(node)
        agent = MsAgent(item.id, item.mac, port, _scan_config(sc, item.mode),
                        item.handoff_threshold_dbm, item.mode, ms_timing, initial)
        node.agent = agent
        mss[item.id] = agent
        net.sim.schedule_at(item.start_ms, item.id, "ms-start", _powerer(node, agent, "start"))

    streams = {}
    for tr in sc.traffic:
        streams[tr.destination] = net.add_traffic(
            TrafficSource(tr.packet_interval_ms, tr.total_packets, tr.destination, tr.start_ms))
    return Simulation(sc, seed, net, aps, mss, streams, power_on)


def _powerer(node: Node, agent, method: str = "power_on"):
    def fire():
        node.powered = True
        getattr(agent, method)()
    return fire


def run_scenario(sc: Scenario, seed: Optional[int] = None,
                 record_log: bool = True) -> tuple[Metrics, list[str]]:
    sim = build(sc, seed, record_log)
    log_lines = sim.run()
    return sim.metrics(), log_lines


def check_expectations(sc: Scenario, metrics: Metrics) -> list[ExpectationResult]:
    out = []
    for e in sc.expect:
        if e.mode is not None and e.mode != metrics.mode:
            continue
        out.append(ExpectationResult(e, metrics.scalar(e.metric)))
    return out


# -- experiment helpers ----------------------------------------------------------


@dataclass
class VerificationRun:
    """Per-AP verification durations in the order APs ran, plus the LAN-wide total."""
    order: list[str]
    durations: list[float]
    cumulative: list[float]
    total: Optional[float]

    @property
    def non_increasing(self) -> bool:
        return all(a >= b for a, b in zip(self.durations, self.durations[1:]))


def measure_air_verification(sc: Scenario, seed: Optional[int] = None) -> VerificationRun:
    metrics, _ = run_scenario(sc, seed, record_log=False)
    done = [v for v in metrics.verifications if v.start is not None and v.end is not None]
    done.sort(key=lambda v: v.start)
    durations = [v.duration for v in done]
    first = done[0].start if done else 0.0
    cumulative = [round(v.end - first, 6) for v in done]
    return VerificationRun([v.ap for v in done], durations, cumulative, metrics.verification_time)


@dataclass
class LossComparison:
    andwc: Metrics
    baseline: Metrics

    @property
    def ratio(self) -> Optional[float]:
        """Baseline packet loss over ANDWC packet loss."""
        a = self.andwc.scalar("packets_lost")
        b = self.baseline.scalar("packets_lost")
        return None if not a else b / a


def measure_packet_loss(sc: Scenario, seed: Optional[int] = None,
                        baseline: Strategy = Strategy.BASELINE_FULL_SCAN) -> LossComparison:
    andwc, _ = run_scenario(sc.with_mode(Strategy.ANDWC), seed, record_log=False)
    base, _ = run_scenario(sc.with_mode(baseline), seed, record_log=False)
    return LossComparison(andwc, base)


def permuted(sc: Scenario, order: list[int], stagger_ms: float = 0.0) -> Scenario:
    """Same APs, powered on in ``order`` at ``stagger_ms`` intervals."""
    aps = [dataclasses.replace(sc.aps[i], power_on_ms=k * stagger_ms, power_on_window_ms=None)
           for k, i in enumerate(order)]
    return dataclasses.replace(sc, aps=aps)
