"""Mobile-station side: beacon caching, handoff trigger and candidate walk.

In ANDWC mode the station keeps the neighbour list from the last beacon of
its AP. When the link drops below the handoff threshold it authenticates
with the cached candidates in beacon order, taking the first one whose
fresh RSS is at least the RSS cached for it. Only when the list runs out
does it fall back to a full active scan, after which it reports its old AP
to the new one so both learn they are neighbours.

The baseline modes skip the cache and always scan.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

from . import scanning
from .scanning import ChannelScan, ScanConfig, ScanResult
from .wire import (
    BROADCAST_MAC,
    ApInfoEntry,
    ApInfoUpdateFrame,
    AssocReq,
    AssocRes,
    AuthReq,
    AuthRes,
    Beacon,
    MacAddress,
    MgmtFrame,
    ProbeReq,
    ProbeRes,
    quantize_rss,
)

log = logging.getLogger(__name__)


class MsMode(enum.Enum):
    ASSOCIATED = "associated"
    HANDING_OFF = "handing_off"
    FULL_SCAN = "full_scan"
    UNASSOCIATED = "unassociated"


class Strategy(enum.Enum):
    ANDWC = "andwc"
    BASELINE_FULL_SCAN = "baseline_full_scan"
    BASELINE_SELECTIVE = "baseline_selective"


@dataclass
class MsTiming:
    # 0.5 ms per try puts one failed candidate (try + retry) at about 1 ms
    auth_timeout_ms: float = 0.5
    auth_retransmissions: int = 1
    rss_sample_interval_ms: float = 1.0
    rescan_backoff_ms: float = 100.0
    hysteresis_db: float = 5.0
    channel_switch_ms: float = 0.0


@dataclass
class MsState:
    handoff_threshold: float
    associated: Optional[MacAddress] = None
    handoff_list: list[ApInfoEntry] = field(default_factory=list)
    mode: MsMode = MsMode.UNASSOCIATED
    index: int = 0
    retries_remaining: int = 0
    link_rss: Optional[float] = None
    beacon_seen: bool = False


@dataclass
class HandoffRecord:
    ms: str
    strategy: str
    trigger_time: float
    from_ap: Optional[MacAddress]
    completion_time: Optional[float] = None
    to_ap: Optional[MacAddress] = None
    candidates_tried: int = 0
    auth_requests: int = 0
    probes_sent: int = 0
    full_scan: bool = False
    scan_delay: Optional[float] = None

    @property
    def latency(self) -> Optional[float]:
        if self.completion_time is None:
            return None
        return round(self.completion_time - self.trigger_time, 6)


class MsAgent:
    def __init__(self, name: str, mac: MacAddress, port, scan_cfg: ScanConfig,
                 handoff_threshold: float, strategy: Strategy = Strategy.ANDWC,
                 timing: Optional[MsTiming] = None, initial_ap: Optional[ApInfoEntry] = None):
        self.name = name
        self.mac = mac
        self.port = port
        self.scan_cfg = scan_cfg
        self.strategy = strategy
        self.timing = timing or MsTiming()
        self.initial_ap = initial_ap
        self.state = MsState(handoff_threshold)
        self.current_ap: Optional[ApInfoEntry] = None
        self.handoffs: list[HandoffRecord] = []
        self.failed_handoffs: list[HandoffRecord] = []
        self.probes_sent = 0
        self._record: Optional[HandoffRecord] = None
        self._candidates: list[ApInfoEntry] = []
        self._compare_saved = True
        self._stage: Optional[str] = None
        self._timer = None
        self._scan: Optional[ScanResult] = None
        self._scan_idx = 0
        self._scan_started = 0.0
        self._chan: Optional[ChannelScan] = None
        self._old_rss: Optional[float] = None
        self._quiet_until = 0.0

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        if self.initial_ap is not None:
            self._associate(self.initial_ap)
        else:
            self.full_scan()
        self.port.timer(self.timing.rss_sample_interval_ms, "rss-sample", self._sample)

    def receiving(self) -> bool:
        return self.state.mode is MsMode.ASSOCIATED and self.state.associated is not None

    def _associate(self, ap: ApInfoEntry) -> None:
        st = self.state
        st.associated = ap.mac
        st.mode = MsMode.ASSOCIATED
        st.handoff_list = []
        st.beacon_seen = False
        st.link_rss = None
        self.current_ap = ap
        self.port.tune(ap.channel)

    def _sample(self) -> None:
        self.port.timer(self.timing.rss_sample_interval_ms, "rss-sample", self._sample)
        st = self.state
        if st.mode is not MsMode.ASSOCIATED or self.port.now < self._quiet_until:
            return
        rss = self.port.rss_to(st.associated)
        st.link_rss = rss
        if st.beacon_seen:
            self.check_trigger(rss if rss is not None else float("-inf"))

    # -- beacon cache and trigger ---------------------------------------------

    def handle_beacon(self, beacon: Beacon, measured_rss: float) -> None:
        st = self.state
        if st.mode is not MsMode.ASSOCIATED or beacon.src_mac != st.associated:
            return
        st.handoff_list = list(beacon.neighbor_list)
        st.link_rss = measured_rss
        st.beacon_seen = True

    def check_trigger(self, measured_rss: float) -> bool:
        st = self.state
        if st.mode is not MsMode.ASSOCIATED or not measured_rss < st.handoff_threshold:
            return False
        self._old_rss = measured_rss
        self._record = HandoffRecord(self.name, self.strategy.value, self.port.now, st.associated)
        self.port.note("handoff-trigger", f"rss={measured_rss:.2f}")
        if self.strategy is Strategy.ANDWC and st.handoff_list:
            self._walk(list(st.handoff_list), compare_saved=True)
        else:
            self.full_scan()
        return True

    # -- candidate walk -------------------------------------------------------

    def _walk(self, candidates: list[ApInfoEntry], compare_saved: bool) -> None:
        self._candidates = candidates
        self._compare_saved = compare_saved
        self.state.mode = MsMode.HANDING_OFF
        self.state.index = 0
        self._try_candidate()

    @property
    def candidate(self) -> ApInfoEntry:
        return self._candidates[self.state.index]

    def _try_candidate(self) -> None:
        cand = self.candidate
        if self._record is not None:
            self._record.candidates_tried += 1
        self.port.tune(cand.channel)
        self.state.retries_remaining = self.timing.auth_retransmissions
        self._stage = "auth"
        if self.timing.channel_switch_ms > 0:
            self._timer = self.port.timer(self.timing.channel_switch_ms, "channel-switch", self._send_stage)
        else:
            self._send_stage()

    def _send_stage(self) -> None:
        cand = self.candidate
        if self._stage == "auth":
            frame = AuthReq(self.mac, cand.mac, cand.channel, self.mac)
            if self._record is not None:
                self._record.auth_requests += 1
        else:
            frame = AssocReq(self.mac, cand.mac, cand.channel, self.mac)
        self.port.send_air(frame)
        self._timer = self.port.timer(self.timing.auth_timeout_ms, f"{self._stage}-timeout",
                                      self._on_timeout, str(cand.mac))

    def _on_timeout(self) -> None:
        if self.state.retries_remaining > 0:
            self.state.retries_remaining -= 1
            self._send_stage()
        else:
            # a response landing exactly on the deadline still counts
            self._timer = self.port.timer(0.0, "give-up", self.advance_candidate,
                                          str(self.candidate.mac))

    def handle_auth_response(self, res: AuthRes, new_rss: float) -> None:
        self.port.cancel(self._timer)
        saved = self.candidate.rss
        fresh = quantize_rss(new_rss)
        if res.accepted and (not self._compare_saved or saved is None or fresh >= saved):
            self._stage = "assoc"
            self.state.retries_remaining = self.timing.auth_retransmissions
            self._send_stage()
        else:
            self.port.note("candidate-rejected", f"{self.candidate.mac} new={fresh} saved={saved}")
            self.advance_candidate()

    def handle_assoc_response(self, res: AssocRes) -> None:
        self.port.cancel(self._timer)
        if res.accepted:
            self._complete(self.candidate)
        else:
            self.advance_candidate()

    def advance_candidate(self) -> None:
        self._stage = None
        self.state.index += 1
        if self.state.index < len(self._candidates):
            self._try_candidate()
        elif self._compare_saved:
            self.full_scan()
        else:
            self._scan_failed()

    def _complete(self, ap: ApInfoEntry) -> None:
        old = self.current_ap
        rec = self._record
        self._stage = None
        self._associate(ap)
        if rec is not None:
            rec.completion_time = self.port.now
            rec.to_ap = ap.mac
            self.handoffs.append(rec)
            self.port.note("handoff-complete", f"{rec.from_ap}->{ap.mac} {rec.latency} ms")
        self._record = None
        if (self.strategy is Strategy.ANDWC and rec is not None and rec.full_scan
                and old is not None and old.mac != ap.mac):
            rss = self._old_rss if self._old_rss not in (None, float("-inf")) else None
            report = old.with_measurement(True, rss if rss is not None else -128.0)
            self.port.send_air(ApInfoUpdateFrame(self.mac, ap.mac, ap.channel, report))

    # -- full scan ------------------------------------------------------------

    def full_scan(self) -> None:
        self.state.mode = MsMode.FULL_SCAN
        self._stage = None
        if self._record is not None:
            self._record.full_scan = True
        self._scan = ScanResult(channel_switch_time=self.scan_cfg.channel_switch_time)
        self._scan_started = self.port.now
        self._scan_idx = -1
        self._next_channel()

    def _next_channel(self) -> None:
        self._scan_idx += 1
        channels = self.scan_cfg.scanned_channels
        if self._scan_idx >= len(channels):
            self._scan_done()
            return
        ch = channels[self._scan_idx]
        self.port.tune(ch)
        switch = self.scan_cfg.channel_switch_time
        if switch > 0:
            self._timer = self.port.timer(switch, "channel-switch", lambda: self._probe(ch))
        else:
            self._probe(ch)

    def _probe(self, ch: int) -> None:
        self._chan = ChannelScan(ch, 0.0)
        self.port.send_air(ProbeReq(self.mac, BROADCAST_MAC, ch))
        self.probes_sent += 1
        if self._record is not None:
            self._record.probes_sent += 1
        self._timer = self.port.timer(self.scan_cfg.min_channel_time, "min-channel-time",
                                      self._at_min_channel_time)

    def _at_min_channel_time(self) -> None:
        dwell = scanning.active_channel_dwell(self.scan_cfg, len(self._chan.responders))
        rest = dwell - self.scan_cfg.min_channel_time
        if rest > 0:
            self._timer = self.port.timer(rest, "max-channel-time", lambda: self._end_channel(dwell))
        else:
            self._end_channel(dwell)

    def _end_channel(self, dwell: float) -> None:
        self._chan.dwell = dwell
        self._scan.channels.append(self._chan)
        self._chan = None
        self._next_channel()

    def _scan_done(self) -> None:
        scan = self._scan
        if self._record is not None:
            self._record.scan_delay = round(self.port.now - self._scan_started, 6)
        old = self.state.associated
        exclude = [old] if old is not None else []
        current = None
        if self.strategy is not Strategy.ANDWC and old is not None:
            current = self.port.rss_to(old)
        ranked = scanning.rank_candidates(scan.responders(), exclude)
        best = scanning.select_best(scan, current, self.timing.hysteresis_db, exclude)
        if best is None:
            self._scan_failed()
            return
        eligible = [ap for ap, rss in ranked
                    if current is None or rss - current > self.timing.hysteresis_db]
        self._walk(eligible, compare_saved=False)

    def _scan_failed(self) -> None:
        st = self.state
        self._stage = None
        if st.associated is not None and self.port.rss_to(st.associated) is not None:
            # no better AP; keep the current link and hold off the next trigger
            if self._record is not None:
                self.failed_handoffs.append(self._record)
            self._record = None
            assert self.current_ap is not None
            st.mode = MsMode.ASSOCIATED
            self.port.tune(self.current_ap.channel)
            self._quiet_until = self.port.now + self.timing.rescan_backoff_ms
            return
        st.associated = None
        st.mode = MsMode.UNASSOCIATED
        self.port.note("unassociated", "")
        self._timer = self.port.timer(self.timing.rescan_backoff_ms, "rescan", self.full_scan)

    # -- network entry point --------------------------------------------------

    def on_air(self, frame: MgmtFrame, rss: float) -> None:
        st = self.state
        if isinstance(frame, Beacon):
            self.handle_beacon(frame, rss)
        elif isinstance(frame, ProbeRes):
            if st.mode is MsMode.FULL_SCAN and self._chan is not None and frame.channel == self._chan.channel:
                self._chan.responders.append((frame.ap, rss))
        elif st.mode is not MsMode.HANDING_OFF or frame.src_mac != self.candidate.mac:
            return
        elif isinstance(frame, AuthRes) and self._stage == "auth":
            self.handle_auth_response(frame, rss)
        elif isinstance(frame, AssocRes) and self._stage == "assoc":
            self.handle_assoc_response(frame)

    def on_lan(self, packet) -> None:
        pass
