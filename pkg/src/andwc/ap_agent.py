"""Access-point side of ANDWC.

An AP powers on, collects every other AP's identity over the LAN, votes on
the ascending MAC order, and then verifies which of those APs it can hear
over the air. Verification runs one AP at a time: the lowest MAC starts and
each AP hands a PERMISSION packet to its successor when it is done. Verified
neighbours are sorted strongest-first and advertised in every beacon.

APs that join after voting learn from the current last AP that they are new
and queue behind it, so a late join never disturbs the running sequence.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

from .wire import (
    BROADCAST_MAC,
    IAPP_MULTICAST,
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
    IappPacket,
    MacAddress,
    MgmtFrame,
    NewNeighbourReq,
    NewNeighbourRes,
    Permission,
    ProbeReq,
    ProbeRes,
    quantize_rss,
)

log = logging.getLogger(__name__)

# stored for neighbours reported without any RSS reading
UNKNOWN_NEIGHBOUR_RSS = -128.0


class Phase(enum.Enum):
    COLLECTING = "collecting"
    VOTED = "voted"
    AIR_VERIFYING = "air_verifying"
    OPERATIONAL = "operational"


@dataclass
class ApTiming:
    collection_window_ms: float = 50.0
    air_frame_timeout_ms: float = 2.0
    air_retransmissions: int = 1
    channel_switch_ms: float = 0.0
    # request-to-response times as seen by the station, air time included
    auth_service_ms: float = 1.0
    assoc_service_ms: float = 1.0
    probe_response_ms: float = 1.0


def sort_neighbours(entries) -> list[ApInfoEntry]:
    """Strongest RSS first; equal RSS ordered by ascending MAC."""
    return sorted(entries, key=lambda e: (-e.rss, e.mac))


@dataclass
class ApState:
    self_info: ApInfoEntry
    phase: Phase = Phase.COLLECTING
    apinfo_list: dict[MacAddress, ApInfoEntry] = field(default_factory=dict)
    mac_list: list[MacAddress] = field(default_factory=list)
    next_mac: Optional[MacAddress] = None
    i_am_the_last: bool = False
    finished: bool = False
    collection_deadline: Optional[float] = None
    # set once a newAP response told us we joined after voting
    joined_late: bool = False
    pending_permission: Optional[Permission] = None

    @property
    def mac(self) -> MacAddress:
        return self.self_info.mac

    @property
    def real_neighbour_list(self) -> list[ApInfoEntry]:
        return sort_neighbours(e for e in self.apinfo_list.values() if e.real_neighbor)

    def successor(self) -> Optional[MacAddress]:
        return next((m for m in self.mac_list if m > self.mac), None)


class ApAgent:
    def __init__(self, info: ApInfoEntry, port, timing: Optional[ApTiming] = None):
        self.info = info.bare()
        self.port = port
        self.timing = timing or ApTiming()
        self.reset()

    def reset(self) -> None:
        """Forget everything, as after a power cycle."""
        self.state = ApState(self.info)
        self.phase_history: list[tuple[float, Phase]] = []
        self.verify_started: Optional[float] = None
        self.verify_finished: Optional[float] = None
        self.verified_peers: list[MacAddress] = []
        self.failed_peers: list[MacAddress] = []
        self.authenticated: set[MacAddress] = set()
        self.stations: set[MacAddress] = set()
        self.beacons_sent = 0
        self._visited: set[MacAddress] = set()
        self._target: Optional[MacAddress] = None
        self._air_timer = None
        self._beacon_timer = None
        self._deadline_timer = None
        self._pending_new: dict[MacAddress, Optional[float]] = {}

    # -- helpers ------------------------------------------------------------

    @property
    def mac(self) -> MacAddress:
        return self.info.mac

    def _set_phase(self, phase: Phase) -> None:
        self.state.phase = phase
        self.phase_history.append((self.port.now, phase))
        self.port.note("phase", phase.value)

    def _lan(self, packet: IappPacket, out: list) -> None:
        self.port.send_lan(packet)
        out.append(packet)

    def _air(self, frame: MgmtFrame) -> MgmtFrame:
        self.port.send_air(frame)
        return frame

    def _learn(self, entry: ApInfoEntry) -> None:
        """Add or refresh an APInfo entry, keeping any verification result."""
        if entry.mac == self.mac:
            return
        known = self.state.apinfo_list.get(entry.mac)
        if known is None:
            self.state.apinfo_list[entry.mac] = entry.bare()
        else:
            self.state.apinfo_list[entry.mac] = entry.with_measurement(known.real_neighbor, known.rss)

    def _mark(self, entry: ApInfoEntry, real: bool, rss: Optional[float]) -> None:
        if entry.mac == self.mac:
            return
        base = self.state.apinfo_list.get(entry.mac, entry)
        self.state.apinfo_list[entry.mac] = base.with_measurement(real, rss if real else None)
        self.port.note("mark", f"{entry.mac} real={real} rss={rss}")

    # -- information collection and voting ---------------------------------

    def power_on(self) -> list[IappPacket]:
        self._set_phase(Phase.COLLECTING)
        return self.start_collection()

    def start_collection(self) -> list[IappPacket]:
        st = self.state
        if st.phase is not Phase.COLLECTING or st.apinfo_list:
            raise RuntimeError("collection starts only from a fresh AP")
        st.collection_deadline = self.port.now + self.timing.collection_window_ms
        out: list[IappPacket] = []
        self._lan(ApInfoReq(self.info.ip, IAPP_MULTICAST, self.info), out)
        self._deadline_timer = self.port.timer(
            self.timing.collection_window_ms, "collection-deadline", self.on_collection_deadline)
        return out

    def handle_apinfo_req(self, pkt: ApInfoReq) -> list[IappPacket]:
        st = self.state
        caller = pkt.sender
        self._learn(caller)
        out: list[IappPacket] = []
        if not st.i_am_the_last:
            self._lan(ApInfoRes(self.info.ip, caller.ip, self.info, new_ap=False), out)
            return out
        # we are last in the sequence, so the caller joined after voting and queues behind us
        st.next_mac = caller.mac
        st.i_am_the_last = False
        self.port.note("new-ap", str(caller.mac))
        self._lan(ApInfoRes(self.info.ip, caller.ip, self.info, new_ap=True, i_am_the_last=True), out)
        if st.finished:
            self._lan(Permission(self.info.ip, caller.ip, i_am_the_last=True), out)
        return out

    def handle_apinfo_res(self, pkt: ApInfoRes) -> None:
        st = self.state
        if st.phase is not Phase.COLLECTING:
            log.info("%s: late APInfo response from %s ignored", self.mac, pkt.sender.mac)
            self.port.note("late-res", str(pkt.sender.mac))
            return
        self._learn(pkt.sender)
        if pkt.new_ap:
            st.i_am_the_last = True
            st.joined_late = True

    def on_collection_deadline(self) -> None:
        if self.finalize_voting():
            self.run_air_verification()
        elif self.state.pending_permission is not None:
            pkt, self.state.pending_permission = self.state.pending_permission, None
            self.handle_permission(pkt)

    def finalize_voting(self) -> bool:
        """Build the MAC list; True when this AP opens air verification."""
        st = self.state
        if st.phase is not Phase.COLLECTING:
            raise RuntimeError(f"voting from phase {st.phase}")
        st.mac_list = sorted(set(st.apinfo_list) | {self.mac})
        if not st.joined_late:
            st.next_mac = st.successor()
            st.i_am_the_last = st.next_mac is None
        self._set_phase(Phase.VOTED)
        return st.mac_list[0] == self.mac and not st.joined_late

    # -- air verification ---------------------------------------------------

    def handle_permission(self, pkt: Permission) -> None:
        st = self.state
        if st.phase is Phase.COLLECTING:
            st.pending_permission = pkt
            return
        if st.phase is not Phase.VOTED:
            log.info("%s: PERMISSION in phase %s ignored", self.mac, st.phase.value)
            self.port.note("permission-ignored", st.phase.value)
            return
        # a later joiner may already have claimed the successor slot
        if pkt.i_am_the_last and st.i_am_the_last:
            st.next_mac = None
        self.run_air_verification()

    def run_air_verification(self) -> None:
        self._set_phase(Phase.AIR_VERIFYING)
        self.verify_started = self.port.now
        self._visited = set()
        self._verify_next()

    def _verify_next(self) -> None:
        st = self.state
        target = next((e for e in st.apinfo_list.values()
                       if not e.real_neighbor and e.mac not in self._visited), None)
        if target is None:
            self._target = None
            self.complete_air_verification()
            return
        self._visited.add(target.mac)
        self._target = target.mac
        self.port.tune(target.channel)
        if self.timing.channel_switch_ms > 0:
            self.port.timer(self.timing.channel_switch_ms, "channel-switch",
                            lambda: self._send_req(target, 0))
        else:
            self._send_req(target, 0)

    def _send_req(self, target: ApInfoEntry, attempt: int) -> None:
        self._air(ApInfoReqFrame(self.mac, target.mac, target.channel, self.info))
        self._air_timer = self.port.timer(
            self.timing.air_frame_timeout_ms, "air-timeout",
            lambda: self._on_air_timeout(target, attempt), str(target.mac))

    def _on_air_timeout(self, target: ApInfoEntry, attempt: int) -> None:
        if attempt < self.timing.air_retransmissions:
            self._send_req(target, attempt + 1)
            return
        self._mark(target, False, None)
        self.failed_peers.append(target.mac)
        self._verify_next()

    def handle_air_frame(self, frame: MgmtFrame, rss: float) -> list[MgmtFrame]:
        st = self.state
        out: list[MgmtFrame] = []
        if isinstance(frame, ApInfoReqFrame):
            if frame.sender.mac not in st.apinfo_list:
                # heard over the air, so adjacent even though the LAN never told us
                self._mark(frame.sender, True, rss)
            out.append(self._air(ApInfoResFrame(self.mac, frame.src_mac, frame.channel, self.info,
                                                quantize_rss(rss))))
        elif isinstance(frame, ApInfoResFrame):
            if st.phase is not Phase.AIR_VERIFYING or frame.src_mac != self._target:
                return out
            self.port.cancel(self._air_timer)
            self._mark(frame.sender, True, frame.measured_rss_of_req)
            self.verified_peers.append(frame.src_mac)
            self._target = None
            out.append(self._air(ApInfoAckFrame(self.mac, frame.src_mac, frame.channel, self.info,
                                                quantize_rss(rss))))
            self.port.timer(self.port.air_delay_ms, "ack-sent", self._verify_next)
        elif isinstance(frame, ApInfoAckFrame):
            self._mark(frame.sender, True, frame.rss_of_response)
        return out

    def complete_air_verification(self) -> list[IappPacket]:
        st = self.state
        self.port.tune(self.info.channel)
        st.finished = True
        out: list[IappPacket] = []
        if st.i_am_the_last:
            st.next_mac = None
        else:
            nxt = st.apinfo_list.get(st.next_mac)
            if nxt is None:
                log.error("%s: no address for next AP %s", self.mac, st.next_mac)
            else:
                last = st.next_mac not in st.mac_list or st.next_mac == st.mac_list[-1]
                self._lan(Permission(self.info.ip, nxt.ip, i_am_the_last=last), out)
        self.verify_finished = self.port.now
        self._set_phase(Phase.OPERATIONAL)
        self.emit_beacon()
        return out

    def emit_beacon(self) -> Beacon:
        beacon = Beacon(self.mac, BROADCAST_MAC, self.info.channel, self.info,
                        tuple(self.state.real_neighbour_list))
        self._air(beacon)
        self.beacons_sent += 1
        self._beacon_timer = self.port.timer(self.info.beacon_interval, "beacon", self.emit_beacon)
        return beacon

    # -- station association --------------------------------------------------

    def _reply_after(self, service_ms: float, frame: MgmtFrame) -> MgmtFrame:
        delay = max(0.0, service_ms - 2 * self.port.air_delay_ms)
        self.port.timer(delay, "reply", lambda: self._air(frame), type(frame).__name__)
        return frame

    def handle_station(self, frame: MgmtFrame, rss: float = 0.0) -> list:
        if self.state.phase is not Phase.OPERATIONAL:
            return []
        ch = self.info.channel
        if isinstance(frame, ProbeReq):
            return [self._reply_after(self.timing.probe_response_ms,
                                      ProbeRes(self.mac, frame.src_mac, ch, self.info))]
        if isinstance(frame, AuthReq):
            self.authenticated.add(frame.ms_id)
            return [self._reply_after(self.timing.auth_service_ms,
                                      AuthRes(self.mac, frame.src_mac, ch, True))]
        if isinstance(frame, AssocReq):
            accepted = frame.ms_id in self.authenticated
            if accepted:
                self.stations.add(frame.ms_id)
            return [self._reply_after(self.timing.assoc_service_ms,
                                      AssocRes(self.mac, frame.src_mac, ch, accepted))]
        if isinstance(frame, ApInfoUpdateFrame):
            old = frame.old_ap
            self._learn(old)
            self._pending_new[old.mac] = old.rss
            out: list[IappPacket] = []
            self._lan(NewNeighbourReq(self.info.ip, old.ip,
                                      self.info.with_measurement(True, old.rss)), out)
            return out
        return []

    def handle_new_neighbour_req(self, pkt: NewNeighbourReq) -> list[IappPacket]:
        rss = pkt.sender.rss if pkt.sender.rss is not None else UNKNOWN_NEIGHBOUR_RSS
        self._mark(pkt.sender, True, rss)
        out: list[IappPacket] = []
        self._lan(NewNeighbourRes(self.info.ip, pkt.sender.ip,
                                  self.info.with_measurement(True, rss)), out)
        return out

    def handle_new_neighbour_res(self, pkt: NewNeighbourRes) -> None:
        rss = self._pending_new.pop(pkt.sender.mac, pkt.sender.rss)
        self._mark(pkt.sender, True, rss if rss is not None else UNKNOWN_NEIGHBOUR_RSS)

    # -- network entry points -------------------------------------------------

    def on_lan(self, pkt: IappPacket) -> None:
        if isinstance(pkt, ApInfoReq):
            self.handle_apinfo_req(pkt)
        elif isinstance(pkt, ApInfoRes):
            self.handle_apinfo_res(pkt)
        elif isinstance(pkt, Permission):
            self.handle_permission(pkt)
        elif isinstance(pkt, NewNeighbourReq):
            self.handle_new_neighbour_req(pkt)
        elif isinstance(pkt, NewNeighbourRes):
            self.handle_new_neighbour_res(pkt)

    def on_air(self, frame: MgmtFrame, rss: float) -> None:
        if isinstance(frame, (ApInfoReqFrame, ApInfoResFrame, ApInfoAckFrame)):
            self.handle_air_frame(frame, rss)
        else:
            self.handle_station(frame, rss)

    def receiving(self) -> bool:
        return False
