"""Standard 802.11 scanning: dwell rules, delay formulas and AP selection.

Everything here is pure. The mobile station drives the same dwell rule
frame by frame inside the simulator; ``run_active_scan`` evaluates it over a
snapshot of which APs would answer on which channel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .wire import ApInfoEntry, MacAddress

BAND_CHANNELS = {"bg11": 11, "a32": 32}
NON_OVERLAPPING_BG = (1, 6, 11)


class ScanMode(enum.Enum):
    PASSIVE = "passive"
    ACTIVE = "active"
    SELECTIVE_ACTIVE = "selective_active"


@dataclass(frozen=True)
class ScanConfig:
    channels: tuple[int, ...]
    min_channel_time: float = 20.0
    max_channel_time: float = 40.0
    beacon_interval: float = 100.0
    channel_switch_time: float = 0.0
    mode: ScanMode = ScanMode.ACTIVE
    selective_channels: tuple[int, ...] = NON_OVERLAPPING_BG

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ValueError("scan needs at least one channel")
        if self.min_channel_time > self.max_channel_time:
            raise ValueError("min_channel_time exceeds max_channel_time")
        if min(self.min_channel_time, self.beacon_interval, self.channel_switch_time) < 0:
            raise ValueError("scan times must be non-negative")
        if self.mode is ScanMode.SELECTIVE_ACTIVE and not self.scanned_channels:
            raise ValueError("selective scan leaves no channel to probe")

    @classmethod
    def for_band(cls, band: str, **kwargs) -> "ScanConfig":
        return cls(tuple(range(1, BAND_CHANNELS[band] + 1)), **kwargs)

    @property
    def scanned_channels(self) -> tuple[int, ...]:
        if self.mode is ScanMode.SELECTIVE_ACTIVE:
            return tuple(c for c in self.channels if c in self.selective_channels)
        return self.channels


@dataclass(frozen=True)
class ProbeResponder:
    ap: ApInfoEntry
    rss: float
    latency_ms: float = 1.0


@dataclass
class ChannelScan:
    channel: int
    dwell: float
    responders: list[tuple[ApInfoEntry, float]] = field(default_factory=list)


@dataclass
class ScanResult:
    channels: list[ChannelScan] = field(default_factory=list)
    channel_switch_time: float = 0.0

    @property
    def total_delay(self) -> float:
        return sum(c.dwell + self.channel_switch_time for c in self.channels)

    @property
    def probes_sent(self) -> int:
        return len(self.channels)

    def responders(self) -> list[tuple[ApInfoEntry, float]]:
        return [r for c in self.channels for r in c.responders]

    def occupied_channels(self) -> list[int]:
        return [c.channel for c in self.channels if c.responders]


def passive_scan_delay(cfg: ScanConfig) -> float:
    """Listen for one beacon interval on every channel."""
    if cfg.mode is not ScanMode.PASSIVE:
        raise ValueError(f"passive delay asked for a {cfg.mode.value} scan config")
    n = len(cfg.channels)
    return cfg.beacon_interval * n + cfg.channel_switch_time * n


def active_channel_dwell(cfg: ScanConfig, responses_before_min: int) -> float:
    if cfg.mode is ScanMode.PASSIVE:
        raise ValueError("dwell rule applies to active scans only")
    return cfg.max_channel_time if responses_before_min > 0 else cfg.min_channel_time


def run_active_scan(cfg: ScanConfig,
                    environment: Mapping[int, Iterable[ProbeResponder]]) -> ScanResult:
    """Probe each channel in order and apply the min/max dwell rule.

    A responder is heard when its latency fits in the dwell actually spent on
    the channel: answers later than MinChannelTime are missed on a channel
    that looked empty at MinChannelTime.
    """
    result = ScanResult(channel_switch_time=cfg.channel_switch_time)
    for ch in cfg.scanned_channels:
        answers = list(environment.get(ch, ()))
        early = sum(1 for r in answers if r.latency_ms <= cfg.min_channel_time)
        dwell = active_channel_dwell(cfg, early)
        heard = [(r.ap, r.rss) for r in answers if r.latency_ms <= dwell] if early else []
        result.channels.append(ChannelScan(ch, dwell, heard))
    return result


def rank_candidates(candidates: Iterable[tuple[ApInfoEntry, float]],
                    exclude: Iterable[MacAddress] = ()) -> list[tuple[ApInfoEntry, float]]:
    """Strongest first, ties by ascending MAC; the strongest reading per AP wins."""
    skip = set(exclude)
    best: dict[MacAddress, tuple[ApInfoEntry, float]] = {}
    for ap, rss in candidates:
        if ap.mac in skip:
            continue
        if ap.mac not in best or rss > best[ap.mac][1]:
            best[ap.mac] = (ap, rss)
    return sorted(best.values(), key=lambda pair: (-pair[1], pair[0].mac))


def select_best(result: ScanResult, current_rss: Optional[float], hysteresis: float,
                exclude: Iterable[MacAddress] = ()) -> Optional[ApInfoEntry]:
    """Best responder if it beats ``current_rss`` by more than ``hysteresis``.

    With no current link (``current_rss`` None) the strongest responder wins
    outright.
    """
    ranked = rank_candidates(result.responders(), exclude)
    if not ranked:
        return None
    ap, rss = ranked[0]
    if current_rss is not None and not rss - current_rss > hysteresis:
        return None
    return ap
