"""Scenario files: YAML with explicit units in key names.

A scenario lists the APs (identity, channel, position, power-on time), the
mobile stations (path, threshold, handoff strategy), UDP streams, timing
constants and optional ``expect`` ranges checked after the run. Validation
errors name the offending field, e.g. ``aps[2].channel``.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .ms_agent import Strategy
from .scanning import BAND_CHANNELS, NON_OVERLAPPING_BG
from .simnet import RadioModel
from .wire import MAX_SSID_BYTES, MacAddress

_MISSING = object()


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class Timing:
    beacon_interval_ms: int = 100
    collection_window_ms: float = 50.0
    air_frame_timeout_ms: float = 2.0
    air_retransmissions: int = 1
    auth_service_ms: float = 1.0
    assoc_service_ms: float = 1.0
    auth_timeout_ms: float = 0.5
    auth_retransmissions: int = 1
    probe_response_ms: float = 1.0
    min_channel_time_ms: float = 20.0
    max_channel_time_ms: float = 40.0
    channel_switch_ms: float = 0.0
    lan_latency_ms: float = 0.2
    rss_sample_interval_ms: float = 1.0
    rescan_backoff_ms: float = 100.0
    hysteresis_db: float = 5.0


@dataclass
class ApSpec:
    id: str
    mac: MacAddress
    ip: IPv4Address
    channel: int
    position_m: tuple[float, float]
    ssid: str = "andwc"
    power_on_ms: float = 0.0
    power_on_window_ms: Optional[tuple[float, float]] = None


@dataclass
class MsSpec:
    id: str
    mac: MacAddress
    mode: Strategy
    start_m: tuple[float, float]
    velocity_mps: tuple[float, float]
    handoff_threshold_dbm: float
    initial_ap: Optional[str] = None
    start_ms: float = 0.0


@dataclass
class TrafficSpec:
    destination: str
    packet_interval_ms: float
    total_packets: int
    start_ms: float = 0.0


@dataclass
class Expectation:
    metric: str
    min: Optional[float] = None
    max: Optional[float] = None
    # None applies to every run; otherwise only to runs in that MS mode
    mode: Optional[str] = None


@dataclass
class Scenario:
    name: str
    band: str
    duration_ms: float
    aps: list[ApSpec]
    mss: list[MsSpec] = field(default_factory=list)
    traffic: list[TrafficSpec] = field(default_factory=list)
    timing: Timing = field(default_factory=Timing)
    radio: RadioModel = field(default_factory=RadioModel)
    seed: int = 0
    selective_channels: tuple[int, ...] = NON_OVERLAPPING_BG
    expect: list[Expectation] = field(default_factory=list)
    description: str = ""

    def with_mode(self, mode: Strategy) -> "Scenario":
        return dataclasses.replace(
            self, mss=[dataclasses.replace(ms, mode=mode) for ms in self.mss])

    @property
    def declared_mode(self) -> Optional[Strategy]:
        return self.mss[0].mode if self.mss else None


# -- parsing -------------------------------------------------------------------


class _Fields:
    def __init__(self, raw: Any, path: str):
        if not isinstance(raw, dict):
            raise ScenarioError(path, f"expected a mapping, got {type(raw).__name__}")
        self.raw = raw
        self.path = path
        self.used: set[str] = set()

    def sub(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key: str, conv, default=_MISSING):
        self.used.add(key)
        if key not in self.raw or self.raw[key] is None:
            if default is _MISSING:
                raise ScenarioError(self.sub(key), "required field missing")
            return default
        try:
            return conv(self.raw[key])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(self.sub(key), str(exc)) from None

    def done(self) -> None:
        extra = sorted(set(self.raw) - self.used)
        if extra:
            raise ScenarioError(self.sub(extra[0]), "unknown field")


def _number(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _nonneg(v) -> float:
    x = _number(v)
    if x < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return x


def _positive(v) -> float:
    x = _number(v)
    if x <= 0:
        raise ValueError(f"must be > 0, got {v}")
    return x


def _integer(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    return v


def _count(v) -> int:
    n = _integer(v)
    if n < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return n


def _text(v) -> str:
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _pair(v) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ValueError(f"expected [x, y], got {v!r}")
    return (_number(v[0]), _number(v[1]))


def _window(v) -> tuple[float, float]:
    lo, hi = _pair(v)
    if not 0 <= lo <= hi:
        raise ValueError(f"window must satisfy 0 <= low <= high, got {v!r}")
    return (lo, hi)


def _mac(v) -> MacAddress:
    return MacAddress.parse(_text(v))


def _ip(v) -> IPv4Address:
    return IPv4Address(_text(v))


def _mode(v) -> Strategy:
    try:
        return Strategy(_text(v))
    except ValueError:
        raise ValueError(f"mode must be one of {[s.value for s in Strategy]}, got {v!r}") from None


def _timing(raw, path) -> Timing:
    f = _Fields(raw, path)
    kwargs = {}
    for fld in dataclasses.fields(Timing):
        if fld.name == "beacon_interval_ms":
            conv = _integer
        elif fld.name.endswith("retransmissions"):
            conv = _count
        else:
            conv = _nonneg
        kwargs[fld.name] = f.get(fld.name, conv, fld.default)
    f.done()
    t = Timing(**kwargs)
    if not 0 < t.beacon_interval_ms <= 0xFFFF:
        raise ScenarioError(f.sub("beacon_interval_ms"), "must be in 1..65535")
    if t.min_channel_time_ms > t.max_channel_time_ms:
        raise ScenarioError(f.sub("min_channel_time_ms"), "exceeds max_channel_time_ms")
    if t.rss_sample_interval_ms <= 0:
        raise ScenarioError(f.sub("rss_sample_interval_ms"), "must be > 0")
    return t


def _radio(raw, path) -> RadioModel:
    f = _Fields(raw, path)
    radio = RadioModel(
        tx_power_dbm=f.get("tx_power_dbm", _number, 20.0),
        path_loss_exponent=f.get("path_loss_exponent", _positive, 3.0),
        reference_loss_db=f.get("reference_loss_db", _number, 40.0),
        range_cutoff_dbm=f.get("range_cutoff_dbm", _number, -90.0),
        air_delay_ms=f.get("air_delay_ms", _nonneg, 0.1),
        frame_loss_probability=f.get("frame_loss_probability", _nonneg, 0.0),
    )
    f.done()
    if radio.frame_loss_probability > 1:
        raise ScenarioError(f.sub("frame_loss_probability"), "must be <= 1")
    return radio


def parse_scenario(raw: Any, source: str = "<scenario>") -> Scenario:
    top = _Fields(raw, "")
    band = top.get("band", _text, "bg11")
    if band not in BAND_CHANNELS:
        raise ScenarioError("band", f"must be one of {sorted(BAND_CHANNELS)}, got {band!r}")
    n_channels = BAND_CHANNELS[band]

    aps = []
    raw_aps = top.get("aps", lambda v: v)
    if not isinstance(raw_aps, list) or not raw_aps:
        raise ScenarioError("aps", "needs a non-empty list of APs")
    for i, item in enumerate(raw_aps):
        f = _Fields(item, f"aps[{i}]")
        ap = ApSpec(
            id=f.get("id", _text),
            mac=f.get("mac", _mac),
            ip=f.get("ip", _ip),
            channel=f.get("channel", _integer),
            position_m=f.get("position_m", _pair),
            ssid=f.get("ssid", _text, "andwc"),
            power_on_ms=f.get("power_on_ms", _nonneg, 0.0),
            power_on_window_ms=f.get("power_on_window_ms", _window, None),
        )
        f.done()
        if not 1 <= ap.channel <= n_channels:
            raise ScenarioError(f.sub("channel"), f"{ap.channel} not valid for band {band}")
        if len(ap.ssid.encode()) > MAX_SSID_BYTES:
            raise ScenarioError(f.sub("ssid"), f"longer than {MAX_SSID_BYTES} bytes")
        aps.append(ap)

    mss = []
    for i, item in enumerate(top.get("mss", lambda v: v, []) or []):
        f = _Fields(item, f"mss[{i}]")
        mss.append(MsSpec(
            id=f.get("id", _text),
            mac=f.get("mac", _mac),
            mode=f.get("mode", _mode, Strategy.ANDWC),
            start_m=f.get("start_m", _pair),
            velocity_mps=f.get("velocity_mps", _pair, (0.0, 0.0)),
            handoff_threshold_dbm=f.get("handoff_threshold_dbm", _number),
            initial_ap=f.get("initial_ap", _text, None),
            start_ms=f.get("start_ms", _nonneg, 0.0),
        ))
        f.done()

    traffic = []
    for i, item in enumerate(top.get("traffic", lambda v: v, []) or []):
        f = _Fields(item, f"traffic[{i}]")
        traffic.append(TrafficSpec(
            destination=f.get("destination", _text),
            packet_interval_ms=f.get("packet_interval_ms", _positive),
            total_packets=f.get("total_packets", _count),
            start_ms=f.get("start_ms", _nonneg, 0.0),
        ))
        f.done()

    expect = []
    for i, item in enumerate(top.get("expect", lambda v: v, []) or []):
        f = _Fields(item, f"expect[{i}]")
        e = Expectation(
            metric=f.get("metric", _text),
            min=f.get("min", _number, None),
            max=f.get("max", _number, None),
            mode=f.get("mode", _text, None),
        )
        f.done()
        if e.mode is not None and e.mode not in [s.value for s in Strategy]:
            raise ScenarioError(f.sub("mode"), f"unknown mode {e.mode!r}")
        expect.append(e)

    timing = _timing(top.get("timing", lambda v: v, {}) or {}, "timing")
    radio = _radio(top.get("radio", lambda v: v, {}) or {}, "radio")
    selective = tuple(top.get("selective_channels", lambda v: [_integer(c) for c in v],
                              list(NON_OVERLAPPING_BG)))
    sc = Scenario(
        name=top.get("name", _text, Path(source).stem),
        band=band,
        duration_ms=top.get("duration_ms", _positive),
        aps=aps, mss=mss, traffic=traffic, timing=timing, radio=radio,
        seed=top.get("seed", _integer, 0),
        selective_channels=selective,
        expect=expect,
        description=top.get("description", _text, ""),
    )
    top.done()
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    """Cross-field checks: unique ids and addresses, references, coverage of traffic."""
    seen: dict[str, str] = {}
    for label, items in (("aps", sc.aps), ("mss", sc.mss)):
        for i, item in enumerate(items):
            if item.id in seen:
                raise ScenarioError(f"{label}[{i}].id", f"duplicate id {item.id!r}")
            seen[item.id] = label
    macs: set = set()
    ips: set = set()
    for i, ap in enumerate(sc.aps):
        if ap.mac in macs:
            raise ScenarioError(f"aps[{i}].mac", f"duplicate MAC {ap.mac}")
        if ap.ip in ips:
            raise ScenarioError(f"aps[{i}].ip", f"duplicate IP {ap.ip}")
        macs.add(ap.mac)
        ips.add(ap.ip)
    for i, ms in enumerate(sc.mss):
        if ms.mac in macs:
            raise ScenarioError(f"mss[{i}].mac", f"duplicate MAC {ms.mac}")
        macs.add(ms.mac)
        if ms.initial_ap is not None and seen.get(ms.initial_ap) != "aps":
            raise ScenarioError(f"mss[{i}].initial_ap", f"no AP with id {ms.initial_ap!r}")
    for i, tr in enumerate(sc.traffic):
        if seen.get(tr.destination) != "mss":
            raise ScenarioError(f"traffic[{i}].destination", f"no MS with id {tr.destination!r}")
        end = tr.start_ms + tr.packet_interval_ms * max(tr.total_packets - 1, 0)
        if end > sc.duration_ms:
            raise ScenarioError(f"traffic[{i}]",
                                f"stream ends at {end:g} ms, after duration_ms {sc.duration_ms:g}")
    from .runner import METRIC_NAMES  # runner imports this module
    for i, e in enumerate(sc.expect):
        if e.metric not in METRIC_NAMES:
            raise ScenarioError(f"expect[{i}].metric", f"unknown metric {e.metric!r}")
    n_channels = BAND_CHANNELS[sc.band]
    for c in sc.selective_channels:
        if not 1 <= c <= n_channels:
            raise ScenarioError("selective_channels", f"{c} not valid for band {sc.band}")


# -- loading -------------------------------------------------------------------


def bundled_names() -> list[str]:
    root = importlib.resources.files("andwc") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(source: Union[str, Path]) -> Scenario:
    """Load a scenario from a file path, or by bundled name such as ``allon3``."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    elif str(source) in bundled_names():
        text = (importlib.resources.files("andwc") / "scenarios" / f"{source}.yaml").read_text()
    else:
        raise ScenarioError("", f"no scenario file or bundled scenario named {str(source)!r}")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("", f"YAML error: {exc}") from None
    return parse_scenario(raw, str(source))
