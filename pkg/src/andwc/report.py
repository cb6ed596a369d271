"""CSV output. Column orders are fixed; floats are written with 3 decimals."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Union

from .runner import Metrics

HANDOFF_COLUMNS = (
    "scenario", "seed", "ms", "strategy", "trigger_ms", "completion_ms", "latency_ms",
    "from_ap", "to_ap", "candidates_tried", "auth_requests", "probes_sent", "full_scan",
    "scan_delay_ms",
)

SUMMARY_COLUMNS = (
    "scenario", "seed", "record", "subject", "sequence", "start_ms", "end_ms", "duration_ms",
    "verified", "failed", "packets_sent", "packets_delivered", "packets_lost", "value",
)

COMPARE_COLUMNS = (
    "scenario", "seed", "strategy", "handoffs", "mean_latency_ms", "probes_sent",
    "packets_sent", "packets_lost",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.3f}"
    return str(v)


def _write(path: Path, columns: Iterable[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def handoff_rows(m: Metrics) -> list[dict]:
    return [{
        "scenario": m.scenario, "seed": m.seed, "ms": h.ms, "strategy": h.strategy,
        "trigger_ms": h.trigger_time, "completion_ms": h.completion_time, "latency_ms": h.latency,
        "from_ap": h.from_ap, "to_ap": h.to_ap, "candidates_tried": h.candidates_tried,
        "auth_requests": h.auth_requests, "probes_sent": h.probes_sent, "full_scan": h.full_scan,
        "scan_delay_ms": h.scan_delay,
    } for h in m.handoffs]


def summary_rows(m: Metrics) -> list[dict]:
    rows = []
    base = {"scenario": m.scenario, "seed": m.seed}
    for v in m.verifications:
        rows.append({**base, "record": "ap_verification", "subject": v.ap,
                     "sequence": v.sequence, "start_ms": v.start, "end_ms": v.end,
                     "duration_ms": v.duration, "verified": v.verified, "failed": v.failed})
    rows.append({**base, "record": "lan_verification", "subject": "all",
                 "duration_ms": m.verification_time, "value": m.air_verification_frames})
    for s in m.streams:
        rows.append({**base, "record": "stream", "subject": s.destination,
                     "packets_sent": s.sent, "packets_delivered": s.delivered,
                     "packets_lost": s.lost})
    return rows


def summary_path(path: Union[str, Path]) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".summary" + (p.suffix or ".csv"))


def emit_csv(m: Metrics, path: Union[str, Path]) -> tuple[Path, Path]:
    """Write the handoff table to ``path`` and per-AP/per-stream rows next to it."""
    path = Path(path)
    _write(path, HANDOFF_COLUMNS, handoff_rows(m))
    side = summary_path(path)
    _write(side, SUMMARY_COLUMNS, summary_rows(m))
    return path, side


def compare_rows(runs: list[Metrics]) -> list[dict]:
    rows = []
    for m in runs:
        rows.append({
            "scenario": m.scenario, "seed": m.seed, "strategy": m.mode,
            "handoffs": len(m.handoffs), "mean_latency_ms": m.scalar("mean_handoff_latency_ms"),
            "probes_sent": m.probes_sent, "packets_sent": int(m.scalar("packets_sent")),
            "packets_lost": int(m.scalar("packets_lost")),
        })
    return rows


def emit_compare_csv(runs: list[Metrics], path: Union[str, Path]) -> Path:
    path = Path(path)
    _write(path, COMPARE_COLUMNS, compare_rows(runs))
    return path


def format_table(columns: Iterable[str], rows: list[dict]) -> str:
    cols = list(columns)
    cells = [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines)
