"""
Per-chunk event log with CSV export.

Times are seconds since session start (the client's capture clock origin).
Two annotation rows ride along with the pipeline events: ``dropped`` marks
chunks lost or concealed on the way, ``enhanced`` marks chunks that carry
output of at least one enhancement window.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from src.utils.errors import InvalidInput

logger = logging.getLogger(__name__)

EVENTS = (
    "captured",
    "sent",
    "arrived_server",
    "preprocessed",
    "enhance_start",
    "enhance_done",
    "sent_back",
    "arrived_client",
    "played",
)
ANNOTATIONS = ("dropped", "enhanced")
EVENT_RANK = {name: i for i, name in enumerate(EVENTS + ANNOTATIONS)}
CSV_COLUMNS = ("chunk_seq", "event", "t")


@dataclass(frozen=True)
class EventRecord:
    chunk_seq: int
    event: str
    t: float


class EventLog:
    """
    Append-only record of pipeline events.

    Args:
        t_chunk: Chunk duration in seconds, kept for gap analysis
    """

    def __init__(self, t_chunk: float, n_chunks: Optional[int] = None):
        self.t_chunk = t_chunk
        self.n_chunks = n_chunks
        self.records: list[EventRecord] = []
        self._by_seq: dict[int, dict[str, float]] = {}
        self.dropped: set[int] = set()
        self.enhanced: set[int] = set()

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return self.t_chunk == other.t_chunk and self.records == other.records

    __hash__ = None

    def record(self, seq: int, event: str, t: float) -> None:
        if event not in EVENT_RANK:
            raise InvalidInput(f"Unknown event {event!r}")
        self.records.append(EventRecord(seq, event, t))
        if event == "dropped":
            self.dropped.add(seq)
        elif event == "enhanced":
            self.enhanced.add(seq)
        else:
            self._by_seq.setdefault(seq, {})[event] = t

    def record_us(self, seq: int, event: str, t_us: int) -> None:
        self.record(seq, event, t_us / 1e6)

    def times(self, seq: int) -> dict[str, float]:
        return dict(self._by_seq.get(seq, {}))

    def event_times(self, event: str) -> dict[int, float]:
        return {seq: ev[event] for seq, ev in self._by_seq.items() if event in ev}

    @property
    def seqs(self) -> list[int]:
        known = set(self._by_seq) | self.dropped
        return sorted(known)

    def played(self) -> list[tuple[int, float]]:
        """(seq, t) of played chunks in playback order."""
        return sorted(((s, t) for s, t in self.event_times("played").items()), key=lambda p: (p[1], p[0]))

    def monotonicity_violations(self) -> list[int]:
        """Chunks whose recorded events go backwards in pipeline order."""
        bad = []
        for seq, ev in self._by_seq.items():
            ordered = [ev[name] for name in EVENTS if name in ev]
            if any(b < a for a, b in zip(ordered, ordered[1:])):
                bad.append(seq)
        return sorted(bad)

    def sorted_records(self) -> list[EventRecord]:
        return sorted(self.records, key=lambda r: (r.chunk_seq, EVENT_RANK[r.event], r.t))

    # ===========================================
    # CSV
    # ===========================================

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.sorted_records():
                writer.writerow((r.chunk_seq, r.event, f"{r.t:.6f}"))
        logger.debug(f"Wrote {len(self.records)} events to {path}")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], t_chunk: float) -> "EventLog":
        log = cls(t_chunk)
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise InvalidInput(f"{path} is not an event log (columns {reader.fieldnames})")
            for row in reader:
                log.record(int(row["chunk_seq"]), row["event"], float(row["t"]))
        return log

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, str, float]], t_chunk: float) -> "EventLog":
        log = cls(t_chunk)
        for seq, event, t in records:
            log.record(seq, event, t)
        return log
