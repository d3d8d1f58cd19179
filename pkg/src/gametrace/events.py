"""Raw gameplay event schema and streaming ingestion.

Event files are UTF-8 CSV with a header row; columns are matched by name,
not position, and empty cells mean "absent". Ingestion is a generator and
never materializes the file: memory stays bounded by one row regardless of
file size.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from math import isfinite
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Sequence

from .errors import (
    DataError,
    DuplicateLabelError,
    MissingColumnError,
    QuestionOutOfRangeError,
)

logger = logging.getLogger(__name__)

EVENT_COLUMNS = (
    "session_id",
    "index",
    "elapsed_time",
    "event_name",
    "name",
    "level",
    "page",
    "room_coor_x",
    "room_coor_y",
    "screen_coor_x",
    "screen_coor_y",
    "hover_duration",
    "text",
    "fqid",
    "room_fqid",
    "text_fqid",
    "fullscreen",
    "hq",
    "music",
    "level_group",
)

LABEL_COLUMNS = ("session_id", "question", "correct")

LEVEL_GROUPS = ("0-4", "5-12", "13-22")

# Type classes drive which aggregator kinds a column accepts.
REAL_COLUMNS = frozenset({"room_coor_x", "room_coor_y", "screen_coor_x", "screen_coor_y"})
NUMERIC_COLUMNS = REAL_COLUMNS | frozenset(
    {
        "index",
        "elapsed_time",
        "level",
        "page",
        "hover_duration",
        "fullscreen",
        "hq",
        "music",
    }
)
CATEGORICAL_COLUMNS = frozenset(
    {"session_id", "event_name", "name", "text", "fqid", "room_fqid", "text_fqid", "level_group"}
)

OPTIONAL_COLUMNS = (
    "page",
    "room_coor_x",
    "room_coor_y",
    "screen_coor_x",
    "screen_coor_y",
    "hover_duration",
    "text",
    "fqid",
    "room_fqid",
    "text_fqid",
)

MIN_LEVEL = 0
MAX_LEVEL = 22
QUESTION_RANGE = range(1, 19)


class RawEvent(NamedTuple):
    """One time-stamped user interaction. Immutable and thread-safe."""

    session_id: str
    index: int
    elapsed_time: int
    event_name: str
    name: str
    level: int
    page: Optional[int]
    room_coor_x: Optional[float]
    room_coor_y: Optional[float]
    screen_coor_x: Optional[float]
    screen_coor_y: Optional[float]
    hover_duration: Optional[int]
    text: Optional[str]
    fqid: Optional[str]
    room_fqid: Optional[str]
    text_fqid: Optional[str]
    fullscreen: int
    hq: int
    music: int
    level_group: str


class LabelRecord(NamedTuple):
    """Outcome of one in-game assessment question for one session."""

    session_id: str
    question: int
    correct: bool


def level_group_for(level: int) -> str:
    """Map a level in [0, 22] to its level-group bin."""
    if level <= 4:
        return "0-4"
    if level <= 12:
        return "5-12"
    return "13-22"


@dataclass
class CellError:
    row: int  # 1-based physical line number (header is row 1)
    column: str
    value: str


@dataclass
class IngestReport:
    """Accounting for one ingestion run: emitted + skipped = data rows."""

    rows_read: int = 0
    events_emitted: int = 0
    rows_skipped: int = 0
    consistency_violations: int = 0
    cell_errors: list[CellError] = field(default_factory=list)
    unknown_columns: tuple[str, ...] = ()


def _diagnose_row(row: Sequence[str], pos: dict[str, int]) -> str:
    """Slow path: name the first column of a rejected row that fails its rule."""
    checks_int = (("index", 0), ("elapsed_time", 0))
    for col, lo in checks_int:
        v = row[pos[col]]
        try:
            if int(v) < lo:
                return col
        except ValueError:
            return col
    v = row[pos["level"]]
    try:
        if not MIN_LEVEL <= int(v) <= MAX_LEVEL:
            return "level"
    except ValueError:
        return "level"
    for col in ("fullscreen", "hq", "music"):
        v = row[pos[col]]
        try:
            if int(v) not in (0, 1):
                return col
        except ValueError:
            return col
    for col in ("page", "hover_duration"):
        v = row[pos[col]]
        if v:
            try:
                if int(v) < 0:
                    return col
            except ValueError:
                return col
    for col in ("room_coor_x", "room_coor_y", "screen_coor_x", "screen_coor_y"):
        v = row[pos[col]]
        if v:
            try:
                if not isfinite(float(v)):
                    return col
            except ValueError:
                return col
    for col in ("session_id", "event_name", "name"):
        if not row[pos[col]]:
            return col
    if row[pos["level_group"]] not in LEVEL_GROUPS:
        return "level_group"
    return "row"  # wrong field count or another structural defect


def read_events(
    source: IO[str],
    schema: Sequence[str] = EVENT_COLUMNS,
    report: IngestReport | None = None,
) -> Iterator[RawEvent]:
    """Stream RawEvents from a CSV text source.

    Malformed rows are skipped and recorded in ``report`` with their line
    number; level/level_group inconsistencies are counted but the event is
    still emitted. Raises MissingColumnError if the header lacks a schema
    column.
    """
    rep = report if report is not None else IngestReport()
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise MissingColumnError(schema[0])
    pos = {}
    for name in schema:
        try:
            pos[name] = header.index(name)
        except ValueError:
            raise MissingColumnError(name) from None
    extras = tuple(c for c in header if c not in schema)
    if extras:
        rep.unknown_columns = extras
        logger.warning("ignoring %d unknown column(s): %s", len(extras), ", ".join(extras))

    # Hot loop: locals for column positions, inline conversions, one
    # try/except per row with diagnosis deferred to the slow path.
    i_sid = pos["session_id"]
    i_idx = pos["index"]
    i_et = pos["elapsed_time"]
    i_en = pos["event_name"]
    i_nm = pos["name"]
    i_lv = pos["level"]
    i_pg = pos["page"]
    i_rx = pos["room_coor_x"]
    i_ry = pos["room_coor_y"]
    i_sx = pos["screen_coor_x"]
    i_sy = pos["screen_coor_y"]
    i_hd = pos["hover_duration"]
    i_tx = pos["text"]
    i_fq = pos["fqid"]
    i_rf = pos["room_fqid"]
    i_tf = pos["text_fqid"]
    i_fs = pos["fullscreen"]
    i_hq = pos["hq"]
    i_mu = pos["music"]
    i_lg = pos["level_group"]
    groups = LEVEL_GROUPS

    lineno = 1
    for row in reader:
        lineno += 1
        rep.rows_read += 1
        try:
            sid = row[i_sid]
            index = int(row[i_idx])
            elapsed = int(row[i_et])
            event_name = row[i_en]
            name = row[i_nm]
            level = int(row[i_lv])
            v = row[i_pg]
            page = int(v) if v else None
            v = row[i_rx]
            rx = float(v) if v else None
            v = row[i_ry]
            ry = float(v) if v else None
            v = row[i_sx]
            sx = float(v) if v else None
            v = row[i_sy]
            sy = float(v) if v else None
            v = row[i_hd]
            hover = int(v) if v else None
            v = row[i_tx]
            text = v if v else None
            v = row[i_fq]
            fqid = v if v else None
            v = row[i_rf]
            room_fqid = v if v else None
            v = row[i_tf]
            text_fqid = v if v else None
            fullscreen = int(row[i_fs])
            hq = int(row[i_hq])
            music = int(row[i_mu])
            group = row[i_lg]
            if (
                not sid
                or not event_name
                or not name
                or index < 0
                or elapsed < 0
                or not MIN_LEVEL <= level <= MAX_LEVEL
                or fullscreen not in (0, 1)
                or hq not in (0, 1)
                or music not in (0, 1)
                or group not in groups
                or (page is not None and page < 0)
                or (hover is not None and hover < 0)
                or (rx is not None and not isfinite(rx))
                or (ry is not None and not isfinite(ry))
                or (sx is not None and not isfinite(sx))
                or (sy is not None and not isfinite(sy))
            ):
                raise ValueError
        except (ValueError, IndexError):
            rep.rows_skipped += 1
            try:
                column = _diagnose_row(row, pos)
                value = row[pos[column]] if column in pos else ",".join(row)
            except (IndexError, KeyError):
                column, value = "row", ",".join(row)
            rep.cell_errors.append(CellError(lineno, column, value))
            continue

        if group != level_group_for(level):
            rep.consistency_violations += 1
        rep.events_emitted += 1
        yield RawEvent(
            sid, index, elapsed, event_name, name, level, page, rx, ry, sx, sy,
            hover, text, fqid, room_fqid, text_fqid, fullscreen, hq, music, group,
        )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def event_to_row(ev: RawEvent) -> list[str]:
    """Serialize to CSV cells; parsing the result yields an equal RawEvent."""
    return [_cell(v) for v in ev]


def write_events(sink: IO[str], events: Iterable[RawEvent]) -> int:
    """Write header plus one row per event; returns rows written."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS)
    n = 0
    for ev in events:
        writer.writerow(event_to_row(ev))
        n += 1
    return n


def read_labels(source: IO[str]) -> list[LabelRecord]:
    """Read the label file: columns session_id, question, correct (0/1).

    Strict: any malformed row raises. Duplicate (session, question) pairs
    and questions outside [1, 18] are errors.
    """
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise MissingColumnError(LABEL_COLUMNS[0])
    pos = {}
    for name in LABEL_COLUMNS:
        try:
            pos[name] = header.index(name)
        except ValueError:
            raise MissingColumnError(name) from None
    i_sid, i_q, i_c = pos["session_id"], pos["question"], pos["correct"]

    records: list[LabelRecord] = []
    seen: set[tuple[str, int]] = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            sid = row[i_sid]
            question = int(row[i_q])
            correct = row[i_c]
        except (ValueError, IndexError):
            raise DataError(f"malformed label row at line {lineno}") from None
        if not sid:
            raise DataError(f"empty session_id in label row at line {lineno}")
        if question not in QUESTION_RANGE:
            raise QuestionOutOfRangeError(question)
        if correct not in ("0", "1"):
            raise DataError(f"correct must be 0 or 1, got {correct!r} at line {lineno}")
        key = (sid, question)
        if key in seen:
            raise DuplicateLabelError(sid, question)
        seen.add(key)
        records.append(LabelRecord(sid, question, correct == "1"))
    return records


def write_labels(sink: IO[str], labels: Iterable[LabelRecord]) -> int:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(LABEL_COLUMNS)
    n = 0
    for rec in labels:
        writer.writerow([rec.session_id, rec.question, int(rec.correct)])
        n += 1
    return n


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    event_count: int
    levels_seen: tuple[int, ...]
    level_coverage: float  # distinct levels / 23
    monotonicity_violations: int
    missing_rates: dict[str, float]


def validate_session(events: Sequence[RawEvent]) -> SessionReport:
    """Per-session sanity report; reporting only, never raises on content.

    Monotonicity violations count adjacent pairs (in given order) where
    either the event index or elapsed_time decreases.
    """
    if not events:
        raise DataError("validate_session requires at least one event")
    sid = events[0].session_id
    if any(ev.session_id != sid for ev in events):
        raise DataError("events from more than one session")

    levels = sorted({ev.level for ev in events})
    violations = 0
    prev = events[0]
    for ev in events[1:]:
        if ev.index < prev.index or ev.elapsed_time < prev.elapsed_time:
            violations += 1
        prev = ev
    n = len(events)
    missing = {
        col: sum(1 for ev in events if getattr(ev, col) is None) / n
        for col in OPTIONAL_COLUMNS
    }
    return SessionReport(
        session_id=sid,
        event_count=n,
        levels_seen=tuple(levels),
        level_coverage=len(levels) / (MAX_LEVEL - MIN_LEVEL + 1),
        monotonicity_violations=violations,
        missing_rates=missing,
    )
