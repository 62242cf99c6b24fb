"""Session log data model, parsing and serialization.

A session document is JSON Lines: a header record followed by one record
per study trial and one per test trial, in presentation order.

    {"type": "header", "format": "memschema-session", "version": 1,
     "session_id": ..., "participant_id": ..., "schedule_seed": ...,
     "incomplete": false}
    {"type": "study", "image_id": ..., "onset_ms": ..., "duration_ms": ...}
    {"type": "test", "image_id": ..., "role": "repeat"|"filler",
     "confidence": 0..100, "selections": [{"x0","y0","x1","y1"}, ...],
     "response_ms": ...}

Confidence is an integer rating on 0..100.  Participants can only draw
selection rectangles when they rate at or above the hard gate of 30, so a
valid test trial has 1..3 selections iff its confidence is >= 30.  That
gate is a recording-time rule and is independent of the (higher) analysis
threshold used for hit rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import SessionLogError

FORMAT_NAME = "memschema-session"
FORMAT_VERSION = 1

SELECTION_GATE = 30
MAX_SELECTIONS = 3

ROLE_REPEAT = "repeat"
ROLE_FILLER = "filler"

# Full-scale protocol counts, enforced only under strict parsing.
PROTOCOL_STUDY_TRIALS = 400
PROTOCOL_TEST_TRIALS = 400
PROTOCOL_REPEATS = 200


@dataclass(frozen=True)
class RectSelection:
    """Axis-aligned rectangle in normalized image coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def validate(self) -> None:
        for name in ("x0", "y0", "x1", "y1"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise SessionLogError(f"selection coordinate {name}={v!r} outside [0,1]")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise SessionLogError(
                f"selection must satisfy x0<x1 and y0<y1, got ({self.x0},{self.y0},{self.x1},{self.y1})"
            )


@dataclass(frozen=True)
class StudyTrial:
    image_id: str
    onset_ms: int
    duration_ms: int


@dataclass(frozen=True)
class TestTrial:
    image_id: str
    role: str
    confidence: int
    selections: tuple[RectSelection, ...] = ()
    response_ms: int = 0

    def validate(self) -> None:
        if self.role not in (ROLE_REPEAT, ROLE_FILLER):
            raise SessionLogError(f"unknown trial role {self.role!r}")
        if not isinstance(self.confidence, int) or isinstance(self.confidence, bool):
            raise SessionLogError(f"confidence out of range: {self.confidence!r} is not an integer")
        if not 0 <= self.confidence <= 100:
            raise SessionLogError(f"confidence out of range: {self.confidence}")
        if len(self.selections) > MAX_SELECTIONS:
            raise SessionLogError(
                f"selection count {len(self.selections)} exceeds {MAX_SELECTIONS}"
            )
        if self.confidence < SELECTION_GATE and self.selections:
            raise SessionLogError(
                f"selections present with confidence {self.confidence} below the gate {SELECTION_GATE}"
            )
        if self.confidence >= SELECTION_GATE and not self.selections:
            raise SessionLogError(
                f"no selections despite confidence {self.confidence} at or above the gate {SELECTION_GATE}"
            )
        if not isinstance(self.response_ms, int) or self.response_ms < 0:
            raise SessionLogError(f"response_ms must be a nonnegative integer, got {self.response_ms!r}")
        for sel in self.selections:
            sel.validate()


@dataclass(frozen=True)
class SessionLog:
    session_id: str
    participant_id: str
    study_trials: tuple[StudyTrial, ...] = ()
    test_trials: tuple[TestTrial, ...] = ()
    schedule_seed: int | None = None
    incomplete: bool = False

    def repeats(self) -> tuple[TestTrial, ...]:
        return tuple(t for t in self.test_trials if t.role == ROLE_REPEAT)

    def fillers(self) -> tuple[TestTrial, ...]:
        return tuple(t for t in self.test_trials if t.role == ROLE_FILLER)

    def validate(self, strict: bool = False) -> None:
        study_ids = [t.image_id for t in self.study_trials]
        if len(set(study_ids)) != len(study_ids):
            raise SessionLogError("image id repeated within the study phase")
        test_ids = [t.image_id for t in self.test_trials]
        if len(set(test_ids)) != len(test_ids):
            raise SessionLogError("image id repeated within the test phase")
        for i, trial in enumerate(self.test_trials):
            try:
                trial.validate()
            except SessionLogError as exc:
                raise SessionLogError(str(exc), trial=i) from None
        studied = set(study_ids)
        if studied:
            for i, trial in enumerate(self.test_trials):
                if trial.role == ROLE_REPEAT and trial.image_id not in studied:
                    raise SessionLogError(
                        f"repeat image {trial.image_id!r} never shown in the study phase", trial=i
                    )
        if strict:
            n_rep = len(self.repeats())
            if (
                len(self.study_trials) != PROTOCOL_STUDY_TRIALS
                or len(self.test_trials) != PROTOCOL_TEST_TRIALS
                or n_rep != PROTOCOL_REPEATS
            ):
                raise SessionLogError(
                    "strict protocol expects "
                    f"{PROTOCOL_STUDY_TRIALS}/{PROTOCOL_TEST_TRIALS}/{PROTOCOL_REPEATS} "
                    f"study/test/repeat trials, got {len(self.study_trials)}/"
                    f"{len(self.test_trials)}/{n_rep}"
                )


def _require(record: dict, key: str, line: int):
    if key not in record:
        raise SessionLogError(f"missing field {key!r}", line=line)
    return record[key]


def _parse_selection(obj, line: int) -> RectSelection:
    if not isinstance(obj, dict):
        raise SessionLogError("selection must be an object", line=line)
    try:
        sel = RectSelection(
            x0=float(obj["x0"]), y0=float(obj["y0"]),
            x1=float(obj["x1"]), y1=float(obj["y1"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionLogError(f"malformed selection: {exc}", line=line) from None
    sel.validate()
    return sel


def parse_session_log(data: bytes | str, strict: bool = False) -> SessionLog:
    """Parse one JSON Lines session document.

    With ``strict`` on, the full-scale protocol counts (400 study trials,
    400 test trials, 200 repeats) are enforced; otherwise desk-scale logs
    pass as long as every per-trial invariant holds.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SessionLogError(f"not valid UTF-8: {exc}") from None
    header = None
    study: list[StudyTrial] = []
    test: list[TestTrial] = []
    for lineno, raw in enumerate(data.splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SessionLogError(f"malformed JSON: {exc.msg}", line=lineno) from None
        if not isinstance(record, dict):
            raise SessionLogError("each line must be a JSON object", line=lineno)
        kind = record.get("type")
        if kind == "header":
            if header is not None:
                raise SessionLogError("duplicate header record", line=lineno)
            if record.get("format") != FORMAT_NAME:
                raise SessionLogError(f"unknown format {record.get('format')!r}", line=lineno)
            header = record
        elif kind == "study":
            if header is None:
                raise SessionLogError("study record before header", line=lineno)
            study.append(
                StudyTrial(
                    image_id=str(_require(record, "image_id", lineno)),
                    onset_ms=int(record.get("onset_ms", 0)),
                    duration_ms=int(record.get("duration_ms", 0)),
                )
            )
        elif kind == "test":
            if header is None:
                raise SessionLogError("test record before header", line=lineno)
            confidence = _require(record, "confidence", lineno)
            if isinstance(confidence, bool) or not isinstance(confidence, int):
                raise SessionLogError(
                    f"confidence out of range: {confidence!r} is not an integer", line=lineno
                )
            selections = record.get("selections", [])
            if not isinstance(selections, list):
                raise SessionLogError("selections must be a list", line=lineno)
            trial = TestTrial(
                image_id=str(_require(record, "image_id", lineno)),
                role=str(_require(record, "role", lineno)),
                confidence=confidence,
                selections=tuple(_parse_selection(s, lineno) for s in selections),
                response_ms=int(record.get("response_ms", 0)),
            )
            try:
                trial.validate()
            except SessionLogError as exc:
                raise SessionLogError(str(exc), line=lineno) from None
            test.append(trial)
        else:
            raise SessionLogError(f"unknown record type {kind!r}", line=lineno)
    if header is None:
        raise SessionLogError("document has no header record")
    log = SessionLog(
        session_id=str(_require(header, "session_id", 1)),
        participant_id=str(_require(header, "participant_id", 1)),
        study_trials=tuple(study),
        test_trials=tuple(test),
        schedule_seed=header.get("schedule_seed"),
        incomplete=bool(header.get("incomplete", False)),
    )
    log.validate(strict=strict)
    return log


def serialize_session_log(log: SessionLog) -> str:
    """Render a SessionLog back to its JSON Lines form."""
    lines = [
        json.dumps(
            {
                "type": "header",
                "format": FORMAT_NAME,
                "version": FORMAT_VERSION,
                "session_id": log.session_id,
                "participant_id": log.participant_id,
                "schedule_seed": log.schedule_seed,
                "incomplete": log.incomplete,
            },
            sort_keys=True,
        )
    ]
    for t in log.study_trials:
        lines.append(
            json.dumps(
                {
                    "type": "study",
                    "image_id": t.image_id,
                    "onset_ms": t.onset_ms,
                    "duration_ms": t.duration_ms,
                },
                sort_keys=True,
            )
        )
    for t in log.test_trials:
        lines.append(
            json.dumps(
                {
                    "type": "test",
                    "image_id": t.image_id,
                    "role": t.role,
                    "confidence": t.confidence,
                    "selections": [
                        {"x0": s.x0, "y0": s.y0, "x1": s.x1, "y1": s.y1} for s in t.selections
                    ],
                    "response_ms": t.response_ms,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def load_session_file(path, strict: bool = False) -> SessionLog:
    with open(path, "rb") as fh:
        return parse_session_log(fh.read(), strict=strict)


def load_session_dir(path, strict: bool = False, include_incomplete: bool = False) -> list[SessionLog]:
    """Load every ``*.jsonl`` session under a directory, sorted by filename.

    Incomplete (abandoned) sessions are skipped unless asked for.
    """
    import os

    logs = []
    for name in sorted(os.listdir(path)):
        if not name.endswith(".jsonl"):
            continue
        log = load_session_file(os.path.join(path, name), strict=strict)
        if log.incomplete and not include_incomplete:
            continue
        logs.append(log)
    return logs
