"""Parsing, validation, and labeling of hand-landmark recordings.

A recording is a time series of 21-point hand landmarks (standard layout:
wrist = 0, thumb tip = 4, index MCP = 5, index tip = 8) plus acquisition
metadata and zero or more rater scores in 0..4.

Two on-disk formats are supported:

* ``landmark-json``: one JSON object per recording with keys ``fps``,
  ``patient_id``, ``video_id``, ``med_state``, ``rater_scores`` and
  ``frames`` (each ``{"i": int, "pts": [[x, y] * 21], "conf": float?}``).
* ``landmark-csv``: header ``frame,x0,y0,...,x20,y20`` with a JSON sidecar
  carrying the remaining metadata. The CSV format does not carry
  per-frame confidences.
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import NoLabelError, ParseError, SchemaError

N_POINTS = 21
WRIST = 0
THUMB_TIP = 4
INDEX_MCP = 5
INDEX_TIP = 8

MED_STATES = ("on", "off", "unknown")
FORMATS = ("landmark-json", "landmark-csv")

REJECT_TOO_SHORT = "too_short"
REJECT_MISSING = "missing_landmarks"
REJECT_NONMONOTONIC = "nonmonotonic_frames"


@dataclass(frozen=True)
class LandmarkFrame:
    """One video frame: 0-based frame number and 21 (x, y) pixel points."""

    index: int
    points: np.ndarray
    confidence: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (N_POINTS, 2):
            raise SchemaError(
                f"frame {self.index}: expected {N_POINTS} (x, y) points, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise SchemaError(f"frame {self.index}: non-finite coordinates")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise SchemaError(f"frame {self.index}: confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "points", pts)

    def is_missing(self):
        """True when landmark detection failed (all coordinates zero)."""
        return bool(np.all(self.points == 0.0))


@dataclass(frozen=True)
class Recording:
    """An ordered landmark time series with metadata and rater scores."""

    frames: tuple[LandmarkFrame, ...]
    fps: float
    patient_id: str
    video_id: str
    med_state: str = "unknown"
    rater_scores: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.frames) == 0:
            raise SchemaError("recording has no frames")
        if not self.fps > 0:
            raise SchemaError(f"fps must be positive, got {self.fps}")
        if self.med_state not in MED_STATES:
            raise SchemaError(f"med_state {self.med_state!r} not one of {MED_STATES}")
        for s in self.rater_scores:
            if s != int(s) or not 0 <= s <= 4:
                raise SchemaError(f"rater score {s!r} outside 0..4")
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "rater_scores", tuple(int(s) for s in self.rater_scores))

    @property
    def frame_indices(self):
        return np.array([f.index for f in self.frames], dtype=int)

    def duration_s(self):
        idx = self.frame_indices
        return float(idx.max() - idx.min() + 1) / self.fps


@dataclass(frozen=True)
class ValidationReport:
    """Eligibility verdict; ``eligible`` iff ``reasons`` is empty."""

    eligible: bool
    duration_s: float
    reasons: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.eligible != (len(self.reasons) == 0):
            raise ValueError("eligible must mirror an empty reason list")


def validate_recording(r: Recording, min_duration_s: float = 8.0) -> ValidationReport:
    """Check a recording against the eligibility rules.

    Flags recordings shorter than ``min_duration_s`` (computed from the
    spanned frame index range), non-strictly-increasing frame indices, and
    any contiguous run of missing landmarks longer than one second.
    """
    idx = r.frame_indices
    duration = float(idx.max() - idx.min() + 1) / r.fps
    reasons = []
    if duration < min_duration_s:
        reasons.append(REJECT_TOO_SHORT)
    if len(idx) > 1 and np.any(np.diff(idx) <= 0):
        reasons.append(REJECT_NONMONOTONIC)
    if _longest_gap_frames(r) / r.fps > 1.0:
        reasons.append(REJECT_MISSING)
    return ValidationReport(eligible=not reasons, duration_s=duration, reasons=tuple(reasons))


def _longest_gap_frames(r: Recording) -> int:
    """Longest contiguous run of missing dense frame indices.

    A dense index is missing when no frame carries it or when its frame has
    all-zero points.
    """
    idx = r.frame_indices
    first, last = int(idx.min()), int(idx.max())
    present = np.zeros(last - first + 1, dtype=bool)
    for f in r.frames:
        if not f.is_missing():
            present[f.index - first] = True
    longest = run = 0
    for ok in present:
        run = 0 if ok else run + 1
        longest = max(longest, run)
    return longest


def consensus_label(scores) -> int:
    """Median rater score; half-integer medians round to the nearest even."""
    scores = list(scores)
    if not scores:
        raise NoLabelError("no rater scores to take a median of")
    med = statistics.median(scores)
    return int(round(med))


# ---------------------------------------------------------------------------
# Serialization


def parse_recording(raw: bytes, format: str, sidecar: bytes | None = None) -> Recording:
    """Parse a byte stream into a :class:`Recording`.

    ``sidecar`` holds the JSON metadata document and is required for the
    ``landmark-csv`` format. Frames are sorted by frame index.
    """
    if format == "landmark-json":
        return _parse_json(raw)
    if format == "landmark-csv":
        if sidecar is None:
            raise ParseError("landmark-csv needs a metadata sidecar")
        return _parse_csv(raw, sidecar)
    raise ParseError(f"unknown format {format!r}; expected one of {FORMATS}")


def serialize_recording(r: Recording, format: str):
    """Inverse of :func:`parse_recording`.

    Returns bytes for ``landmark-json`` and a ``(csv_bytes, sidecar_bytes)``
    pair for ``landmark-csv``.
    """
    if format == "landmark-json":
        doc = {
            "fps": r.fps,
            "patient_id": r.patient_id,
            "video_id": r.video_id,
            "med_state": r.med_state,
            "rater_scores": list(r.rater_scores),
            "frames": [_frame_to_json(f) for f in r.frames],
        }
        return json.dumps(doc).encode()
    if format == "landmark-csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["frame"]
        for i in range(N_POINTS):
            header += [f"x{i}", f"y{i}"]
        writer.writerow(header)
        for f in r.frames:
            writer.writerow([f.index] + [repr(v) for v in f.points.ravel()])
        meta = {
            "fps": r.fps,
            "patient_id": r.patient_id,
            "video_id": r.video_id,
            "med_state": r.med_state,
            "rater_scores": list(r.rater_scores),
        }
        return buf.getvalue().encode(), json.dumps(meta).encode()
    raise ParseError(f"unknown format {format!r}; expected one of {FORMATS}")


def _frame_to_json(f: LandmarkFrame):
    rec = {"i": f.index, "pts": [[float(x), float(y)] for x, y in f.points]}
    if f.confidence is not None:
        rec["conf"] = f.confidence
    return rec


def _parse_json(raw: bytes) -> Recording:
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    try:
        frames_raw = doc["frames"]
        fps = doc["fps"]
    except KeyError as e:
        raise ParseError(f"missing required key {e}") from e
    frames = []
    for n, rec in enumerate(frames_raw):
        try:
            index = int(rec["i"])
            pts = np.asarray(rec["pts"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"frame record {n}: {e}") from e
        frames.append(LandmarkFrame(index=index, points=pts, confidence=rec.get("conf")))
    frames.sort(key=lambda f: f.index)
    return Recording(
        frames=tuple(frames),
        fps=float(fps),
        patient_id=str(doc.get("patient_id", "")),
        video_id=str(doc.get("video_id", "")),
        med_state=str(doc.get("med_state", "unknown")),
        rater_scores=tuple(doc.get("rater_scores", ())),
    )


def _parse_csv(raw: bytes, sidecar: bytes) -> Recording:
    try:
        meta = json.loads(sidecar)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid sidecar JSON: {e}") from e
    reader = csv.reader(io.StringIO(raw.decode()))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV stream") from None
    if len(header) != 1 + 2 * N_POINTS or header[0] != "frame":
        raise ParseError(f"bad CSV header: expected frame,x0,y0,...,x{N_POINTS - 1},y{N_POINTS - 1}")
    frames = []
    for n, row in enumerate(reader):
        if not row:
            continue
        if len(row) != 1 + 2 * N_POINTS:
            raise SchemaError(f"row {n + 2}: expected {1 + 2 * N_POINTS} fields, got {len(row)}")
        try:
            index = int(row[0])
            coords = np.array([float(v) for v in row[1:]]).reshape(N_POINTS, 2)
        except ValueError as e:
            raise ParseError(f"row {n + 2}: {e}") from e
        frames.append(LandmarkFrame(index=index, points=coords))
    frames.sort(key=lambda f: f.index)
    return Recording(
        frames=tuple(frames),
        fps=float(meta["fps"]),
        patient_id=str(meta.get("patient_id", "")),
        video_id=str(meta.get("video_id", "")),
        med_state=str(meta.get("med_state", "unknown")),
        rater_scores=tuple(meta.get("rater_scores", ())),
    )


def load_recording(path) -> Recording:
    """Load a recording file; format inferred from the extension.

    ``.json`` files are ``landmark-json``; ``.csv`` files are
    ``landmark-csv`` and expect a ``<name>.meta.json`` sidecar next to them.
    """
    from pathlib import Path

    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".json":
        return parse_recording(raw, "landmark-json")
    if path.suffix == ".csv":
        sidecar = path.with_suffix(".meta.json")
        if not sidecar.exists():
            raise ParseError(f"missing sidecar {sidecar}")
        return parse_recording(raw, "landmark-csv", sidecar=sidecar.read_bytes())
    raise ParseError(f"cannot infer format from {path.name!r} (expected .json or .csv)")


def save_recording(r: Recording, path):
    """Write a recording next to any sidecar it needs; inverse of load."""
    from pathlib import Path

    path = Path(path)
    if path.suffix == ".json":
        path.write_bytes(serialize_recording(r, "landmark-json"))
    elif path.suffix == ".csv":
        body, meta = serialize_recording(r, "landmark-csv")
        path.write_bytes(body)
        path.with_suffix(".meta.json").write_bytes(meta)
    else:
        raise ParseError(f"cannot infer format from {path.name!r} (expected .json or .csv)")
