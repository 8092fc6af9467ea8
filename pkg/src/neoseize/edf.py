"""EDF reading/writing and per-second expert annotation CSVs.

Only plain 16-bit EDF is handled. The header is decoded field by field from
the fixed ASCII layout; data records are little-endian int16, signal-major
within each record.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, TextIO, Union

import numpy as np

from .errors import (
    ChannelLengthMismatch,
    DuplicateTimestamp,
    AnnotationError,
    HeaderValidationError,
    InconsistentHeaderBytes,
    InvalidCalibration,
    NonBinaryAnnotation,
    NonNumericField,
    TruncatedDataRecord,
    TruncatedHeader,
)

PathOrFile = Union[str, os.PathLike, BinaryIO]

# (name, width) of the fixed part, then of each per-signal block.
_FIXED_FIELDS = [
    ("version", 8),
    ("patient_id", 80),
    ("recording_id", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration_s", 8),
    ("n_signals", 4),
]
_SIGNAL_FIELDS = [
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
]
_INT_FIELDS = {"header_bytes", "n_records", "n_signals", "digital_min", "digital_max", "samples_per_record"}
_FLOAT_FIELDS = {"record_duration_s", "physical_min", "physical_max"}

DIGITAL_MIN = -32768
DIGITAL_MAX = 32767


@dataclass(frozen=True)
class SignalHeader:
    label: str
    transducer: str
    physical_dimension: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    samples_per_record: int
    prefilter: str = ""
    reserved: str = ""

    def to_physical(self, digital: np.ndarray) -> np.ndarray:
        """Affine digital-to-physical calibration.

        Written as a two-point interpolation so both calibration endpoints
        map to the header's physical extrema without rounding.
        """
        frac = (np.asarray(digital, dtype=np.float64) - self.digital_min) / (
            self.digital_max - self.digital_min
        )
        return self.physical_min * (1.0 - frac) + self.physical_max * frac


@dataclass(frozen=True)
class EdfHeader:
    version: str
    patient_id: str
    recording_id: str
    start_date: str
    start_time: str
    header_bytes: int
    n_records: int
    record_duration_s: float
    n_signals: int
    signals: tuple[SignalHeader, ...]
    reserved: str = ""

    @property
    def record_samples(self) -> int:
        return sum(s.samples_per_record for s in self.signals)


@dataclass(frozen=True)
class Recording:
    """Multi-channel recording in physical units (µV).

    ``data`` has shape ``(n_channels, n_samples)`` and is read-only.
    """

    labels: tuple[str, ...]
    data: np.ndarray
    fs: float
    recording_id: str = ""

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("recording data must be 2-D (channels, samples)")
        if data.shape[0] != len(self.labels):
            raise ChannelLengthMismatch(
                f"{len(self.labels)} labels for {data.shape[0]} channels"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs


@dataclass(frozen=True)
class AnnotationTrack:
    """Per-second binary seizure marks, one row per expert."""

    mask: np.ndarray
    expert_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=np.uint8)
        if mask.ndim != 2:
            raise ValueError("annotation mask must be 2-D (experts, seconds)")
        if mask.size and mask.max() > 1:
            raise AnnotationError("annotation mask entries must be 0/1")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def n_experts(self) -> int:
        return self.mask.shape[0]

    @property
    def duration_s(self) -> int:
        return self.mask.shape[1]


# --- header ------------------------------------------------------------------


def _decode(raw: bytes, name: str) -> str:
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise HeaderValidationError(f"header field {name!r} is not ASCII") from None
    if not all(32 <= ord(c) < 127 for c in text):
        raise HeaderValidationError(f"header field {name!r} has non-printable bytes")
    return text


def _convert(name: str, text: str):
    stripped = text.strip()
    if name in _INT_FIELDS:
        try:
            return int(stripped)
        except ValueError:
            # Some writers emit integral fields as "256.0"
            try:
                value = float(stripped)
            except ValueError:
                raise NonNumericField(name, text) from None
            if not value.is_integer():
                raise NonNumericField(name, text)
            return int(value)
    if name in _FLOAT_FIELDS:
        try:
            value = float(stripped)
        except ValueError:
            raise NonNumericField(name, text) from None
        if not math.isfinite(value):
            raise NonNumericField(name, text)
        return value
    if name in ("label", "version"):
        return stripped
    return text.rstrip()


def parse_edf_header(raw: bytes) -> EdfHeader:
    """Decode the fixed header plus all per-signal blocks from ``raw``.

    ``raw`` may include the data area; only the header prefix is consumed.
    """
    if len(raw) < 256:
        raise TruncatedHeader(f"need at least 256 header bytes, got {len(raw)}")
    fixed = {}
    pos = 0
    for name, width in _FIXED_FIELDS:
        fixed[name] = _convert(name, _decode(raw[pos : pos + width], name))
        pos += width
    ns = fixed["n_signals"]
    if ns < 1:
        raise HeaderValidationError(f"n_signals must be >= 1, got {ns}")
    expected = 256 * (1 + ns)
    if len(raw) < expected:
        raise TruncatedHeader(f"{ns} signals need {expected} header bytes, got {len(raw)}")
    if fixed["header_bytes"] != expected:
        raise InconsistentHeaderBytes(
            f"header_bytes={fixed['header_bytes']} but 256*(1+{ns})={expected}"
        )

    columns: dict[str, list] = {}
    for name, width in _SIGNAL_FIELDS:
        values = []
        for _ in range(ns):
            values.append(_convert(name, _decode(raw[pos : pos + width], name)))
            pos += width
        columns[name] = values

    signals = tuple(
        SignalHeader(**{name: columns[name][i] for name, _ in _SIGNAL_FIELDS}) for i in range(ns)
    )
    for i, sig in enumerate(signals):
        if sig.digital_min >= sig.digital_max:
            raise InvalidCalibration(
                f"signal {i} ({sig.label}): digital_min {sig.digital_min} >= digital_max {sig.digital_max}"
            )
        if sig.physical_min == sig.physical_max:
            raise InvalidCalibration(f"signal {i} ({sig.label}): physical_min == physical_max")
        if sig.samples_per_record < 1:
            raise HeaderValidationError(f"signal {i} ({sig.label}): samples_per_record < 1")
    if fixed["record_duration_s"] <= 0:
        raise HeaderValidationError("record duration must be positive")

    return EdfHeader(
        version=fixed["version"],
        patient_id=fixed["patient_id"],
        recording_id=fixed["recording_id"],
        start_date=fixed["start_date"],
        start_time=fixed["start_time"],
        header_bytes=fixed["header_bytes"],
        n_records=fixed["n_records"],
        record_duration_s=fixed["record_duration_s"],
        n_signals=ns,
        signals=signals,
        reserved=fixed["reserved"],
    )


def _fmt_number(value: float, width: int, rounding: str = "nearest") -> str:
    """Shortest decimal text of ``value`` fitting ``width`` characters.

    ``rounding="down"``/``"up"`` guarantees the text is <= / >= ``value`` so a
    physical range written to the header still covers the data.
    """
    if float(value).is_integer():
        s = str(int(value))
        if len(s) <= width:
            return s
    for decimals in range(width - 1, -1, -1):
        q = 10.0**decimals
        if rounding == "down":
            v = math.floor(value * q) / q
        elif rounding == "up":
            v = math.ceil(value * q) / q
        else:
            v = round(value, decimals)
        s = f"{v:.{decimals}f}"
        if "." in s:
            s = s.rstrip("0").rstrip(".")
        if s in ("-0", ""):
            s = "0"
        if len(s) <= width:
            return s
    raise ValueError(f"{value!r} does not fit in {width} characters")


def _field(text, width: int) -> bytes:
    text = str(text)
    if len(text) > width:
        raise ValueError(f"{text!r} longer than {width} characters")
    return text.ljust(width).encode("ascii")


def encode_edf_header(header: EdfHeader) -> bytes:
    """Serialize ``header`` into the fixed ASCII layout (no validation)."""
    out = io.BytesIO()
    fixed_values = {
        "version": header.version,
        "patient_id": header.patient_id,
        "recording_id": header.recording_id,
        "start_date": header.start_date,
        "start_time": header.start_time,
        "header_bytes": header.header_bytes,
        "reserved": header.reserved,
        "n_records": header.n_records,
        "record_duration_s": _fmt_number(header.record_duration_s, 8),
        "n_signals": header.n_signals,
    }
    for name, width in _FIXED_FIELDS:
        out.write(_field(fixed_values[name], width))
    for name, width in _SIGNAL_FIELDS:
        for sig in header.signals:
            value = getattr(sig, name)
            if name in ("physical_min", "physical_max"):
                value = _fmt_number(value, width)
            out.write(_field(value, width))
    return out.getvalue()


# --- data --------------------------------------------------------------------


def _read_bytes(source: PathOrFile | bytes) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_bytes()


def read_edf(source: PathOrFile | bytes) -> tuple[EdfHeader, Recording]:
    """Parse header and data area; returns both."""
    raw = _read_bytes(source)
    header = parse_edf_header(raw)
    record_samples = header.record_samples
    record_bytes = 2 * record_samples
    available = len(raw) - header.header_bytes
    n_records = header.n_records
    if n_records < 0:
        # -1 means "unknown" in EDF; infer from size
        n_records = available // record_bytes
    if n_records * record_bytes > available:
        raise TruncatedDataRecord(
            f"header declares {n_records} records of {record_bytes} bytes, "
            f"only {available} data bytes present"
        )
    spr = {s.samples_per_record for s in header.signals}
    if len(spr) != 1:
        raise ChannelLengthMismatch(
            f"signals have different samples_per_record {sorted(spr)}; a Recording needs one rate"
        )
    digital = np.frombuffer(
        raw, dtype="<i2", count=n_records * record_samples, offset=header.header_bytes
    ).reshape(n_records, record_samples)

    channels = []
    start = 0
    for sig in header.signals:
        stop = start + sig.samples_per_record
        channels.append(sig.to_physical(digital[:, start:stop].reshape(-1)))
        start = stop
    fs = header.signals[0].samples_per_record / header.record_duration_s
    # the file stem identifies a recording (and its annotation CSV) when known
    if isinstance(source, (str, os.PathLike)):
        rec_id = Path(source).stem
    elif isinstance(getattr(source, "name", None), str):
        rec_id = Path(source.name).stem
    else:
        rec_id = header.recording_id.strip()
    recording = Recording(
        labels=tuple(s.label for s in header.signals),
        data=np.vstack(channels) if channels else np.zeros((0, 0)),
        fs=fs,
        recording_id=rec_id,
    )
    return header, recording


def read_recording(source: PathOrFile | bytes) -> Recording:
    return read_edf(source)[1]


def write_edf(
    target: PathOrFile,
    recording: Recording,
    *,
    patient_id: str = "X X X X",
    recording_id: str | None = None,
    start_date: str = "01.01.00",
    start_time: str = "00.00.00",
    record_duration_s: float = 1.0,
    physical_dimension: str = "uV",
) -> EdfHeader:
    """Write ``recording`` as 16-bit EDF and return the header used.

    Each channel gets its own physical range, taken from the data and rounded
    outward to fit the 8-character field, mapped onto the full int16 range.
    """
    spr_f = recording.fs * record_duration_s
    if not float(spr_f).is_integer() or spr_f < 1:
        raise ValueError(f"fs*record_duration ({spr_f}) must be a positive integer")
    spr = int(spr_f)
    if recording.n_samples % spr:
        raise ValueError(
            f"{recording.n_samples} samples is not a whole number of {spr}-sample records"
        )
    n_records = recording.n_samples // spr

    signals = []
    digital = np.empty(recording.data.shape, dtype="<i2")
    for i, (label, x) in enumerate(zip(recording.labels, recording.data)):
        pmin = float(_fmt_number(float(x.min()), 8, "down"))
        pmax = float(_fmt_number(float(x.max()), 8, "up"))
        if pmax <= pmin:
            pmax = float(_fmt_number(pmin + 1.0, 8, "up"))
        d = np.rint((x - pmin) / (pmax - pmin) * (DIGITAL_MAX - DIGITAL_MIN) + DIGITAL_MIN)
        digital[i] = np.clip(d, DIGITAL_MIN, DIGITAL_MAX)
        signals.append(
            SignalHeader(
                label=label,
                transducer="",
                physical_dimension=physical_dimension,
                physical_min=pmin,
                physical_max=pmax,
                digital_min=DIGITAL_MIN,
                digital_max=DIGITAL_MAX,
                samples_per_record=spr,
            )
        )
    ns = len(signals)
    header = EdfHeader(
        version="0",
        patient_id=patient_id,
        recording_id=recording.recording_id if recording_id is None else recording_id,
        start_date=start_date,
        start_time=start_time,
        header_bytes=256 * (1 + ns),
        n_records=n_records,
        record_duration_s=record_duration_s,
        n_signals=ns,
        signals=tuple(signals),
    )
    # (C, R*spr) -> (R, C, spr): signal-major inside each record
    body = digital.reshape(ns, n_records, spr).transpose(1, 0, 2).astype("<i2").tobytes()
    payload = encode_edf_header(header) + body
    if hasattr(target, "write"):
        target.write(payload)
    else:
        Path(target).write_bytes(payload)
    return header


def replace_signal(header: EdfHeader, index: int, **changes) -> EdfHeader:
    """Copy of ``header`` with fields of one signal block replaced."""
    signals = list(header.signals)
    signals[index] = dataclasses.replace(signals[index], **changes)
    return dataclasses.replace(header, signals=tuple(signals))


# --- annotations -------------------------------------------------------------


def _open_text(source) -> TextIO:
    if hasattr(source, "read"):
        return source
    return open(source, newline="", encoding="utf-8")


def read_annotations_csv(source, duration_s: int) -> AnnotationTrack:
    """Read a ``time_s,expert1,...,expertE`` CSV into an E x duration_s mask.

    Seconds with no row are zero-filled and reported in ``warnings``; rows at
    or beyond ``duration_s`` are dropped with a warning.
    """
    duration_s = int(duration_s)
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise AnnotationError("annotation CSV is empty") from None
        head = [h.strip() for h in head]
        if len(head) < 2 or head[0] != "time_s":
            raise AnnotationError(f"expected header 'time_s,expert1,...', got {','.join(head)!r}")
        experts = tuple(head[1:])
        mask = np.zeros((len(experts), duration_s), dtype=np.uint8)
        seen = np.zeros(duration_s, dtype=bool)
        seen_beyond: set[int] = set()
        dropped = 0
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(head):
                raise AnnotationError(f"row {row_no}: expected {len(head)} columns, got {len(row)}")
            try:
                t = float(row[0])
            except ValueError:
                raise AnnotationError(f"row {row_no}: bad time_s {row[0]!r}") from None
            if not t.is_integer() or t < 0:
                raise AnnotationError(f"row {row_no}: time_s must be a whole second, got {row[0]!r}")
            sec = int(t)
            values = []
            for cell in row[1:]:
                cell = cell.strip()
                if cell not in ("0", "1"):
                    raise NonBinaryAnnotation(row_no, cell)
                values.append(int(cell))
            if sec >= duration_s:
                if sec in seen_beyond:
                    raise DuplicateTimestamp(row_no, sec)
                seen_beyond.add(sec)
                dropped += 1
                continue
            if seen[sec]:
                raise DuplicateTimestamp(row_no, sec)
            seen[sec] = True
            mask[:, sec] = values
    finally:
        if fh is not source:
            fh.close()

    warnings = []
    missing = np.flatnonzero(~seen)
    if missing.size:
        # one warning per contiguous run of missing seconds
        breaks = np.flatnonzero(np.diff(missing) > 1)
        starts = np.r_[missing[0], missing[breaks + 1]]
        stops = np.r_[missing[breaks], missing[-1]]
        for a, b in zip(starts, stops):
            warnings.append(f"seconds {a}..{b} missing from annotations; zero-filled")
    if dropped:
        warnings.append(f"{dropped} annotation rows at or beyond {duration_s} s dropped")
    return AnnotationTrack(mask=mask, expert_names=experts, warnings=tuple(warnings))


def write_annotations_csv(target, mask: np.ndarray, expert_names=None) -> None:
    mask = np.asarray(mask)
    names = expert_names or [f"expert{i + 1}" for i in range(mask.shape[0])]
    own = not hasattr(target, "write")
    fh = open(target, "w", newline="", encoding="utf-8") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time_s", *names])
        for sec in range(mask.shape[1]):
            writer.writerow([sec, *(int(v) for v in mask[:, sec])])
    finally:
        if own:
            fh.close()
