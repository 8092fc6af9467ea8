"""Recording -> labeled, scaled, fixed-length windows.

Order of operations: anti-alias + decimate, high-pass, per-channel min-max
scaling over the whole recording, then non-overlapping segmentation. Window
labels come from counting expert-seconds of seizure marks.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal

from .config import load_kv
from .edf import AnnotationTrack, Recording
from .errors import (
    DataError,
    EmptyInput,
    WindowLongerThanRecording,
    WindowOutsideAnnotations,
)

WINDOW_LENGTHS = (1, 2, 4, 8, 16)

ANTIALIAS_ORDER = 8
ANTIALIAS_FRACTION = 0.8  # of the output Nyquist
HIGHPASS_ORDER = 4


@dataclass(frozen=True)
class PreprocessConfig:
    fs_target: float = 32.0
    highpass_cutoff: float = 0.5
    window_s: int = 4
    label_threshold: int | None = None  # None -> floor(experts * window_s / 2)
    scaling_scope: str = "per_channel_recording"

    def __post_init__(self):
        if self.scaling_scope != "per_channel_recording":
            raise ValueError(f"unsupported scaling_scope {self.scaling_scope!r}")
        if not float(self.window_s * self.fs_target).is_integer():
            raise ValueError("window_s * fs_target must be an integer")
        if not 0 < self.highpass_cutoff < self.fs_target / 2:
            raise ValueError("highpass_cutoff must lie in (0, fs_target/2)")
        if self.label_threshold is not None and self.label_threshold < 0:
            raise ValueError("label_threshold must be >= 0")

    @property
    def window_samples(self) -> int:
        return int(self.window_s * self.fs_target)

    def threshold_for(self, n_experts: int) -> int:
        if self.label_threshold is not None:
            return self.label_threshold
        return default_threshold(n_experts, self.window_s)

    @classmethod
    def from_mapping(cls, kv: dict[str, str], **overrides) -> "PreprocessConfig":
        kwargs = {}
        if "fs_target" in kv:
            kwargs["fs_target"] = float(kv["fs_target"])
        if "highpass_cutoff_hz" in kv:
            kwargs["highpass_cutoff"] = float(kv["highpass_cutoff_hz"])
        if "window_s" in kv:
            kwargs["window_s"] = int(kv["window_s"])
        if kv.get("label_threshold", "") not in ("", "auto"):
            kwargs["label_threshold"] = int(kv["label_threshold"])
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "PreprocessConfig":
        return cls.from_mapping(load_kv(path), **overrides)


@dataclass(frozen=True)
class WindowInstance:
    data: np.ndarray  # (channels, window_s * fs_target)
    label: int
    t_start: float
    recording_id: str = ""


def default_threshold(n_experts: int, window_s: int) -> int:
    """Majority of expert-seconds inside a window."""
    return (n_experts * window_s) // 2


# --- filters -----------------------------------------------------------------


@lru_cache(maxsize=None)
def _butter(order: int, cutoff: float, fs: float, btype: str) -> np.ndarray:
    return signal.butter(order, cutoff, btype=btype, fs=fs, output="sos")


def _filtfilt(sos: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    padlen = min(3 * (2 * len(sos) + 1), n - 1)
    return signal.sosfiltfilt(sos, x, axis=-1, padlen=max(padlen, 0))


def downsample(x, fs_in: float = 256.0, fs_out: float = 32.0) -> np.ndarray:
    """Zero-phase anti-alias low-pass, then keep every ``fs_in/fs_out``-th sample.

    Works along the last axis. Trailing samples beyond the last whole
    decimation block are dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    ratio = fs_in / fs_out
    if not float(ratio).is_integer() or ratio < 1:
        raise ValueError(f"fs_out={fs_out} must divide fs_in={fs_in}")
    factor = int(ratio)
    n = (x.shape[-1] // factor) * factor
    if n == 0:
        raise EmptyInput(f"need at least {factor} samples to downsample by {factor}")
    x = x[..., :n]
    if factor == 1:
        return x.copy()
    sos = _butter(ANTIALIAS_ORDER, ANTIALIAS_FRACTION * fs_out / 2, fs_in, "lowpass")
    return np.ascontiguousarray(_filtfilt(sos, x)[..., ::factor])


def highpass(x, cutoff: float = 0.5, fs: float = 32.0) -> np.ndarray:
    """Zero-phase 4th-order Butterworth high-pass along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 < cutoff < fs / 2:
        raise ValueError("cutoff must lie in (0, fs/2)")
    if x.shape[-1] == 0:
        return x.copy()
    if x.shape[-1] < 2:
        return np.zeros_like(x)
    return _filtfilt(_butter(HIGHPASS_ORDER, cutoff, fs, "highpass"), x)


def minmax_scale(x) -> np.ndarray:
    """Map each row (last axis) affinely onto [0, 1]; flat rows become zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        return x.copy()
    lo = x.min(axis=-1, keepdims=True)
    hi = x.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = span == 0
    out = (x - lo) / np.where(flat, 1.0, span)
    return np.where(flat, 0.0, out)


def filter_and_scale(data: np.ndarray, fs_in: float, cfg: PreprocessConfig) -> np.ndarray:
    """Downsample -> high-pass -> min-max, row-wise over ``data``."""
    x = downsample(data, fs_in, cfg.fs_target)
    x = highpass(x, cfg.highpass_cutoff, cfg.fs_target)
    return minmax_scale(x)


def preprocess_recording(rec: Recording, cfg: PreprocessConfig) -> Recording:
    return Recording(
        labels=rec.labels,
        data=filter_and_scale(rec.data, rec.fs, cfg),
        fs=cfg.fs_target,
        recording_id=rec.recording_id,
    )


def preprocess_segment(raw: np.ndarray, fs_in: float, cfg: PreprocessConfig) -> np.ndarray:
    """Preprocess one isolated raw segment of shape ``(channels, samples)``.

    Used on the inference path where no whole recording is available, so the
    min-max range is the segment's own.
    """
    return filter_and_scale(raw, fs_in, cfg)


# --- windows and labels ------------------------------------------------------


def segment(rec: Recording, window_s: int, fs_target: float | None = None) -> np.ndarray:
    """Cut ``rec`` into non-overlapping windows.

    Returns an array of shape ``(n_windows, channels, window_s * fs)``; a
    trailing partial window is dropped.
    """
    if fs_target is not None and rec.fs != fs_target:
        raise ValueError(f"recording is at {rec.fs} Hz, expected {fs_target} Hz")
    length = window_s * rec.fs
    if not float(length).is_integer() or length < 1:
        raise ValueError("window_s * fs must be a positive integer")
    length = int(length)
    count = rec.n_samples // length
    if count == 0:
        raise WindowLongerThanRecording(
            f"{window_s} s window longer than {rec.duration_s:g} s recording"
        )
    data = rec.data[:, : count * length].reshape(rec.n_channels, count, length)
    return np.ascontiguousarray(data.transpose(1, 0, 2))


def fuse_labels(ann: AnnotationTrack, t_start: int, window_s: int, threshold: int) -> int:
    """1 when the expert-seconds marked inside the window exceed ``threshold``."""
    t_start = int(t_start)
    if t_start < 0 or t_start + window_s > ann.duration_s:
        raise WindowOutsideAnnotations(
            f"window [{t_start}, {t_start + window_s}) outside {ann.duration_s} s of annotations"
        )
    marks = int(ann.mask[:, t_start : t_start + window_s].sum())
    return int(marks > threshold)


def make_windows(rec: Recording, ann: AnnotationTrack, cfg: PreprocessConfig,
                 *, preprocessed: bool = False) -> list[WindowInstance]:
    """Full preprocessing and labeling for one recording."""
    scaled = rec if preprocessed else preprocess_recording(rec, cfg)
    windows = segment(scaled, cfg.window_s, cfg.fs_target)
    threshold = cfg.threshold_for(ann.n_experts)
    out = []
    for i, data in enumerate(windows):
        t0 = i * cfg.window_s
        out.append(
            WindowInstance(
                data=data,
                label=fuse_labels(ann, t0, cfg.window_s, threshold),
                t_start=float(t0),
                recording_id=rec.recording_id,
            )
        )
    return out


# --- window dump -------------------------------------------------------------

WINDOW_MAGIC = b"NSDW"
WINDOW_VERSION = 1
_WINDOW_HEAD = struct.Struct("<4sBIII")


def write_windows(target, windows: list[WindowInstance]) -> None:
    """Columnar dump: header, float32 samples window-major, then a trailer.

    The trailer holds per-window uint8 labels, float32 start times, and the
    newline-joined UTF-8 recording ids prefixed by their byte length.
    """
    if not windows:
        raise EmptyInput("no windows to write")
    c, length = windows[0].data.shape
    for w in windows:
        if w.data.shape != (c, length):
            raise DataError("all windows must share one (channels, samples) shape")
    buf = io.BytesIO()
    buf.write(_WINDOW_HEAD.pack(WINDOW_MAGIC, WINDOW_VERSION, c, length, len(windows)))
    buf.write(np.stack([w.data for w in windows]).astype("<f4").tobytes())
    buf.write(np.array([w.label for w in windows], dtype=np.uint8).tobytes())
    buf.write(np.array([w.t_start for w in windows], dtype="<f4").tobytes())
    ids = "\n".join(w.recording_id for w in windows).encode("utf-8")
    buf.write(struct.pack("<I", len(ids)))
    buf.write(ids)
    if hasattr(target, "write"):
        target.write(buf.getvalue())
    else:
        Path(target).write_bytes(buf.getvalue())


def read_windows(source) -> list[WindowInstance]:
    raw = source.read() if hasattr(source, "read") else Path(source).read_bytes()
    if len(raw) < _WINDOW_HEAD.size:
        raise DataError("window dump truncated")
    magic, version, c, length, count = _WINDOW_HEAD.unpack_from(raw, 0)
    if magic != WINDOW_MAGIC:
        raise DataError(f"not a window dump (magic {magic!r})")
    if version != WINDOW_VERSION:
        raise DataError(f"unsupported window dump version {version}")
    pos = _WINDOW_HEAD.size
    n_values = count * c * length
    need = pos + 4 * n_values + count + 4 * count + 4
    if len(raw) < need:
        raise DataError("window dump truncated")
    data = np.frombuffer(raw, "<f4", n_values, pos).reshape(count, c, length).astype(np.float64)
    pos += 4 * n_values
    labels = np.frombuffer(raw, np.uint8, count, pos)
    pos += count
    starts = np.frombuffer(raw, "<f4", count, pos)
    pos += 4 * count
    (n_ids,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if len(raw) < pos + n_ids:
        raise DataError("window dump truncated")
    ids = raw[pos : pos + n_ids].decode("utf-8").split("\n")
    if len(ids) != count:
        raise DataError("window dump recording-id list does not match window count")
    return [
        WindowInstance(data=data[i], label=int(labels[i]), t_start=float(starts[i]), recording_id=ids[i])
        for i in range(count)
    ]
