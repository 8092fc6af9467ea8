"""Per-segment inference latency.

The timed region is everything a device does for one raw segment:
decimation and filtering, scaling, feature extraction, PCA and scoring.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .container import ModelContainer
from .errors import TooFewSegments

MIN_SEGMENTS = 100
WARMUP_SEGMENTS = 10


@dataclass(frozen=True)
class BenchReport:
    mean_ms: float
    min_ms: float
    p50_ms: float
    p95_ms: float
    segments: int
    model_bytes: int
    host: str = ""

    def as_row(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "min_ms": self.min_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "segments": self.segments,
            "model_bytes": self.model_bytes,
        }


def host_info() -> str:
    return f"{platform.machine()} {platform.system()} {platform.release()} python{platform.python_version()}"


def time_segments(infer: Callable[[np.ndarray], object], segments: Sequence[np.ndarray],
                  *, warmup: int = WARMUP_SEGMENTS, min_segments: int = MIN_SEGMENTS) -> np.ndarray:
    """Wall-clock milliseconds of ``infer`` on each segment.

    The first ``warmup`` segments are run once beforehand and not timed.
    """
    if len(segments) < min_segments:
        raise TooFewSegments(f"need at least {min_segments} segments, got {len(segments)}")
    for seg in segments[:warmup]:
        infer(seg)
    out = np.empty(len(segments))
    for i, seg in enumerate(segments):
        t0 = time.perf_counter()
        infer(seg)
        out[i] = (time.perf_counter() - t0) * 1e3
    return out


def summarize(times_ms: np.ndarray, model_bytes: int) -> BenchReport:
    p50, p95 = np.percentile(times_ms, [50, 95])
    return BenchReport(
        mean_ms=float(times_ms.mean()),
        min_ms=float(times_ms.min()),
        p50_ms=float(p50),
        p95_ms=float(p95),
        segments=int(times_ms.size),
        model_bytes=int(model_bytes),
        host=host_info(),
    )


def bench_inference(container: ModelContainer, segments: Sequence[np.ndarray],
                    *, warmup: int = WARMUP_SEGMENTS, min_segments: int = MIN_SEGMENTS) -> BenchReport:
    """Latency of :meth:`ModelContainer.infer_segment` over raw segments."""
    times = time_segments(container.infer_segment, segments, warmup=warmup, min_segments=min_segments)
    return summarize(times, container.model_bytes)


def cycle_segments(segments: Sequence[np.ndarray], count: int) -> list[np.ndarray]:
    """Repeat ``segments`` in order until ``count`` are available."""
    if not segments:
        raise TooFewSegments("no segments to benchmark")
    return [segments[i % len(segments)] for i in range(count)]
