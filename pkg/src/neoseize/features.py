"""Per-channel time-domain and entropy features.

Each window channel yields 11 values, always in :data:`FEATURE_NAMES` order;
a window's vector is channel-major (all 11 features of channel 0, then
channel 1, ...).

A channel whose samples are all equal is *flat*. Flat channels get the mean
in the first slot and 0 everywhere else; every function below follows that
rule so the slots agree whether computed one by one or through
:func:`extract_features`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, WindowTooShort

FEATURE_NAMES = (
    "mean",
    "std",
    "skewness",
    "kurtosis",
    "hjorth_activity",
    "hjorth_mobility",
    "hjorth_complexity",
    "permutation_entropy",
    "shannon_entropy",
    "approximate_entropy",
    "sample_entropy",
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureConfig:
    shannon_bins: int = 64
    perm_order: int = 3
    perm_delay: int = 1
    entropy_m: int = 2
    r_factor: float = 0.2

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "FeatureConfig":
        kwargs = {}
        for key, conv in (("shannon_bins", int), ("perm_order", int), ("perm_delay", int),
                          ("entropy_m", int), ("r_factor", float)):
            if key in kv:
                kwargs[key] = conv(kv[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: int = 0
    recording_id: str = ""
    t_start: float = 0.0


def _as_1d(x, min_len: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{what} expects a 1-D signal")
    if x.size < min_len:
        raise WindowTooShort(f"{what} needs at least {min_len} samples, got {x.size}")
    return x


def _is_flat(x: np.ndarray) -> bool:
    return x.size == 0 or x.max() == x.min()


def _unit_deviation(x: np.ndarray) -> tuple[np.ndarray, float]:
    """``(x - mean) / s`` with ``s = max|x - mean|``, plus ``s``.

    Ratio features are scale-free, so forming them on unit-range deviations
    avoids underflow of tiny variances.
    """
    d = x - x.mean()
    s = float(np.abs(d).max())
    return d / s, s


def moments(x) -> tuple[float, float, float, float]:
    """Mean, population std, skewness ``m3/m2**1.5`` and excess kurtosis."""
    x = _as_1d(x, 2, "moments")
    mean = float(x.mean())
    if _is_flat(x):
        return float(x[0]), 0.0, 0.0, 0.0
    u, s = _unit_deviation(x)
    if s == 0.0:
        return mean, 0.0, 0.0, 0.0
    m2 = float(np.mean(u * u))
    m3 = float(np.mean(u**3))
    m4 = float(np.mean(u**4))
    return mean, s * math.sqrt(m2), m3 / m2**1.5, m4 / (m2 * m2) - 3.0


def hjorth(x) -> tuple[float, float, float]:
    """Hjorth activity, mobility and complexity from first differences."""
    x = _as_1d(x, 3, "hjorth")
    if _is_flat(x):
        return 0.0, 0.0, 0.0
    u, s = _unit_deviation(x)
    if s == 0.0:
        return 0.0, 0.0, 0.0
    du = np.diff(u)
    var_u = float(np.var(u))
    activity = s * s * var_u
    if _is_flat(np.diff(x)):
        return activity, 0.0, 0.0
    var_du = float(np.var(du))
    var_ddu = float(np.var(np.diff(du)))
    mobility = math.sqrt(var_du / var_u)
    complexity = math.sqrt(var_ddu / var_du) / mobility
    return activity, mobility, complexity


def shannon_entropy(x, bins: int = 64) -> float:
    """Histogram entropy in nats over ``bins`` equal bins on [0, 1].

    Values outside [0, 1] fall into the edge bins; 1.0 belongs to the last bin.
    """
    x = _as_1d(x, 1, "shannon_entropy")
    idx = np.clip(np.floor(x * bins), 0, bins - 1).astype(np.int64)
    counts = np.bincount(idx, minlength=bins)
    p = counts[counts > 0] / x.size
    h = float(-np.sum(p * np.log(p)))
    return max(0.0, h)


def _ordinal_codes(x: np.ndarray, order: int, delay: int) -> np.ndarray:
    span = (order - 1) * delay + 1
    emb = sliding_window_view(x, span)[:, ::delay]
    # stable sort: equal values rank by position, earlier first
    perms = np.argsort(emb, axis=1, kind="stable")
    weights = order ** np.arange(order)
    return perms @ weights


def permutation_entropy(x, order: int = 3, delay: int = 1) -> float:
    """Ordinal-pattern entropy normalized by ``ln(order!)``."""
    x = _as_1d(x, order * delay + 1, "permutation_entropy")
    if order < 2:
        raise ValueError("order must be >= 2")
    _, counts = np.unique(_ordinal_codes(x, order, delay), return_counts=True)
    p = counts / counts.sum()
    h = float(-np.sum(p * np.log(p))) / math.log(math.factorial(order))
    return min(max(0.0, h), 1.0)


def _match_matrices(x: np.ndarray, m: int, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev template matches (distance <= r) for lengths m and m + 1.

    The first matrix covers all ``N - m + 1`` m-templates, the second the
    ``N - m`` (m+1)-templates.
    """
    # max_k |x[i+k] - x[j+k]| <= r  <=>  every sample pair matches, so one
    # sample-level matrix and its shifted diagonal blocks suffice
    n = x.size
    k = n - m + 1
    close = np.abs(x[:, None] - x[None, :]) <= r
    match_m = close[:k, :k].copy()
    for off in range(1, m):
        match_m &= close[off : off + k, off : off + k]
    match_next = match_m[: k - 1, : k - 1] & close[m:, m:]
    return match_m, match_next


def _tolerance(x: np.ndarray, r: float | None, r_factor: float) -> float:
    return r_factor * float(np.std(x)) if r is None else float(r)


def _apen_from_matches(match_m: np.ndarray, match_next: np.ndarray) -> float:
    phi_m = float(np.mean(np.log(match_m.mean(axis=1))))
    phi_next = float(np.mean(np.log(match_next.mean(axis=1))))
    return phi_m - phi_next


def _sampen_from_matches(match_m: np.ndarray, match_next: np.ndarray, n: int, m: int) -> float:
    # same N - m template starts for both lengths; pairs i < j only
    k = n - m
    b = (int(np.count_nonzero(match_m[:k, :k])) - k) // 2
    a = (int(np.count_nonzero(match_next)) - k) // 2
    if a == 0 or b == 0:
        return sample_entropy_ceiling(n, m)
    return -math.log(a / b)


def sample_entropy_ceiling(n: int, m: int = 2) -> float:
    """Value returned when no template pairs match: ``ln`` of the pair count."""
    return math.log(n - m) + math.log(n - m - 1) - math.log(2)


def approximate_entropy(x, m: int = 2, r: float | None = None, r_factor: float = 0.2) -> float:
    """ApEn(m, r), Chebyshev distance, self-matches counted.

    ``r`` defaults to ``r_factor`` times the population std of ``x``.
    """
    x = _as_1d(x, m + 2, "approximate_entropy")
    if _is_flat(x):
        return 0.0
    match_m, match_next = _match_matrices(x, m, _tolerance(x, r, r_factor))
    return _apen_from_matches(match_m, match_next)


def sample_entropy(x, m: int = 2, r: float | None = None, r_factor: float = 0.2) -> float:
    """SampEn(m, r) = -ln(A/B) over distinct template pairs.

    Both A and B are counted over the first ``N - m`` template starts. When
    either count is zero the result is :func:`sample_entropy_ceiling`.
    """
    x = _as_1d(x, m + 2, "sample_entropy")
    if _is_flat(x):
        return 0.0
    match_m, match_next = _match_matrices(x, m, _tolerance(x, r, r_factor))
    return _sampen_from_matches(match_m, match_next, x.size, m)


def channel_features(x, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """The 11 features of one channel, in :data:`FEATURE_NAMES` order."""
    x = _as_1d(
        x,
        max(3, cfg.entropy_m + 2, cfg.perm_order * cfg.perm_delay + 1),
        "channel_features",
    )
    if not np.all(np.isfinite(x)):
        raise DataError("window contains non-finite samples")
    if _is_flat(x):
        out = np.zeros(N_FEATURES)
        out[0] = x[0]
        return out
    mean, std, skew, kurt = moments(x)
    activity, mobility, complexity = hjorth(x)
    pe = permutation_entropy(x, cfg.perm_order, cfg.perm_delay)
    sh = shannon_entropy(x, cfg.shannon_bins)
    match_m, match_next = _match_matrices(x, cfg.entropy_m, cfg.r_factor * std)
    apen = _apen_from_matches(match_m, match_next)
    sampen = _sampen_from_matches(match_m, match_next, x.size, cfg.entropy_m)
    return np.array([mean, std, skew, kurt, activity, mobility, complexity, pe, sh, apen, sampen])


def extract_features(window, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Channel-major 11*C feature vector for one window.

    ``window`` is a :class:`~neoseize.preprocess.WindowInstance` or a
    ``(channels, samples)`` array.
    """
    data = getattr(window, "data", window)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError("window must be a non-empty (channels, samples) array")
    values = np.concatenate([channel_features(ch, cfg) for ch in data])
    if not np.all(np.isfinite(values)):
        raise DataError("feature extraction produced non-finite values")
    return FeatureVector(
        values=values,
        label=int(getattr(window, "label", 0)),
        recording_id=str(getattr(window, "recording_id", "")),
        t_start=float(getattr(window, "t_start", 0.0)),
    )


@dataclass(frozen=True)
class FeatureTable:
    """Stacked feature vectors with their bookkeeping columns."""

    X: np.ndarray
    y: np.ndarray
    recording_ids: tuple[str, ...]
    t_start: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def subset(self, mask) -> "FeatureTable":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return FeatureTable(
            X=self.X[idx],
            y=self.y[idx],
            recording_ids=tuple(self.recording_ids[i] for i in idx),
            t_start=self.t_start[idx],
        )


def feature_table(windows, cfg: FeatureConfig = FeatureConfig()) -> FeatureTable:
    vectors = [extract_features(w, cfg) for w in windows]
    if not vectors:
        raise DataError("no windows to featurize")
    return FeatureTable(
        X=np.vstack([v.values for v in vectors]),
        y=np.array([v.label for v in vectors], dtype=np.int64),
        recording_ids=tuple(v.recording_id for v in vectors),
        t_start=np.array([v.t_start for v in vectors]),
    )


def write_feature_csv(target, table: FeatureTable) -> None:
    own = not hasattr(target, "write")
    fh = open(target, "w", newline="", encoding="utf-8") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["recording_id", "t_start", "label", *(f"f{i}" for i in range(table.X.shape[1]))])
        for rid, t0, label, row in zip(table.recording_ids, table.t_start, table.y, table.X):
            writer.writerow([rid, repr(float(t0)), int(label), *(repr(float(v)) for v in row)])
    finally:
        if own:
            fh.close()


def read_feature_csv(source) -> FeatureTable:
    own = not hasattr(source, "read")
    fh = open(source, newline="", encoding="utf-8") if own else source
    try:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or head[:3] != ["recording_id", "t_start", "label"]:
            raise DataError("feature CSV must start with recording_id,t_start,label,f0,...")
        ids, starts, labels, rows = [], [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(head):
                raise DataError(f"feature CSV row has {len(row)} columns, expected {len(head)}")
            ids.append(row[0])
            starts.append(float(row[1]))
            labels.append(int(row[2]))
            rows.append([float(v) for v in row[3:]])
    finally:
        if own:
            fh.close()
    if not rows:
        raise DataError("feature CSV has no rows")
    return FeatureTable(
        X=np.array(rows, dtype=np.float64),
        y=np.array(labels, dtype=np.int64),
        recording_ids=tuple(ids),
        t_start=np.array(starts),
    )


def load_features(path) -> FeatureTable:
    return read_feature_csv(Path(path))
