"""Deterministic synthetic EEG recordings with expert annotations.

Background activity is colored noise with a weak alpha rhythm, slow drift and
line interference. Seizures are rhythmic 2-4 Hz discharges with harmonics on
most channels. Three simulated experts mark the events with a second or two
of boundary disagreement.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from .edf import Recording, write_annotations_csv, write_edf

BIPOLAR_LABELS = (
    "Fp2-F4", "F4-C4", "C4-P4", "P4-O2", "Fp1-F3", "F3-C3", "C3-P3", "P3-O1",
    "Fp2-T4", "T4-O2", "Fp1-T3", "T3-O1", "T4-C4", "C4-Cz", "Cz-C3", "C3-T3",
    "Fz-Cz", "Cz-Pz",
)


def _events(rng: np.random.Generator, duration_s: int, n_events: int) -> list[tuple[int, int]]:
    """Non-overlapping (start, stop) seconds."""
    events = []
    slot = duration_s // n_events
    for i in range(n_events):
        length = int(rng.integers(max(8, slot // 4), max(9, slot // 2)))
        start = i * slot + int(rng.integers(2, max(3, slot - length - 2)))
        events.append((start, min(start + length, duration_s)))
    return events


def synth_recording(rng: np.random.Generator, *, n_channels: int = 10, duration_s: int = 288,
                    fs: int = 256, n_events: int = 3, recording_id: str = "synth",
                    n_experts: int = 3) -> tuple[Recording, np.ndarray]:
    """One recording plus its ``(n_experts, duration_s)`` annotation mask."""
    n = duration_s * fs
    t = np.arange(n) / fs
    b, a = signal.butter(2, 12.0, fs=fs)
    data = np.empty((n_channels, n))
    for c in range(n_channels):
        noise = signal.lfilter(b, a, rng.normal(size=n)) * 25.0
        alpha = 4.0 * np.sin(2 * np.pi * rng.uniform(8, 11) * t + rng.uniform(0, 2 * np.pi))
        drift = 30.0 * np.sin(2 * np.pi * rng.uniform(0.02, 0.1) * t + rng.uniform(0, 2 * np.pi))
        line = 2.0 * np.sin(2 * np.pi * 50.0 * t)
        data[c] = noise + alpha + drift + line

    truth = np.zeros(duration_s, dtype=bool)
    for start, stop in _events(rng, duration_s, n_events):
        truth[start:stop] = True
        f0 = rng.uniform(2.0, 4.0)
        idx = slice(start * fs, stop * fs)
        tt = t[idx] - start
        ramp = np.minimum(1.0, np.minimum(tt, (stop - start) - tt) / 2.0)
        involved = rng.random(n_channels) < 0.8
        involved[rng.integers(n_channels)] = True
        for c in np.flatnonzero(involved):
            amp = rng.uniform(80, 140)
            phase = rng.uniform(0, 2 * np.pi)
            wave = np.sin(2 * np.pi * f0 * tt + phase) + 0.5 * np.sin(4 * np.pi * f0 * tt + 2 * phase)
            data[c, idx] += amp * ramp * wave

    mask = np.zeros((n_experts, duration_s), dtype=np.uint8)
    edges = np.flatnonzero(np.diff(np.r_[0, truth.astype(int), 0]))
    for e in range(n_experts):
        for start, stop in zip(edges[0::2], edges[1::2]):
            a0 = int(np.clip(start + rng.integers(-2, 3), 0, duration_s))
            b0 = int(np.clip(stop + rng.integers(-2, 3), a0, duration_s))
            mask[e, a0:b0] = 1

    labels = BIPOLAR_LABELS[:n_channels] if n_channels <= len(BIPOLAR_LABELS) else tuple(
        f"ch{i + 1}" for i in range(n_channels))
    return Recording(labels=labels, data=data, fs=float(fs), recording_id=recording_id), mask


def make_fixtures(out_dir, *, n_recordings: int = 10, n_channels: int = 10, duration_s: int = 288,
                  fs: int = 256, seed: int = 0) -> list[Path]:
    """Write ``recNN.edf`` + ``recNN.csv`` pairs; returns the EDF paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n_recordings):
        rid = f"rec{i + 1:02d}"
        rec, mask = synth_recording(rng, n_channels=n_channels, duration_s=duration_s, fs=fs,
                                    recording_id=rid)
        edf_path = out / f"{rid}.edf"
        write_edf(edf_path, rec)
        write_annotations_csv(out / f"{rid}.csv", mask)
        paths.append(edf_path)
    return paths
