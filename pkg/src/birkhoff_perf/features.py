"""The ten basic performance features.

Harmony:    pd, rd (deviation from the score), dh (dynamics vs. metre)
Symmetry:   bs, ds (absolute skewness of inter-onset intervals / velocities)
Chaos:      phe, rhe (histogram entropies), adc (velocity changes), tv (tempo spread)
Redundancy: kc (1 - compressed/original size of the note stream)
"""

from __future__ import annotations

import functools
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .alignment import AlignmentResult, tempo_samples
from .errors import (
    CompressorFailure,
    DataError,
    EmptyHistogram,
    InsufficientAlignment,
    InsufficientMatches,
    LengthMismatch,
    TooFewNotes,
    TooFewSamples,
    ZeroReference,
    ZeroVector,
)
from .midi_io import RECORD_SIZE, NoteSequence, canonical_serialize

FEATURE_NAMES = ("pd", "rd", "dh", "bs", "ds", "phe", "rhe", "adc", "tv", "kc")

# thirty-second through double whole, in quarter-note beats, dotted values included
RHYTHM_LENGTHS = np.array([0.125, 0.25, 0.375, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0])

default_compressor: Callable[[bytes], bytes] = functools.partial(zlib.compress, level=9)


@dataclass(frozen=True)
class BasicFeatures:
    pd: float
    rd: float
    dh: float
    bs: float
    ds: float
    phe: float
    rhe: float
    adc: float
    tv: float
    kc: float
    # False marks a value imputed because the feature was undefined
    flags: dict = field(default_factory=lambda: {name: True for name in FEATURE_NAMES})

    def as_array(self, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([getattr(self, name) for name in names], dtype=float)

    def to_dict(self) -> dict:
        out = {name: float(getattr(self, name)) for name in FEATURE_NAMES}
        out["flags"] = {name: bool(self.flags.get(name, True)) for name in FEATURE_NAMES}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BasicFeatures":
        flags = {name: True for name in FEATURE_NAMES}
        flags.update(data.get("flags", {}))
        return cls(**{name: float(data[name]) for name in FEATURE_NAMES}, flags=flags)


def deviation(perf_values: Sequence[float], score_values: Sequence[float]) -> float:
    """Sum of absolute differences relative to the sum of absolute score values."""
    x = np.asarray(perf_values, dtype=float)
    t = np.asarray(score_values, dtype=float)
    if x.shape != t.shape:
        raise LengthMismatch(f"{x.shape} vs {t.shape}")
    if x.size == 0:
        raise LengthMismatch("deviation needs at least one aligned pair")
    reference = np.abs(t).sum()
    if reference == 0:
        raise ZeroReference("score attribute values sum to zero")
    return float(np.abs(x - t).sum() / reference)


def metrical_weights(n_bars: int) -> np.ndarray:
    """Bar-level hypermetrical weights 4,1,2,1,3,1,2,1,... (bar 0 is strongest)."""
    if n_bars < 1:
        raise DataError(f"n_bars must be >= 1, got {n_bars}")
    weights = np.empty(n_bars)
    for b in range(n_bars):
        trailing = 3 if b == 0 else min((b & -b).bit_length() - 1, 3)
        weights[b] = 1 + trailing
    return weights


def bar_means(values: Sequence[float], bars: Sequence[int], n_bars: int) -> np.ndarray:
    """Per-bar mean of ``values``; bars without notes get 0."""
    values = np.asarray(values, dtype=float)
    bars = np.asarray(bars, dtype=int)
    sums = np.bincount(bars, weights=values, minlength=n_bars)[:n_bars]
    counts = np.bincount(bars, minlength=n_bars)[:n_bars]
    return np.divide(sums, counts, out=np.zeros(n_bars), where=counts > 0)


def cosine_similarity(d: Sequence[float], m: Sequence[float]) -> float:
    d = np.asarray(d, dtype=float)
    m = np.asarray(m, dtype=float)
    if d.shape != m.shape:
        raise LengthMismatch(f"{d.shape} vs {m.shape}")
    denom = np.sqrt(np.dot(d, d) * np.dot(m, m))
    if denom == 0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.dot(d, m) / denom)


def dynamic_harmony(
    perf: NoteSequence, weights: np.ndarray, bar_indices: Sequence[int] | None = None
) -> float:
    """Cosine similarity between per-bar mean velocity and metrical weight.

    ``bar_indices`` overrides the bar of each performance note; by default
    the bar numbering of the performance file itself is used.
    """
    weights = np.asarray(weights, dtype=float)
    if bar_indices is None:
        bar_indices = [n.bar_index for n in perf.notes]
    d = bar_means(perf.velocities, bar_indices, len(weights))
    return float(np.clip(cosine_similarity(d, weights), 0.0, 1.0))


def skewness_abs(samples: Sequence[float]) -> float:
    """|third standardized moment| with population moments; 0 when sigma is 0."""
    x = np.asarray(samples, dtype=float)
    if x.size < 3:
        raise TooFewSamples(f"skewness needs >= 3 samples, got {x.size}")
    centered = x - x.mean()
    sigma = np.sqrt(np.mean(centered**2))
    if sigma == 0 or sigma < 1e-12 * max(1.0, np.abs(x).max()):
        return 0.0
    return float(abs(np.mean((centered / sigma) ** 3)))


def histogram_entropy(histogram: Sequence[float]) -> float:
    """Shannon entropy in nats of a count histogram."""
    h = np.asarray(histogram, dtype=float)
    total = h.sum()
    if total <= 0:
        raise EmptyHistogram("histogram has no mass")
    p = h[h > 0] / total
    return float(max(0.0, -np.sum(p * np.log(p))))


def pitch_histogram(perf: NoteSequence) -> np.ndarray:
    return np.bincount(perf.pitches, minlength=128)


def rhythm_bin(duration_beats: float) -> int:
    # argmin returns the first minimum, so exact ties go to the shorter length
    return int(np.argmin(np.abs(RHYTHM_LENGTHS - duration_beats)))


def rhythm_histogram(
    perf: NoteSequence, durations_beats: Sequence[float] | None = None
) -> np.ndarray:
    """12-bin histogram of note durations snapped to the nearest canonical length."""
    if not perf.notes:
        raise DataError("rhythm histogram of an empty sequence")
    if durations_beats is None:
        durations_beats = [n.duration_beats for n in perf.notes]
    counts = np.zeros(len(RHYTHM_LENGTHS), dtype=int)
    for d in durations_beats:
        counts[rhythm_bin(d)] += 1
    return counts


def average_dynamic_changes(velocities: Sequence[float]) -> float:
    v = np.asarray(velocities, dtype=float)
    if v.size < 2:
        raise TooFewNotes(f"need >= 2 velocities, got {v.size}")
    return float(np.abs(np.diff(v)).sum() / (v.size - 1))


def tempo_variability(bpm_samples: Sequence[float]) -> float:
    t = np.asarray(bpm_samples, dtype=float)
    if t.size < 2:
        raise TooFewSamples(f"need >= 2 tempo samples, got {t.size}")
    return float(np.std(t, ddof=1))


def kolmogorov_redundancy(
    payload: bytes, compressor: Callable[[bytes], bytes] = default_compressor
) -> float:
    """1 - compressed size / original size, clamped to [0, 1]."""
    if len(payload) < RECORD_SIZE:
        raise DataError(f"payload shorter than one record ({len(payload)} bytes)")
    try:
        compressed = compressor(payload)
    except Exception as exc:
        raise CompressorFailure(str(exc)) from exc
    return float(min(1.0, max(0.0, 1.0 - len(compressed) / len(payload))))


def performance_durations_in_beats(
    perf: NoteSequence, times: np.ndarray | None, bpm: np.ndarray | None
) -> np.ndarray:
    """Convert performance durations to beats using the nearest preceding
    local tempo sample (the first sample before any sample exists)."""
    seconds = np.array([n.duration_seconds for n in perf.notes])
    if times is None or len(times) == 0:
        return np.array([n.duration_beats for n in perf.notes])
    onsets = np.array([n.onset_seconds for n in perf.notes])
    k = np.clip(np.searchsorted(times, onsets, side="right") - 1, 0, len(times) - 1)
    return seconds * bpm[k] / 60.0


def _distinct_onset_iois(perf: NoteSequence) -> np.ndarray:
    ticks = np.unique([n.onset_ticks for n in perf.notes])
    return np.diff(ticks) / perf.ticks_per_quarter


def extract_all(
    score: NoteSequence,
    perf: NoteSequence,
    alignment: AlignmentResult,
    compressor: Callable[[bytes], bytes] = default_compressor,
) -> BasicFeatures:
    """All ten basic features for one aligned score/performance pair.

    Features that are undefined on the input (too few tempo samples, zero
    variance) are imputed as 0 and marked False in ``flags``.
    """
    if len(alignment.matches) < 3:
        raise InsufficientAlignment(f"need >= 3 matched notes, got {len(alignment.matches)}")
    flags = {name: True for name in FEATURE_NAMES}
    s_idx = np.array([i for i, _ in alignment.matches])
    p_idx = np.array([j for _, j in alignment.matches])

    try:
        times, bpm = tempo_samples(score, perf, alignment)
    except InsufficientMatches:
        times = bpm = None
        flags["rd"] = False
    perf_beats = performance_durations_in_beats(perf, times, bpm)
    score_beats = np.array([n.duration_beats for n in score.notes])

    pd = deviation(perf.pitches[p_idx], score.pitches[s_idx])
    rd = deviation(perf_beats[p_idx], score_beats[s_idx])

    score_bars = np.array([n.bar_index for n in score.notes])
    d = bar_means(perf.velocities[p_idx], score_bars[s_idx], score.n_bars)
    dh = float(np.clip(cosine_similarity(d, metrical_weights(score.n_bars)), 0.0, 1.0))

    def symmetric(name: str, samples: np.ndarray) -> float:
        if samples.size < 3 or np.ptp(samples) == 0:
            flags[name] = False
            return 0.0
        return skewness_abs(samples)

    bs = symmetric("bs", _distinct_onset_iois(perf))
    ds = symmetric("ds", perf.velocities)

    phe = histogram_entropy(pitch_histogram(perf))
    rhe = histogram_entropy(rhythm_histogram(perf, perf_beats))
    adc = average_dynamic_changes(perf.velocities[p_idx])
    if bpm is not None and len(bpm) >= 2:
        tv = tempo_variability(bpm)
    else:
        tv = 0.0
        flags["tv"] = False
    kc = kolmogorov_redundancy(canonical_serialize(perf), compressor)
    return BasicFeatures(
        pd=pd, rd=rd, dh=dh, bs=bs, ds=ds, phe=phe, rhe=rhe, adc=adc, tv=tv, kc=kc, flags=flags
    )
