"""Score-to-performance note alignment.

A Needleman-Wunsch style dynamic program over the two note lists, both in
(onset, pitch) order. Unmatched score notes are "missing", unmatched
performance notes are "extra".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptyInput, InsufficientMatches
from .midi_io import NoteSequence

_TIE_EPS = 1e-12


@dataclass(frozen=True)
class AlignParams:
    gap_cost_score: float = 1.0
    gap_cost_perf: float = 1.0
    pitch_mismatch_cost: float = 4.0
    onset_weight: float = 0.1

    def __post_init__(self):
        for name in ("gap_cost_score", "gap_cost_perf", "pitch_mismatch_cost"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DataError(f"{name} must be finite and positive, got {value}")
        if not (np.isfinite(self.onset_weight) and self.onset_weight >= 0):
            raise DataError(f"onset_weight must be finite and >= 0, got {self.onset_weight}")


@dataclass
class AlignmentResult:
    matches: list[tuple[int, int]]
    missing_score: list[int]
    extra_perf: list[int]
    total_cost: float
    n_score: int = field(default=0, repr=False)
    n_perf: int = field(default=0, repr=False)

    def to_dict(self) -> dict:
        return {
            "matches": [[i, j] for i, j in self.matches],
            "missing_score": list(self.missing_score),
            "extra_perf": list(self.extra_perf),
            "total_cost": self.total_cost,
        }

    def check(self) -> None:
        """Raise AssertionError unless the result is a monotone partition."""
        for (i0, j0), (i1, j1) in zip(self.matches, self.matches[1:]):
            assert i1 > i0 and j1 > j0, "matches are not strictly increasing"
        score_idx = sorted([i for i, _ in self.matches] + self.missing_score)
        perf_idx = sorted([j for _, j in self.matches] + self.extra_perf)
        assert score_idx == list(range(self.n_score)), "score indices not a partition"
        assert perf_idx == list(range(self.n_perf)), "performance indices not a partition"


def normalized_onsets(score: NoteSequence, perf: NoteSequence) -> tuple[np.ndarray, np.ndarray]:
    """Score onsets shifted to start at 0, and performance onsets linearly
    mapped onto the same [0, score span] interval."""
    s = np.array([n.onset_beats for n in score.notes])
    p = np.array([n.onset_beats for n in perf.notes])
    s = s - s[0]
    span_s = s[-1]
    p = p - p[0]
    span_p = p[-1]
    if span_p > 0:
        p = p * (span_s / span_p)
    else:
        p = np.zeros_like(p)
    return s, p


def match_costs(score: NoteSequence, perf: NoteSequence, params: AlignParams) -> np.ndarray:
    s_on, p_on = normalized_onsets(score, perf)
    mismatch = score.pitches[:, None] != perf.pitches[None, :]
    return params.pitch_mismatch_cost * mismatch + params.onset_weight * np.abs(
        s_on[:, None] - p_on[None, :]
    )


def align(
    score: NoteSequence, perf: NoteSequence, params: AlignParams | None = None
) -> AlignmentResult:
    """Minimum-cost order-preserving alignment of ``perf`` against ``score``.

    Ties prefer a match, then a missing score note, then an extra
    performance note.
    """
    params = params or AlignParams()
    if not score.notes or not perf.notes:
        raise EmptyInput("alignment needs two non-empty sequences")
    n, m = len(score.notes), len(perf.notes)
    sub = match_costs(score, perf, params)
    gs, gp = params.gap_cost_score, params.gap_cost_perf

    cost = np.empty((n + 1, m + 1))
    cost[:, 0] = gs * np.arange(n + 1)
    cost[0, :] = gp * np.arange(m + 1)
    for i in range(1, n + 1):
        row, prev = cost[i], cost[i - 1]
        sub_i = sub[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + sub_i[j - 1], prev[j] + gs, row[j - 1] + gp)

    matches, missing, extra = [], [], []
    i, j = n, m
    while i > 0 or j > 0:
        here = cost[i, j]
        if i > 0 and j > 0 and cost[i - 1, j - 1] + sub[i - 1, j - 1] <= here + _TIE_EPS:
            matches.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i - 1, j] + gs <= here + _TIE_EPS:
            missing.append(i - 1)
            i -= 1
        else:
            extra.append(j - 1)
            j -= 1
    result = AlignmentResult(
        matches=matches[::-1],
        missing_score=missing[::-1],
        extra_perf=extra[::-1],
        total_cost=float(cost[n, m]),
        n_score=n,
        n_perf=m,
    )
    result.check()
    return result


def _tempo_pairs(
    score: NoteSequence, perf: NoteSequence, alignment: AlignmentResult
) -> list[tuple[float, float]]:
    out = []
    for (i0, j0), (i1, j1) in zip(alignment.matches, alignment.matches[1:]):
        db = score.notes[i1].onset_beats - score.notes[i0].onset_beats
        ds = perf.notes[j1].onset_seconds - perf.notes[j0].onset_seconds
        if db > 0 and ds > 0:
            out.append((perf.notes[j0].onset_seconds, 60.0 * db / ds))
    return out


def tempo_samples(
    score: NoteSequence, perf: NoteSequence, alignment: AlignmentResult
) -> tuple[np.ndarray, np.ndarray]:
    """Local tempo samples as ``(times, bpm)``; each sample is stamped with the
    performance onset (seconds) of the earlier note of its pair."""
    pairs = _tempo_pairs(score, perf, alignment)
    if len(pairs) < 1:
        raise InsufficientMatches("no consecutive matches with positive beat and time gaps")
    times, bpm = zip(*pairs)
    return np.array(times), np.array(bpm)


def local_tempo_curve(
    score: NoteSequence, perf: NoteSequence, alignment: AlignmentResult
) -> list[float]:
    """Local bpm, 60 * beat gap / time gap, for each consecutive pair of
    matches. Chord pairs (no beat gap) are skipped."""
    pairs = _tempo_pairs(score, perf, alignment)
    if not pairs:
        raise InsufficientMatches("fewer than 2 usable matched notes for a tempo sample")
    return [bpm for _, bpm in pairs]
