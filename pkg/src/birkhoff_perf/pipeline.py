"""Corpus-level glue: parse, align and extract features for many pairs."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .alignment import AlignmentResult, AlignParams, align
from .corpus import CorpusEntry
from .features import BasicFeatures, extract_all
from .midi_io import NoteSequence, read_midi

WORKERS_ENV = "BIRKHOFF_PERF_WORKERS"


@dataclass(frozen=True)
class Sample:
    sample_id: str
    piece_id: str
    label: str
    features: BasicFeatures


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def analyze_pair(
    score: NoteSequence, perf: NoteSequence, params: AlignParams | None = None
) -> tuple[AlignmentResult, BasicFeatures]:
    alignment = align(score, perf, params)
    return alignment, extract_all(score, perf, alignment)


def extract_pair(score_path: str | Path, perf_path: str | Path) -> BasicFeatures:
    return analyze_pair(read_midi(score_path), read_midi(perf_path))[1]


def _extract_entry(entry: CorpusEntry) -> Sample:
    features = extract_pair(entry.score_path, entry.perf_path)
    return Sample(f"{entry.piece_id}/{entry.perf_path.stem}", entry.piece_id, entry.label, features)


def extract_corpus(entries: Sequence[CorpusEntry], workers: int | None = None) -> list[Sample]:
    """Features for every entry, in entry order."""
    workers = workers or default_workers()
    if workers <= 1 or len(entries) < 2:
        return [_extract_entry(e) for e in entries]
    with ProcessPoolExecutor(max_workers=min(workers, len(entries))) as pool:
        return list(pool.map(_extract_entry, entries, chunksize=4))
