from __future__ import annotations

import os

import pytest

from birkhoff_perf.corpus import SynthConfig, generate_synthetic, load_manifest, split
from birkhoff_perf.midi_io import build_sequence
from birkhoff_perf.pipeline import extract_corpus

TPQ = 480


def seq(notes, tpq=TPQ, tempo=(), meter=()):
    """NoteSequence from (pitch, onset_ticks, duration_ticks, velocity) tuples."""
    return build_sequence(notes, tpq, tempo, meter)


def melody(pitches, step=TPQ, velocity=64, start=0):
    return seq([(p, start + k * step, step, velocity) for k, p in enumerate(pitches)])


@pytest.fixture(scope="session")
def synth_manifest(tmp_path_factory):
    """The reference synthetic corpus: seed 42, 40 pieces."""
    out = tmp_path_factory.mktemp("synth42")
    return generate_synthetic(SynthConfig(seed=42, n_pieces=40), out)


@pytest.fixture(scope="session")
def synth_samples(synth_manifest):
    workers = int(os.environ.get("BIRKHOFF_PERF_WORKERS", "0")) or min(4, os.cpu_count() or 1)
    entries = load_manifest(synth_manifest)
    return entries, extract_corpus(entries, workers)


@pytest.fixture(scope="session")
def synth_split(synth_samples):
    """Stratified 80/20 split by piece, seed 42, as (train, test) sample lists."""
    entries, samples = synth_samples
    by_perf = {e.perf_path: s for e, s in zip(entries, samples)}
    train, test = split(entries, 0.8, 42)
    return [by_perf[e.perf_path] for e in train], [by_perf[e.perf_path] for e in test]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
