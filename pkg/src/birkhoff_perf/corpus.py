"""Labelled corpora: manifest loading, a synthetic three-class generator and
piece-grouped train/test splitting.

Labels: ``score`` (deadpan rendition), ``ai`` (mechanical perturbation) and
``human`` (expressive rendition).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text, dumps_json
from .errors import BadLabel, DataError, DuplicatePieceEntry, MissingFile, TooFewPieces
from .features import metrical_weights
from .midi_io import write_midi

log = logging.getLogger(__name__)

CLASS_NAMES = ("score", "ai", "human")
TPQ = 480
_TICKS_PER_SECOND = 2 * TPQ  # performance files are stored at the 120 bpm default

_MAJOR = (0, 2, 4, 5, 7, 9, 11)
_PROGRESSION_DEGREES = (0, 3, 4, 5, 1)  # I IV V vi ii
_CHORD_RHYTHMS = ((1, 1, 1, 1), (2, 2), (2, 1, 1), (1, 1, 2), (4,))


@dataclass(frozen=True)
class CorpusEntry:
    piece_id: str
    score_path: Path
    perf_path: Path
    label: str


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    n_pieces: int = 40
    bars_per_piece: int = 8
    ai_velocity_jitter: int = 5
    ai_timing_jitter_beats: float = 0.02
    ai_accent_gain: float = 4.0
    human_accent_gain: float = 20.0
    human_velocity_jitter: int = 6
    human_timing_jitter_beats: float = 0.01
    human_articulation_spread: float = 0.2
    human_tempo_arch_depth: float = 0.15
    human_ornament_rate: float = 0.05
    human_drop_rate: float = 0.02
    phrase_bars: int = 4
    # each rendition scales its expressive parameters by U(1 - spread, 1 + spread)
    performer_spread: float = 0.0

    def __post_init__(self):
        if self.n_pieces < 1:
            raise DataError("n_pieces must be >= 1")
        if self.bars_per_piece < 4:
            raise DataError("bars_per_piece must be >= 4")
        if self.phrase_bars < 1:
            raise DataError("phrase_bars must be >= 1")
        for name in ("human_ornament_rate", "human_drop_rate", "human_articulation_spread",
                     "performer_spread"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DataError(f"{name} must lie in [0, 1]")
        for name in ("ai_velocity_jitter", "ai_timing_jitter_beats", "human_velocity_jitter",
                     "human_timing_jitter_beats"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0")


def load_manifest(path: str | Path) -> list[CorpusEntry]:
    """Read ``{"entries": [{"piece_id", "score", "performance", "label"}, ...]}``.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise MissingFile(f"manifest not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise DataError(f"{path}: manifest must be an object with an 'entries' list")

    base = path.parent
    entries, seen = [], set()
    for k, raw in enumerate(doc["entries"]):
        try:
            piece_id = str(raw["piece_id"])
            score = base / raw["score"]
            perf = base / raw["performance"]
            label = raw["label"]
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: entry {k} is missing field {exc}") from exc
        if label not in CLASS_NAMES:
            raise BadLabel(f"{path}: entry {k} has label {label!r}, expected one of {CLASS_NAMES}")
        for p in (score, perf):
            if not p.is_file():
                raise MissingFile(f"{path}: entry {k} references missing file {p}")
        key = (piece_id, perf.resolve())
        if key in seen:
            raise DuplicatePieceEntry(f"{path}: duplicate entry for piece {piece_id!r}, {perf}")
        seen.add(key)
        entries.append(CorpusEntry(piece_id, score, perf, label))
    if not entries:
        log.warning("manifest %s has no entries", path)
    return entries


def split(
    entries: list[CorpusEntry], ratio: float, seed: int
) -> tuple[list[CorpusEntry], list[CorpusEntry]]:
    """Seeded train/test split that keeps every piece on one side.

    Pieces are stratified by the set of labels they carry, so class
    proportions survive the split. Entry order is preserved on both sides.
    """
    if not 0 < ratio < 1:
        raise DataError(f"ratio must lie in (0, 1), got {ratio}")
    labels_of: dict[str, set] = {}
    for e in entries:
        labels_of.setdefault(e.piece_id, set()).add(e.label)
    pieces = sorted(labels_of)
    if len(pieces) < 2:
        raise TooFewPieces(f"need >= 2 pieces to split, got {len(pieces)}")

    strata: dict[tuple, list[str]] = {}
    for p in pieces:
        strata.setdefault(tuple(sorted(labels_of[p])), []).append(p)
    rng = np.random.default_rng(seed)
    train_pieces: set[str] = set()
    for key in sorted(strata):
        group = strata[key]
        order = rng.permutation(len(group))
        n_train = int(math.floor(ratio * len(group) + 0.5))
        train_pieces.update(group[i] for i in order[:n_train])
    # both sides must be non-empty
    if len(train_pieces) == len(pieces):
        train_pieces.remove(max(train_pieces))
    elif not train_pieces:
        train_pieces.add(pieces[0])

    train = [e for e in entries if e.piece_id in train_pieces]
    test = [e for e in entries if e.piece_id not in train_pieces]
    return train, test


# --- synthetic generator -------------------------------------------------------------


@dataclass
class _ScoreNote:
    pitch: int
    onset: float  # beats
    duration: float  # beats
    melody: bool
    bar: int


def _compose(rng: np.random.Generator, n_bars: int) -> list[_ScoreNote]:
    """Melody over block chords in 4/4 with quarter and eighth rhythms."""
    tonic = 60 + int(rng.integers(-5, 7))
    degrees = [0]
    for _ in range(n_bars - 2):
        degrees.append(int(rng.choice(_PROGRESSION_DEGREES)))
    degrees.append(0)

    def scale_pitch(step: int, base: int) -> int:
        octave, deg = divmod(step, 7)
        return base + 12 * octave + _MAJOR[deg]

    notes = []
    melody_step = 7 + int(rng.integers(0, 5))  # an octave above the tonic, plus a bit
    for bar, degree in enumerate(degrees):
        start = 4.0 * bar
        chord_steps = [degree, degree + 2, degree + 4]
        beat = 0.0
        for length in _CHORD_RHYTHMS[int(rng.integers(len(_CHORD_RHYTHMS)))]:
            for step in chord_steps:
                notes.append(_ScoreNote(scale_pitch(step, tonic - 12), start + beat, length, False, bar))
            beat += length
        beat = 0.0
        for _ in range(4):
            lengths = (1.0,) if rng.random() < 0.55 else (0.5, 0.5)
            for length in lengths:
                move = int(rng.integers(-2, 3))
                melody_step = int(np.clip(melody_step + move, 7, 16))
                if beat == int(beat):
                    # on beats, snap to the nearest chord tone
                    tones = [s + 7 * k for s in chord_steps for k in (0, 1, 2)]
                    melody_step = min(tones, key=lambda s: (abs(s - melody_step), s))
                    melody_step = int(np.clip(melody_step, 7, 18))
                notes.append(_ScoreNote(scale_pitch(melody_step, tonic), start + beat, length, True, bar))
                beat += length
    return notes


def _ticks(beats: float) -> int:
    return int(round(beats * TPQ))


def _render_score(notes: list[_ScoreNote]) -> list[tuple[int, int, int, int]]:
    return [(n.pitch, _ticks(n.onset), _ticks(n.duration), 64) for n in notes]


def _levels(notes: list[_ScoreNote], n_bars: int) -> np.ndarray:
    weights = metrical_weights(n_bars)
    return np.array([weights[n.bar] - 1 for n in notes])


def _performer(rng: np.random.Generator, spread: float, n: int) -> np.ndarray:
    return 1.0 + spread * rng.uniform(-1.0, 1.0, n)


def _velocity_jitter(rng: np.random.Generator, amplitude: float, n: int) -> np.ndarray:
    return np.rint(rng.uniform(-amplitude - 0.5, amplitude + 0.5, n)).astype(int)


def _render_ai(
    notes: list[_ScoreNote], n_bars: int, cfg: SynthConfig, rng: np.random.Generator
) -> list[tuple[int, int, int, int]]:
    timing_f, velocity_f, accent_f = _performer(rng, cfg.performer_spread, 3)
    onsets = sorted({n.onset for n in notes})
    shift = dict(zip(onsets, rng.normal(0.0, timing_f * cfg.ai_timing_jitter_beats, len(onsets))))
    jitter = _velocity_jitter(rng, velocity_f * cfg.ai_velocity_jitter, len(notes))
    gain = accent_f * cfg.ai_accent_gain
    levels = _levels(notes, n_bars)
    out = []
    for n, j, level in zip(notes, jitter, levels):
        velocity = int(np.clip(round(64 + gain * level) + j, 1, 127))
        out.append((n.pitch, _ticks(max(0.0, n.onset + shift[n.onset])), _ticks(n.duration), velocity))
    return out


def _render_human(
    notes: list[_ScoreNote], n_bars: int, cfg: SynthConfig, rng: np.random.Generator
) -> list[tuple[int, int, int, int]]:
    accent_f, velocity_f, depth_f, timing_f, artic_f = _performer(rng, cfg.performer_spread, 5)
    phrase_beats = 4.0 * cfg.phrase_bars
    depth = min(0.9, depth_f * cfg.human_tempo_arch_depth)
    gain = accent_f * cfg.human_accent_gain

    def bpm(beat: float) -> float:
        phase = (beat % phrase_beats) / phrase_beats
        return 120.0 * (1.0 - depth + 2.0 * depth * math.sin(math.pi * phase))

    onsets = sorted({n.onset for n in notes})
    seconds = {onsets[0]: 0.0}
    for prev, cur in zip(onsets, onsets[1:]):
        seconds[cur] = seconds[prev] + (cur - prev) * 60.0 / bpm(prev)
    timing = rng.normal(0.0, timing_f * cfg.human_timing_jitter_beats * 0.5, len(onsets))
    for onset, dt in zip(onsets[1:], timing[1:]):
        seconds[onset] += dt

    levels = _levels(notes, n_bars)
    jitter = _velocity_jitter(rng, velocity_f * cfg.human_velocity_jitter, len(notes))
    drops = rng.random(len(notes)) < cfg.human_drop_rate
    ornaments = rng.random(len(notes)) < cfg.human_ornament_rate
    neighbour = rng.integers(1, 3, len(notes))
    articulation = 1.0 - min(1.0, artic_f * cfg.human_articulation_spread) * rng.random(len(notes))

    out = []
    last_melody_pitch = None
    for k, n in enumerate(notes):
        velocity = int(np.clip(round(50 + gain * levels[k]) + jitter[k], 1, 127))
        onset_s = seconds[n.onset]
        if n.melody and ornaments[k]:
            grace = n.pitch + int(neighbour[k])
            if onset_s >= 0.05 and grace != last_melody_pitch and grace <= 127:
                out.append((grace, int(round((onset_s - 0.05) * _TICKS_PER_SECOND)),
                            int(round(0.04 * _TICKS_PER_SECOND)), max(1, velocity - 12)))
        if n.melody:
            last_melody_pitch = n.pitch
        if drops[k]:
            continue
        duration_s = articulation[k] * n.duration * 60.0 / bpm(n.onset)
        out.append((
            n.pitch,
            int(round(onset_s * _TICKS_PER_SECOND)),
            max(1, int(round(duration_s * _TICKS_PER_SECOND))),
            velocity,
        ))
    return out


def generate_synthetic(config: SynthConfig, out_dir: str | Path) -> Path:
    """Write a three-class synthetic corpus and return its manifest path.

    Each piece gets ``piece_NNN_score.mid`` (which is both the reference
    score and the deadpan rendition), ``piece_NNN_ai.mid`` and
    ``piece_NNN_human.mid``. Output is a pure function of ``config``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out_dir}: {exc}") from exc

    entries = []
    for index in range(config.n_pieces):
        rng = np.random.default_rng(config.seed ^ index)
        piece_id = f"piece_{index:03d}"
        notes = _compose(rng, config.bars_per_piece)
        renditions = {
            "score": _render_score(notes),
            "ai": _render_ai(notes, config.bars_per_piece, config, rng),
            "human": _render_human(notes, config.bars_per_piece, config, rng),
        }
        score_name = f"{piece_id}_score.mid"
        for label, raw in renditions.items():
            name = f"{piece_id}_{label}.mid"
            try:
                atomic_write_bytes(out_dir / name, write_midi(raw, ticks_per_quarter=TPQ))
            except OSError as exc:
                raise DataError(f"cannot write {out_dir / name}: {exc}") from exc
            entries.append(
                {"piece_id": piece_id, "score": score_name, "performance": name, "label": label}
            )

    manifest = out_dir / "manifest.json"
    atomic_write_text(manifest, dumps_json({"synth_config": asdict(config), "entries": entries}))
    return manifest
