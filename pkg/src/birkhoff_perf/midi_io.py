"""Standard MIDI File reading/writing and musical-time annotation.

mido handles chunk and event decoding; note pairing, the tempo map, the
meter map and bar numbering are done here.
"""

from __future__ import annotations

import io
import struct
import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import mido
import numpy as np

from .errors import DataError, EmptySequence, MalformedFile

DEFAULT_USPQ = 500_000  # 120 bpm
DEFAULT_METER = (4, 4)
RECORD_SIZE = 10
_RECORD = struct.Struct("<IBBI")


@dataclass(frozen=True)
class Note:
    pitch: int
    onset_ticks: int
    duration_ticks: int
    velocity: int
    onset_seconds: float
    duration_seconds: float
    onset_beats: float
    duration_beats: float
    bar_index: int
    track: int = 0


@dataclass(frozen=True)
class TempoEvent:
    tick: int
    microseconds_per_quarter: int

    @property
    def bpm(self) -> float:
        return 60_000_000 / self.microseconds_per_quarter


@dataclass(frozen=True)
class TimeSignatureEvent:
    tick: int
    numerator: int
    denominator: int


@dataclass(frozen=True)
class NoteSequence:
    notes: tuple[Note, ...]
    tempo_map: tuple[TempoEvent, ...]
    meter_map: tuple[TimeSignatureEvent, ...]
    ticks_per_quarter: int
    n_bars: int
    # notes still sounding at end of track, closed there
    unterminated: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.notes)

    @property
    def pitches(self) -> np.ndarray:
        return np.array([n.pitch for n in self.notes], dtype=int)

    @property
    def velocities(self) -> np.ndarray:
        return np.array([n.velocity for n in self.notes], dtype=float)


def velocity_level(velocity: int) -> int:
    """Quantize a MIDI velocity into five dynamic levels.

    The ranges 0-24, 25-50, 51-76, 77-101 and 102-127 map to levels 0..4.
    """
    if not 0 <= velocity <= 127:
        raise DataError(f"velocity {velocity} outside 0..127")
    for level, upper in enumerate((24, 50, 76, 101)):
        if velocity <= upper:
            return level
    return 4


def _normalize_tempo_map(events: Iterable[tuple[int, int]]) -> tuple[TempoEvent, ...]:
    by_tick: dict[int, int] = {0: DEFAULT_USPQ}
    for tick, uspq in sorted(events, key=lambda e: e[0]):
        if uspq <= 0:
            raise MalformedFile(f"non-positive tempo {uspq} at tick {tick}")
        by_tick[tick] = uspq
    return tuple(TempoEvent(t, by_tick[t]) for t in sorted(by_tick))


def _normalize_meter_map(
    events: Iterable[tuple[int, int, int]],
) -> tuple[TimeSignatureEvent, ...]:
    by_tick: dict[int, tuple[int, int]] = {0: DEFAULT_METER}
    for tick, num, den in sorted(events, key=lambda e: e[0]):
        if num < 1 or den < 1 or den & (den - 1):
            raise MalformedFile(f"bad time signature {num}/{den} at tick {tick}")
        by_tick[tick] = (num, den)
    return tuple(TimeSignatureEvent(t, *by_tick[t]) for t in sorted(by_tick))


class _TempoMap:
    def __init__(self, tempo_map: Sequence[TempoEvent], tpq: int):
        self.tpq = tpq
        self.ticks = [e.tick for e in tempo_map]
        self.uspq = [e.microseconds_per_quarter for e in tempo_map]
        self.start_seconds = [0.0]
        for k in range(1, len(self.ticks)):
            span = self.ticks[k] - self.ticks[k - 1]
            self.start_seconds.append(
                self.start_seconds[-1] + span * self.uspq[k - 1] / (1_000_000 * tpq)
            )

    def seconds(self, tick: int) -> float:
        k = int(np.searchsorted(self.ticks, tick, side="right")) - 1
        return self.start_seconds[k] + (tick - self.ticks[k]) * self.uspq[k] / (
            1_000_000 * self.tpq
        )


class _BarMap:
    def __init__(self, meter_map: Sequence[TimeSignatureEvent], tpq: int):
        self.ticks = [e.tick for e in meter_map]
        self.bar_ticks = [Fraction(4 * tpq * e.numerator, e.denominator) for e in meter_map]
        self.first_bar = [0]
        for k in range(1, len(self.ticks)):
            span = self.ticks[k] - self.ticks[k - 1]
            # a meter change opens a new bar even when it lands mid-bar
            bars = -(-Fraction(span) // self.bar_ticks[k - 1])
            self.first_bar.append(self.first_bar[-1] + int(bars))

    def bar(self, tick: int) -> int:
        k = int(np.searchsorted(self.ticks, tick, side="right")) - 1
        return self.first_bar[k] + int((tick - self.ticks[k]) // self.bar_ticks[k])


def build_sequence(
    raw_notes: Iterable[tuple[int, int, int, int] | tuple[int, int, int, int, int]],
    ticks_per_quarter: int,
    tempo_events: Iterable[tuple[int, int]] = (),
    meter_events: Iterable[tuple[int, int, int]] = (),
    unterminated: int = 0,
) -> NoteSequence:
    """Annotate raw ``(pitch, onset_ticks, duration_ticks, velocity[, track])``
    tuples with seconds, beats and bars and return a sorted NoteSequence."""
    if ticks_per_quarter <= 0:
        raise MalformedFile(f"ticks per quarter must be positive, got {ticks_per_quarter}")
    tempo_map = _normalize_tempo_map(tempo_events)
    meter_map = _normalize_meter_map(meter_events)
    tmap = _TempoMap(tempo_map, ticks_per_quarter)
    bmap = _BarMap(meter_map, ticks_per_quarter)

    rows = []
    for raw in raw_notes:
        pitch, onset, duration, velocity = raw[:4]
        track = raw[4] if len(raw) > 4 else 0
        if not 0 <= pitch <= 127 or not 1 <= velocity <= 127:
            raise MalformedFile(f"note out of range: pitch={pitch} velocity={velocity}")
        if onset < 0 or duration < 1:
            raise MalformedFile(f"bad note timing: onset={onset} duration={duration}")
        rows.append((onset, pitch, track, duration, velocity))
    if not rows:
        raise EmptySequence("sequence contains no notes")
    rows.sort()

    tpq = ticks_per_quarter
    notes = []
    for onset, pitch, track, duration, velocity in rows:
        start_s = tmap.seconds(onset)
        notes.append(
            Note(
                pitch=pitch,
                onset_ticks=onset,
                duration_ticks=duration,
                velocity=velocity,
                onset_seconds=start_s,
                duration_seconds=tmap.seconds(onset + duration) - start_s,
                onset_beats=onset / tpq,
                duration_beats=duration / tpq,
                bar_index=bmap.bar(onset),
                track=track,
            )
        )
    return NoteSequence(
        notes=tuple(notes),
        tempo_map=tempo_map,
        meter_map=meter_map,
        ticks_per_quarter=tpq,
        n_bars=1 + max(n.bar_index for n in notes),
        unterminated=unterminated,
    )


def parse_midi(data: bytes) -> NoteSequence:
    """Parse SMF format 0/1 bytes into a NoteSequence.

    Note-on/note-off pairs are matched per (track, channel, pitch) in FIFO
    order. A note still open at the end of its track is closed there and
    counted in ``NoteSequence.unterminated`` (a warning is also emitted).
    Controller events, pedal included, are ignored.
    """
    try:
        mf = mido.MidiFile(file=io.BytesIO(data))
    except Exception as exc:  # mido raises OSError/EOFError/ValueError/KeyError
        raise MalformedFile(f"cannot decode MIDI data: {exc}") from exc
    if mf.type not in (0, 1):
        raise MalformedFile(f"unsupported SMF format {mf.type}")
    if not isinstance(mf.ticks_per_beat, int) or mf.ticks_per_beat <= 0:
        raise MalformedFile("SMPTE time division is not supported")

    raw: list[tuple[int, int, int, int, int]] = []
    tempos: list[tuple[int, int]] = []
    meters: list[tuple[int, int, int]] = []
    open_count = 0
    for track_id, track in enumerate(mf.tracks):
        tick = 0
        pending: dict[tuple[int, int], deque] = defaultdict(deque)
        for msg in track:
            tick += msg.time
            if msg.type == "set_tempo":
                tempos.append((tick, msg.tempo))
            elif msg.type == "time_signature":
                meters.append((tick, msg.numerator, msg.denominator))
            elif msg.type == "note_on" and msg.velocity > 0:
                pending[(msg.channel, msg.note)].append((tick, msg.velocity))
            elif msg.type in ("note_off", "note_on"):
                queue = pending.get((msg.channel, msg.note))
                if queue:
                    onset, vel = queue.popleft()
                    raw.append((msg.note, onset, max(1, tick - onset), vel, track_id))
        for (_, pitch), queue in sorted(pending.items()):
            for onset, vel in queue:
                raw.append((pitch, onset, max(1, tick - onset), vel, track_id))
                open_count += 1
    if open_count:
        warnings.warn(f"{open_count} unterminated note(s) closed at track end", stacklevel=2)
    return build_sequence(raw, mf.ticks_per_beat, tempos, meters, unterminated=open_count)


def read_midi(path: str | Path) -> NoteSequence:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_midi(data)


def write_midi(
    raw_notes: Iterable[tuple[int, int, int, int]],
    ticks_per_quarter: int = 480,
    microseconds_per_quarter: int = DEFAULT_USPQ,
    time_signature: tuple[int, int] = DEFAULT_METER,
) -> bytes:
    """Encode ``(pitch, onset_ticks, duration_ticks, velocity)`` notes as a
    format-0 SMF with one tempo and one meter event."""
    events = []
    for pitch, onset, duration, velocity in raw_notes:
        # offs sort before ons at the same tick so repeated pitches re-trigger
        events.append((onset + duration, 0, pitch, 0))
        events.append((onset, 1, pitch, velocity))
    events.sort()

    track = mido.MidiTrack()
    track.append(mido.MetaMessage("set_tempo", tempo=microseconds_per_quarter, time=0))
    track.append(
        mido.MetaMessage(
            "time_signature",
            numerator=time_signature[0],
            denominator=time_signature[1],
            time=0,
        )
    )
    last = 0
    for tick, is_on, pitch, velocity in events:
        kind = "note_on" if is_on else "note_off"
        track.append(mido.Message(kind, note=pitch, velocity=velocity, time=tick - last))
        last = tick
    track.append(mido.MetaMessage("end_of_track", time=0))

    mf = mido.MidiFile(type=0, ticks_per_beat=ticks_per_quarter)
    mf.tracks.append(track)
    buf = io.BytesIO()
    mf.save(file=buf)
    return buf.getvalue()


def canonical_serialize(seq: NoteSequence) -> bytes:
    """Fixed 10-byte little-endian records, one per note in (onset, pitch) order:
    delta onset ticks (u32), pitch (u8), velocity (u8), duration ticks (u32)."""
    if not seq.notes:
        raise EmptySequence("cannot serialize an empty sequence")
    ordered = sorted(
        seq.notes, key=lambda n: (n.onset_ticks, n.pitch, n.velocity, n.duration_ticks)
    )
    out = bytearray()
    previous = 0
    for n in ordered:
        out += _RECORD.pack(n.onset_ticks - previous, n.pitch, n.velocity, n.duration_ticks)
        previous = n.onset_ticks
    return bytes(out)
