import io

import mido
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_perf.errors import EmptySequence, MalformedFile
from birkhoff_perf.midi_io import (
    RECORD_SIZE,
    build_sequence,
    canonical_serialize,
    parse_midi,
    velocity_level,
    write_midi,
)

from conftest import seq


def smf(messages, tpq=480, kind=0, extra_tracks=()):
    mf = mido.MidiFile(type=kind, ticks_per_beat=tpq)
    for msgs in (messages, *extra_tracks):
        track = mido.MidiTrack()
        track.extend(msgs)
        mf.tracks.append(track)
    buf = io.BytesIO()
    mf.save(file=buf)
    return buf.getvalue()


ONE_NOTE = [
    mido.Message("note_on", note=60, velocity=64, time=0),
    mido.Message("note_off", note=60, velocity=0, time=480),
]


def test_single_note_default_tempo():
    s = parse_midi(smf(ONE_NOTE))
    assert len(s.notes) == 1
    n = s.notes[0]
    assert (n.pitch, n.velocity) == (60, 64)
    assert n.onset_beats == 0 and n.duration_beats == 1.0
    assert n.onset_seconds == 0 and n.duration_seconds == pytest.approx(0.5, abs=1e-12)
    assert s.n_bars == 1


def test_tempo_event_changes_seconds():
    s = parse_midi(smf([mido.MetaMessage("set_tempo", tempo=600_000, time=0), *ONE_NOTE]))
    assert s.notes[0].duration_seconds == pytest.approx(0.6, abs=1e-12)


def test_tempo_change_mid_note():
    # 120 bpm for the first beat, 60 bpm afterwards
    msgs = [
        mido.Message("note_on", note=60, velocity=64, time=0),
        mido.MetaMessage("set_tempo", tempo=1_000_000, time=480),
        mido.Message("note_off", note=60, velocity=0, time=480),
    ]
    n = parse_midi(smf(msgs)).notes[0]
    assert n.duration_seconds == pytest.approx(1.5, abs=1e-12)


def test_zero_notes_is_empty_sequence():
    with pytest.raises(EmptySequence):
        parse_midi(smf([mido.MetaMessage("set_tempo", tempo=500_000, time=0)]))


def test_garbage_is_malformed():
    with pytest.raises(MalformedFile):
        parse_midi(b"not a midi file at all")


def test_velocity_zero_note_on_is_note_off():
    msgs = [
        mido.Message("note_on", note=60, velocity=80, time=0),
        mido.Message("note_on", note=60, velocity=0, time=240),
    ]
    n = parse_midi(smf(msgs)).notes[0]
    assert n.duration_ticks == 240 and n.velocity == 80


def test_overlapping_same_pitch_fifo():
    msgs = [
        mido.Message("note_on", note=60, velocity=70, time=0),
        mido.Message("note_on", note=60, velocity=90, time=100),
        mido.Message("note_off", note=60, velocity=0, time=100),
        mido.Message("note_off", note=60, velocity=0, time=100),
    ]
    notes = parse_midi(smf(msgs)).notes
    # first on closes with the first off
    assert [(n.onset_ticks, n.duration_ticks, n.velocity) for n in notes] == [
        (0, 200, 70),
        (100, 200, 90),
    ]


def test_unterminated_note_warns():
    with pytest.warns(UserWarning):
        s = parse_midi(smf([mido.Message("note_on", note=60, velocity=64, time=0),
                            mido.Message("note_on", note=62, velocity=64, time=480),
                            mido.Message("note_off", note=62, velocity=0, time=480)]))
    assert s.unterminated == 1


def test_format1_tracks_merged():
    t0 = [mido.MetaMessage("set_tempo", tempo=500_000, time=0)]
    t1 = [mido.Message("note_on", note=64, velocity=60, time=0),
          mido.Message("note_off", note=64, velocity=0, time=480)]
    t2 = [mido.Message("note_on", note=60, velocity=60, time=0),
          mido.Message("note_off", note=60, velocity=0, time=480)]
    s = parse_midi(smf(t0, kind=1, extra_tracks=(t1, t2)))
    assert [(n.pitch, n.track) for n in s.notes] == [(60, 2), (64, 1)]


def test_bar_index_follows_meter_change():
    # 3/4 for the first bar, then 4/4
    notes = [(60, 0, 240, 64), (60, 3 * 480, 240, 64), (60, 7 * 480, 240, 64)]
    s = seq(notes, meter=[(0, 3, 4), (3 * 480, 4, 4)])
    assert [n.bar_index for n in s.notes] == [0, 1, 2]
    assert s.n_bars == 3


@pytest.mark.parametrize("v,level", [(0, 0), (24, 0), (25, 1), (50, 1), (51, 2), (64, 2),
                                     (76, 2), (77, 3), (101, 3), (102, 4), (127, 4)])
def test_velocity_level(v, level):
    assert velocity_level(v) == level


def test_velocity_level_monotone_surjective():
    levels = [velocity_level(v) for v in range(128)]
    assert levels == sorted(levels)
    assert set(levels) == {0, 1, 2, 3, 4}


def test_serialize_three_notes_is_30_bytes():
    s = seq([(60, 0, 480, 64), (62, 480, 480, 64), (64, 960, 480, 64)])
    assert len(canonical_serialize(s)) == 3 * RECORD_SIZE == 30


def test_serialize_orders_by_pitch_within_onset():
    a = canonical_serialize(seq([(64, 0, 480, 64), (60, 0, 480, 64)]))
    assert a[4] == 60 and a[RECORD_SIZE + 4] == 64


def test_serialize_deterministic_and_injective():
    base = [(60, 0, 480, 64), (62, 480, 480, 64)]
    assert canonical_serialize(seq(base)) == canonical_serialize(seq(list(base)))
    for k in range(4):
        changed = [list(n) for n in base]
        changed[1][k] += 1
        assert canonical_serialize(seq([tuple(n) for n in changed])) != canonical_serialize(seq(base))


def test_write_parse_roundtrip():
    raw = [(60, 0, 480, 64), (64, 0, 480, 70), (60, 480, 240, 50)]
    s = parse_midi(write_midi(raw))
    assert sorted((n.pitch, n.onset_ticks, n.duration_ticks, n.velocity) for n in s.notes) == sorted(raw)


note_lists = st.lists(
    st.tuples(st.integers(0, 127), st.integers(0, 5000), st.integers(1, 960), st.integers(1, 127)),
    min_size=1,
    max_size=40,
)


@settings(max_examples=200, deadline=None)
@given(note_lists, st.sampled_from([96, 480, 960]), st.integers(200_000, 1_500_000))
def test_parsed_files_sorted_and_monotone(raw, tpq, uspq):
    s = parse_midi(write_midi(raw, ticks_per_quarter=tpq, microseconds_per_quarter=uspq))
    keys = [(n.onset_ticks, n.pitch) for n in s.notes]
    assert keys == sorted(keys)
    for attr in ("onset_seconds", "onset_beats"):
        vals = np.array([getattr(n, attr) for n in s.notes])
        assert (np.diff(vals) >= 0).all()
    assert s.n_bars == 1 + max(n.bar_index for n in s.notes)


@settings(max_examples=100, deadline=None)
@given(note_lists)
def test_build_sequence_rejects_nothing_valid(raw):
    s = build_sequence(raw, 480)
    assert len(s.notes) == len(raw)
