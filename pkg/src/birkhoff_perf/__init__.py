"""Trainable order/complexity aesthetic scoring for score-aligned MIDI performances."""

from .alignment import AlignmentResult, AlignParams, align
from .features import FEATURE_NAMES, BasicFeatures, extract_all
from .midi_io import NoteSequence, parse_midi, read_midi
from .model import MeasureParams, TrainedModel, predict, train_model

__version__ = "0.1.0"
