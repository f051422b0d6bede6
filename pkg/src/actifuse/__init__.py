"""Activity recognition for construction equipment from fused audio and
kinematic sensor data.

The pipeline tiles both modalities onto a shared 120 ms segment grid,
extracts time- and frequency-domain features per segment, fuses them by
concatenation, classifies each segment as a major (value-adding) or minor
(supporting) activity with a soft-margin SVM, and smooths the label
sequence with majority-window filters and a Markov chain filter.
"""

from .evaluate import EvalReport, compare_modalities, evaluate
from .features import SegmentGrid, extract_segment_features
from .ingest import (AnnotationTrack, AudioStream, KinematicStream, SyncConfig,
                     apply_sync, decode_audio, decode_kinematic, read_annotations)
from .labels import MAJOR, MINOR, LabelSequence
from .pipeline import (ActivityModel, PipelineParams, classify_pipeline,
                       train_pipeline)
from .smoothing import (TransitionModel, estimate_transitions, markov_filter,
                        window_filter)
from .svm import (SvmModel, TrainingSelection, fit_platt, predict,
                  select_training_rows, train_svm)
from .synth import SynthSpec, synth_recording

__version__ = "0.1.0"

__all__ = [
    "AnnotationTrack", "AudioStream", "KinematicStream", "SyncConfig",
    "ActivityModel", "EvalReport", "LabelSequence", "PipelineParams",
    "SegmentGrid", "SvmModel", "SynthSpec", "TrainingSelection",
    "TransitionModel", "MAJOR", "MINOR",
    "apply_sync", "classify_pipeline", "compare_modalities", "decode_audio",
    "decode_kinematic", "estimate_transitions", "evaluate",
    "extract_segment_features", "fit_platt", "markov_filter", "predict",
    "read_annotations", "select_training_rows", "synth_recording",
    "train_pipeline", "train_svm", "window_filter",
]
