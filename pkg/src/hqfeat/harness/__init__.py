from . import dsp
from .experiments import (
    ExperimentReport,
    MixingConditionConfig,
    ProbeConfig,
    SeparationInjectionConfig,
    TranscriptionInjectionConfig,
    extract_dataset_features,
    make_noise_features,
    run_mixing_experiment,
    run_probe_experiment,
    run_separation_injection,
    run_transcription_injection,
    train_foundation,
)
from .metrics import (
    average_precision,
    f1_from_counts,
    frame_f1,
    mape,
    mean_average_precision,
    mixing_feature_mape,
    mixing_features,
    multilabel_roc_auc,
    note_f1,
    note_match_counts,
    onset_peaks,
    roc_auc,
    sdr,
)
from .models import ToyMixer, ToySeparator, ToyTranscriber, toy_models
from .synth import SPLITS, SyntheticTaskSpec, TASK_KINDS, TaskDataset, gen_tasks, onset_target

__all__ = [
    "dsp", "ExperimentReport", "MixingConditionConfig", "ProbeConfig",
    "SeparationInjectionConfig", "TranscriptionInjectionConfig",
    "extract_dataset_features", "make_noise_features", "run_mixing_experiment",
    "run_probe_experiment", "run_separation_injection",
    "run_transcription_injection", "train_foundation", "average_precision",
    "f1_from_counts", "frame_f1", "mape", "mean_average_precision",
    "mixing_feature_mape", "mixing_features", "multilabel_roc_auc", "note_f1",
    "note_match_counts", "onset_peaks", "roc_auc", "sdr", "ToyMixer",
    "ToySeparator", "ToyTranscriber", "toy_models", "SPLITS",
    "SyntheticTaskSpec", "TASK_KINDS", "TaskDataset", "gen_tasks", "onset_target",
]
