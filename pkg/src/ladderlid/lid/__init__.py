"""Language-identification pipeline around the ladder network."""

from .data import (DataError, IvectorDataset, IvectorTable, OOS_NAME, SynthData, load_ivectors,
                   load_truth, read_class_list, synth_generate, write_class_list, write_ivectors,
                   write_truth)
from .metric import ChallengeMetric, challenge_cost, per_class_error, postprocess_oos
from .protocol import CVFold, SplitSpec, TuneResult, cv_split, tune_alpha

__all__ = [
    "DataError", "IvectorDataset", "IvectorTable", "OOS_NAME", "SynthData", "load_ivectors",
    "load_truth", "read_class_list", "synth_generate", "write_class_list", "write_ivectors",
    "write_truth", "ChallengeMetric", "challenge_cost", "per_class_error", "postprocess_oos",
    "CVFold", "SplitSpec", "TuneResult", "cv_split", "tune_alpha",
]
