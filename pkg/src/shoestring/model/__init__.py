"""LPCNet-style vocoder: configuration, weights, network and synthesis."""

from .config import PRESETS, PUBLISHED_WEIGHTS_USED, ModelConfig
from .features import read_features, synthetic_features, write_features
from .network import (
    DualFCLogits,
    Model,
    PrecomputedInputs,
    SynthState,
    dual_fc_node_logit,
    frame_rate_forward,
    gru_step,
    load_model,
    precompute_input_contributions,
    sample_rate_step,
)
from .quantize import quantize_weights
from .random_init import random_model
from .synthesis import RunStats, SynthConfig, Synthesizer, synthesize, write_wav

__all__ = [
    "PRESETS", "PUBLISHED_WEIGHTS_USED", "ModelConfig", "read_features", "synthetic_features",
    "write_features", "DualFCLogits", "Model", "PrecomputedInputs", "SynthState",
    "dual_fc_node_logit", "frame_rate_forward", "gru_step", "load_model",
    "precompute_input_contributions", "sample_rate_step", "quantize_weights", "random_model",
    "RunStats", "SynthConfig", "Synthesizer", "synthesize", "write_wav",
]
