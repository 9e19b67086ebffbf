"""Throughput benchmark: quantized block-sparse engine vs dense float engine."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

from .model.config import SAMPLE_RATE
from .model.engine import FLOAT, QUANTIZED
from .model.features import synthetic_features
from .model.synthesis import SynthConfig, Synthesizer

BENCH_SEED = 1234
WARMUP_FRAMES = 2


@dataclass(frozen=True)
class BenchReport:
    model: str
    mode: str
    samples: int
    wall_clock_s: float
    real_time_factor: float  # audio seconds per compute second
    percent_of_core: float
    tanh_per_sample: float
    weights_used_per_sample: int

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def pin_to_one_core():
    """Pin the process to the core it is running on; returns the core or None."""
    if not hasattr(os, "sched_setaffinity"):
        return None
    try:
        allowed = sorted(os.sched_getaffinity(0))
        os.sched_setaffinity(0, {allowed[0]})
        return allowed[0]
    except OSError:
        return None


def available_modes(model):
    return [QUANTIZED, FLOAT] if model.config.quantized else [FLOAT]


def run_bench(model, seconds, mode, seed=BENCH_SEED):
    """Synthesize ``seconds`` of audio from seeded synthetic features in one mode.

    The first frames are synthesized once beforehand so JIT compilation is not
    part of the timing.
    """
    if seconds <= 0:
        raise ValueError("--seconds must be positive")
    frames = max(1, int(round(seconds * SAMPLE_RATE / model.config.frame_size)))
    features = synthetic_features(frames, seed)
    synth = Synthesizer(model, SynthConfig(mode=mode))
    synth.synthesize(features[:WARMUP_FRAMES], seed)
    _, st = synth.synthesize(features, seed)
    return BenchReport(
        model=st.model,
        mode=st.mode,
        samples=st.samples,
        wall_clock_s=st.wall_clock_s,
        real_time_factor=st.real_time_factor,
        percent_of_core=st.percent_of_core,
        tanh_per_sample=st.dual_fc_tanh_per_sample,
        weights_used_per_sample=st.weights_used_per_sample,
    )


def speedup(quantized, floating):
    """Throughput ratio of the quantized run over the float run on the same stream."""
    return quantized.real_time_factor / floating.real_time_factor
