"""Feature-to-PCM synthesis driver and run statistics."""

from __future__ import annotations

import json
import time
import wave
from dataclasses import asdict, dataclass

import numpy as np

from .. import dsp
from ..kernels import DEFAULT_COEFFS
from ..sampling import DEFAULT_TABLE_SIZE, DEFAULT_XI, build_inv_sigmoid_table
from .config import SAMPLE_RATE, TREE_LEVELS
from .engine import EngineState, EngineWeights, engine_frame
from .features import validate_features
from .network import frame_contribution, frame_lpc, frame_rate_forward


@dataclass(frozen=True)
class SynthConfig:
    xi: float = DEFAULT_XI
    table_size: int = DEFAULT_TABLE_SIZE
    preemphasis: float = dsp.DEFAULT_PREEMPHASIS
    mode: str | None = None  # None: quantized if the model is, else float


@dataclass(frozen=True)
class RunStats:
    model: str
    mode: str
    frames: int
    samples: int
    audio_seconds: float
    wall_clock_s: float
    real_time_factor: float  # audio seconds per compute second
    percent_of_core: float   # 100 / real_time_factor
    dual_fc_tanh_per_sample: float
    activation_evals_per_sample: float
    weights_used_per_sample: int

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


class Synthesizer:
    """Holds compiled-engine weights for one model and mode; reusable across streams."""

    def __init__(self, model, cfg=SynthConfig(), coeffs=DEFAULT_COEFFS):
        self.model = model
        self.cfg = cfg
        self.coeffs = coeffs
        self.weights = EngineWeights.build(model, cfg.mode)
        self.table = build_inv_sigmoid_table(cfg.xi, cfg.table_size)

    def run(self, features, seed=0):
        """Return ``(pre-emphasized signal, excitation codes, node evaluations)``."""
        features = validate_features(features)
        model, w = self.model, self.weights
        cond = frame_rate_forward(model, features)
        lpc = frame_lpc(features)
        gate_b_bias = model.vector("gru_b.bias")
        frame_size = model.config.frame_size
        rng = np.random.default_rng(seed)
        state = EngineState.initial(w.n_a, w.n_b, model.config.lpc_order)
        sig = np.empty(len(features) * frame_size)
        exc = np.empty(len(features) * frame_size, dtype=np.int64)
        evals = 0
        for i, f in enumerate(cond):
            gate_a = frame_contribution(model, f)
            gate_b = w.gru_b_f @ f + gate_b_bias
            draws = rng.integers(0, len(self.table), size=(frame_size, TREE_LEVELS))
            s, e, n = engine_frame(state, w, gate_a, gate_b, lpc[i], self.table.entries, draws, self.coeffs)
            sig[i * frame_size : (i + 1) * frame_size] = s
            exc[i * frame_size : (i + 1) * frame_size] = e
            evals += n
        return sig, exc, evals

    def synthesize(self, features, seed=0):
        start = time.perf_counter()
        sig, _, evals = self.run(features, seed)
        pcm = dsp.deemphasis(sig, self.cfg.preemphasis, clip=True)
        elapsed = time.perf_counter() - start
        return pcm, self._stats(len(features), len(pcm), evals, elapsed)

    def _stats(self, frames, samples, node_evals, elapsed):
        cfg = self.model.config
        audio = samples / SAMPLE_RATE
        rtf = audio / elapsed if elapsed > 0 else float("inf")
        dual_tanh = 2.0 * node_evals / samples
        return RunStats(
            model=cfg.name,
            mode=self.weights.mode,
            frames=frames,
            samples=samples,
            audio_seconds=audio,
            wall_clock_s=elapsed,
            real_time_factor=rtf,
            percent_of_core=100.0 / rtf,
            dual_fc_tanh_per_sample=dual_tanh,
            activation_evals_per_sample=3.0 * (cfg.n_a + cfg.n_b) + dual_tanh,
            weights_used_per_sample=self.weights.weights_used,
        )


def synthesize(features, model, cfg=SynthConfig(), seed=0):
    """Synthesize PCM in [-1, 1] from feature frames; returns ``(pcm, RunStats)``."""
    return Synthesizer(model, cfg).synthesize(features, seed)


def write_wav(path, pcm):
    """16-bit mono WAV at 16 kHz."""
    data = np.clip(np.rint(np.asarray(pcm) * 32767.0), -32768, 32767).astype("<i2")
    with open(path, "wb") as fh, wave.open(fh, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(data.tobytes())


def read_wav(path):
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit mono WAV")
        raw = wf.readframes(wf.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
