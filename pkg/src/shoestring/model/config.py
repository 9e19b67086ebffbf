"""Model configurations and the tensor layout they imply."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..dsp import LPC_ORDER

FEATURE_DIM = 36
CEPSTRUM_DIM = 18
FRAME_INPUT_DIM = CEPSTRUM_DIM + 2  # cepstrum, pitch period, pitch correlation
LPC_SLICE = slice(FRAME_INPUT_DIM, FRAME_INPUT_DIM + LPC_ORDER)
SAMPLE_RATE = 16000
Q = 256
TREE_LEVELS = 8


@dataclass(frozen=True)
class ModelConfig:
    n_a: int
    n_b: int
    d_a: float
    d_b: float
    quantized: bool
    embed_dim: int = 128
    cond_dim: int = 128
    lpc_order: int = LPC_ORDER
    frame_size: int = SAMPLE_RATE // 100
    name: str = "custom"

    def __post_init__(self):
        if self.n_a <= 0 or self.n_b <= 0 or self.embed_dim <= 0 or self.cond_dim <= 0:
            raise ValueError("layer sizes must be positive")
        for d in (self.d_a, self.d_b):
            if not 0.0 < d <= 1.0:
                raise ValueError(f"density must lie in (0, 1], got {d}")
        if self.lpc_order != LPC_ORDER:
            raise ValueError(f"LPC order is fixed at {LPC_ORDER}")
        if self.n_a % 8 or self.n_b % 8:
            raise ValueError("GRU sizes must be multiples of 8 for the 8x4 block format")

    def with_quantized(self, quantized):
        return replace(self, quantized=quantized)


# name: (N_A, d_A, N_B, d_B, quantized)
_TABLE = {
    "B192": (192, 0.1, 16, 1.0, False),
    "B384": (384, 0.1, 16, 1.0, False),
    "B640": (640, 0.1, 16, 1.0, False),
    "P192": (192, 0.25, 32, 0.5, True),
    "P384": (384, 0.1, 32, 0.5, True),
    "P640": (640, 0.15, 32, 0.5, True),
}

PRESETS = {
    name: ModelConfig(n_a=na, n_b=nb, d_a=da, d_b=db, quantized=qz, name=name)
    for name, (na, da, nb, db, qz) in _TABLE.items()
}

# Published per-sample weight counts, for reference in reports.
PUBLISHED_WEIGHTS_USED = {
    "B192": 30_000, "B384": 73_000, "B640": 165_000,
    "P192": 40_000, "P384": 66_000, "P640": 219_000,
}


def match_preset(n_a, n_b, d_a, d_b, embed_dim=128, cond_dim=128):
    for name, cfg in PRESETS.items():
        if (cfg.n_a, cfg.n_b, cfg.embed_dim, cfg.cond_dim) == (n_a, n_b, embed_dim, cond_dim) and (
            abs(cfg.d_a - d_a) < 1e-6 and abs(cfg.d_b - d_b) < 1e-6
        ):
            return name
    return "custom"


# Matrices evaluated once per output sample; these are the ones the
# quantizer turns into int8 block-sparse tensors.
SAMPLE_RATE_MATRICES = (
    "gru_a.recurrent",
    "gru_b.input",
    "gru_b.recurrent",
    "dual_fc.w1",
    "dual_fc.w2",
)

# Sparse matrices whose per-gate density follows (d/2, d/2, 2d).
GATED_SPARSE = {"gru_a.recurrent": "d_a", "gru_b.input": "d_b"}


def tensor_shapes(cfg):
    """Ordered ``name -> (rows, cols)`` for every tensor in a weight file."""
    C, E, A, B = cfg.cond_dim, cfg.embed_dim, cfg.n_a, cfg.n_b
    return {
        "frame.conv1.weight": (C, 3 * FRAME_INPUT_DIM),
        "frame.conv1.bias": (1, C),
        "frame.conv2.weight": (C, 3 * C),
        "frame.conv2.bias": (1, C),
        "frame.dense1.weight": (C, C),
        "frame.dense1.bias": (1, C),
        "frame.dense2.weight": (C, C),
        "frame.dense2.bias": (1, C),
        "embed.sig": (Q, E),
        "embed.exc": (Q, E),
        "gru_a.input": (3 * A, 3 * E + C),
        "gru_a.bias": (1, 3 * A),
        "gru_a.recurrent": (3 * A, A),
        "gru_a.recurrent_bias": (1, 3 * A),
        "gru_b.input": (3 * B, A + C),
        "gru_b.bias": (1, 3 * B),
        "gru_b.recurrent": (3 * B, B),
        "gru_b.recurrent_bias": (1, 3 * B),
        "dual_fc.w1": (Q - 1, B),
        "dual_fc.b1": (1, Q - 1),
        "dual_fc.w2": (Q - 1, B),
        "dual_fc.b2": (1, Q - 1),
        "dual_fc.gain1": (1, Q - 1),
        "dual_fc.gain2": (1, Q - 1),
    }


def nominal_density(cfg, name):
    if name == "gru_a.recurrent":
        return cfg.d_a
    if name == "gru_b.input":
        return cfg.d_b
    return 1.0


def gate_densities(d):
    """Per-gate (update, reset, state) densities averaging to ``d``."""
    return (d / 2.0, d / 2.0, min(1.0, 2.0 * d))
