"""Seeded random weights for any configuration.

No trained weights ship with the package.  These stand in for them in the
benchmark and tests: shapes, sparsity patterns and per-gate density split
match a real model, and every per-sample weight lies in ]-1, 1[.
"""

from __future__ import annotations

import numpy as np

from .config import Q, gate_densities, nominal_density, tensor_shapes
from .network import Model
from .weights import TensorRecord


def _uniform(rng, shape, scale):
    return rng.uniform(-scale, scale, size=shape)


def block_pattern(rng, rows, cols, density):
    """Mask with exactly ``round(density * n_blocks)`` occupied 8x4 blocks."""
    br, bc = rows // 8, cols // 4
    total = br * bc
    keep = int(round(density * total))
    flat = np.zeros(total, dtype=bool)
    flat[rng.choice(total, size=keep, replace=False)] = True
    return np.repeat(np.repeat(flat.reshape(br, bc), 8, axis=0), 4, axis=1)


def gated_sparse(rng, n, col_ranges, density, scale):
    """A (3n, cols) GRU matrix with per-gate densities (d/2, d/2, 2d) in every column range."""
    cols = sum(c for c in col_ranges)
    out = np.zeros((3 * n, cols))
    for g, dg in enumerate(gate_densities(density)):
        start = 0
        for c in col_ranges:
            mask = block_pattern(rng, n, c, dg)
            eff = max(1.0, dg * cols)
            out[g * n : (g + 1) * n, start : start + c] = mask * _uniform(rng, (n, c), scale / np.sqrt(eff))
            start += c
    return out


def _center_bias(scale=1.5):
    """Per-node bias steering each branch toward the codes nearest zero amplitude."""
    bias = np.zeros(Q - 1)
    for node in range(2, Q):
        level = node.bit_length() - 1
        lo = (node - (1 << level)) << (8 - level)
        hi = lo + (1 << (8 - level))
        if hi <= 128:
            bias[node - 1] = scale   # below zero: the upper half is closer
        elif lo >= 128:
            bias[node - 1] = -scale
    return bias


def random_records(cfg, seed=0):
    rng = np.random.default_rng(seed)
    shapes = tensor_shapes(cfg)
    A, B, C = cfg.n_a, cfg.n_b, cfg.cond_dim
    values = {}
    for name, shape in shapes.items():
        if name.endswith("bias") and name.startswith("frame."):
            values[name] = _uniform(rng, shape, 0.1)
        elif name.startswith("frame."):
            values[name] = _uniform(rng, shape, 1.0 / np.sqrt(shape[1]))
        elif name.startswith("embed."):
            values[name] = _uniform(rng, shape, 0.5)
        elif name == "gru_a.input":
            values[name] = _uniform(rng, shape, 1.0 / np.sqrt(shape[1]))
        elif name == "gru_a.recurrent":
            values[name] = gated_sparse(rng, A, [A], cfg.d_a, 0.9)
        elif name == "gru_b.input":
            values[name] = gated_sparse(rng, B, [A, C], cfg.d_b, 0.9)
        elif name == "gru_b.recurrent":
            values[name] = _uniform(rng, shape, 0.9 / np.sqrt(B))
        elif name in ("dual_fc.w1", "dual_fc.w2"):
            values[name] = _uniform(rng, shape, 0.9 / np.sqrt(B))
        elif name in ("dual_fc.b1", "dual_fc.b2"):
            values[name] = _center_bias().reshape(shape)
        elif name.startswith("dual_fc.gain"):
            values[name] = np.ones(shape)
        else:  # GRU biases
            values[name] = _uniform(rng, shape, 0.1)
    return {
        name: TensorRecord(values[name].astype(np.float32), nominal_density(cfg, name))
        for name in shapes
    }


def random_model(cfg, seed=0):
    """Float model with random weights; quantize with :func:`quantize_model_weights`."""
    return Model.from_records(random_records(cfg.with_quantized(False), seed))
