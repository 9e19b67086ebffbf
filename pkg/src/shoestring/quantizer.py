"""Weight quantization: periodic regularization loss and progressive hard rounding.

Nothing here trains.  The loss and its gradient are exposed for an external
training loop; :func:`quantize_model` performs the hard-quantization sweep on
a finished float weight bundle and packs the per-sample matrices as int8
block-sparse tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import INT8_MAX, Q_SCALE, BlockSparseMatrix, pack_block_sparse


@dataclass(frozen=True)
class QuantizerConfig:
    alpha: float = 0.01
    epsilon: float = 0.001
    q: float = Q_SCALE

    def __post_init__(self):
        if self.alpha <= 0 or self.epsilon <= 0 or self.q <= 0:
            raise ValueError("alpha, epsilon and q must all be positive")


@dataclass(frozen=True)
class ZetaSchedule:
    """Rounding threshold rising linearly from 0 at ``start`` to 1/2 at ``end``."""

    start_progress: float = 0.0
    end_progress: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.start_progress < self.end_progress <= 1.0:
            raise ValueError("need 0 <= start_progress < end_progress <= 1")

    def zeta(self, progress):
        t = (progress - self.start_progress) / (self.end_progress - self.start_progress)
        return 0.5 * float(np.clip(t, 0.0, 1.0))

    def points(self, steps):
        """Thresholds for ``steps`` evenly spaced invocations; the last is 1/2."""
        if steps < 1:
            raise ValueError("need at least one step")
        return [self.zeta(p) for p in np.linspace(0.0, 1.0, steps + 1)[1:]]


def quant_reg_loss(w, cfg=QuantizerConfig()):
    w = np.asarray(w, dtype=np.float64)
    return cfg.alpha * (1.0 + cfg.epsilon - np.cos(2.0 * np.pi * w / cfg.q)) ** 0.25


def quant_reg_grad(w, cfg=QuantizerConfig()):
    w = np.asarray(w, dtype=np.float64)
    phase = 2.0 * np.pi * w / cfg.q
    base = 1.0 + cfg.epsilon - np.cos(phase)
    return 0.25 * cfg.alpha * base ** -0.75 * np.sin(phase) * (2.0 * np.pi / cfg.q)


def hard_quantize_step(weights, zeta, cfg=QuantizerConfig()):
    """Snap weights within ``zeta`` of a lattice point ``k * q`` onto it.

    The test is strict (distance < zeta); at ``zeta == 1/2`` every weight is
    snapped, ties included.  Lattice points saturate at +/-127 q so results
    stay representable as int8.
    """
    if not 0.0 <= zeta <= 0.5:
        raise ValueError(f"zeta must lie in [0, 1/2], got {zeta}")
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(np.abs(w) >= 1.0):
        raise ValueError("weights must lie in ]-1, 1[ to be representable as 8-bit values at q=1/128")
    scaled = w / cfg.q
    nearest = np.rint(scaled)
    limit = np.floor(INT8_MAX * Q_SCALE / cfg.q)
    nearest = np.clip(nearest, -limit, limit)
    capture = np.ones(w.shape, dtype=bool) if zeta >= 0.5 else np.abs(scaled - np.rint(scaled)) < zeta
    return np.where(capture, nearest * cfg.q, w)


def is_on_lattice(weights, q=Q_SCALE):
    scaled = np.asarray(weights, dtype=np.float64) / q
    return np.rint(scaled) == scaled


def quantize_model(bundle, quantized_names, schedule=ZetaSchedule(), cfg=QuantizerConfig(), steps=16):
    """Run the hard-quantization sweep over ``quantized_names`` and pack them.

    ``bundle`` maps tensor names to float arrays.  Returns a new ordered dict
    in which the named tensors are :class:`BlockSparseMatrix` and every other
    tensor is passed through untouched.
    """
    ratio = cfg.q / Q_SCALE
    if ratio < 1 or ratio != round(ratio):
        raise ValueError("q must be an integer multiple of 1/128 to fit the int8 container")
    missing = set(quantized_names) - set(bundle)
    if missing:
        raise KeyError(f"tensors missing from bundle: {sorted(missing)}")
    out = {}
    for name, tensor in bundle.items():
        if name not in quantized_names:
            out[name] = tensor
            continue
        if isinstance(tensor, BlockSparseMatrix):
            raise TypeError(f"tensor {name!r} is already quantized")
        w = np.asarray(tensor, dtype=np.float64)
        for zeta in schedule.points(steps):
            w = hard_quantize_step(w, zeta, cfg)
        out[name] = pack_block_sparse(w, Q_SCALE)
    return out
