"""Vocoder network: weights container, frame-rate network and the reference
sample-rate step built from the public kernels.

The reference step here favours clarity over speed; :mod:`.engine` runs the
same computation in compiled form for real synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import dsp
from ..kernels import DEFAULT_COEFFS, BlockSparseMatrix, matvec, sigmoid_approx, tanh_approx
from ..sampling import tree_sample
from .config import (
    FRAME_INPUT_DIM,
    GATED_SPARSE,
    LPC_SLICE,
    Q,
    SAMPLE_RATE_MATRICES,
    TREE_LEVELS,
    ModelConfig,
    gate_densities,
    match_preset,
    tensor_shapes,
)
from .weights import (
    DTypeMismatchError,
    MissingTensorError,
    TensorRecord,
    TensorShapeError,
    WeightFileError,
    load_weights,
    save_weights,
)

DENSITY_TOLERANCE = 0.01


def block_occupancy(value, row_start, row_stop):
    """Fraction of non-empty 8x4 blocks in a row band of a dense or packed matrix."""
    if isinstance(value, BlockSparseMatrix):
        return value.block_density_rows(row_start, row_stop)
    band = np.asarray(value)[row_start:row_stop]
    rows, cols = band.shape
    pad = np.zeros((-(-rows // 8) * 8, -(-cols // 4) * 4), dtype=band.dtype)
    pad[:rows, :cols] = band
    blocks = pad.reshape(pad.shape[0] // 8, 8, pad.shape[1] // 4, 4)
    return float(np.mean(np.any(blocks != 0, axis=(1, 3))))


def check_density_split(name, value, density, rtol=DENSITY_TOLERANCE):
    """Validate the (d/2, d/2, 2d) per-gate split of a GRU matrix."""
    n = value.shape[0] // 3
    measured = [block_occupancy(value, g * n, (g + 1) * n) for g in range(3)]
    overall = float(np.mean(measured))
    targets = gate_densities(density)
    if 2.0 * density <= 1.0:
        for gate, got, want in zip(("update", "reset", "state"), measured, targets):
            if abs(got - want) > rtol:
                raise TensorShapeError(name, f"{gate}-gate block density {got:.4f} does not match {want:.4f}")
    elif overall > density + rtol:
        raise TensorShapeError(name, f"block density {overall:.4f} exceeds declared {density:.4f}")
    return measured


class Model:
    """Immutable set of weights with the configuration they imply."""

    def __init__(self, config, records):
        self.config = config
        self.records = dict(records)
        self._dense_cache = {}

    @classmethod
    def from_records(cls, records, validate_density=True):
        for key in ("gru_a.recurrent", "gru_b.recurrent", "embed.sig", "frame.dense2.weight", "gru_b.input"):
            if key not in records:
                raise MissingTensorError(key, "missing from weight file")
        gra = records["gru_a.recurrent"]
        n_a = gra.shape[1]
        n_b = records["gru_b.recurrent"].shape[1]
        embed_dim = records["embed.sig"].shape[1]
        cond_dim = records["frame.dense2.weight"].shape[0]
        d_a, d_b = gra.density, records["gru_b.input"].density
        try:
            config = ModelConfig(
                n_a=n_a, n_b=n_b, d_a=d_a, d_b=d_b, quantized=gra.is_quantized,
                embed_dim=embed_dim, cond_dim=cond_dim,
                name=match_preset(n_a, n_b, d_a, d_b, embed_dim, cond_dim),
            )
        except ValueError as exc:
            raise WeightFileError(f"inconsistent model dimensions: {exc}") from None
        expected = tensor_shapes(config)
        for name in records:
            if name not in expected:
                raise TensorShapeError(name, "unexpected tensor")
        for name, shape in expected.items():
            if name not in records:
                raise MissingTensorError(name, "missing from weight file")
            rec = records[name]
            if tuple(rec.shape) != shape:
                raise TensorShapeError(name, f"shape {tuple(rec.shape)} != expected {shape}")
            if rec.is_quantized != (config.quantized and name in SAMPLE_RATE_MATRICES):
                raise DTypeMismatchError(
                    name, "is q8-block-sparse" if rec.is_quantized else "is f32 but the model is quantized"
                )
            if not rec.is_quantized and not np.all(np.isfinite(rec.value)):
                raise TensorShapeError(name, "contains non-finite values")
        if validate_density:
            for name in GATED_SPARSE:
                check_density_split(name, records[name].value, records[name].density)
        return cls(config, records)

    def __getitem__(self, name):
        return self.records[name].value

    def vector(self, name):
        return np.asarray(self.records[name].value, dtype=np.float64).ravel()

    def dense(self, name):
        """Float64 dense view of a tensor (dequantized if packed); cached."""
        if name not in self._dense_cache:
            value = self.records[name].value
            arr = value.to_dense() if isinstance(value, BlockSparseMatrix) else np.asarray(value, np.float64)
            arr.flags.writeable = False
            self._dense_cache[name] = arr
        return self._dense_cache[name]

    def dequantized(self):
        """Float32 copy with every packed matrix expanded to its dequantized values."""
        records = {
            name: TensorRecord(rec.value.to_dense().astype(np.float32), rec.density) if rec.is_quantized else rec
            for name, rec in self.records.items()
        }
        return Model(self.config.with_quantized(False), records)

    def save(self, path):
        save_weights(path, self.records)


def load_model(path, validate_density=True):
    return Model.from_records(load_weights(path), validate_density=validate_density)


# -- frame-rate network -------------------------------------------------------

def _conv3(x, weight, bias):
    """Kernel-3 'same' convolution over frames with edge frames replicated."""
    padded = np.concatenate([x[:1], x, x[-1:]], axis=0)
    windows = np.concatenate([padded[:-2], padded[1:-1], padded[2:]], axis=1)
    return windows @ weight.T + bias


def frame_rate_forward(model, features):
    """Conditioning vectors, one per frame: two conv layers then two dense layers, all tanh."""
    x = np.asarray(features, dtype=np.float64)[:, :FRAME_INPUT_DIM]
    x = np.tanh(_conv3(x, model.dense("frame.conv1.weight"), model.vector("frame.conv1.bias")))
    x = np.tanh(_conv3(x, model.dense("frame.conv2.weight"), model.vector("frame.conv2.bias")))
    x = np.tanh(x @ model.dense("frame.dense1.weight").T + model.vector("frame.dense1.bias"))
    return np.tanh(x @ model.dense("frame.dense2.weight").T + model.vector("frame.dense2.bias"))


# -- sample-rate network ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PrecomputedInputs:
    """GRU_A input-matrix products for every mu-law code of each embedded input."""

    sig: np.ndarray   # (256, 3 n_a) for s[t-1]
    pred: np.ndarray  # (256, 3 n_a) for p[t]
    exc: np.ndarray   # (256, 3 n_a) for e[t-1]

    def gate_inputs(self, i_sig, i_pred, i_exc):
        return self.sig[i_sig] + self.pred[i_pred] + self.exc[i_exc]


def precompute_input_contributions(model):
    E = model.config.embed_dim
    w = model.dense("gru_a.input")
    emb_sig, emb_exc = model.dense("embed.sig"), model.dense("embed.exc")
    tables = (emb_sig @ w[:, :E].T, emb_sig @ w[:, E : 2 * E].T, emb_exc @ w[:, 2 * E : 3 * E].T)
    for t in tables:
        t.flags.writeable = False
    return PrecomputedInputs(*tables)


def frame_contribution(model, f):
    """GRU_A input product for the conditioning vector, bias folded in."""
    E = model.config.embed_dim
    return model.dense("gru_a.input")[:, 3 * E :] @ np.asarray(f, np.float64) + model.vector("gru_a.bias")


def gru_step(h, gate_inputs, recurrent, recurrent_bias, coeffs=DEFAULT_COEFFS):
    """One GRU update with the reset gate applied to the recurrent candidate product.

    ``gate_inputs`` and ``recurrent_bias`` are ``3n`` vectors ordered
    (update, reset, candidate).
    """
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    gate_inputs = np.asarray(gate_inputs, dtype=np.float64)
    if gate_inputs.shape != (3 * n,) or tuple(recurrent.shape) != (3 * n, n):
        raise ValueError(
            f"shape mismatch: state {h.shape}, gate inputs {gate_inputs.shape}, recurrent {tuple(recurrent.shape)}"
        )
    rec = matvec(recurrent, h) + np.asarray(recurrent_bias, dtype=np.float64)
    z = sigmoid_approx(gate_inputs[:n] + rec[:n], coeffs)
    r = sigmoid_approx(gate_inputs[n : 2 * n] + rec[n : 2 * n], coeffs)
    cand = tanh_approx(gate_inputs[2 * n :] + r * rec[2 * n :], coeffs)
    return z * h + (1.0 - z) * cand


def dual_fc_node_logit(h_b, node, model, coeffs=DEFAULT_COEFFS):
    """Branch logit of one tree node; costs exactly two tanh evaluations."""
    if not 1 <= node < Q:
        raise ValueError(f"node id must lie in [1, {Q - 1}]")
    row = node - 1
    h_b = np.asarray(h_b, dtype=np.float64)
    a1 = model.dense("dual_fc.w1")[row] @ h_b + model.vector("dual_fc.b1")[row]
    a2 = model.dense("dual_fc.w2")[row] @ h_b + model.vector("dual_fc.b2")[row]
    return (
        model.vector("dual_fc.gain1")[row] * tanh_approx(a1, coeffs)
        + model.vector("dual_fc.gain2")[row] * tanh_approx(a2, coeffs)
    )


class DualFCLogits:
    """Node-logit provider evaluating dual-FC outputs on demand, memoized per node."""

    def __init__(self, h_b, model, coeffs=DEFAULT_COEFFS):
        self.h_b = np.asarray(h_b, dtype=np.float64)
        self.model = model
        self.coeffs = coeffs
        self._cache = {}

    def __call__(self, node):
        if node not in self._cache:
            self._cache[node] = dual_fc_node_logit(self.h_b, node, self.model, self.coeffs)
        return self._cache[node]

    @property
    def evaluations(self):
        return len(self._cache)

    @property
    def tanh_evaluations(self):
        return 2 * len(self._cache)


@dataclass
class SynthState:
    h_a: np.ndarray
    h_b: np.ndarray
    sig_history: np.ndarray  # last 16 pre-emphasized samples, most recent first
    last_exc: int = dsp.ZERO_CODE
    tanh_evaluations: int = field(default=0, compare=False)

    @classmethod
    def initial(cls, config):
        return cls(np.zeros(config.n_a), np.zeros(config.n_b), np.zeros(config.lpc_order))


def sample_rate_step(state, f, lpc, pre, model, table, rng, coeffs=DEFAULT_COEFFS):
    """Generate one sample; returns ``(excitation code, new state)``.

    ``f`` is the frame's conditioning vector and ``lpc`` its 16 predictor
    coefficients.  The sample value is ``new_state.sig_history[0]``.
    """
    p = dsp.lpc_predict(state.sig_history, lpc)
    gates_a = (
        pre.gate_inputs(dsp.mulaw_encode(state.sig_history[0]), dsp.mulaw_encode(p), state.last_exc)
        + frame_contribution(model, f)
    )
    h_a = gru_step(state.h_a, gates_a, model["gru_a.recurrent"], model.vector("gru_a.recurrent_bias"), coeffs)
    gates_b = matvec(model["gru_b.input"], np.concatenate([h_a, f])) + model.vector("gru_b.bias")
    h_b = gru_step(state.h_b, gates_b, model["gru_b.recurrent"], model.vector("gru_b.recurrent_bias"), coeffs)
    logits = DualFCLogits(h_b, model, coeffs)
    exc = tree_sample(logits, table, rng, levels=TREE_LEVELS)
    s = p + dsp.mulaw_decode(exc)
    history = np.concatenate([[s], state.sig_history[:-1]])
    new_state = SynthState(h_a, h_b, history, exc, state.tanh_evaluations + logits.tanh_evaluations)
    return exc, new_state


def frame_lpc(features):
    return np.asarray(features, dtype=np.float64)[..., LPC_SLICE]
