"""Compiled per-frame synthesis loop.

Mirrors :func:`.network.sample_rate_step` operation for operation.  In
quantized mode the per-sample matrices run through the int8 block-sparse
kernel with float64 activations, which keeps the trajectory bit-compatible
with the reference step.  Float mode runs the dequantized weights as dense
float32 matrices, the float reference the quantized kernels are compared to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..dsp import ZERO_CODE
from ..kernels import ACTIVATION_INPUT_LIMIT, DEFAULT_COEFFS, Q_SCALE, BlockSparseMatrix, bsr_gemv, split_columns
from .config import Q, TREE_LEVELS
from .network import precompute_input_contributions

_LOG256 = math.log1p(255.0)
_XMAX = ACTIVATION_INPUT_LIMIT
QUANTIZED = "quantized"
FLOAT = "float"


@njit(cache=True)
def _tanh(x, c):
    x = min(_XMAX, max(-_XMAX, x))
    x2 = x * x
    y = x * (c[0] + x2 * (c[1] + x2)) / (c[2] + x2 * (c[3] + x2 * c[4]))
    return min(1.0, max(-1.0, y))


@njit(cache=True)
def _sigmoid(x, c):
    x = min(_XMAX, max(-_XMAX, x))
    x2 = x * x
    num = x * (16.0 * c[0] + x2 * (4.0 * c[1] + x2))
    den = 64.0 * c[2] + x2 * (16.0 * c[3] + x2 * (4.0 * c[4]))
    return min(1.0, max(0.0, 0.5 + num / den))


@njit(cache=True)
def _mulaw_encode(x):
    a = abs(x)
    u = 127.0 * math.log1p(255.0 * a) / _LOG256
    if x < 0:
        u = -u
    elif x == 0:
        u = 0.0
    i = 128 + int(np.rint(u))
    return min(255, max(0, i))


@njit(cache=True)
def _mulaw_decode(i):
    u = (i - 128) / 127.0
    x = math.expm1(abs(u) * _LOG256) / 255.0
    return -x if u < 0 else x


@njit(cache=True, fastmath=True)
def _dense_f32(M, x, xf, y):
    n = x.shape[0]
    for j in range(n):
        xf[j] = np.float32(x[j])
    for i in range(M.shape[0]):
        s = np.float32(0.0)
        for j in range(n):
            s += M[i, j] * xf[j]
        y[i] = s


@njit(cache=True)
def _matvec(dense_mode, ptr, cols, kdata, dense, x, xf, y):
    if dense_mode:
        _dense_f32(dense, x, xf, y)
    else:
        bsr_gemv(ptr, cols, kdata, Q_SCALE, x, y)


@njit(cache=True)
def _gru_update(h, gx, rec, rbias, c):
    n = h.shape[0]
    for j in range(n):
        z = _sigmoid(gx[j] + (rec[j] + rbias[j]), c)
        r = _sigmoid(gx[n + j] + (rec[n + j] + rbias[n + j]), c)
        cand = _tanh(gx[2 * n + j] + r * (rec[2 * n + j] + rbias[2 * n + j]), c)
        h[j] = z * h[j] + (1.0 - z) * cand


@njit(cache=True)
def run_frame(
    h_a, h_b, hist, last_exc, gate_a_frame, gate_b_frame, lpc,
    tab_sig, tab_pred, tab_exc,
    dense_mode,
    a_ptr, a_cols, a_kdata, a_dense, ra_bias,
    bi_ptr, bi_cols, bi_kdata, bi_dense,
    rb_ptr, rb_cols, rb_kdata, rb_dense, rb_bias,
    w1, b1, g1, w2, b2, g2,
    entries, draws, coeffs, out_s, out_exc,
):
    """Run ``draws.shape[0]`` samples; state arrays are updated in place.

    Returns the number of dual-FC node evaluations performed.
    """
    n_a = h_a.shape[0]
    n_b = h_b.shape[0]
    order = hist.shape[0]
    levels = draws.shape[1]
    leaf0 = 1 << levels
    gx_a = np.empty(3 * n_a)
    rec_a = np.empty(3 * n_a)
    gx_b = np.empty(3 * n_b)
    rec_b = np.empty(3 * n_b)
    xf_a = np.empty(n_a, dtype=np.float32)
    xf_b = np.empty(n_b, dtype=np.float32)
    node_evals = 0
    for t in range(draws.shape[0]):
        p = 0.0
        for k in range(order):
            p += hist[k] * lpc[k]
        i_s = _mulaw_encode(hist[0])
        i_p = _mulaw_encode(p)
        i_e = last_exc[0]
        for j in range(3 * n_a):
            gx_a[j] = ((tab_sig[i_s, j] + tab_pred[i_p, j]) + tab_exc[i_e, j]) + gate_a_frame[j]
        _matvec(dense_mode, a_ptr, a_cols, a_kdata, a_dense, h_a, xf_a, rec_a)
        _gru_update(h_a, gx_a, rec_a, ra_bias, coeffs)

        _matvec(dense_mode, bi_ptr, bi_cols, bi_kdata, bi_dense, h_a, xf_a, gx_b)
        for j in range(3 * n_b):
            gx_b[j] += gate_b_frame[j]
        _matvec(dense_mode, rb_ptr, rb_cols, rb_kdata, rb_dense, h_b, xf_b, rec_b)
        _gru_update(h_b, gx_b, rec_b, rb_bias, coeffs)

        node = 1
        for level in range(levels):
            row = node - 1
            a1 = 0.0
            a2 = 0.0
            for k in range(n_b):
                a1 += w1[row, k] * h_b[k]
                a2 += w2[row, k] * h_b[k]
            y = g1[row] * _tanh(a1 + b1[row], coeffs) + g2[row] * _tanh(a2 + b2[row], coeffs)
            node = 2 * node + (1 if y > entries[draws[t, level]] else 0)
            node_evals += 1
        exc = node - leaf0
        s = p + _mulaw_decode(exc)
        for k in range(order - 1, 0, -1):
            hist[k] = hist[k - 1]
        hist[0] = s
        last_exc[0] = exc
        out_s[t] = s
        out_exc[t] = exc
    return node_evals


_EMPTY_PTR = np.zeros(1, dtype=np.int64)
_EMPTY_COLS = np.zeros(0, dtype=np.int64)
_EMPTY_KDATA = np.zeros((0, 32), dtype=np.int8)
_EMPTY_DENSE = np.zeros((0, 0), dtype=np.float32)


def _bsr_args(M):
    return M.row_ptr, M.block_col_index, M.kernel_data, _EMPTY_DENSE


def _dense_args(M):
    arr = M.to_dense() if isinstance(M, BlockSparseMatrix) else np.asarray(M)
    return _EMPTY_PTR, _EMPTY_COLS, _EMPTY_KDATA, np.ascontiguousarray(arr, dtype=np.float32)


@dataclass(frozen=True, eq=False)
class EngineWeights:
    """Model tensors laid out for :func:`run_frame` in one execution mode."""

    mode: str
    n_a: int
    n_b: int
    tables: tuple
    gru_a: tuple
    gru_a_rbias: np.ndarray
    gru_b_in: tuple
    gru_b_f: np.ndarray  # dense float64 (3 n_b, cond_dim) conditioning part, used per frame
    gru_b_rec: tuple
    gru_b_rbias: np.ndarray
    dual_fc: tuple
    weights_used: int

    @classmethod
    def build(cls, model, mode=None):
        cfg = model.config
        mode = mode or (QUANTIZED if cfg.quantized else FLOAT)
        if mode == QUANTIZED and not cfg.quantized:
            raise ValueError("quantized mode needs a model with q8-block-sparse sample-rate tensors")
        if mode not in (QUANTIZED, FLOAT):
            raise ValueError(f"unknown mode {mode!r}")
        n_a, n_b = cfg.n_a, cfg.n_b
        pre = precompute_input_contributions(model)
        ra, bin_, rb = model["gru_a.recurrent"], model["gru_b.input"], model["gru_b.recurrent"]
        if mode == QUANTIZED:
            bin_h, _ = split_columns(bin_, n_a)
            args = {"a": _bsr_args(ra), "bi": _bsr_args(bin_h), "rb": _bsr_args(rb)}
            used = ra.weights_used + bin_h.weights_used + rb.weights_used
        else:
            dense_b = model.dense("gru_b.input")
            args = {"a": _dense_args(ra), "bi": _dense_args(dense_b[:, :n_a]), "rb": _dense_args(rb)}
            used = 3 * n_a * n_a + 3 * n_b * n_a + 3 * n_b * n_b
        used += 2 * TREE_LEVELS * n_b
        dual = tuple(
            np.ascontiguousarray(model.dense(n)) if n.endswith(("w1", "w2")) else model.vector(n)
            for n in ("dual_fc.w1", "dual_fc.b1", "dual_fc.gain1", "dual_fc.w2", "dual_fc.b2", "dual_fc.gain2")
        )
        return cls(
            mode=mode, n_a=n_a, n_b=n_b,
            tables=(pre.sig, pre.pred, pre.exc),
            gru_a=args["a"], gru_a_rbias=model.vector("gru_a.recurrent_bias"),
            gru_b_in=args["bi"], gru_b_f=np.ascontiguousarray(model.dense("gru_b.input")[:, n_a:]),
            gru_b_rec=args["rb"], gru_b_rbias=model.vector("gru_b.recurrent_bias"),
            dual_fc=dual, weights_used=used,
        )


@dataclass
class EngineState:
    h_a: np.ndarray
    h_b: np.ndarray
    hist: np.ndarray
    last_exc: np.ndarray

    @classmethod
    def initial(cls, n_a, n_b, order=16):
        return cls(np.zeros(n_a), np.zeros(n_b), np.zeros(order), np.array([ZERO_CODE], dtype=np.int64))


def engine_frame(state, weights, gate_a_frame, gate_b_frame, lpc, entries, draws, coeffs=DEFAULT_COEFFS):
    """Run one frame of samples; returns (signal, excitation codes, node evaluations)."""
    n = draws.shape[0]
    out_s = np.empty(n)
    out_exc = np.empty(n, dtype=np.int64)
    w1, b1, g1, w2, b2, g2 = weights.dual_fc
    evals = run_frame(
        state.h_a, state.h_b, state.hist, state.last_exc,
        np.ascontiguousarray(gate_a_frame, dtype=np.float64),
        np.ascontiguousarray(gate_b_frame, dtype=np.float64),
        np.ascontiguousarray(lpc, dtype=np.float64),
        *weights.tables,
        weights.mode == FLOAT,
        *weights.gru_a, weights.gru_a_rbias,
        *weights.gru_b_in,
        *weights.gru_b_rec, weights.gru_b_rbias,
        w1, b1, g1, w2, b2, g2,
        entries, np.ascontiguousarray(draws, dtype=np.int64), coeffs.as_array(), out_s, out_exc,
    )
    return out_s, out_exc, evals


__all__ = ["EngineWeights", "EngineState", "engine_frame", "run_frame", "QUANTIZED", "FLOAT", "Q"]
