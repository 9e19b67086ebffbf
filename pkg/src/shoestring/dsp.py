"""Signal-domain primitives: mu-law companding, pre-emphasis and linear prediction.

All functions accept scalars or numpy arrays and are pure.
"""

import numpy as np
from scipy.signal import lfilter

MU = 255
QLEVELS = 256
ZERO_CODE = 128
LPC_ORDER = 16
DEFAULT_PREEMPHASIS = 0.85

_LOG_1PMU = np.log1p(MU)


def mulaw_encode(x):
    """Map amplitudes to mu-law codes in [0, 255], with 128 as zero.

    The code is computed from the unclamped amplitude and then clamped, so
    every code (including 0, whose center lies just below -1) is reachable.
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.sign(x) * 127.0 * np.log1p(MU * np.abs(x)) / _LOG_1PMU
    idx = np.clip(ZERO_CODE + np.rint(u), 0, QLEVELS - 1).astype(np.int64)
    return idx if idx.ndim else int(idx)


def mulaw_decode(i):
    """Inverse companding evaluated at code centers."""
    i = np.asarray(i)
    if not np.issubdtype(i.dtype, np.integer):
        if not np.all(np.equal(np.mod(i, 1), 0)):
            raise ValueError("mu-law index must be an integer")
        i = i.astype(np.int64)
    if np.any(i < 0) or np.any(i > QLEVELS - 1):
        raise ValueError(f"mu-law index out of range [0, {QLEVELS - 1}]")
    u = (i.astype(np.float64) - ZERO_CODE) / 127.0
    x = np.sign(u) * np.expm1(np.abs(u) * _LOG_1PMU) / MU
    return x if x.ndim else float(x)


def preemphasis(signal, coeff=DEFAULT_PREEMPHASIS):
    """First-order high-pass ``y[t] = x[t] - coeff * x[t-1]`` with ``x[-1] = 0``."""
    _check_coeff(coeff)
    x = np.asarray(signal, dtype=np.float64)
    return lfilter([1.0, -coeff], [1.0], x)


def deemphasis(signal, coeff=DEFAULT_PREEMPHASIS, clip=False):
    """Inverse of :func:`preemphasis`: ``y[t] = x[t] + coeff * y[t-1]``.

    Clipping to [-1, 1] is applied only when ``clip`` is set, which the
    synthesizer does once at the output stage.
    """
    _check_coeff(coeff)
    x = np.asarray(signal, dtype=np.float64)
    y = lfilter([1.0], [1.0, -coeff], x)
    if clip:
        y = np.clip(y, -1.0, 1.0)
    return y


def lpc_predict(history, a):
    """Prediction ``sum_k a[k-1] * s[t-k]``; ``history`` is most-recent-first."""
    history = np.asarray(history, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (LPC_ORDER,):
        raise ValueError(f"expected {LPC_ORDER} LPC coefficients, got shape {a.shape}")
    if history.shape[-1] != LPC_ORDER:
        raise ValueError(f"history must hold the last {LPC_ORDER} samples")
    return float(history @ a) if history.ndim == 1 else history @ a


def _check_coeff(coeff):
    if not 0.0 <= coeff < 1.0:
        raise ValueError(f"emphasis coefficient must lie in [0, 1), got {coeff}")
