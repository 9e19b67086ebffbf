"""Feature files (raw little-endian f32, 36 values per 10 ms frame) and synthetic features."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..dsp import LPC_ORDER
from .config import CEPSTRUM_DIM, FEATURE_DIM, LPC_SLICE


class FeatureFileError(ValueError):
    pass


def validate_features(features):
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2 or features.shape[1] != FEATURE_DIM:
        raise FeatureFileError(f"features must have shape (frames, {FEATURE_DIM}), got {features.shape}")
    if features.shape[0] < 1:
        raise FeatureFileError("need at least one feature frame")
    if not np.all(np.isfinite(features[:, LPC_SLICE])):
        raise FeatureFileError("LPC coefficients must be finite")
    if not np.all(np.isfinite(features)):
        raise FeatureFileError("features must be finite")
    return features


def read_features(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FeatureFileError(f"cannot read feature file {path}: {exc.strerror}") from None
    frame_bytes = 4 * FEATURE_DIM
    if not raw or len(raw) % frame_bytes:
        raise FeatureFileError(
            f"{path}: size {len(raw)} is not a positive multiple of {frame_bytes} bytes"
        )
    return validate_features(np.frombuffer(raw, dtype="<f4").reshape(-1, FEATURE_DIM))


def write_features(path, features):
    features = validate_features(features)
    Path(path).write_bytes(np.ascontiguousarray(features, dtype="<f4").tobytes())


def reflection_to_lpc(k):
    """Step-up recursion: reflection coefficients to predictor ``p = sum a_k s[t-k]``.

    |k_i| < 1 for all i guarantees a stable synthesis filter.
    """
    alpha = np.zeros(0)
    for ki in k:
        alpha = np.concatenate([alpha + ki * alpha[::-1], [ki]])
    return -alpha


def synthetic_features(n_frames, seed=0):
    """Seeded, smoothed random features with stable LPC filters.

    Meant for throughput measurement and tests; the values carry no speech.
    """
    rng = np.random.default_rng(seed)
    feats = np.zeros((n_frames, FEATURE_DIM), dtype=np.float64)
    smooth = min(5, n_frames)
    feats[:, :CEPSTRUM_DIM] = uniform_filter1d(rng.standard_normal((n_frames, CEPSTRUM_DIM)), smooth, axis=0)
    feats[:, CEPSTRUM_DIM] = uniform_filter1d(rng.uniform(-0.5, 0.5, n_frames), smooth)
    feats[:, CEPSTRUM_DIM + 1] = uniform_filter1d(rng.uniform(0.0, 0.8, n_frames), smooth)
    decay = 0.6 * 0.8 ** np.arange(LPC_ORDER)
    for t in range(n_frames):
        k = rng.uniform(-1.0, 1.0, LPC_ORDER) * decay
        feats[t, LPC_SLICE] = reflection_to_lpc(k)
    return feats.astype(np.float32)
