"""Float weight file to int8 block-sparse weight file."""

from __future__ import annotations

from ..quantizer import QuantizerConfig, ZetaSchedule, quantize_model
from .config import SAMPLE_RATE_MATRICES
from .network import Model
from .weights import DTypeMismatchError, TensorRecord


def quantize_weights(model, cfg=QuantizerConfig(), schedule=ZetaSchedule(), steps=16):
    """Quantize every per-sample matrix; frame-rate tensors and biases pass through."""
    for name in SAMPLE_RATE_MATRICES:
        if model.records[name].is_quantized:
            raise DTypeMismatchError(name, "is already q8-block-sparse; expected an f32 weight file")
    bundle = {name: rec.value for name, rec in model.records.items()}
    try:
        packed = quantize_model(bundle, SAMPLE_RATE_MATRICES, schedule, cfg, steps)
    except ValueError as exc:
        name = next((n for n in SAMPLE_RATE_MATRICES if abs(bundle[n]).max() >= 1.0), None)
        raise ValueError(f"tensor {name!r}: {exc}" if name else str(exc)) from None
    records = {
        name: rec if packed[name] is rec.value else TensorRecord(packed[name], rec.density)
        for name, rec in model.records.items()
    }
    return Model.from_records(records)
