import numpy as np
import pytest

from shoestring.model.features import (
    FeatureFileError,
    read_features,
    reflection_to_lpc,
    synthetic_features,
    write_features,
)


def test_roundtrip(tmp_path):
    feats = synthetic_features(12, 3)
    write_features(tmp_path / "f.f32", feats)
    assert (tmp_path / "f.f32").stat().st_size == 12 * 36 * 4
    assert np.array_equal(read_features(tmp_path / "f.f32"), feats)


def test_raw_layout(tmp_path):
    values = np.arange(72, dtype="<f4")
    (tmp_path / "f.f32").write_bytes(values.tobytes())
    assert np.array_equal(read_features(tmp_path / "f.f32").ravel(), values)


@pytest.mark.parametrize("nbytes", [0, 4, 143, 145])
def test_bad_sizes(tmp_path, nbytes):
    (tmp_path / "f.f32").write_bytes(b"\0" * nbytes)
    with pytest.raises(FeatureFileError, match="f.f32"):
        read_features(tmp_path / "f.f32")


def test_missing_file(tmp_path):
    with pytest.raises(FeatureFileError, match="gone.f32"):
        read_features(tmp_path / "gone.f32")


def test_non_finite_lpc(tmp_path):
    feats = synthetic_features(2, 0)
    feats[1, 30] = np.nan
    (tmp_path / "f.f32").write_bytes(feats.astype("<f4").tobytes())
    with pytest.raises(FeatureFileError, match="LPC"):
        read_features(tmp_path / "f.f32")


def test_reflection_recursion_small_orders():
    # order 1: s[t] = k s[t-1] up to sign convention
    assert np.allclose(reflection_to_lpc([0.5]), [-0.5])
    k1, k2 = 0.3, -0.4
    assert np.allclose(reflection_to_lpc([k1, k2]), -np.array([k1 + k2 * k1, k2]))


def test_synthetic_lpc_filters_are_stable():
    feats = synthetic_features(50, 7)
    for a in feats[:, 20:36].astype(np.float64):
        # predictor p = sum a_k s[t-k]; synthesis poles are roots of z^16 - sum a_k z^(16-k)
        poles = np.roots(np.concatenate([[1.0], -a]))
        assert np.max(np.abs(poles)) < 1.0


def test_synthetic_is_seeded():
    assert np.array_equal(synthetic_features(5, 1), synthetic_features(5, 1))
    assert not np.array_equal(synthetic_features(5, 1), synthetic_features(5, 2))
