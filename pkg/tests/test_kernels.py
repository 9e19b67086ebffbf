import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shoestring.kernels import (
    DEFAULT_COEFFS,
    Q_SCALE,
    ActivationCoeffs,
    BlockSparseMatrix,
    QuantizationError,
    approx_reciprocal,
    dense_gemv,
    matvec,
    pack_block_sparse,
    sigmoid_approx,
    sparse_q8_gemv,
    split_columns,
    tanh_approx,
    unpack_block_sparse,
)

# sup |tanh_approx - tanh| is attained where the rational first reaches 1;
# value from the real root of x(N0 + N1 x^2 + x^4) = D0 + D1 x^2 + D2 x^4
FROZEN_CLIP_POINT = 5.2053866821217
FROZEN_MAX_ERROR = 6.0210952341582e-05


def clip_point(c=DEFAULT_COEFFS):
    roots = np.roots([1.0, -c.D2, c.N1, -c.D1, c.N0, -c.D0])
    real = roots[np.abs(roots.imag) < 1e-9].real
    return real[real > 0].min()


def random_lattice(rng, rows, cols, density):
    ints = rng.integers(-127, 128, size=(rows, cols))
    br, bc = -(-rows // 8), -(-cols // 4)
    keep = rng.random((br, bc)) < density
    mask = np.repeat(np.repeat(keep, 8, axis=0), 4, axis=1)[:rows, :cols]
    return ints * mask * Q_SCALE


def test_clip_point_oracle_is_frozen():
    xc = clip_point()
    assert xc == pytest.approx(FROZEN_CLIP_POINT, abs=1e-10)
    assert 1.0 - np.tanh(xc) == pytest.approx(FROZEN_MAX_ERROR, rel=1e-9)


def test_tanh_grid_error_approaches_the_clip_point_sup():
    x = np.linspace(-10, 10, 200001)
    err = np.max(np.abs(tanh_approx(x) - np.tanh(x)))
    assert FROZEN_MAX_ERROR - 1e-7 <= err <= FROZEN_MAX_ERROR


def test_tanh_saturates_exactly():
    assert tanh_approx(25.0) == 1.0
    assert tanh_approx(-25.0) == -1.0
    x = np.linspace(FROZEN_CLIP_POINT + 1e-9, 1e4, 10001)
    assert np.all(tanh_approx(x) == 1.0) and np.all(tanh_approx(-x) == -1.0)


def test_tanh_odd_and_monotone():
    x = np.linspace(0, 12, 100001)
    y = tanh_approx(x)
    assert np.array_equal(tanh_approx(-x), -y)
    assert np.all(np.diff(y) >= 0)


def test_sigmoid_error_is_half_the_tanh_error():
    x = np.linspace(-20, 20, 400001)
    err = np.max(np.abs(sigmoid_approx(x) - 1.0 / (1.0 + np.exp(-x))))
    assert err <= FROZEN_MAX_ERROR / 2 + 1e-15
    assert err == pytest.approx(FROZEN_MAX_ERROR / 2, rel=1e-4)


def test_sigmoid_identity_and_saturation():
    x = np.linspace(-10, 10, 200001)
    assert np.max(np.abs(sigmoid_approx(x) - (0.5 + 0.5 * tanh_approx(x / 2)))) <= 1e-12
    assert sigmoid_approx(2 * FROZEN_CLIP_POINT + 1e-6) == 1.0
    assert sigmoid_approx(-2 * FROZEN_CLIP_POINT - 1e-6) == 0.0


def test_fast_reciprocal_path():
    d = np.geomspace(1e-3, 1e6, 1000)
    rel = np.abs(approx_reciprocal(d) * d - 1.0)
    assert rel.max() <= 2.0 ** -12
    x = np.linspace(-10, 10, 20001)
    assert np.max(np.abs(tanh_approx(x, fast_reciprocal=True) - np.tanh(x))) <= 3e-4
    assert np.max(np.abs(sigmoid_approx(x, fast_reciprocal=True) - 1 / (1 + np.exp(-x)))) <= 1.5e-4
    assert np.all(np.abs(tanh_approx(x, fast_reciprocal=True)) <= 1.0)


def test_coefficients_are_used():
    bad = ActivationCoeffs(N0=1565.0)
    x = np.linspace(-3, 3, 101)
    assert not np.array_equal(tanh_approx(x, bad), tanh_approx(x))


def test_dense_gemv_trivial(rng):
    x = rng.standard_normal(6)
    assert np.array_equal(dense_gemv(np.eye(6), x), x)
    assert np.all(dense_gemv(np.zeros((3, 6)), x) == 0)


def test_dense_gemv_vs_naive(rng):
    M = rng.standard_normal((8, 4))
    x = rng.standard_normal(4)
    naive = np.array([sum(M[i, j] * x[j] for j in range(4)) for i in range(8)])
    assert np.allclose(dense_gemv(M, x), naive, rtol=1e-6, atol=0)


def test_pack_all_zero_and_full(rng):
    assert pack_block_sparse(np.zeros((16, 8))).n_blocks == 0
    full = pack_block_sparse(np.full((24, 12), 3 * Q_SCALE))
    assert full.n_blocks == (24 // 8) * (12 // 4)
    assert full.density == 1.0
    assert full.weights_used == 24 * 12


def test_pack_roundtrip_bit_exact(rng):
    for rows, cols in [(64, 32), (20, 10), (8, 4), (3, 5)]:
        W = random_lattice(rng, rows, cols, 0.3)
        M = pack_block_sparse(W)
        assert M.shape == (rows, cols)
        assert np.array_equal(unpack_block_sparse(M), W)
        coords = [tuple(c) for c in M.coords]
        assert coords == sorted(coords)


def test_pack_rejects_off_lattice_and_range():
    W = np.zeros((8, 4))
    W[0, 0] = 0.3 * Q_SCALE
    with pytest.raises(QuantizationError):
        pack_block_sparse(W)
    W[0, 0] = 128 * Q_SCALE
    with pytest.raises(QuantizationError):
        pack_block_sparse(W)


def test_kernel_layout_is_column_major_within_block():
    W = np.zeros((8, 4))
    W[2, 1] = 5 * Q_SCALE
    M = pack_block_sparse(W)
    assert M.kernel_data[0, 1 * 8 + 2] == 5
    assert M.data[0, 2, 1] == 5


def test_sparse_gemv_large_case(rng):
    W = random_lattice(rng, 384, 512, 0.1)
    M = pack_block_sparse(W)
    x = rng.standard_normal(512)
    x /= np.linalg.norm(x)
    assert np.max(np.abs(sparse_q8_gemv(M, x) - dense_gemv(W, x))) <= 1e-5


def test_sparse_gemv_shape_check(rng):
    M = pack_block_sparse(random_lattice(rng, 16, 8, 0.5))
    with pytest.raises(ValueError):
        sparse_q8_gemv(M, np.zeros(9))


def test_matvec_dispatch(rng):
    W = random_lattice(rng, 16, 8, 0.5)
    x = rng.standard_normal(8)
    assert np.allclose(matvec(pack_block_sparse(W), x), matvec(W, x), atol=1e-12)


def test_split_columns(rng):
    W = random_lattice(rng, 24, 20, 0.6)
    left, right = split_columns(pack_block_sparse(W), 12)
    assert np.array_equal(unpack_block_sparse(left), W[:, :12])
    assert np.array_equal(unpack_block_sparse(right), W[:, 12:])
    assert left.n_blocks + right.n_blocks == pack_block_sparse(W).n_blocks


def test_block_sparse_is_immutable(rng):
    M = pack_block_sparse(random_lattice(rng, 16, 8, 1.0))
    assert isinstance(M, BlockSparseMatrix)
    with pytest.raises(Exception):
        M.rows = 3


@settings(max_examples=60, deadline=None)
@given(
    rows=st.integers(1, 40),
    cols=st.integers(1, 40),
    density=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_sparse_gemv_property(rows, cols, density, seed):
    rng = np.random.default_rng(seed)
    W = random_lattice(rng, rows, cols, density)
    x = rng.standard_normal(cols)
    x /= np.linalg.norm(x)
    assert np.max(np.abs(sparse_q8_gemv(pack_block_sparse(W), x) - W @ x), initial=0.0) <= 1e-5


def test_saturation_survives_huge_inputs():
    huge = np.array([1e30, 1e200, 1e308, np.inf])
    assert np.all(tanh_approx(huge) == 1.0) and np.all(tanh_approx(-huge) == -1.0)
    assert np.all(sigmoid_approx(huge) == 1.0) and np.all(sigmoid_approx(-huge) == 0.0)


def test_engine_scalar_activations_match():
    from shoestring.model.engine import _sigmoid, _tanh

    c = DEFAULT_COEFFS.as_array()
    xs = np.concatenate([np.linspace(-30, 30, 6001), [1e300, -1e300]])
    assert all(_tanh(x, c) == tanh_approx(x) for x in xs)
    assert all(_sigmoid(x, c) == sigmoid_approx(x) for x in xs)
