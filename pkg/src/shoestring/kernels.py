"""Compute kernels: clipped rational activations and 8x4 block-sparse int8 GEMV."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

BLOCK_ROWS = 8
BLOCK_COLS = 4
BLOCK_SIZE = BLOCK_ROWS * BLOCK_COLS
Q_SCALE = 1.0 / 128.0
INT8_MAX = 127


class QuantizationError(ValueError):
    """A tensor is not on the int8 lattice expected by the packed format."""


@dataclass(frozen=True)
class ActivationCoeffs:
    N0: float = 1565.0352
    N1: float = 158.3758
    D0: float = 1565.3572
    D1: float = 679.1774
    D2: float = 19.5291

    def as_array(self):
        return np.array([self.N0, self.N1, self.D0, self.D1, self.D2], dtype=np.float64)


DEFAULT_COEFFS = ActivationCoeffs()

# Inputs are clamped here before evaluation so x**5 cannot overflow; the
# rational is saturated long before this point.
ACTIVATION_INPUT_LIMIT = 1e30


def approx_reciprocal(d):
    """Emulate a hardware reciprocal estimate: 1/d rounded to 12 significant bits."""
    m, e = np.frexp(1.0 / np.asarray(d, dtype=np.float64))
    return np.ldexp(np.rint(m * 4096.0) / 4096.0, e)


def tanh_approx(x, coeffs=DEFAULT_COEFFS, fast_reciprocal=False):
    """Clipped rational tanh approximation.

    Saturates to exactly +/-1 once the rational exceeds unity (|x| > ~5.2054).
    ``fast_reciprocal`` replaces the division by :func:`approx_reciprocal`.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), -ACTIVATION_INPUT_LIMIT, ACTIVATION_INPUT_LIMIT)
    x2 = x * x
    num = x * (coeffs.N0 + x2 * (coeffs.N1 + x2))
    den = coeffs.D0 + x2 * (coeffs.D1 + x2 * coeffs.D2)
    y = num * approx_reciprocal(den) if fast_reciprocal else num / den
    y = np.clip(y, -1.0, 1.0)
    return y if y.ndim else float(y)


def sigmoid_approx(x, coeffs=DEFAULT_COEFFS, fast_reciprocal=False):
    """Sigmoid from the same rational, coefficients rescaled for ``tanh(x/2)``.

    Returns exactly 0 or 1 past the clip points, which lets a saturated GRU
    update gate retain its state bit-exactly.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), -ACTIVATION_INPUT_LIMIT, ACTIVATION_INPUT_LIMIT)
    x2 = x * x
    num = x * (16.0 * coeffs.N0 + x2 * (4.0 * coeffs.N1 + x2))
    den = 64.0 * coeffs.D0 + x2 * (16.0 * coeffs.D1 + x2 * (4.0 * coeffs.D2))
    y = 0.5 + (num * approx_reciprocal(den) if fast_reciprocal else num / den)
    y = np.clip(y, 0.0, 1.0)
    return y if y.ndim else float(y)


def dense_gemv(M, x):
    """Float reference ``M @ x`` with double-precision accumulation."""
    M = np.asarray(M)
    x = np.asarray(x, dtype=np.float64)
    if M.ndim != 2 or x.ndim != 1 or M.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: matrix {M.shape} times vector {x.shape}")
    return M.astype(np.float64, copy=False) @ x


@dataclass(frozen=True, eq=False)
class BlockSparseMatrix:
    """int8 weights in 8x4 blocks at scale ``q``; dequantized ``w = int8 * q``.

    ``coords`` is an ``(n_blocks, 2)`` array of (block_row, block_col) sorted
    row-major; ``data`` is ``(n_blocks, 8, 4)`` int8, each block row-major.
    ``rows``/``cols`` are the logical shape; storage is zero-padded up to
    multiples of the block shape.
    """

    rows: int
    cols: int
    coords: np.ndarray
    data: np.ndarray
    scale: float = Q_SCALE

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.int64).reshape(-1, 2))
        data = np.ascontiguousarray(np.asarray(self.data).reshape(-1, BLOCK_ROWS, BLOCK_COLS))
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("matrix dimensions must be positive")
        if data.dtype != np.int8:
            raise QuantizationError(f"block data must be int8, got {data.dtype}")
        if coords.shape[0] != data.shape[0]:
            raise ValueError("coordinate count does not match block count")
        if data.size and np.any(data == -128):
            raise QuantizationError("int8 values must lie in [-127, 127]")
        if coords.size:
            if coords.min() < 0 or np.any(coords[:, 0] >= self.block_rows) or np.any(
                coords[:, 1] >= self.block_cols
            ):
                raise ValueError("block coordinate outside the matrix")
            key = coords[:, 0] * self.block_cols + coords[:, 1]
            if np.any(np.diff(key) <= 0):
                raise ValueError("block coordinates must be unique and sorted row-major")
        coords.flags.writeable = False
        data.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "data", data)

    @property
    def block_rows(self):
        return -(-self.rows // BLOCK_ROWS)

    @property
    def block_cols(self):
        return -(-self.cols // BLOCK_COLS)

    @property
    def padded_shape(self):
        return self.block_rows * BLOCK_ROWS, self.block_cols * BLOCK_COLS

    @property
    def shape(self):
        return self.rows, self.cols

    @property
    def n_blocks(self):
        return self.coords.shape[0]

    @property
    def density(self):
        return self.n_blocks / (self.block_rows * self.block_cols)

    @property
    def weights_used(self):
        """Multiply-adds per product: every stored block entry, zeros included."""
        return self.n_blocks * BLOCK_SIZE

    @cached_property
    def row_ptr(self):
        counts = np.bincount(self.coords[:, 0], minlength=self.block_rows)
        ptr = np.zeros(self.block_rows + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return ptr

    @cached_property
    def block_col_index(self):
        return np.ascontiguousarray(self.coords[:, 1])

    @cached_property
    def kernel_data(self):
        # column-major inside each block: entry (i, j) at 8*j + i
        return np.ascontiguousarray(self.data.transpose(0, 2, 1).reshape(-1, BLOCK_SIZE))

    def int_dense(self):
        pr, pc = self.padded_shape
        out = np.zeros((self.block_rows, self.block_cols, BLOCK_ROWS, BLOCK_COLS), dtype=np.int8)
        out[self.coords[:, 0], self.coords[:, 1]] = self.data
        return out.transpose(0, 2, 1, 3).reshape(pr, pc)[: self.rows, : self.cols]

    def to_dense(self):
        return self.int_dense().astype(np.float64) * self.scale

    def block_density_rows(self, row_start, row_stop):
        """Fraction of occupied blocks within a band of (block-aligned) rows."""
        br0, br1 = row_start // BLOCK_ROWS, -(-row_stop // BLOCK_ROWS)
        sel = (self.coords[:, 0] >= br0) & (self.coords[:, 0] < br1)
        return np.count_nonzero(sel) / ((br1 - br0) * self.block_cols)


def unpack_block_sparse(M):
    return M.to_dense()


def pack_block_sparse(M, q=Q_SCALE):
    """Pack a hard-quantized dense matrix; all-zero blocks are dropped."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise QuantizationError("matrix contains non-finite values")
    ints = M / q
    rounded = np.rint(ints)
    if np.any(rounded != ints):
        raise QuantizationError("entries are not integer multiples of q; hard quantization was skipped")
    if np.any(np.abs(rounded) > INT8_MAX):
        raise QuantizationError("entries must lie in ]-1, 1[ (int8 range [-127, 127])")
    rows, cols = M.shape
    br, bc = -(-rows // BLOCK_ROWS), -(-cols // BLOCK_COLS)
    padded = np.zeros((br * BLOCK_ROWS, bc * BLOCK_COLS), dtype=np.int8)
    padded[:rows, :cols] = rounded.astype(np.int8)
    blocks = padded.reshape(br, BLOCK_ROWS, bc, BLOCK_COLS).transpose(0, 2, 1, 3)
    occupied = np.any(blocks != 0, axis=(2, 3))
    coords = np.argwhere(occupied)  # row-major order
    return BlockSparseMatrix(rows, cols, coords, blocks[occupied], scale=q)


def split_columns(M, col):
    """Split at a block-aligned column into (left, right) block-sparse parts."""
    if col % BLOCK_COLS or not 0 < col < M.cols:
        raise ValueError(f"split column {col} must be a positive multiple of {BLOCK_COLS} inside the matrix")
    bcol = col // BLOCK_COLS
    left = M.coords[:, 1] < bcol
    right_coords = M.coords[~left] - np.array([0, bcol])
    return (
        BlockSparseMatrix(M.rows, col, M.coords[left], M.data[left], M.scale),
        BlockSparseMatrix(M.rows, M.cols - col, right_coords, M.data[~left], M.scale),
    )


def _is_c_array(t, dtype, ndim):
    return isinstance(t, types.Array) and t.dtype == dtype and t.ndim == ndim and t.layout == "C"


@intrinsic
def _block_row_gemv(typingctx, kdata, block_cols, b0, b1, x, scale, y, out):
    """Eight outputs of one block row, ``y[out:out+8] = scale * sum_b W_b x_b``.

    Emitted as LLVM vector code: each 8x4 block is four int8 columns widened to
    8 x f64 and fused-multiply-added against a broadcast activation, with one
    register accumulator per block column.
    """
    if not (
        _is_c_array(kdata, types.int8, 2)
        and _is_c_array(block_cols, types.int64, 1)
        and _is_c_array(x, types.float64, 1)
        and _is_c_array(y, types.float64, 1)
    ):
        return None
    sig = types.void(kdata, block_cols, types.int64, types.int64, x, types.float64, y, types.int64)

    def codegen(context, builder, signature, args):
        kd_a, cols_a, x_a, y_a = (
            context.make_array(signature.args[i])(context, builder, args[i]) for i in (0, 1, 4, 6)
        )
        b0, b1, scale, out = args[2], args[3], args[5], args[7]
        i64, i32 = ir.IntType(64), ir.IntType(32)
        v8d = ir.VectorType(ir.DoubleType(), BLOCK_ROWS)
        v8b = ir.VectorType(ir.IntType(8), BLOCK_ROWS)
        fma = cgutils.get_or_insert_function(builder.module, ir.FunctionType(v8d, [v8d] * 3), "llvm.fma.v8f64")
        undef = ir.Constant(v8d, ir.Undefined)
        splat_mask = ir.Constant(ir.VectorType(i32, BLOCK_ROWS), [0] * BLOCK_ROWS)

        def splat(value):
            return builder.shuffle_vector(builder.insert_element(undef, value, ir.Constant(i32, 0)), undef, splat_mask)

        accs = [cgutils.alloca_once_value(builder, ir.Constant(v8d, [0.0] * BLOCK_ROWS)) for _ in range(BLOCK_COLS)]
        with cgutils.for_range_slice(builder, b0, b1, ir.Constant(i64, 1), inc=True) as (b, _):
            base = builder.gep(kd_a.data, [builder.mul(b, ir.Constant(i64, BLOCK_SIZE))])
            c = builder.mul(builder.load(builder.gep(cols_a.data, [b])), ir.Constant(i64, BLOCK_COLS))
            for j in range(BLOCK_COLS):
                wp = builder.bitcast(builder.gep(base, [ir.Constant(i64, BLOCK_ROWS * j)]), v8b.as_pointer())
                w = builder.sitofp(builder.load(wp, align=1), v8d)
                xj = splat(builder.load(builder.gep(x_a.data, [builder.add(c, ir.Constant(i64, j))])))
                builder.store(builder.call(fma, [w, xj, builder.load(accs[j])]), accs[j])
        v = [builder.load(a) for a in accs]
        total = builder.fadd(builder.fadd(v[0], v[1]), builder.fadd(v[2], v[3]))
        yp = builder.bitcast(builder.gep(y_a.data, [out]), v8d.as_pointer())
        builder.store(builder.fmul(total, splat(scale)), yp, align=8)
        return context.get_dummy_value()

    return sig, codegen


@njit(cache=True)
def bsr_gemv(row_ptr, block_cols, kdata, scale, x, y):
    """y[:padded_rows] = scale * (blocks @ x); ``x`` must cover the padded columns.

    ``kdata`` is the (n_blocks, 32) column-major-in-block int8 layout of
    :attr:`BlockSparseMatrix.kernel_data`.
    """
    for br in range(row_ptr.shape[0] - 1):
        _block_row_gemv(kdata, block_cols, row_ptr[br], row_ptr[br + 1], x, scale, y, br * BLOCK_ROWS)


@njit(cache=True, fastmath=True)
def dense_f32_gemv(M, x, y):
    for i in range(M.shape[0]):
        s = 0.0
        for j in range(M.shape[1]):
            s += M[i, j] * x[j]
        y[i] = s


def sparse_q8_gemv(M, x):
    """``dequant(M) @ x`` over the stored blocks only; activations stay float."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != M.cols:
        raise ValueError(f"shape mismatch: matrix {M.shape} times vector {x.shape}")
    pr, pc = M.padded_shape
    xp = np.zeros(pc)
    xp[: M.cols] = x
    y = np.empty(pr)
    bsr_gemv(M.row_ptr, M.block_col_index, M.kernel_data, M.scale, xp, y)
    return y[: M.rows]


def matvec(M, x):
    if isinstance(M, BlockSparseMatrix):
        return sparse_q8_gemv(M, x)
    return dense_gemv(M, x)
