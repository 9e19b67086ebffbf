"""Embedded invariant checks run by ``shoestring selftest``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import dsp
from .kernels import DEFAULT_COEFFS, Q_SCALE, pack_block_sparse, sigmoid_approx, sparse_q8_gemv, tanh_approx, unpack_block_sparse
from .sampling import build_inv_sigmoid_table, tree_logits_from_pdf, tree_pdf_from_logits, tree_sample_batch

# Measured max error of the published coefficients is 6.02e-5; the bound
# keeps two significant figures of headroom over it.
TANH_BOUND = 6.1e-5
SIGMOID_BOUND = TANH_BOUND / 2
GRID = np.linspace(-10.0, 10.0, 200001)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _tanh_error(coeffs):
    err = float(np.max(np.abs(tanh_approx(GRID, coeffs) - np.tanh(GRID))))
    return err <= TANH_BOUND, f"max error {err:.4e} (bound {TANH_BOUND:.1e})"


def _sigmoid_error(coeffs):
    err = float(np.max(np.abs(sigmoid_approx(GRID, coeffs) - 1.0 / (1.0 + np.exp(-GRID)))))
    return err <= SIGMOID_BOUND, f"max error {err:.4e} (bound {SIGMOID_BOUND:.2e})"


def _sigmoid_identity(coeffs):
    diff = float(np.max(np.abs(sigmoid_approx(GRID, coeffs) - (0.5 + 0.5 * tanh_approx(GRID / 2, coeffs)))))
    return diff <= 1e-12, f"max |sigmoid - (1 + tanh(x/2))/2| = {diff:.2e}"


def _saturation(coeffs):
    big = np.array([25.0, 50.0, 1e3, 1e6])
    ok = (
        np.all(tanh_approx(big, coeffs) == 1.0)
        and np.all(tanh_approx(-big, coeffs) == -1.0)
        and np.all(sigmoid_approx(2 * big, coeffs) == 1.0)
        and np.all(sigmoid_approx(-2 * big, coeffs) == 0.0)
    )
    return bool(ok), "exact +/-1 and 0/1 far from the origin"


def _mulaw_roundtrip(coeffs):
    codes = np.arange(dsp.QLEVELS)
    back = dsp.mulaw_encode(dsp.mulaw_decode(codes))
    return bool(np.array_equal(back, codes)), "encode(decode(i)) == i for all 256 codes"


def _tree_roundtrip(coeffs):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        p = rng.dirichlet(np.ones(256))
        worst = max(worst, float(np.max(np.abs(tree_pdf_from_logits(tree_logits_from_pdf(p)) - p))))
    return worst <= 1e-6, f"pdf -> logits -> pdf max error {worst:.2e}"


def _sampler_chi2(coeffs):
    rng = np.random.default_rng(11)
    p = rng.dirichlet(np.full(256, 2.0))
    table = build_inv_sigmoid_table(0.0)
    n = 200_000
    draws = tree_sample_batch(tree_logits_from_pdf(p), table, rng, n)
    observed = np.bincount(draws, minlength=256)
    pval = stats.chisquare(observed, p * n).pvalue
    return pval > 1e-3, f"chi-square p = {pval:.3g} over {n} draws"


def _pack_roundtrip(coeffs):
    rng = np.random.default_rng(3)
    ints = rng.integers(-127, 128, size=(48, 36))
    keep = np.repeat(np.repeat(rng.random((6, 9)) < 0.3, 8, axis=0), 4, axis=1)
    W = ints * keep * Q_SCALE
    M = pack_block_sparse(W)
    x = rng.standard_normal(36)
    x /= np.linalg.norm(x)
    err = float(np.max(np.abs(sparse_q8_gemv(M, x) - W @ x)))
    ok = np.array_equal(unpack_block_sparse(M), W) and err <= 1e-5
    return bool(ok), f"pack/unpack exact, gemv error {err:.1e}"


CHECKS = [
    ("tanh_max_error", _tanh_error),
    ("sigmoid_max_error", _sigmoid_error),
    ("sigmoid_identity", _sigmoid_identity),
    ("activation_saturation", _saturation),
    ("mulaw_roundtrip", _mulaw_roundtrip),
    ("tree_pdf_roundtrip", _tree_roundtrip),
    ("sampler_chi_square", _sampler_chi2),
    ("block_sparse_pack_roundtrip", _pack_roundtrip),
]


def run_checks(coeffs=DEFAULT_COEFFS):
    results = []
    for name, check in CHECKS:
        try:
            passed, detail = check(coeffs)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
    return results
