"""Hierarchical binary-tree sampling of the 256-way excitation distribution.

Nodes use heap indexing: the root is 1 and node ``n`` has children ``2n``
(bit 0, lower half of the code range) and ``2n + 1`` (bit 1, upper half).
With ``L`` levels, leaf id ``2**L + c`` stands for code ``c``.  Each internal
node carries a logit ``y`` whose sigmoid is the probability of the upper
branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

DEFAULT_XI = 0.025
DEFAULT_TABLE_SIZE = 1024
LOGIT_CAP = 30.0


@dataclass(frozen=True, eq=False)
class InvSigmoidTable:
    """Stratified inverse-sigmoid thresholds with r restricted to ]xi, 1 - xi[."""

    xi: float
    entries: np.ndarray

    def __len__(self):
        return self.entries.shape[0]


def build_inv_sigmoid_table(xi=DEFAULT_XI, size=DEFAULT_TABLE_SIZE):
    if not 0.0 <= xi < 0.5:
        raise ValueError(f"xi must lie in [0, 0.5), got {xi}")
    if size < 2:
        raise ValueError("table size must be at least 2")
    r = xi + (1.0 - 2.0 * xi) * (np.arange(size) + 0.5) / size
    entries = np.log(r) - np.log1p(-r)
    entries.flags.writeable = False
    return InvSigmoidTable(float(xi), entries)


class ArrayLogits:
    """Node-logit provider over a precomputed array of ``Q - 1`` logits.

    Counts how many distinct nodes were looked up, which is the quantity
    the hierarchical scheme keeps at ``log2(Q)`` per sample.
    """

    def __init__(self, logits):
        self.logits = np.asarray(logits, dtype=np.float64)
        self._seen = set()

    def __call__(self, node):
        self._seen.add(node)
        return self.logits[node - 1]

    @property
    def evaluations(self):
        return len(self._seen)

    def reset(self):
        self._seen.clear()


def tree_sample(logits, table, rng, levels=8):
    """Draw one code with ``levels`` branch decisions.

    At each node a uniform table index ``k`` is drawn and the upper branch is
    taken iff ``y_node > entries[k]``; this takes it with probability
    ``sigmoid(y_node)`` without evaluating the sigmoid.
    """
    entries = table.entries
    m = entries.shape[0]
    node = 1
    for _ in range(levels):
        k = rng.integers(0, m)
        node = 2 * node + int(logits(node) > entries[k])
    return node - (1 << levels)


def tree_sample_batch(logits, table, rng, n, levels=8):
    """Vectorized :func:`tree_sample` for ``n`` independent draws from one tree.

    Consumes the generator exactly like ``n`` sequential scalar calls.
    """
    logits = np.asarray(logits, dtype=np.float64)
    k = rng.integers(0, len(table), size=(n, levels))
    thresholds = table.entries[k]
    node = np.ones(n, dtype=np.int64)
    for level in range(levels):
        node = 2 * node + (logits[node - 1] > thresholds[:, level])
    return node - (1 << levels)


def _levels_for(n_nodes):
    levels = int(np.log2(n_nodes + 1))
    if (1 << levels) - 1 != n_nodes:
        raise ValueError(f"expected 2**L - 1 node logits, got {n_nodes}")
    return levels


def tree_pdf_from_logits(logits):
    """Leaf probabilities: product along the path of sigmoid(y) or 1 - sigmoid(y)."""
    logits = np.asarray(logits, dtype=np.float64)
    levels = _levels_for(logits.shape[0])
    p_up = expit(logits)
    probs = np.ones(1)
    for level in range(levels):
        nodes = slice((1 << level) - 1, (1 << (level + 1)) - 1)
        up = p_up[nodes]
        probs = np.stack([probs * (1.0 - up), probs * up], axis=1).ravel()
    return probs


def tree_logits_from_pdf(p):
    """Inverse of :func:`tree_pdf_from_logits`.

    Each logit is ``logit(mass(upper subtree) / mass(node))`` capped at
    +/-30; nodes with zero mass get logit 0.
    """
    p = np.asarray(p, dtype=np.float64)
    q = p.shape[0]
    _levels_for(q - 1)
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    # mass[n] for heap node n; leaves occupy [q, 2q)
    mass = np.zeros(2 * q)
    mass[q:] = p
    for node in range(q - 1, 0, -1):
        mass[node] = mass[2 * node] + mass[2 * node + 1]
    node_mass = mass[1:q]
    upper = mass[3 : 2 * q : 2]
    out = np.zeros(q - 1)
    live = node_mass > 0
    with np.errstate(divide="ignore"):
        out[live] = logit(upper[live] / node_mass[live])
    return np.clip(out, -LOGIT_CAP, LOGIT_CAP)
