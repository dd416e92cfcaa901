"""Pure-Python reference versions of the hot loops.

``fill_block_columns`` writes the stacked block least-squares columns and
``propagate_round`` performs one synchronous round of neighbour sums over a
CSR layout.  Both mutate ``out`` in place.
"""

import numpy as np


def fill_block_columns(suffixes, prefix, weights, receivers, senders, out):
    n_stages, n, _ = suffixes.shape
    # out[l*N^2 + b*N + a, k] = w_l * B_l[a, rec_k] * C[snd_k, b]
    left = suffixes[:, :, receivers]  # (K, a, k)
    right = prefix[senders, :]  # (k, b)
    block = np.einsum("l,lak,kb->lbak", weights, left, right)
    out[...] = block.reshape(n_stages * n * n, len(receivers))


def propagate_round(indptr, indices, data, prev, out):
    for i in range(len(out)):
        acc = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            acc += data[e] * prev[indices[e]]
        out[i] = acc
