"""Textbook MHA/GQA/MQA written independently of the sqa package.

Heads are handled with per-head weight slices and an explicit group index,
softmax comes from scipy. Only the weight layout convention is shared.
"""

import numpy as np
from scipy.special import softmax


def grouped_attention(x, W_Q, W_K, W_V, W_O, n_heads, n_kv_heads, d_head, causal=False):
    n = x.shape[0]
    heads = []
    per_group = n_heads // n_kv_heads
    for i in range(n_heads):
        g = i // per_group
        q = x @ W_Q[:, i * d_head:(i + 1) * d_head]
        k = x @ W_K[:, g * d_head:(g + 1) * d_head]
        v = x @ W_V[:, g * d_head:(g + 1) * d_head]
        s = np.einsum("id,jd->ij", q, k) / np.sqrt(d_head)
        if causal:
            s = np.where(np.tril(np.ones((n, n), dtype=bool)), s, -np.inf)
        heads.append(softmax(s, axis=1) @ v)
    return np.concatenate(heads, axis=1) @ W_O


def mha(x, p, n_heads, d_head, causal=False):
    return grouped_attention(x, p.W_Q, p.W_K, p.W_V, p.W_O, n_heads, n_heads, d_head, causal)


def mqa(x, p, n_heads, d_head, causal=False):
    return grouped_attention(x, p.W_Q, p.W_K, p.W_V, p.W_O, n_heads, 1, d_head, causal)


def gqa(x, p, n_heads, n_groups, d_head, causal=False):
    return grouped_attention(x, p.W_Q, p.W_K, p.W_V, p.W_O, n_heads, n_groups, d_head, causal)
