"""Inner update loops shared by the graph and document trainers.

Compiled with numba when available; the same functions run as plain Python
otherwise (roughly two orders of magnitude slower, identical semantics).
Negatives are pre-drawn by the caller, so the kernels are RNG-free and a
fixed input always produces the same output.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba present in supported envs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


@njit(cache=True, nogil=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit(cache=True, nogil=True)
def _neg_log_sigmoid(x):
    # -log(sigmoid(x)), stable for large |x|
    if x >= 0.0:
        return math.log1p(math.exp(-x))
    return -x + math.log1p(math.exp(x))


@njit(cache=True, nogil=True)
def train_pairs(
    inp,
    out,
    centers,
    contexts,
    negs,
    lr0,
    lr_slope,
    lr_min,
    t0,
    learn_input,
    learn_output,
):
    """Skip-gram negative-sampling updates, one gradient step per pair.

    For pair p: center row of ``inp`` is pulled toward the context row of
    ``out`` and pushed from the negative rows. Gradient coefficients
    (sigmoid(score) - label) are computed from the pre-update matrices,
    then applied: each touched output row moves along the center vector
    and the center moves by the accumulated error, so the applied step is
    the exact gradient of the pair loss. Negatives equal to the context
    are ignored. Returns summed loss.
    """
    dim = inp.shape[1]
    n_neg = negs.shape[1]
    gs = np.zeros(n_neg + 1)
    loss = 0.0
    for p in range(centers.shape[0]):
        lr = lr0 + lr_slope * (t0 + p)
        if lr < lr_min:
            lr = lr_min
        v = centers[p]
        c = contexts[p]
        err = np.zeros(dim)
        s = 0.0
        for d in range(dim):
            s += out[c, d] * inp[v, d]
        gs[0] = _sigmoid(s) - 1.0
        loss += _neg_log_sigmoid(s)
        for d in range(dim):
            err[d] += gs[0] * out[c, d]
        for m in range(n_neg):
            n = negs[p, m]
            if n == c:
                gs[m + 1] = 0.0
                continue
            s = 0.0
            for d in range(dim):
                s += out[n, d] * inp[v, d]
            gs[m + 1] = _sigmoid(s)
            loss += _neg_log_sigmoid(-s)
            for d in range(dim):
                err[d] += gs[m + 1] * out[n, d]
        if learn_output:
            for d in range(dim):
                out[c, d] -= lr * gs[0] * inp[v, d]
            for m in range(n_neg):
                n = negs[p, m]
                if n == c:
                    continue
                for d in range(dim):
                    out[n, d] -= lr * gs[m + 1] * inp[v, d]
        if learn_input:
            for d in range(dim):
                inp[v, d] -= lr * err[d]
    return loss


@njit(cache=True, nogil=True)
def train_doc_mean_context(
    tag_vecs,
    word_in,
    word_out,
    tag_ids,
    word_ids,
    window,
    negs,
    lr0,
    lr_slope,
    lr_min,
    t0,
    learn_tags,
    learn_words,
    learn_output,
):
    """Distributed-memory updates over one document.

    For each position i the hidden state is the mean of the document's tag
    vectors and the input vectors of words within ``window`` of i (position
    i excluded). The word at i is the positive target. The error gradient
    on the mean is split equally over every averaged constituent.
    Returns summed loss.
    """
    dim = word_out.shape[1]
    n_neg = negs.shape[1]
    n_tags = tag_ids.shape[0]
    length = word_ids.shape[0]
    gs = np.zeros(n_neg + 1)
    loss = 0.0
    for i in range(length):
        lr = lr0 + lr_slope * (t0 + i)
        if lr < lr_min:
            lr = lr_min
        lo = i - window
        if lo < 0:
            lo = 0
        hi = i + window
        if hi > length - 1:
            hi = length - 1
        n_ctx = n_tags + (hi - lo)  # window span minus position i itself
        h = np.zeros(dim)
        for t in range(n_tags):
            for d in range(dim):
                h[d] += tag_vecs[tag_ids[t], d]
        for j in range(lo, hi + 1):
            if j == i:
                continue
            for d in range(dim):
                h[d] += word_in[word_ids[j], d]
        for d in range(dim):
            h[d] /= n_ctx
        pos = word_ids[i]
        err = np.zeros(dim)
        s = 0.0
        for d in range(dim):
            s += word_out[pos, d] * h[d]
        gs[0] = _sigmoid(s) - 1.0
        loss += _neg_log_sigmoid(s)
        for d in range(dim):
            err[d] += gs[0] * word_out[pos, d]
        for m in range(n_neg):
            n = negs[i, m]
            if n == pos:
                gs[m + 1] = 0.0
                continue
            s = 0.0
            for d in range(dim):
                s += word_out[n, d] * h[d]
            gs[m + 1] = _sigmoid(s)
            loss += _neg_log_sigmoid(-s)
            for d in range(dim):
                err[d] += gs[m + 1] * word_out[n, d]
        if learn_output:
            for d in range(dim):
                word_out[pos, d] -= lr * gs[0] * h[d]
            for m in range(n_neg):
                n = negs[i, m]
                if n == pos:
                    continue
                for d in range(dim):
                    word_out[n, d] -= lr * gs[m + 1] * h[d]
        # gradient of the mean is shared equally by every constituent
        if learn_tags:
            for t in range(n_tags):
                for d in range(dim):
                    tag_vecs[tag_ids[t], d] -= lr * err[d] / n_ctx
        if learn_words:
            for j in range(lo, hi + 1):
                if j == i:
                    continue
                for d in range(dim):
                    word_in[word_ids[j], d] -= lr * err[d] / n_ctx
    return loss
