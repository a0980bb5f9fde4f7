"""Pure-Python/numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` extension. Used
when the extension is not built or ``TEXTLESS_PURE_PYTHON=1`` is set.
"""
import numpy as np


def dtw_accumulate(cost):
    """Path-length-normalized DTW over a precomputed frame cost matrix.

    Steps are (1,0), (0,1), (1,1). Among equal-cost predecessors the
    diagonal wins, then the vertical, then the horizontal step.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    acc = np.empty((n, m))
    length = np.empty((n, m), dtype=np.int64)
    acc[0, 0] = cost[0, 0]
    length[0, 0] = 1
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
        length[0, j] = length[0, j - 1] + 1
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        length[i, 0] = length[i - 1, 0] + 1
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            blen = length[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
                blen = length[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
                blen = length[i, j - 1]
            acc[i, j] = best + cost[i, j]
            length[i, j] = blen + 1
    return float(acc[n - 1, m - 1] / length[n - 1, m - 1])


def levenshtein(a, b):
    """Unit-cost edit distance between two int64 token arrays."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, sub)
        prev = cur
    return prev[m]


def ar_generate(cond, prev_tables, w_out, b_out, temperature, uniforms, start_code):
    """Autoregressive mu-law sampling loop.

    cond: [N, H] conditioning pre-activations (bias already folded in).
    prev_tables: [order, Q, H]; row ``prev_tables[j, c]`` is added when the
    code ``j + 1`` steps back was ``c``.
    w_out: [H, Q], b_out: [Q]. temperature <= 0 selects argmax; otherwise
    inverse-CDF sampling of softmax(logits / temperature) with ``uniforms[t]``.
    """
    cond = np.asarray(cond, dtype=np.float64)
    prev_tables = np.asarray(prev_tables, dtype=np.float64)
    w_out = np.asarray(w_out, dtype=np.float64)
    b_out = np.asarray(b_out, dtype=np.float64)
    n = cond.shape[0]
    order = prev_tables.shape[0]
    history = [int(start_code)] * order
    out = np.empty(n, dtype=np.int64)
    for t in range(n):
        h = cond[t].copy()
        for j in range(order):
            h += prev_tables[j, history[j]]
        np.maximum(h, 0.0, out=h)
        logits = h @ w_out + b_out
        if temperature <= 0.0:
            code = int(np.argmax(logits))
        else:
            z = logits / temperature
            p = np.exp(z - z.max())
            cdf = np.cumsum(p)
            code = int(np.searchsorted(cdf, uniforms[t] * cdf[-1], side="right"))
            code = min(code, len(cdf) - 1)
        out[t] = code
        if order:
            history = [code] + history[:-1]
    return out
