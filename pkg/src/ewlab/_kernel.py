"""Compiled inner loop of the EW chain.

Uniforms are supplied by the caller in blocks of shape ``(B, n)`` so the
random stream stays a plain numpy ``Generator`` and the block size never
changes which uniform a given (stage, player) consumes.
"""
import numpy as np
from numba import njit

RUNNING = 0
ABSORBED = 1
HORIZON = 2
NEAR_Z = 3


@njit(cache=True, nogil=True)
def softmax_rows(logw, counts, out):
    n = logw.shape[0]
    for i in range(n):
        m = -np.inf
        for b in range(counts[i]):
            if logw[i, b] > m:
                m = logw[i, b]
        s = 0.0
        for b in range(counts[i]):
            e = np.exp(logw[i, b] - m)
            out[i, b] = e
            s += e
        for b in range(counts[i]):
            out[i, b] /= s


@njit(cache=True, nogil=True)
def advance(logw, counts, etas, payoffs, strides, sne, uniforms, t, horizon,
            absorb_eps, z_eps, rec_probs, rec_acts, record):
    """Run the chain through one block of uniforms.

    Returns ``(status, t, index, used)`` where ``index`` is the absorbing
    strict NE (or -1) and ``used`` the number of profiles written to the
    recording buffers (the terminal profile included when stopping).
    """
    n = logw.shape[0]
    maxa = logw.shape[1]
    p = np.zeros((n, maxa))
    act = np.zeros(n, dtype=np.int64)
    nsne = sne.shape[0]
    nblock = uniforms.shape[0]
    for j in range(nblock + 1):
        softmax_rows(logw, counts, p)
        if record:
            rec_probs[j, :, :] = p
        if absorb_eps > 0.0:
            for s in range(nsne):
                d = 0.0
                for i in range(n):
                    off = 0.0
                    for b in range(counts[i]):
                        if b != sne[s, i]:
                            off += p[i, b]
                    if off > d:
                        d = off
                if d < absorb_eps:
                    return ABSORBED, t, s, j + 1
        if z_eps > 0.0 and nsne > 0:
            L = 0.0
            for s in range(nsne):
                pr = 1.0
                for i in range(n):
                    pr *= p[i, sne[s, i]]
                L += pr
            if L < z_eps:
                return NEAR_Z, t, -1, j + 1
        if t >= horizon:
            return HORIZON, t, -1, j + 1
        if j == nblock:
            return RUNNING, t, -1, j
        flat = 0
        for i in range(n):
            u = uniforms[j, i]
            c = 0.0
            k = 0
            last = 0
            for b in range(counts[i]):
                if p[i, b] > 0.0:
                    last = b
                c += p[i, b]
                if c <= u:
                    k = b + 1
            if k >= counts[i] or p[i, k] == 0.0:
                k = last
            act[i] = k
            flat += k * strides[i]
        if record:
            for i in range(n):
                rec_acts[j, i] = act[i]
        for i in range(n):
            base = flat - act[i] * strides[i]
            for b in range(counts[i]):
                logw[i, b] += etas[i] * payoffs[i, base + b * strides[i]]
        t += 1
    return RUNNING, t, -1, nblock
