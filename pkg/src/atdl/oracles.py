"""Slow, loop-based reference implementations.

These share no code with the vectorised kernels beyond numpy itself and are
meant for tiny fixtures only (a handful of samples, T and |V| below ten).
They back the test suite and the ``selftest`` subcommand.
"""

import math

import numpy as np


def bigram(ids, nv):
    ids = np.asarray(ids)
    n, t = ids.shape[0], ids.shape[1] - 1
    out = np.zeros((nv, nv))
    for i in range(n):
        for pos in range(t):
            a, b = ids[i, pos], ids[i, pos + 1]
            for k in range(nv):
                out[a, k] += (1.0 if k == b else 0.0) - 1.0 / nv
    return out / (n * t)


def context(ids, nv):
    """Average over targets of the prefix token frequencies, then column-centred.

    Entry (k, j): how often j occurs in the prefix of a position whose target is
    k, weighted by 1/prefix-length, with each column's mean subtracted.
    """
    ids = np.asarray(ids)
    n, t = ids.shape[0], ids.shape[1] - 1
    raw = np.zeros((nv, nv))
    for i in range(n):
        for pos in range(t):
            k = ids[i, pos + 1]
            for q in range(pos + 1):
                raw[k, ids[i, q]] += 1.0 / (pos + 1)
    raw /= n * t
    for j in range(nv):
        m = sum(raw[k, j] for k in range(nv)) / nv
        for k in range(nv):
            raw[k, j] -= m
    return raw


def interchangeability(b):
    nv = b.shape[0]
    out = np.zeros((nv, nv))
    for j in range(nv):
        for k in range(nv):
            out[j, k] = sum(b[i, j] * b[i, k] for i in range(nv))
    return out


def _jacobian(a):
    t = len(a)
    return np.array([[a[r] * ((r == c) - a[c]) for c in range(t)] for r in range(t)])


def attention_features(ids, nv, gbar):
    """Q-bar and Delta by explicit Jacobians of uniform causal attention."""
    ids = np.asarray(ids)
    n, t = ids.shape[0], ids.shape[1] - 1
    colmean = [sum(gbar[j, k] for j in range(nv)) / nv for k in range(nv)]
    qbar = np.zeros((nv, nv))
    delta = np.zeros(t)
    for i in range(n):
        x, y = ids[i, :t], ids[i, 1:]
        q = np.zeros((t, t))
        for r in range(t):
            a = np.array([1.0 / (r + 1) if c <= r else 0.0 for c in range(t)])
            score = np.array([gbar[y[r], x[c]] - colmean[x[c]] if c <= r else 0.0
                              for c in range(t)])
            jac = _jacobian(a)
            for c in range(t):
                q[r, c] = sum(jac[c, m] * score[m] for m in range(t))
        for r in range(t):
            for c in range(t):
                qbar[x[r], x[c]] += q[r, c]
                if r >= c:
                    delta[r - c] += q[r, c]
    return qbar / (n * t), delta / (n * t)


def all_stats(ids, nv):
    b = bigram(ids, nv)
    phi = context(ids, nv)
    sig = interchangeability(b)
    g = sig @ phi
    q, d = attention_features(ids, nv, g)
    return {"bbar": b, "phibar": phi, "sigma": sig, "gbar": g, "qbar": q, "delta": d}


def forward_logits(params, x):
    """Straight-line forward pass for one id row, with explicit loops for softmax."""
    nv, t = params.vocab, len(x)
    h = np.zeros((t, nv))
    for pos, tok in enumerate(x):
        h[pos, tok] = 1.0
    for l in range(params.layers):
        scores = h @ params.W[l] @ h.T
        a = np.zeros((t, t))
        for r in range(t):
            row = [scores[r, c] + params.P[l][r - c] for c in range(r + 1)]
            mx = max(row)
            e = [math.exp(v - mx) for v in row]
            z = sum(e)
            for c in range(r + 1):
                a[r, c] = e[c] / z
        h = h + a @ h @ params.V[l]
    return h @ params.W_O


def nll(params, ids):
    ids = np.asarray(ids)
    total, count = 0.0, 0
    for row in ids:
        logits = forward_logits(params, row[:-1])
        for pos, target in enumerate(row[1:]):
            z = logits[pos]
            mx = z.max()
            total += mx + math.log(sum(math.exp(v - mx) for v in z)) - z[target]
            count += 1
    return total / count


def finite_difference(params, loss_fn, h=1e-5):
    """Central differences of ``loss_fn(params)`` for every parameter entry."""
    out = []
    for _, _, arr in params.arrays():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_fn(params)
            arr[idx] = old - h
            down = loss_fn(params)
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out
