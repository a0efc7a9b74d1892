"""Cross-entropy loss and its exact gradients, written out layer by layer.

The backward pass follows the recurrence

    G[L]   = R W_O^T,                 R = Y - softmax(logits)
    S[l]   = J[l] (G[l] V[l]^T h[l-1]^T)          (row-wise softmax Jacobian)
    G[l-1] = G[l] + A[l]^T G[l] V[l]^T + S[l] h[l-1] W[l]^T + S[l]^T h[l-1] W[l]

and every parameter gradient is ``-1/(N T)`` times a sum over samples.
Samples are processed in fixed-size chunks whose partial sums are merged in
chunk order, so results do not depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .linalg import dm_collapse, softmax_jacobian_apply
from .model import ModelParams, forward_batch


@dataclass
class LossReport:
    mean_nll: float
    per_sample: np.ndarray = None


@dataclass
class GradBundle:
    W: list
    V: list
    P: list
    W_O: np.ndarray
    loss: float = None
    G: list = field(default=None, repr=False)
    S: list = field(default=None, repr=False)

    def as_params(self):
        return ModelParams(self.W, self.V, self.P, self.W_O)

    def all_finite(self):
        return self.as_params().all_finite()


def chunk_rows(t, vocab, budget=2_000_000):
    """Samples per chunk so one (n, T, |V|) block stays near ``budget`` floats."""
    return max(1, budget // max(1, t * vocab))


def default_workers():
    env = os.environ.get("ATDL_WORKERS")
    return int(env) if env else 1


def _run_chunks(fn, n, rows, workers):
    slices = [slice(i, min(i + rows, n)) for i in range(0, n, rows)]
    if workers and workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, slices))
    return [fn(sl) for sl in slices]


def _check_batch(params, batch):
    if batch.vocab_size != params.vocab:
        raise DimensionError(f"batch vocabulary {batch.vocab_size} != model {params.vocab}")
    if params.t is not None and batch.t != params.t:
        raise DimensionError(f"batch T={batch.t} != model T={params.t}")


def _nll(logits, y):
    mx = logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(logits - mx).sum(axis=-1))
    picked = np.take_along_axis(logits - mx, y[..., None], axis=-1)[..., 0]
    return lse - picked


def loss(params, batch, workers=None):
    _check_batch(params, batch)
    x, y = batch.inputs, batch.targets

    def part(sl):
        tr = forward_batch(params, x[sl])
        return _nll(tr.logits, y[sl]).mean(axis=1)

    rows = chunk_rows(batch.t, params.vocab)
    per = np.concatenate(_run_chunks(part, batch.n, rows, workers or default_workers()))
    return LossReport(mean_nll=float(per.mean()), per_sample=per)


def _scatter_outer(idx_r, idx_c, weights, nv):
    """sum_{b,r,c} weights[b,r,c] e_{idx_r[b,r]} e_{idx_c[b,c]}^T as a dense |V|x|V|."""
    flat = (idx_r[:, :, None] * nv + idx_c[:, None, :]).ravel()
    return np.bincount(flat, weights=weights.ravel(), minlength=nv * nv).reshape(nv, nv)


def _scatter_rows(idx, rows, nv):
    """sum_{b,t} e_{idx[b,t]} rows[b,t]^T, i.e. X^T rows for one-hot X."""
    out = np.zeros((nv, rows.shape[-1]))
    np.add.at(out, idx.ravel(), rows.reshape(-1, rows.shape[-1]))
    return out


def _backward_chunk(params, x, y, keep_trace):
    nv, L = params.vocab, params.layers
    tr = forward_batch(params, x)
    nll = _nll(tr.logits, y).sum()

    r = -tr.probs
    np.put_along_axis(r, y[..., None], np.take_along_axis(r, y[..., None], -1) + 1.0, -1)

    def flat(a):
        return a.reshape(-1, a.shape[-1])

    h_top = tr.h[L]
    d_wo = _scatter_rows(x, r, nv) if h_top is None else flat(h_top).T @ flat(r)
    g = r @ params.W_O.T
    dW, dV, dP = [None] * L, [None] * L, [None] * L
    Gs, Ss = [None] * L, [None] * L
    for l in reversed(range(L)):
        A, h = tr.A[l], tr.h[l]
        W, V = params.W[l], params.V[l]
        if keep_trace:
            Gs[l] = g
        gvt = g @ V.T
        at_g = A.transpose(0, 2, 1) @ g
        if h is None:
            dV[l] = _scatter_rows(x, at_g, nv)
            d_att = np.take_along_axis(gvt, np.broadcast_to(x[:, None, :], A.shape), axis=-1)
        else:
            dV[l] = flat(h).T @ flat(at_g)
            d_att = gvt @ h.transpose(0, 2, 1)
        # masked entries of A are exact zeros, so S inherits the causal support
        s = softmax_jacobian_apply(A, d_att)
        if keep_trace:
            Ss[l] = s
        if h is None:
            dW[l] = _scatter_outer(x, x, s, nv)
        else:
            dW[l] = flat(h).T @ flat(s @ h)
        dP[l] = dm_collapse(s)
        if l > 0:
            sh = s @ h
            sth = s.transpose(0, 2, 1) @ h
            g = g + A.transpose(0, 2, 1) @ gvt + sh @ W.T + sth @ W
    return nll, d_wo, dW, dV, dP, Gs, Ss


def backward(params, batch, workers=None, trace=False):
    """Exact gradient of the mean next-token NLL with respect to every parameter."""
    _check_batch(params, batch)
    x, y = batch.inputs, batch.targets
    rows = chunk_rows(batch.t, params.vocab)

    def part(sl):
        return _backward_chunk(params, x[sl], y[sl], trace)

    parts = _run_chunks(part, batch.n, rows, workers or default_workers())
    L = params.layers
    nll = 0.0
    d_wo = np.zeros_like(params.W_O)
    dW = [np.zeros_like(w) for w in params.W]
    dV = [np.zeros_like(v) for v in params.V]
    dP = [np.zeros_like(p) for p in params.P]
    for c_nll, c_wo, c_w, c_v, c_p, _, _ in parts:
        nll += c_nll
        d_wo += c_wo
        for l in range(L):
            dW[l] += c_w[l]
            dV[l] += c_v[l]
            dP[l] += c_p[l]
    scale = -1.0 / x.size
    out = GradBundle(
        W=[scale * a for a in dW], V=[scale * a for a in dV], P=[scale * a for a in dP],
        W_O=scale * d_wo, loss=nll / x.size)
    if trace:
        out.G = [np.concatenate([p[5][l] for p in parts]) for l in range(L)]
        out.S = [np.concatenate([p[6][l] for p in parts]) for l in range(L)]
    return out
