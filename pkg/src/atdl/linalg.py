"""Dense float64 kernels used by the model, the gradients and the statistics.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Kernels that
operate row-wise accept a leading batch axis, so ``(n, T, T)`` stacks of
attention matrices go through the same code path as a single ``(T, T)``.
"""

from functools import lru_cache

import numpy as np

from .errors import DimensionError, UndefinedSimilarityError

__all__ = [
    "causal_mask",
    "softmax_rows",
    "dm_expand",
    "dm_collapse",
    "softmax_jacobian_apply",
    "softmax_jacobian",
    "jacobian_opnorm",
    "jacobian_opnorm_bound_check",
    "ein_masked_rowscale",
    "frob_inner",
    "cosine_flat",
    "remove_projection",
    "onehot",
]


@lru_cache(maxsize=32)
def _tril(rows, cols):
    m = np.tril(np.ones((rows, cols), dtype=bool))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=32)
def _offsets(t):
    r, c = np.indices((t, t))
    off = r - c
    off.setflags(write=False)
    return off


def causal_mask(rows, cols=None):
    """Boolean support of the causal mask: True where column <= row."""
    return _tril(rows, rows if cols is None else cols)


def softmax_rows(m, causal=False):
    """Row softmax over the last axis.

    With ``causal=True`` entries with column > row are excluded from the
    normalisation and returned as exact zeros.  The row maximum is taken over
    the support only, so masked entries never enter ``exp``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim < 2 or m.shape[-1] == 0 or m.shape[-2] == 0:
        raise DimensionError(f"softmax_rows needs a non-empty matrix, got shape {m.shape}")
    if not causal:
        z = m - m.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)
    support = causal_mask(m.shape[-2], m.shape[-1])
    # column 0 is always in the support, so every row has at least one entry
    floor = np.where(support, m, m[..., :1])
    mx = floor.max(axis=-1, keepdims=True)
    e = np.where(support, np.exp(np.where(support, m - mx, 0.0)), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def dm_expand(p):
    """Lower-triangular Toeplitz matrix with ``p[m]`` on the m-th subdiagonal."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DimensionError(f"dm_expand expects a vector, got shape {p.shape}")
    t = p.shape[0]
    off = _offsets(t)
    return np.where(off >= 0, p[np.clip(off, 0, None)], 0.0)


def dm_collapse(s):
    """Sum each subdiagonal of a T x T matrix (or a stack of them).

    Entry ``m`` of the result is the sum of ``s[r, c]`` over ``r - c == m``;
    this is the adjoint of :func:`dm_expand`.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim < 2 or s.shape[-1] != s.shape[-2]:
        raise DimensionError(f"dm_collapse expects square matrices, got shape {s.shape}")
    t = s.shape[-1]
    if s.ndim > 2:
        s = s.reshape(-1, t, t).sum(axis=0)
    off = _offsets(t).ravel()
    keep = off >= 0
    return np.bincount(off[keep], weights=s.ravel()[keep], minlength=t)


def softmax_jacobian_apply(a, g):
    """Compute ``(Diag(a) - a^T a) g`` along the last axis without forming J."""
    a = np.asarray(a, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if a.shape != g.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {g.shape}")
    ag = a * g
    return ag - a * ag.sum(axis=-1, keepdims=True)


def softmax_jacobian(a):
    """Explicit Jacobian matrix of the softmax at output ``a``."""
    a = np.asarray(a, dtype=np.float64)
    return np.diag(a) - np.outer(a, a)


def jacobian_opnorm(a):
    # J is symmetric PSD, so the spectral norm is its largest eigenvalue
    return float(np.linalg.eigvalsh(softmax_jacobian(a))[-1])


def jacobian_opnorm_bound_check(att_row, t=None):
    """True iff the softmax Jacobian at ``att_row`` has norm <= 1/sqrt(t).

    ``t`` defaults to the number of nonzero entries of the row.
    """
    a = np.asarray(att_row, dtype=np.float64)
    if t is None:
        t = max(int(np.count_nonzero(a)), 1)
    return jacobian_opnorm(a) <= 1.0 / np.sqrt(t) + 1e-12


def ein_masked_rowscale(att, m):
    """Row t of the result is ``J_t @ m[t]`` with ``J_t`` the Jacobian at ``att[t]``.

    Entries of ``m`` above the diagonal are outside the causal support and are
    ignored, whatever they contain.
    """
    att = np.asarray(att, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if att.shape != m.shape or att.shape[-1] != att.shape[-2]:
        raise DimensionError(f"ein_masked_rowscale shape mismatch: {att.shape} vs {m.shape}")
    m = np.where(causal_mask(m.shape[-1]), m, 0.0)
    return softmax_jacobian_apply(att, m)


def frob_inner(a, b):
    return float(np.vdot(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)))


def cosine_flat(a, b):
    """Cosine similarity of two matrices flattened to vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"cosine_flat shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarityError("cosine of an all-zero matrix is undefined")
    return float(np.clip(np.vdot(a, b) / (na * nb), -1.0, 1.0))


def remove_projection(w, l):
    """Subtract from ``w`` its Frobenius projection onto ``l``."""
    w = np.asarray(w, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if w.shape != l.shape:
        raise DimensionError(f"remove_projection shape mismatch: {w.shape} vs {l.shape}")
    ll = np.vdot(l, l)
    if ll == 0.0:
        raise UndefinedSimilarityError("cannot project onto an all-zero direction")
    return w - (np.vdot(w, l) / ll) * l


def onehot(ids, size):
    ids = np.asarray(ids)
    out = np.zeros(ids.shape + (size,), dtype=np.float64)
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out
