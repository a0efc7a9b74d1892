"""Corpus statistics that form the leading terms of the trained weights.

All statistics are averages over the N*T input positions of a
:class:`~atdl.corpus.SequenceBatch`:

* ``bbar``   centred bigram matrix, rows sum to zero
* ``phibar`` centred prefix co-occurrence ("context") matrix, columns sum to zero
* ``sigma``  ``bbar.T @ bbar`` (token interchangeability)
* ``gbar``   ``sigma @ phibar``
* ``qbar``   token-pair attention feature, ``delta`` its relative-position analogue
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from . import binfmt
from .errors import DimensionError
from .linalg import dm_collapse
from .model import ModelParams

STATS_MAGIC = b"ATDL-STATS1"
_STATS_HEADER = "<IIQI"  # |V|, T, N, flags
CHUNK = 64


@dataclass
class BasisStats:
    bbar: np.ndarray
    phibar: np.ndarray
    sigma: np.ndarray
    gbar: np.ndarray
    qbar: np.ndarray
    delta: np.ndarray
    t: int
    n: int

    @property
    def vocab(self):
        return self.bbar.shape[0]

    def value_feature(self):
        """Direction of the value-matrix leading term, ``phibar.T @ bbar.T``."""
        return self.phibar.T @ self.bbar.T

    def to_bytes(self, chash=None, flags=0):
        header = (self.vocab, self.t, self.n, flags)
        mats = [self.bbar, self.phibar, self.sigma, self.gbar, self.qbar, self.delta]
        payload = b"".join(np.ascontiguousarray(m, dtype="<f8").tobytes() for m in mats)
        return binfmt.pack(STATS_MAGIC, _STATS_HEADER, header, payload, chash)

    @classmethod
    def from_bytes(cls, blob):
        (v, t, n, _), _, payload = binfmt.unpack(
            blob, STATS_MAGIC, _STATS_HEADER, lambda h: 8 * (5 * h[0] * h[0] + h[1]))
        flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
        mats = [flat[i * v * v:(i + 1) * v * v].reshape(v, v) for i in range(5)]
        return cls(*mats, delta=flat[5 * v * v:].copy(), t=t, n=n)

    def save(self, path, chash=None):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes(chash))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass(frozen=True)
class CoeffSchedule:
    s: int
    eta: float
    c_out: float
    c_val: float
    c_attn: float
    c_pos: float


def coefficients(s, eta):
    """Step-s coefficients of the four leading terms."""
    if s < 0 or not eta > 0:
        raise ValueError("need s >= 0 and eta > 0")
    attn = (3 * comb(s, 4) + 2 * comb(s, 3)) * eta ** 4
    return CoeffSchedule(s=s, eta=eta, c_out=s * eta, c_val=comb(s, 2) * eta ** 2,
                         c_attn=attn, c_pos=attn)


def _chunks(n, size=CHUNK):
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def compute_bigram(batch):
    x, y, nv = batch.inputs, batch.targets, batch.vocab_size
    nt = x.size
    b = np.bincount((x * nv + y).ravel(), minlength=nv * nv).reshape(nv, nv) / nt
    alpha = np.bincount(x.ravel(), minlength=nv) / nt
    return b - (alpha / nv)[:, None]


def _prefix_average(x, nv):
    """Row t of ``A0 @ X``: token counts over positions 0..t divided by t+1."""
    cum = np.cumsum(np.eye(nv)[x], axis=1)
    return cum / np.arange(1, x.shape[1] + 1)[None, :, None]


def compute_context(batch):
    x, y, nv = batch.inputs, batch.targets, batch.vocab_size
    nt = x.size
    # phi_t[k, j]: accumulated weight of j in the prefix of target k
    phi_t = np.zeros((nv, nv))
    for sl in _chunks(batch.n, max(1, 2_000_000 // (batch.t * nv))):
        np.add.at(phi_t, y[sl].ravel(), _prefix_average(x[sl], nv).reshape(-1, nv))
    phi_prime = phi_t.T / nt
    centred = phi_prime - phi_prime.sum(axis=1, keepdims=True) / nv
    return centred.T


def compute_interchangeability(bbar):
    return bbar.T @ bbar


def per_sample_q(x, y, gbar):
    """Per-sample matrices Q_i for an (n, T) block, via the closed form.

    Row t keeps the first t+1 scores (causal support), subtracts their mean
    and divides by t+1, which is the uniform-attention Jacobian applied to
    ``(Y - U_O) gbar X^T``.
    """
    t = x.shape[1]
    col_mean = gbar.mean(axis=0)
    m = gbar[y[:, :, None], x[:, None, :]] - col_mean[x][:, None, :]
    tril = np.tril(np.ones((t, t), dtype=bool))
    width = np.arange(1, t + 1, dtype=np.float64)[:, None]
    row_mean = np.where(tril, m, 0.0).sum(axis=-1, keepdims=True) / width
    return np.where(tril, (m - row_mean) / width, 0.0)


def compute_qbar(batch, bbar=None, phibar=None, sigma=None, gbar=None):
    """Return ``(qbar, delta)``; ``gbar`` is formed from the others if not given."""
    if gbar is None:
        if bbar is None or phibar is None:
            raise ValueError("compute_qbar needs gbar or (bbar, phibar)")
        sigma = compute_interchangeability(bbar) if sigma is None else sigma
        gbar = sigma @ phibar
    x, y, nv = batch.inputs, batch.targets, batch.vocab_size
    if gbar.shape != (nv, nv):
        raise DimensionError(f"gbar has shape {gbar.shape}, vocabulary is {nv}")
    nt = x.size
    qsum = np.zeros(nv * nv)
    qpos = np.zeros((x.shape[1], x.shape[1]))
    for sl in _chunks(batch.n):
        q = per_sample_q(x[sl], y[sl], gbar)
        idx = x[sl][:, :, None] * nv + x[sl][:, None, :]
        qsum += np.bincount(idx.ravel(), weights=q.ravel(), minlength=nv * nv)
        qpos += q.sum(axis=0)
    return qsum.reshape(nv, nv) / nt, dm_collapse(qpos) / nt


def compute_stats(batch):
    bbar = compute_bigram(batch)
    phibar = compute_context(batch)
    sigma = compute_interchangeability(bbar)
    gbar = sigma @ phibar
    qbar, delta = compute_qbar(batch, gbar=gbar)
    return BasisStats(bbar, phibar, sigma, gbar, qbar, delta, t=batch.t, n=batch.n)


def leading_terms(bs, cs, layers=1):
    """Parameters equal to the leading terms at the schedule's step, every layer alike."""
    vf = bs.value_feature()
    return ModelParams(
        W=[cs.c_attn * bs.qbar for _ in range(layers)],
        V=[cs.c_val * vf for _ in range(layers)],
        P=[cs.c_pos * bs.delta for _ in range(layers)],
        W_O=cs.c_out * bs.bbar,
    )


def invariant_summary(bs):
    """Numbers that should be (near) zero or bounded for any corpus."""
    sym = bs.sigma - bs.sigma.T
    return {
        "bbar_row_sum_max_abs": float(np.abs(bs.bbar.sum(axis=1)).max()),
        "phibar_col_sum_max_abs": float(np.abs(bs.phibar.sum(axis=0)).max()),
        "sigma_asym_max_abs": float(np.abs(sym).max()),
        "sigma_min_eig": float(np.linalg.eigvalsh(0.5 * (bs.sigma + bs.sigma.T))[0]),
        "qbar_max_abs": float(np.abs(bs.qbar).max()),
        "delta_max_abs": float(np.abs(bs.delta).max()),
        "phibar_opnorm": float(np.linalg.norm(bs.phibar, 2)),
    }


def check_invariants(bs, tol=1e-10):
    """List of violated invariants (empty when all hold)."""
    s = invariant_summary(bs)
    bad = []
    if s["bbar_row_sum_max_abs"] > tol:
        bad.append("bbar rows do not sum to 0")
    if s["phibar_col_sum_max_abs"] > tol:
        bad.append("phibar columns do not sum to 0")
    if s["sigma_asym_max_abs"] > tol or s["sigma_min_eig"] < -tol:
        bad.append("sigma is not symmetric PSD")
    if s["qbar_max_abs"] > 1 or s["delta_max_abs"] > 1:
        bad.append("max |qbar| or |delta| exceeds 1")
    if s["phibar_opnorm"] > 2 + tol:
        bad.append("operator norm of phibar exceeds 2")
    return bad
