"""Attention-only transformer with one-hot embeddings and relative position biases.

Layer recurrence::

    h[l] = h[l-1] + softmax(mask(h[l-1] W[l] h[l-1]^T + DM(P[l]))) h[l-1] V[l]
    logits = h[L] W_O

``h[0]`` is the one-hot encoding of the input ids.  It is never materialised
on the hot path: products with it are row gathers.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .linalg import dm_expand, onehot, softmax_rows


@dataclass
class ModelParams:
    W: list
    V: list
    P: list
    W_O: np.ndarray

    def __post_init__(self):
        if not (len(self.W) == len(self.V) == len(self.P)):
            raise DimensionError("W, V and P must have one entry per layer")
        nv = self.W_O.shape[0]
        for arr in list(self.W) + list(self.V) + [self.W_O]:
            if arr.shape != (nv, nv):
                raise DimensionError(f"expected {nv}x{nv} matrix, got {arr.shape}")
        if self.P and any(p.shape != self.P[0].shape or p.ndim != 1 for p in self.P):
            raise DimensionError("position biases must be vectors of equal length T")

    @property
    def layers(self):
        return len(self.W)

    @property
    def vocab(self):
        return self.W_O.shape[0]

    @property
    def t(self):
        return self.P[0].shape[0] if self.P else None

    @classmethod
    def zeros(cls, layers, t, vocab):
        return cls(
            W=[np.zeros((vocab, vocab)) for _ in range(layers)],
            V=[np.zeros((vocab, vocab)) for _ in range(layers)],
            P=[np.zeros(t) for _ in range(layers)],
            W_O=np.zeros((vocab, vocab)),
        )

    def arrays(self):
        """(class, layer, array) triples in serialisation order."""
        out = [("W", l, w) for l, w in enumerate(self.W)]
        out += [("V", l, v) for l, v in enumerate(self.V)]
        out += [("P", l, p) for l, p in enumerate(self.P)]
        out.append(("W_O", None, self.W_O))
        return out

    def copy(self):
        return ModelParams([w.copy() for w in self.W], [v.copy() for v in self.V],
                           [p.copy() for p in self.P], self.W_O.copy())

    def axpy(self, alpha, other):
        """Return ``self + alpha * other`` as new parameters."""
        return ModelParams(
            [a + alpha * b for a, b in zip(self.W, other.W)],
            [a + alpha * b for a, b in zip(self.V, other.V)],
            [a + alpha * b for a, b in zip(self.P, other.P)],
            self.W_O + alpha * other.W_O,
        )

    def all_finite(self):
        return all(np.isfinite(a).all() for _, _, a in self.arrays())

    def equal(self, other):
        pairs = zip(self.arrays(), other.arrays())
        return self.layers == other.layers and all(
            a.shape == b.shape and np.array_equal(a, b) for (_, _, a), (_, _, b) in pairs)


@dataclass(frozen=True)
class InitConfig:
    scheme: str = "zero"
    v: float = 0.01
    xi: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("zero", "gaussian"):
            raise ValueError(f"unknown init scheme {self.scheme!r}")
        if self.scheme == "gaussian" and not self.v > 0:
            raise ValueError("gaussian init needs v > 0")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")

    def std(self, vocab):
        return self.v / vocab ** (1.0 + self.xi)


def init(cfg, layers, t, vocab):
    if cfg.scheme == "zero":
        return ModelParams.zeros(layers, t, vocab)
    rng = np.random.default_rng(cfg.seed)
    sd = cfg.std(vocab)
    W, V, P = [], [], []
    for _ in range(layers):
        W.append(rng.normal(0.0, sd, (vocab, vocab)))
        V.append(rng.normal(0.0, sd, (vocab, vocab)))
        P.append(rng.normal(0.0, sd, t))
    return ModelParams(W, V, P, rng.normal(0.0, sd, (vocab, vocab)))


@dataclass
class ForwardTrace:
    h: list
    A: list
    logits: np.ndarray
    probs: np.ndarray


@dataclass
class BatchTrace:
    """Forward pass over an (n, T) block of ids; ``h[0]`` is left implicit."""

    x: np.ndarray
    h: list = field(default_factory=list)
    A: list = field(default_factory=list)
    logits: np.ndarray = None
    probs: np.ndarray = None


def _check_ids(params, x):
    x = np.asarray(x)
    if x.ndim != 2:
        raise DimensionError(f"ids must be (n, T), got {x.shape}")
    if params.t is not None and x.shape[1] != params.t:
        raise DimensionError(f"sequence length {x.shape[1]} != model T={params.t}")
    if x.size and (x.min() < 0 or x.max() >= params.vocab):
        raise DimensionError("token id out of range")
    return x


def forward_batch(params, x):
    x = _check_ids(params, x)
    tr = BatchTrace(x=x, h=[None])
    h = None
    for l in range(params.layers):
        W, V = params.W[l], params.V[l]
        if h is None:
            scores = W[x[:, :, None], x[:, None, :]]
            hv = V[x]
        else:
            scores = (h @ W) @ h.transpose(0, 2, 1)
            hv = h @ V
        scores = scores + dm_expand(params.P[l])
        A = softmax_rows(scores, causal=True)
        h = (onehot(x, params.vocab) if h is None else h) + A @ hv
        tr.A.append(A)
        tr.h.append(h)
    tr.logits = params.W_O[x] if h is None else h @ params.W_O
    tr.probs = softmax_rows(tr.logits)
    return tr


def forward(params, x_ids):
    """Full trace for a single length-T id row."""
    x = np.asarray(x_ids)[None, :]
    tr = forward_batch(params, x)
    h = [onehot(x[0], params.vocab)] + [hl[0] for hl in tr.h[1:]]
    return ForwardTrace(h=h, A=[a[0] for a in tr.A], logits=tr.logits[0], probs=tr.probs[0])
