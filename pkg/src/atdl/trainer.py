"""Plain gradient descent with checkpointing and leading-term metrics."""

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import binfmt, grad
from .errors import DimensionError, FormatError, NonFiniteError, UndefinedSimilarityError
from .linalg import cosine_flat
from .model import InitConfig, ModelParams, init
from .stats import coefficients, leading_terms

CKPT_MAGIC = b"ATDL-CKPT1"
CKPT_VERSION = 1
_CKPT_HEADER = "<IIIIQdd"  # version, L, T, |V|, step, eta, loss

LOG_COLUMNS = ["step", "epoch", "loss", "cos_WO", "cos_V_mean", "cos_W_mean", "cos_P_mean",
               "dev_WO", "dev_V", "dev_W", "dev_P"]


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.005
    steps: int = None
    epochs: int = None
    batch: int = None  # None means full batch
    init: InitConfig = field(default_factory=InitConfig)
    layers: int = 1
    checkpoint_every: int = None  # None: dense early, then doubling
    log_every: int = None
    seed: int = 0
    workers: int = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if (self.steps is None) == (self.epochs is None):
            raise ValueError("give exactly one of steps or epochs")
        if (self.steps if self.steps is not None else self.epochs) < 1:
            raise ValueError("steps/epochs must be >= 1")
        if self.batch is not None and self.batch < 1:
            raise ValueError("minibatch size must be >= 1")

    def steps_per_epoch(self, n):
        if self.batch is None:
            return 1
        if self.batch > n:
            raise ValueError(f"minibatch size {self.batch} exceeds N={n}")
        return n // self.batch

    def total_steps(self, n):
        if self.steps is not None:
            return self.steps
        return self.epochs * self.steps_per_epoch(n)


@dataclass
class Checkpoint:
    step: int
    params: ModelParams
    eta: float
    loss: float = float("nan")
    config_hash: bytes = bytes(binfmt.HASH_BYTES)

    def to_bytes(self):
        p = self.params
        header = (CKPT_VERSION, p.layers, p.t or 0, p.vocab, self.step, self.eta, self.loss)
        payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                           for _, _, a in p.arrays())
        return binfmt.pack(CKPT_MAGIC, _CKPT_HEADER, header, payload, self.config_hash)

    @classmethod
    def from_bytes(cls, blob):
        def size(h):
            _, layers, t, v, *_ = h
            return 8 * (layers * (2 * v * v + t) + v * v)

        header, chash, payload = binfmt.unpack(blob, CKPT_MAGIC, _CKPT_HEADER, size)
        version, layers, t, v, step, eta, loss_val = header
        if version != CKPT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
        pos = 0

        def take(shape):
            nonlocal pos
            count = int(np.prod(shape))
            out = flat[pos:pos + count].reshape(shape).copy()
            pos += count
            return out

        W = [take((v, v)) for _ in range(layers)]
        V = [take((v, v)) for _ in range(layers)]
        P = [take((t,)) for _ in range(layers)]
        params = ModelParams(W, V, P, take((v, v)))
        return cls(step=step, params=params, eta=eta, loss=loss_val, config_hash=chash)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _check_finite(g):
    bad = [f"{cls}[{layer}]" if layer is not None else cls
           for cls, layer, a in g.as_params().arrays() if not np.isfinite(a).all()]
    if bad:
        raise NonFiniteError("non-finite gradient in " + ", ".join(bad))


def step(params, batch, eta, workers=None):
    """One update ``params - eta * grad``; the input parameters are not modified."""
    g = grad.backward(params, batch, workers=workers)
    _check_finite(g)
    new = params.axpy(-eta, g.as_params())
    if not new.all_finite():
        raise NonFiniteError("parameters became non-finite after the update")
    return new


def default_cadence(total):
    """Steps 0..10, then 20, 40, 80, ..., always including the last step."""
    marks = set(range(min(total, 10) + 1))
    s = 20
    while s <= total:
        marks.add(s)
        s *= 2
    marks.add(total)
    return sorted(marks)


def _cadence(every, total):
    if every is None:
        return default_cadence(total)
    return sorted(set(range(0, total + 1, every)) | {total})


def _safe_cos(a, b):
    try:
        return cosine_flat(a, b)
    except UndefinedSimilarityError:
        return None


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def leading_metrics(params, stats, s, eta):
    """Cosines and Frobenius deviations of every weight against its step-s leading term."""
    if stats.vocab != params.vocab or params.t not in (None, stats.t):
        raise DimensionError("stats and parameters disagree on |V| or T")
    lead = leading_terms(stats, coefficients(s, eta), layers=params.layers)
    out = {"cos_WO": _safe_cos(params.W_O, lead.W_O),
           "dev_WO": float(np.linalg.norm(params.W_O - lead.W_O))}
    for name, mine, theirs in (("V", params.V, lead.V), ("W", params.W, lead.W),
                               ("P", params.P, lead.P)):
        out[f"cos_{name}"] = [_safe_cos(a, b) for a, b in zip(mine, theirs)]
        out[f"cos_{name}_mean"] = _mean(out[f"cos_{name}"])
        devs = [float(np.linalg.norm(a - b)) for a, b in zip(mine, theirs)]
        out[f"dev_{name}"] = max(devs) if devs else 0.0
    return out


@dataclass
class TrainResult:
    log: list
    final: Checkpoint
    checkpoints: dict = field(default_factory=dict)

    def log_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in self.log:
            w.writerow(["" if row.get(c) is None else _fmt(row.get(c)) for c in LOG_COLUMNS])
        return buf.getvalue()

    def min_cosines(self):
        """Minimum of each per-class cosine over logged steps, ignoring undefined entries."""
        out = {}
        for key in ("cos_WO", "cos_V", "cos_W", "cos_P"):
            vals = []
            for row in self.log:
                v = row.get(key)
                vals += [c for c in (v if isinstance(v, list) else [v]) if c is not None]
            out[key] = min(vals) if vals else None
        return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def train(cfg, batch, stats=None, out_dir=None, params=None, keep_checkpoints=False,
          callback=None, config_hash=None):
    """Run gradient descent and return the log and final checkpoint.

    Full-batch mode uses the whole batch for every step.  Minibatch mode
    shuffles sample order once per epoch with a generator seeded from
    ``cfg.seed`` and drops the trailing partial batch.  ``s`` always counts
    optimizer steps.
    """
    n = batch.n
    per_epoch = cfg.steps_per_epoch(n)
    total = cfg.total_steps(n)
    if params is None:
        params = init(cfg.init, cfg.layers, batch.t, batch.vocab_size)
    chash = config_hash or bytes(binfmt.HASH_BYTES)
    ckpt_steps = set(_cadence(cfg.checkpoint_every, total))
    log_steps = set(_cadence(cfg.log_every, total)) if cfg.log_every else ckpt_steps
    rng = np.random.default_rng(cfg.seed)
    order = np.arange(n)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    log, kept = [], {}
    final_loss = math.nan
    for s in range(total + 1):
        want_log = s in log_steps
        want_ckpt = s in ckpt_steps
        g = None
        if s < total:
            if cfg.batch is None:
                sub = batch
            else:
                k = s % per_epoch
                if k == 0:
                    order = rng.permutation(n)
                sub = batch.subset(order[k * cfg.batch:(k + 1) * cfg.batch])
            g = grad.backward(params, sub, workers=cfg.workers)
            _check_finite(g)
        if want_log or want_ckpt or s == total:
            if g is not None and cfg.batch is None:
                cur_loss = g.loss
            else:
                cur_loss = grad.loss(params, batch, workers=cfg.workers).mean_nll
            final_loss = cur_loss
        if want_log:
            row = {"step": s, "epoch": s / per_epoch, "loss": cur_loss}
            if stats is not None:
                row.update(leading_metrics(params, stats, s, cfg.eta))
            log.append(row)
            if callback:
                callback(row)
        if want_ckpt:
            ck = Checkpoint(step=s, params=params, eta=cfg.eta, loss=cur_loss, config_hash=chash)
            if keep_checkpoints:
                kept[s] = ck
            if out_dir:
                ck.save(os.path.join(out_dir, f"ckpt_{s:06d}.bin"))
        if g is not None:
            params = params.axpy(-cfg.eta, g.as_params())
            if not params.all_finite():
                raise NonFiniteError(f"parameters became non-finite at step {s + 1}")

    final = Checkpoint(step=total, params=params, eta=cfg.eta, loss=final_loss, config_hash=chash)
    result = TrainResult(log=log, final=final, checkpoints=kept)
    if out_dir:
        with open(os.path.join(out_dir, "log.csv"), "w", newline="\n") as fh:
            fh.write(result.log_csv())
    return result
