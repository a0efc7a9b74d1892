"""Checks of trained weights against their closed-form leading terms.

``compare`` reports cosine and Frobenius deviation per weight, plus the
theoretical deviation bound when the run sits inside the regime where the
bound is guaranteed.  ``intervene`` removes the leading-term component from
weights and measures the loss damage.  ``cooperate_trace`` splits the
leading-term model's logits into attention and residual paths.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import grad
from .errors import DimensionError, UndefinedSimilarityError
from .linalg import cosine_flat, dm_expand, remove_projection, softmax_rows
from .model import forward_batch
from .stats import coefficients, leading_terms


def regime_flags(eta, t, layers, vocab, s):
    cap = min(5.0 / (8.0 * math.sqrt(t)), 1.0 / (12.0 * max(layers, 1))) / eta
    return {
        "eta_ge_1_over_T": eta >= 1.0 / t,
        "L_le_sqrtT_over_4": layers <= math.sqrt(t) / 4.0,
        "s_in_range": s <= cap,
        "T_ge_60": t >= 60,
        "V_ge_500": vocab >= 500,
    }


def step_cap(eta, t, layers):
    """Largest step count covered by the bounds, ``floor(eta^-1 min(5/(8 sqrt T), 1/(12 L)))``."""
    return math.floor(min(5.0 / (8.0 * math.sqrt(t)), 1.0 / (12.0 * max(layers, 1))) / eta
                      + 1e-12)


def deviation_bounds(s, eta, t):
    return {"W_O": 3 * s ** 2 * eta ** 2, "V": 12 * s ** 3 * eta ** 3,
            "W": 13 * s ** 5 * eta ** 5 * t, "P": 13 * s ** 5 * eta ** 5 * t}


@dataclass
class WeightRecord:
    weight: str
    layer: int
    cosine: float  # None when undefined (zero weight or zero leading term)
    deviation: float
    bound: float = None
    satisfied: bool = None


@dataclass
class VerificationReport:
    step: int
    eta: float
    layers: int
    t: int
    vocab: int
    regime: dict
    records: list = field(default_factory=list)

    @property
    def in_regime(self):
        return all(self.regime.values())

    def record(self, weight, layer=None):
        for r in self.records:
            if r.weight == weight and r.layer == layer:
                return r
        raise KeyError((weight, layer))

    def all_bounds_hold(self):
        """True/False inside the regime, None outside it."""
        if not self.in_regime:
            return None
        return all(r.satisfied for r in self.records)

    def to_dict(self):
        d = asdict(self)
        d["in_regime"] = self.in_regime
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"step {self.step}  eta {self.eta:g}  L {self.layers}  T {self.t}  "
                 f"|V| {self.vocab}  in_regime {self.in_regime}",
                 f"{'weight':<8}{'layer':>6}{'cosine':>14}{'deviation':>14}{'bound':>14}{'ok':>6}"]
        for r in self.records:
            cos = "undefined" if r.cosine is None else f"{r.cosine:.6f}"
            bound = "-" if r.bound is None else f"{r.bound:.4e}"
            ok = "-" if r.satisfied is None else ("yes" if r.satisfied else "NO")
            layer = "-" if r.layer is None else str(r.layer + 1)
            lines.append(f"{r.weight:<8}{layer:>6}{cos:>14}{r.deviation:>14.4e}{bound:>14}{ok:>6}")
        return "\n".join(lines) + "\n"

    def to_csv_rows(self):
        return [{"step": self.step, "weight": r.weight,
                 "layer": "" if r.layer is None else r.layer + 1,
                 "cosine": "" if r.cosine is None else repr(r.cosine),
                 "deviation": repr(r.deviation),
                 "bound": "" if r.bound is None else repr(r.bound),
                 "satisfied": "" if r.satisfied is None else int(r.satisfied)}
                for r in self.records]


def reports_to_csv(reports):
    buf = io.StringIO()
    cols = ["step", "weight", "layer", "cosine", "deviation", "bound", "satisfied"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerows(rep.to_csv_rows())
    return buf.getvalue()


def _check_shapes(params, stats):
    if params.vocab != stats.vocab or params.t not in (None, stats.t):
        raise DimensionError(
            f"checkpoint (|V|={params.vocab}, T={params.t}) does not match "
            f"stats (|V|={stats.vocab}, T={stats.t})")


def _cos(a, b):
    try:
        return cosine_flat(a, b)
    except UndefinedSimilarityError:
        return None


def compare(ckpt, stats):
    """Cosine, deviation and (inside the regime) bound check for every weight."""
    params, s, eta = ckpt.params, ckpt.step, ckpt.eta
    _check_shapes(params, stats)
    lead = leading_terms(stats, coefficients(s, eta), layers=params.layers)
    flags = regime_flags(eta, params.t, params.layers, params.vocab, s)
    in_regime = all(flags.values())
    bounds = deviation_bounds(s, eta, params.t)
    rep = VerificationReport(step=s, eta=eta, layers=params.layers, t=params.t,
                             vocab=params.vocab, regime=flags)

    def add(name, layer, w, lt):
        dev = float(np.linalg.norm(w - lt))
        rec = WeightRecord(name, layer, _cos(w, lt), dev)
        if in_regime:
            rec.bound = bounds[name]
            rec.satisfied = bool(dev <= rec.bound)
        rep.records.append(rec)

    add("W_O", None, params.W_O, lead.W_O)
    for cls in ("V", "W", "P"):
        for l, (w, lt) in enumerate(zip(getattr(params, cls), getattr(lead, cls))):
            add(cls, l, w, lt)
    return rep


@dataclass
class GaussianInitReport:
    vocab: int
    v: float
    op_bound: float
    fro_bound: float
    rows: list = field(default_factory=list)  # (name, layer, opnorm, fro)

    @property
    def ok(self):
        return all(op <= self.op_bound and fr <= self.fro_bound for _, _, op, fr in self.rows)

    def margins(self):
        """Smallest slack of each bound over all weights (positive means satisfied)."""
        if not self.rows:
            return {"op": self.op_bound, "fro": self.fro_bound}
        return {"op": self.op_bound - max(r[2] for r in self.rows),
                "fro": self.fro_bound - max(r[3] for r in self.rows)}


def check_gaussian_init(params, cfg):
    """Operator norm <= 3v/sqrt|V| and Frobenius norm <= 2v for every weight.

    Position vectors use the Euclidean norm for both.
    """
    nv = params.vocab
    rep = GaussianInitReport(vocab=nv, v=cfg.v, op_bound=3 * cfg.v / math.sqrt(nv),
                             fro_bound=2 * cfg.v)
    for name, layer, arr in params.arrays():
        op = float(np.linalg.norm(arr, 2)) if arr.ndim == 2 else float(np.linalg.norm(arr))
        rep.rows.append((name, layer, op, float(np.linalg.norm(arr))))
    return rep


@dataclass
class InterventionRow:
    target: str
    layer: int  # None for W_O or an all-layer row
    baseline: float
    loss: float = None
    delta: float = None
    skipped: str = None
    residual_inner: float = None  # <weight after removal, feature>, should be ~0


@dataclass
class InterventionReport:
    baseline: float
    step: int
    rows: list = field(default_factory=list)

    def row(self, target, layer=None):
        for r in self.rows:
            if r.target == target and r.layer == layer:
                return r
        raise KeyError((target, layer))

    def ordering_holds(self):
        """Output removal hurts more than any value removal, which beats any attention removal."""
        wo = self.row("W_O").delta
        v = [r.delta for r in self.rows if r.target == "V" and r.layer is not None and r.delta is not None]
        w = [r.delta for r in self.rows if r.target == "W" and r.layer is not None and r.delta is not None]
        if wo is None or not v or not w:
            return False
        return wo > max(v) and min(v) > max(w)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"baseline loss {self.baseline:.6f} at step {self.step}",
                 f"{'target':<8}{'layer':>7}{'loss':>14}{'delta':>14}  note"]
        for r in self.rows:
            layer = "all" if r.layer is None and r.target != "W_O" else (
                "-" if r.layer is None else str(r.layer + 1))
            if r.skipped:
                lines.append(f"{r.target:<8}{layer:>7}{'-':>14}{'-':>14}  skipped: {r.skipped}")
            else:
                lines.append(f"{r.target:<8}{layer:>7}{r.loss:>14.6f}{r.delta:>14.6f}")
        return "\n".join(lines) + "\n"


def intervene(ckpt, stats, batch, workers=None):
    """Loss change from removing the leading-term direction from each weight.

    The projection uses the feature direction only (``bbar`` for W_O,
    ``phibar.T @ bbar.T`` for V, ``qbar`` for W), so the step coefficient
    plays no role.  Each row starts from the untouched checkpoint.
    """
    params = ckpt.params
    _check_shapes(params, stats)
    base = grad.loss(params, batch, workers=workers).mean_nll
    rep = InterventionReport(baseline=base, step=ckpt.step)
    feats = {"W_O": stats.bbar, "V": stats.value_feature(), "W": stats.qbar}

    def run(target, layers):
        row = InterventionRow(target=target, layer=layers[0] if len(layers) == 1 and
                              target != "W_O" else None, baseline=base)
        feat = feats[target]
        if not np.any(feat):
            row.skipped = "leading feature is zero"
            rep.rows.append(row)
            return
        mod = params.copy()
        inner = 0.0
        if target == "W_O":
            if not np.any(mod.W_O):
                row.skipped = "weight is zero"
                rep.rows.append(row)
                return
            mod.W_O = remove_projection(mod.W_O, feat)
            inner = abs(float(np.vdot(mod.W_O, feat)))
        else:
            mats = getattr(mod, target)
            if not any(np.any(mats[l]) for l in layers):
                row.skipped = "weight is zero"
                rep.rows.append(row)
                return
            for l in layers:
                mats[l] = remove_projection(mats[l], feat)
                inner = max(inner, abs(float(np.vdot(mats[l], feat))))
        row.loss = grad.loss(mod, batch, workers=workers).mean_nll
        row.delta = row.loss - base
        row.residual_inner = inner
        rep.rows.append(row)

    run("W_O", [None])
    for target in ("V", "W"):
        for l in range(params.layers):
            run(target, [l])
        if params.layers > 1:
            run(target, list(range(params.layers)))
    return rep


@dataclass
class CooperateTrace:
    attention: np.ndarray
    residual: np.ndarray
    attention_weights: np.ndarray
    scales: dict
    note: str

    @property
    def total(self):
        return self.attention + self.residual


def cooperate_trace(stats, x_ids, schedule=None):
    """Split leading-term logits into an attention path and a residual path.

    Without ``schedule`` the raw features are used:
    ``softmax(mask(X qbar X^T + DM(delta))) X phibar^T sigma`` and ``X bbar``.
    With a :class:`~atdl.stats.CoeffSchedule` the scores use ``c_attn qbar``
    and ``c_pos delta``, the attention path is scaled by ``c_val c_out`` and the
    residual path by ``c_out``, so the two sum to the logits of a one-layer
    model built from the leading terms.
    """
    x = np.asarray(x_ids)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError("x_ids must be a non-empty id row")
    t = x.size
    if t > stats.delta.shape[0]:
        raise DimensionError(f"row of length {t} exceeds stats T={stats.delta.shape[0]}")
    qa, pa, vo, ro = 1.0, 1.0, 1.0, 1.0
    note = "raw features; scalar coefficients dropped"
    if schedule is not None:
        qa, pa = schedule.c_attn, schedule.c_pos
        vo, ro = schedule.c_val * schedule.c_out, schedule.c_out
        note = "scaled by the step coefficients; sum equals the leading-term model logits"
    scores = qa * stats.qbar[x[:, None], x[None, :]] + dm_expand(pa * stats.delta[:t])
    att = softmax_rows(scores, causal=True)
    attn_path = vo * (att @ (stats.phibar.T @ stats.sigma)[x])
    resid = ro * stats.bbar[x]
    return CooperateTrace(attention=attn_path, residual=resid, attention_weights=att,
                          scales={"scores_qbar": qa, "scores_delta": pa, "attention": vo,
                                  "residual": ro}, note=note)


def leading_model_logits(stats, schedule, x_ids):
    """Forward logits of the one-layer model whose weights equal the leading terms."""
    params = leading_terms(stats, schedule, layers=1)
    x = np.asarray(x_ids)[None, :]
    if x.shape[1] != params.t:
        params.P = [p[:x.shape[1]] for p in params.P]
    return forward_batch(params, x).logits[0]
