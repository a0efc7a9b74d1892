import numpy as np
import pytest

from atdl import trainer, verify
from atdl.errors import DimensionError
from atdl.model import InitConfig, ModelParams, init
from atdl.stats import coefficients, compute_stats, leading_terms


@pytest.fixture(scope="module")
def story(small_story):
    vocab, batch = small_story
    return vocab, batch, compute_stats(batch)


def test_compare_at_step_one_is_exact(story):
    _, batch, bs = story
    p = trainer.step(ModelParams.zeros(2, batch.t, batch.vocab_size), batch, 0.05)
    rep = verify.compare(trainer.Checkpoint(1, p, 0.05), bs)
    wo = rep.record("W_O")
    assert wo.cosine == pytest.approx(1.0, abs=1e-14)
    assert wo.deviation <= 1e-15
    assert rep.record("V", 0).cosine is None
    assert not rep.in_regime and wo.bound is None and rep.all_bounds_hold() is None


def test_compare_at_step_zero(story):
    _, batch, bs = story
    rep = verify.compare(trainer.Checkpoint(0, ModelParams.zeros(1, batch.t, batch.vocab_size),
                                            0.05), bs)
    assert all(r.deviation == 0.0 and r.cosine is None for r in rep.records)


def test_compare_is_side_effect_free(story):
    _, batch, bs = story
    res = trainer.train(trainer.TrainConfig(eta=0.1, steps=4, layers=2), batch)
    a = verify.compare(res.final, bs).to_json()
    b = verify.compare(res.final, bs).to_json()
    assert a == b
    text = verify.compare(res.final, bs).to_text()
    assert "W_O" in text and "undefined" not in text


def test_compare_shape_mismatch(story):
    _, batch, bs = story
    ck = trainer.Checkpoint(1, ModelParams.zeros(1, batch.t + 1, batch.vocab_size), 0.1)
    with pytest.raises(DimensionError):
        verify.compare(ck, bs)


def test_regime_flags():
    f = verify.regime_flags(eta=1 / 64, t=64, layers=2, vocab=500, s=2)
    assert all(f.values())
    assert not verify.regime_flags(eta=1 / 64, t=64, layers=2, vocab=500, s=3)["s_in_range"]
    assert not verify.regime_flags(eta=1 / 100, t=64, layers=2, vocab=500, s=1)["eta_ge_1_over_T"]
    assert verify.step_cap(1 / 64, 64, 2) == 2
    assert verify.step_cap(1 / 64, 64, 1) == 5


def test_gaussian_bounds_scale_with_v():
    p = init(InitConfig("gaussian", v=0.01, seed=0), 1, 64, 500)
    rep = verify.check_gaussian_init(p, InitConfig("gaussian", v=0.01))
    assert rep.ok and rep.margins()["op"] > 0
    rep2 = verify.check_gaussian_init(p, InitConfig("gaussian", v=0.02))
    assert rep2.op_bound == pytest.approx(2 * rep.op_bound)
    assert rep2.fro_bound == pytest.approx(2 * rep.fro_bound)
    assert verify.check_gaussian_init(ModelParams.zeros(1, 4, 500), InitConfig("gaussian")).ok


def test_gaussian_opnorm_agrees_with_power_iteration():
    p = init(InitConfig("gaussian", v=0.01, seed=2), 1, 64, 500)
    rep = verify.check_gaussian_init(p, InitConfig("gaussian", v=0.01))
    rng = np.random.default_rng(0)
    v = rng.normal(size=500)
    m = p.W[0]
    for _ in range(500):
        v = m.T @ (m @ v)
        v /= np.linalg.norm(v)
    power = np.linalg.norm(m @ v)
    assert rep.rows[0][2] == pytest.approx(power, rel=1e-3)


def test_intervention_rows(story):
    _, batch, bs = story
    res = trainer.train(trainer.TrainConfig(eta=0.5, steps=6, layers=2), batch)
    rep = verify.intervene(res.final, bs, batch)
    assert {r.baseline for r in rep.rows} == {rep.baseline}
    names = [(r.target, r.layer) for r in rep.rows]
    assert names == [("W_O", None), ("V", 0), ("V", 1), ("V", None), ("W", 0), ("W", 1),
                     ("W", None)]
    for r in rep.rows:
        assert r.skipped is None and r.residual_inner < 1e-12
    assert rep.row("W_O").delta > 0
    assert "baseline" in rep.to_text()


def test_intervention_skips_zero_weights(story):
    _, batch, bs = story
    p = trainer.step(ModelParams.zeros(1, batch.t, batch.vocab_size), batch, 0.1)
    rep = verify.intervene(trainer.Checkpoint(1, p, 0.1), bs, batch)
    assert rep.row("V", 0).skipped == "weight is zero"
    assert rep.row("W", 0).skipped == "weight is zero"
    # W_O equals its leading term, so removal zeroes it and predictions go uniform
    assert rep.row("W_O").loss == pytest.approx(np.log(batch.vocab_size), abs=1e-12)


def test_intervention_with_orthogonal_weight_changes_nothing(story, rng):
    _, batch, bs = story
    nv = batch.vocab_size
    w = rng.normal(size=(nv, nv))
    w -= np.vdot(w, bs.bbar) / np.vdot(bs.bbar, bs.bbar) * bs.bbar
    p = ModelParams.zeros(0, batch.t, nv)
    p.W_O = w
    rep = verify.intervene(trainer.Checkpoint(1, p, 0.1), bs, batch)
    assert abs(rep.row("W_O").delta) <= 1e-12


def test_cooperate_trace_sums_to_leading_model(story, rng):
    _, batch, bs = story
    x = batch.inputs[0]
    cs = coefficients(8, 0.3)
    tr = verify.cooperate_trace(bs, x, cs)
    ref = verify.leading_model_logits(bs, cs, x)
    assert np.abs(tr.total - ref).max() <= 1e-12


def test_cooperate_trace_raw_paths(story):
    _, batch, bs = story
    x = batch.inputs[0][:5]
    tr = verify.cooperate_trace(bs, x)
    t = len(x)
    a = np.zeros((t, t))
    for r in range(t):
        s = [bs.qbar[x[r], x[c]] + bs.delta[r - c] for c in range(r + 1)]
        e = np.exp(np.array(s) - max(s))
        a[r, :r + 1] = e / e.sum()
    onehot = np.eye(bs.vocab)[x]
    assert np.abs(tr.attention - a @ onehot @ bs.phibar.T @ bs.sigma).max() <= 1e-12
    assert np.abs(tr.residual - onehot @ bs.bbar).max() <= 1e-15
    single = verify.cooperate_trace(bs, x[:1])
    assert np.array_equal(single.residual[0], bs.bbar[x[0]])


def test_cooperate_trace_zero_coefficients_use_uniform_attention(story):
    _, batch, bs = story
    tr = verify.cooperate_trace(bs, batch.inputs[0], coefficients(2, 0.1))
    t = batch.t
    assert np.allclose(tr.attention_weights, np.tril(np.ones((t, t))) / np.arange(1, t + 1)[:, None],
                       atol=1e-15)


def test_reports_csv(story):
    _, batch, bs = story
    rep = verify.compare(trainer.Checkpoint(0, ModelParams.zeros(1, batch.t, batch.vocab_size),
                                            0.1), bs)
    lines = verify.reports_to_csv([rep]).splitlines()
    assert lines[0] == "step,weight,layer,cosine,deviation,bound,satisfied"
    assert len(lines) == 1 + 4


def test_single_layer_regime_run_meets_all_bounds():
    from conftest import story_batch

    _, batch = story_batch(cap=500, seq_len=64, n=96, richness=0.3)
    bs = compute_stats(batch)
    eta = 1.0 / 64
    cap = verify.step_cap(eta, 64, 1)
    assert cap == 5
    res = trainer.train(trainer.TrainConfig(eta=eta, steps=cap, layers=1), batch,
                        keep_checkpoints=True)
    for s in range(3, cap + 1):
        rep = verify.compare(res.checkpoints[s], bs)
        assert rep.in_regime
        assert rep.all_bounds_hold(), rep.to_text()
        assert rep.record("W", 0).cosine > 0.99
