import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atdl import oracles
from atdl.corpus import SequenceBatch
from atdl.errors import FormatError
from atdl.linalg import softmax_jacobian
from atdl.stats import (BasisStats, check_invariants, coefficients, compute_stats,
                        invariant_summary, leading_terms, per_sample_q)

KEYS = ["bbar", "phibar", "sigma", "gbar", "qbar", "delta"]


@st.composite
def tiny_ids(draw):
    n = draw(st.integers(1, 8))
    t = draw(st.integers(2, 6))
    nv = draw(st.integers(2, 5))
    ids = draw(st.lists(st.integers(0, nv - 1), min_size=n * (t + 1), max_size=n * (t + 1)))
    return np.array(ids).reshape(n, t + 1), nv


@settings(max_examples=60, deadline=None)
@given(tiny_ids())
def test_statistics_match_loop_oracles(case):
    ids, nv = case
    got = compute_stats(SequenceBatch(ids, nv))
    ref = oracles.all_stats(ids, nv)
    for key in KEYS:
        assert np.abs(getattr(got, key) - ref[key]).max() <= 1e-12, key
    assert check_invariants(got) == []


def test_bigram_by_hand():
    # one sample: 0 -> 1 -> 0, |V| = 2
    got = compute_stats(SequenceBatch(np.array([[0, 1, 0]]), 2))
    assert np.allclose(got.bbar, [[-0.25, 0.25], [0.25, -0.25]], atol=0, rtol=1e-15)


def test_context_by_hand():
    # targets 1 (prefix {0}) and 0 (prefix {0, 1}, weight 1/2 each)
    got = compute_stats(SequenceBatch(np.array([[0, 1, 0]]), 2))
    raw = np.array([[0.25, 0.25], [0.5, 0.0]])  # raw[target, prefix token]
    expected = raw - raw.mean(axis=0)
    assert np.allclose(got.phibar, expected, atol=1e-15)


def test_per_sample_q_equals_explicit_jacobian_product(rng):
    nv, t = 6, 7
    gbar = rng.normal(size=(nv, nv))
    x = rng.integers(0, nv, (1, t))
    y = rng.integers(0, nv, (1, t))
    q = per_sample_q(x, y, gbar)[0]
    m = (np.eye(nv)[y[0]] - 1.0 / nv) @ gbar @ np.eye(nv)[x[0]].T
    for r in range(t):
        a = np.where(np.arange(t) <= r, 1.0 / (r + 1), 0.0)
        row = softmax_jacobian(a) @ np.where(np.arange(t) <= r, m[r], 0.0)
        assert np.allclose(q[r], row, atol=1e-14)


def test_invariants_on_story_corpus(small_story):
    _, batch = small_story
    bs = compute_stats(batch)
    s = invariant_summary(bs)
    assert s["bbar_row_sum_max_abs"] < 1e-10
    assert s["phibar_col_sum_max_abs"] < 1e-10
    assert s["sigma_min_eig"] > -1e-12
    assert s["qbar_max_abs"] <= 1 and s["delta_max_abs"] <= 1
    assert s["phibar_opnorm"] <= 2
    assert check_invariants(bs) == []


def test_coefficients():
    cs = coefficients(5, 0.1)
    assert cs.c_out == pytest.approx(0.5)
    assert cs.c_val == pytest.approx(10 * 0.01)
    assert cs.c_attn == pytest.approx((3 * 5 + 2 * 10) * 1e-4)
    assert cs.c_pos == cs.c_attn
    assert coefficients(3, 0.1).c_attn == pytest.approx(2e-4)
    assert coefficients(2, 0.1).c_attn == 0.0
    with pytest.raises(ValueError):
        coefficients(1, 0.0)


def test_leading_terms_layout(small_story):
    _, batch = small_story
    bs = compute_stats(batch)
    p = leading_terms(bs, coefficients(4, 0.01), layers=2)
    assert p.layers == 2 and p.t == batch.t
    assert np.array_equal(p.W[0], p.W[1])
    assert np.allclose(p.V[1], 6e-4 * bs.phibar.T @ bs.bbar.T)


def test_stats_binary_roundtrip(tmp_path, small_story):
    _, batch = small_story
    bs = compute_stats(batch)
    path = tmp_path / "stats.bin"
    bs.save(path)
    back = BasisStats.load(path)
    for key in KEYS:
        assert np.array_equal(getattr(bs, key), getattr(back, key))
    assert (back.t, back.n) == (bs.t, bs.n)
    blob = path.read_bytes()
    assert blob.startswith(b"ATDL-STATS1")
    with pytest.raises(FormatError):
        BasisStats.from_bytes(blob[:-1])
    with pytest.raises(FormatError):
        BasisStats.from_bytes(b"ATDL-STATS2" + blob[11:])


def test_stats_are_deterministic(small_story):
    _, batch = small_story
    assert compute_stats(batch).to_bytes() == compute_stats(batch).to_bytes()
