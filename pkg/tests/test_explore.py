from pathlib import Path

import numpy as np
import pytest

from atdl.corpus import CorpusConfig, build_vocab, encode_sequences
from atdl.errors import DimensionError, UnknownTokenError
from atdl.explore import AssociationQuery, dump_association_table, topk
from atdl.stats import compute_stats

HERE = Path(__file__).parent


def _tiny():
    docs = (HERE / "data" / "tiny_corpus.txt").read_text().splitlines()
    cfg = CorpusConfig(vocab_size_cap=100, seq_len=8)
    vocab = build_vocab(docs, cfg)
    return vocab, compute_stats(encode_sequences(docs, vocab, cfg))


def test_red_is_followed_by_ball():
    vocab, bs = _tiny()
    assert topk(AssociationQuery("red", "bigram", 1), bs, vocab)[0][0] == "ball"


def test_scores_nonincreasing_with_lexicographic_ties():
    vocab, bs = _tiny()
    for basis in ("bigram", "interchangeability", "context"):
        ranked = topk(AssociationQuery("the", basis, len(vocab)), bs, vocab)
        for (ta, sa), (tb, sb) in zip(ranked, ranked[1:]):
            assert sa > sb or (sa == sb and ta < tb)


def test_self_is_kept_and_dominates_disjoint_tokens():
    vocab, bs = _tiny()
    ranked = dict(topk(AssociationQuery("fish", "interchangeability", len(vocab)), bs, vocab))
    assert "fish" in ranked
    # "kite" and "fish" never share a predecessor in this corpus
    i, j = vocab.id_of["fish"], vocab.id_of["kite"]
    assert bs.sigma[i, j] <= bs.sigma[i, i]


def test_k_is_clamped_and_query_validated():
    vocab, bs = _tiny()
    assert len(topk(AssociationQuery("fish", "context", 10 ** 6), bs, vocab)) == len(vocab)
    with pytest.raises(UnknownTokenError):
        topk(AssociationQuery("unicorn", "context", 3), bs, vocab)
    with pytest.raises(ValueError):
        AssociationQuery("fish", "trigram", 3)
    with pytest.raises(ValueError):
        AssociationQuery("fish", "context", 0)


def test_column_direction_reads_the_column():
    vocab, bs = _tiny()
    top = topk(AssociationQuery("pond", "context", 1, direction="column"), bs, vocab)[0]
    col = bs.phibar[:, vocab.id_of["pond"]]
    assert top[1] == col.max()


def test_vocab_size_mismatch():
    vocab, bs = _tiny()
    vocab.tokens.append("extra")
    vocab.id_of["extra"] = len(vocab.tokens) - 1
    with pytest.raises(DimensionError):
        topk(AssociationQuery("fish"), bs, vocab)


def test_table_matches_golden_file():
    vocab, bs = _tiny()
    table = dump_association_table(["fish", "red", "nope"], bs, vocab, 5)
    assert table == (HERE / "golden" / "tiny_table.txt").read_text()
    assert table == dump_association_table(["fish", "red", "nope"], bs, vocab, 5)


def test_table_edge_cases():
    vocab, bs = _tiny()
    assert dump_association_table([], bs, vocab, 3) == "rank\n"
    twice = dump_association_table(["fish", "fish"], bs, vocab, 2, bases=("bigram",))
    assert twice.splitlines()[0].split() == ["rank", "fish/bigram", "fish/bigram"]
    js = dump_association_table(["fish"], bs, vocab, 2, bases=("context",), fmt="json")
    assert '"column": "fish/context"' in js


def test_story_corpus_fish_context_has_habitats():
    from atdl.synthetic import generate_stories

    docs = generate_stories(1500, seed=0, richness=1.0)
    cfg = CorpusConfig(vocab_size_cap=1000, seq_len=64, max_samples=1000)
    vocab = build_vocab(docs, cfg)
    bs = compute_stats(encode_sequences(docs, vocab, cfg))
    top30 = {t for t, _ in topk(AssociationQuery("fish", "context", 30), bs, vocab)}
    assert top30 & {"pond", "water", "lake", "river", "sea"}
    assert np.isfinite(bs.phibar).all()
