import numpy as np
import pytest

from atdl.corpus import (CorpusConfig, SequenceBatch, Vocab, build_vocab, encode_sequences,
                         load_pretokenized, read_documents, tokenize)
from atdl.errors import CorpusError, FormatError


def test_tokenize_splits_punctuation_and_digits():
    assert tokenize('Tom had 3 cats. "Wow!" said Sue') == [
        "tom", "had", "3", "cats", ".", '"', "wow", "!", '"', "said", "sue"]


def test_vocab_is_frequency_ranked_with_lexicographic_ties():
    docs = ["b a a c", "c b d"]
    v = build_vocab(docs, CorpusConfig(vocab_size_cap=3, seq_len=2))
    assert v.tokens == ["a", "b", "c"]
    assert v.freq == [2, 2, 2]


def test_vocab_roundtrip(tmp_path):
    v = Vocab(["the", "\"", "fish"], [10, 4, 1])
    path = tmp_path / "vocab.tsv"
    v.save(path)
    w = Vocab.load(path)
    assert w.tokens == v.tokens and w.freq == v.freq
    with pytest.raises(FormatError):
        Vocab.loads("no tab here\n")


def test_encode_drops_short_and_oov_documents():
    docs = ["a b a b a", "a b", "a b z a b", "b a b a b a b"]
    cfg = CorpusConfig(vocab_size_cap=2, seq_len=3)
    vocab = build_vocab(docs, cfg)
    batch = encode_sequences(docs, vocab, cfg)
    assert batch.n == 2
    assert batch.t == 3
    assert vocab.decode(batch.ids[1]) == ["b", "a", "b", "a"]


def test_encode_respects_max_samples():
    docs = ["a b c d"] * 10
    cfg = CorpusConfig(vocab_size_cap=10, seq_len=3, max_samples=4)
    assert encode_sequences(docs, build_vocab(docs, cfg), cfg).n == 4


def test_empty_inputs_raise():
    cfg = CorpusConfig(seq_len=3)
    with pytest.raises(CorpusError):
        build_vocab([], cfg)
    with pytest.raises(CorpusError):
        encode_sequences(["a b"], build_vocab(["a b"], cfg), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        CorpusConfig(seq_len=1)
    with pytest.raises(ValueError):
        CorpusConfig(tokenizer="bpe")


def test_pretokenized_rows():
    cfg = CorpusConfig(seq_len=3, tokenizer="pre-tokenized-ids")
    b = load_pretokenized(["0 1 2 3 4", "1 2", "4 3 2 1"], cfg, vocab_size=5)
    assert b.ids.tolist() == [[0, 1, 2, 3], [4, 3, 2, 1]]
    with pytest.raises(CorpusError):
        load_pretokenized(["0 1 2 9"], cfg, vocab_size=5)
    with pytest.raises(CorpusError):
        load_pretokenized(["0 1 x 2"], cfg, vocab_size=5)
    # an invalid id is an error even on a row that is too short to use
    with pytest.raises(CorpusError):
        load_pretokenized(["0 1 2 3", "7"], cfg, vocab_size=5)


def test_batch_binary_roundtrip(tmp_path, rng):
    b = SequenceBatch(rng.integers(0, 9, (5, 7)), 9)
    path = tmp_path / "b.bin"
    b.save(path, chash=b"\x01" * 32)
    c = SequenceBatch.load(path)
    assert np.array_equal(b.ids, c.ids) and c.vocab_size == 9
    blob = path.read_bytes()
    with pytest.raises(FormatError):
        SequenceBatch.from_bytes(b"X" + blob[1:])
    with pytest.raises(FormatError):
        SequenceBatch.from_bytes(blob[:-4])


def test_batch_validation():
    with pytest.raises(CorpusError):
        SequenceBatch(np.zeros((0, 4), dtype=int), 3)
    with pytest.raises(CorpusError):
        SequenceBatch(np.array([[0, 1, 5]]), 3)


def test_read_documents_directory(tmp_path):
    (tmp_path / "b.txt").write_text("second\n")
    (tmp_path / "a.txt").write_text("first line\n\nother\n")
    assert list(read_documents(str(tmp_path))) == ["first line\n", "other\n", "second\n"]
    assert list(read_documents(str(tmp_path), per_file=True)) == ["first line\n\nother\n",
                                                                  "second\n"]
