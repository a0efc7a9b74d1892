import sys

import numpy as np
import pytest

from atdl.corpus import CorpusConfig, SequenceBatch, build_vocab, encode_sequences
from atdl.model import ModelParams
from atdl.synthetic import generate_stories


def random_params(rng, layers, t, nv, scale=0.1):
    def u(*shape):
        return rng.uniform(-scale, scale, shape)

    return ModelParams([u(nv, nv) for _ in range(layers)], [u(nv, nv) for _ in range(layers)],
                       [u(t) for _ in range(layers)], u(nv, nv))


def random_batch(rng, n, t, nv):
    return SequenceBatch(rng.integers(0, nv, (n, t + 1)), nv)


def story_batch(cap, seq_len, n, richness, n_docs=3000, seed=0, min_len=80, max_len=160):
    docs = generate_stories(n_docs, seed=seed, richness=richness, min_len=min_len,
                            max_len=max_len)
    cfg = CorpusConfig(vocab_size_cap=cap, seq_len=seq_len, max_samples=n)
    vocab = build_vocab(docs, cfg)
    return vocab, encode_sequences(docs, vocab, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_story():
    """|V|=60, T=12 corpus of synthetic stories with a few hundred samples."""
    return story_batch(cap=60, seq_len=12, n=300, richness=0.05, n_docs=1500, min_len=13,
                       max_len=20)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
