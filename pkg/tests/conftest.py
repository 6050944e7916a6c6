import pytest

from ddsi.corpus import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_world():
    """A small but non-trivial corpus shared by fast tests."""
    cfg = SyntheticConfig(
        num_topics=4,
        docs_per_topic=5,
        vocab_per_topic=30,
        shared_vocab=20,
        doc_len=40,
        queries_per_doc=4,
        query_len=12,
        near_duplicate_fraction=0.5,
        seed=11,
    )
    corpus, train_q, test_q = generate_synthetic(cfg)
    return cfg, corpus, train_q, test_q
