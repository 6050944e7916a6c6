import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddsi.errors import (
    ColumnMismatch,
    EmptyDocument,
    EmptyInput,
    EmptyRun,
    TooFewDocs,
)
from ddsi.metrics import (
    EvalRun,
    MetricsReport,
    compression_ratio,
    evaluate,
    format_report_table,
    hits_at_k,
    homogenization,
    lcs_len,
    mrr_at_k,
    ngd,
    read_report_tsv,
    read_run,
    report_from_run,
    rouge_l,
    run_queries,
    write_report_tsv,
    write_run,
)
from ddsi.model import RankedList, init_model
from ddsi.rng import Xoshiro256StarStar
from ddsi.train import TrainConfig, train

from oracles import oracle_lcs


def run_with_gold_ranks(ranks, depth=10):
    """One query per rank; gold docid 0 placed at the requested 1-based rank."""
    rankings = []
    golds = []
    for qid, rank in enumerate(ranks):
        entries = []
        for pos in range(1, depth + 1):
            docid = 0 if pos == rank else 100 + qid * depth + pos
            entries.append((docid, float(depth - pos)))
        rankings.append(RankedList(qid=qid, entries=entries))
        golds.append(0)
    return EvalRun(rankings=rankings, golds=golds)


# ---------------------------------------------------------------------------
# relevance
# ---------------------------------------------------------------------------


def test_hits_all_headed_by_gold():
    run = run_with_gold_ranks([1, 1, 1])
    assert hits_at_k(run, 1) == 1.0


def test_hits_hand_counts():
    run = run_with_gold_ranks([1, 2, 4])
    assert hits_at_k(run, 1) == pytest.approx(1 / 3)
    assert hits_at_k(run, 5) == 1.0


def test_hits_gold_never_retrieved():
    run = run_with_gold_ranks([99, 99])  # rank beyond depth: gold absent
    for k in (1, 5, 10):
        assert hits_at_k(run, k) == 0.0


def test_hits_monotone_in_k():
    run = run_with_gold_ranks([1, 2, 4, 7, 99])
    h1, h5, h10 = (hits_at_k(run, k) for k in (1, 5, 10))
    assert h1 <= h5 <= h10


def test_mrr_hand_value():
    run = run_with_gold_ranks([1, 2, 4])
    assert mrr_at_k(run, 10) == pytest.approx((1 + 0.5 + 0.25) / 3, abs=1e-12)


def test_mrr_all_first():
    assert mrr_at_k(run_with_gold_ranks([1, 1])) == 1.0


def test_mrr_beyond_cutoff_contributes_zero():
    run = run_with_gold_ranks([11], depth=12)
    assert mrr_at_k(run, 10) == 0.0
    assert mrr_at_k(run, 12) == pytest.approx(1 / 11)


def test_mrr_bounded_by_hits():
    run = run_with_gold_ranks([1, 3, 99, 8])
    assert mrr_at_k(run, 10) <= hits_at_k(run, 10)


def test_empty_run_rejected():
    run = EvalRun(rankings=[], golds=[])
    with pytest.raises(EmptyRun):
        hits_at_k(run, 1)
    with pytest.raises(EmptyRun):
        mrr_at_k(run)


# ---------------------------------------------------------------------------
# lcs / rouge
# ---------------------------------------------------------------------------


def test_lcs_identity_subseq_empty():
    assert lcs_len([1, 2, 3], [1, 2, 3]) == 3
    assert lcs_len([1, 2, 3, 4], [2, 4]) == 2
    assert lcs_len([1, 2, 3], []) == 0


@settings(max_examples=80)
@given(
    st.lists(st.integers(min_value=0, max_value=5), max_size=25),
    st.lists(st.integers(min_value=0, max_value=5), max_size=25),
)
def test_lcs_matches_oracle(a, b):
    assert lcs_len(a, b) == oracle_lcs(a, b)


def test_rouge_identical():
    assert rouge_l([1, 2, 3], [1, 2, 3]) == 1.0


def test_rouge_disjoint():
    assert rouge_l([1, 2], [3, 4]) == 0.0


def test_rouge_hand_value():
    # lcs=2, precision 1, recall 0.5 -> F1 = 2/3
    assert rouge_l([1, 2, 3, 4], [2, 4]) == pytest.approx(2 / 3, abs=1e-12)


def test_rouge_empty_rejected():
    with pytest.raises(EmptyDocument):
        rouge_l([], [1])


@settings(max_examples=60)
@given(
    st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=20),
    st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=20),
)
def test_rouge_symmetric_unit_interval(a, b):
    assert rouge_l(a, b) == rouge_l(b, a)
    assert 0.0 <= rouge_l(a, b) <= 1.0


# ---------------------------------------------------------------------------
# homogenization
# ---------------------------------------------------------------------------


def test_homogenization_identical_docs():
    assert homogenization([[1, 2, 3]] * 4) == 1.0


def test_homogenization_disjoint_docs():
    assert homogenization([[1], [2], [3]]) == 0.0


def test_homogenization_mixed_third():
    # pairwise rouge: (a,b)=1, (a,c)=0, (b,c)=0
    assert homogenization([[1], [1], [2]]) == pytest.approx(1 / 3, abs=1e-12)


def test_homogenization_too_few():
    with pytest.raises(TooFewDocs):
        homogenization([[1, 2]])


@settings(max_examples=30)
@given(st.lists(st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=10), min_size=2, max_size=5), st.randoms())
def test_homogenization_permutation_invariant(docs, rnd):
    shuffled = list(docs)
    rnd.shuffle(shuffled)
    assert homogenization(shuffled) == pytest.approx(homogenization(docs), abs=1e-12)
    assert 0.0 <= homogenization(docs) <= 1.0


# ---------------------------------------------------------------------------
# ngd / compression ratio
# ---------------------------------------------------------------------------


def test_ngd_hand_cases():
    assert ngd([[1, 2, 1, 2]]) == pytest.approx(2 / 4 + 2 / 3 + 2 / 2 + 1 / 1, abs=1e-12)
    assert ngd([[1, 2, 3, 4]]) == 4.0
    assert ngd([[1, 1, 1, 1, 1]]) == pytest.approx(1 / 5 + 1 / 4 + 1 / 3 + 1 / 2, abs=1e-12)


def test_ngd_does_not_cross_doc_boundaries():
    # two docs of 2 tokens have no 3-grams or 4-grams at all
    assert ngd([[1, 2], [1, 2]]) == pytest.approx(2 / 4 + 1 / 2, abs=1e-12)


def test_ngd_short_input_skips_missing_levels():
    assert ngd([[5]]) == 1.0


def test_ngd_empty_rejected():
    with pytest.raises(EmptyInput):
        ngd([])
    with pytest.raises(EmptyInput):
        ngd([[], []])


@settings(max_examples=50)
@given(st.lists(st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=12), min_size=1, max_size=4))
def test_ngd_range(docs):
    value = ngd(docs)
    assert 0.0 < value <= 4.0


def test_compression_ratio_repetitive_vs_random():
    line = "abcdefghijklmnopqrst"  # 20 bytes
    repetitive = [line] * 500  # ~10 kB
    rng = Xoshiro256StarStar(99)
    random_text = ["".join(f"{rng.next_u64():016x}" for _ in range(32)) for _ in range(20)]  # ~10 kB hex
    cr_rep = compression_ratio(repetitive)
    cr_rand = compression_ratio(random_text)
    assert cr_rep > 5.0
    assert cr_rand < 2.0
    assert cr_rep > cr_rand


def test_compression_ratio_empty_rejected():
    with pytest.raises(EmptyInput):
        compression_ratio([])
    with pytest.raises(EmptyInput):
        compression_ratio([""])


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def make_single_doc_world(tmp_path):
    import json

    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps({"docid": 0, "title": "", "text": "only doc here"}) + "\n")
    from ddsi.corpus import QueryExample, load_corpus

    corpus = load_corpus(path)
    queries = [QueryExample(qid=0, tokens=corpus.vocab.tokenize("only doc"), gold_docid=0)]
    return corpus, queries


def test_evaluate_single_doc_corpus(tmp_path):
    corpus, queries = make_single_doc_world(tmp_path)
    params = init_model(corpus.vocab.size, 8, 1, 0)
    report = evaluate(params, queries, corpus, cutoff=1)
    assert report.hits1 == report.hits5 == report.hits10 == 1.0
    assert report.mrr10 == 1.0
    assert report.rouge_l_hom is None
    assert report.ngd > 0.0
    assert report.cr >= 1.0 or report.cr > 0.0


def test_evaluate_trained_beats_untrained(small_world):
    _, corpus, train_q, test_q = small_world
    untrained = init_model(corpus.vocab.size, 32, corpus.num_docs, 0)
    cfg = TrainConfig(alpha=1.0, k=5, epochs=8, batch_size=16, seed=0, dim=32)
    trained, _ = train(corpus, train_q, cfg)
    r_untrained = evaluate(untrained, test_q, corpus, cutoff=10)
    r_trained = evaluate(trained, test_q, corpus, cutoff=10)
    assert r_trained.hits10 > r_untrained.hits10
    assert r_trained.hits1 <= r_trained.hits5 <= r_trained.hits10
    assert r_trained.mrr10 <= r_trained.hits10


def test_evaluate_deterministic(small_world):
    _, corpus, _, test_q = small_world
    params = init_model(corpus.vocab.size, 16, corpus.num_docs, 3)
    a = evaluate(params, test_q, corpus)
    b = evaluate(params, test_q, corpus)
    assert a == b


# ---------------------------------------------------------------------------
# run / report files
# ---------------------------------------------------------------------------


def test_run_file_roundtrip(tmp_path, small_world):
    _, corpus, _, test_q = small_world
    params = init_model(corpus.vocab.size, 16, corpus.num_docs, 1)
    run = run_queries(params, test_q[:5], cutoff=4)
    path = tmp_path / "run.tsv"
    write_run(run, path)
    loaded = read_run(path)
    assert [r.qid for r in loaded] == [r.qid for r in run.rankings]
    for a, b in zip(loaded, run.rankings):
        assert a.entries == b.entries


def test_report_tsv_roundtrip(tmp_path):
    report = MetricsReport(
        hits1=0.5, hits5=0.75, hits10=1.0, mrr10=0.625,
        rouge_l_hom=0.123456789012345, ngd=3.25, cr=1.75, num_queries=8,
    )
    path = tmp_path / "report.tsv"
    write_report_tsv(report, path, dataset="synth", alpha=0.5)
    rows = read_report_tsv(path)
    assert len(rows) == 1
    row = rows[0]
    assert row["dataset"] == "synth"
    assert row["alpha"] == 0.5
    assert row["rouge_l"] == report.rouge_l_hom
    assert row["num_queries"] == 8


def test_report_tsv_absent_hom(tmp_path):
    report = MetricsReport(hits1=1, hits5=1, hits10=1, mrr10=1, rouge_l_hom=None, ngd=1.0, cr=1.0, num_queries=1)
    path = tmp_path / "report.tsv"
    write_report_tsv(report, path, dataset="d", alpha=None)
    row = read_report_tsv(path)[0]
    assert row["rouge_l"] is None
    assert row["alpha"] is None


def test_report_tsv_column_mismatch(tmp_path):
    path = tmp_path / "report.tsv"
    path.write_text("dataset\talpha\thits1\n")
    with pytest.raises(ColumnMismatch):
        read_report_tsv(path)


def test_format_table_sorts_by_alpha_desc(tmp_path):
    rows = []
    for alpha in (0.25, 1.0, 0.5, 0.75):
        report = MetricsReport(hits1=alpha, hits5=1, hits10=1, mrr10=1, rouge_l_hom=0.1, ngd=2.0, cr=1.5, num_queries=4)
        path = tmp_path / f"r{alpha}.tsv"
        write_report_tsv(report, path, dataset="synth", alpha=alpha)
        rows.extend(read_report_tsv(path))
    table = format_report_table(rows)
    lines = table.splitlines()
    assert lines[0].split()[:2] == ["Dataset", "alpha"]
    alphas = [float(line.split()[1]) for line in lines[2:]]
    assert alphas == [1.0, 0.75, 0.5, 0.25]


def test_report_from_run_rejects_unknown_docid(small_world):
    _, corpus, _, _ = small_world
    run = EvalRun(rankings=[RankedList(qid=0, entries=[(corpus.num_docs + 5, 1.0)])], golds=[0])
    with pytest.raises(EmptyInput):
        report_from_run(run, corpus)
