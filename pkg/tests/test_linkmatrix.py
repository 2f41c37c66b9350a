import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clcp.linkmatrix import (
    Corpus,
    CorpusFormatError,
    build_cannot_link,
    compute_lift,
    parse_corpus_lines,
)


def toy_corpus():
    return Corpus(("j",), ("k",), ({"j", "k"}, {"j"}, {"k"}, set()))


def test_independent_pair_has_lift_one():
    table = compute_lift(toy_corpus())
    assert table.lift[0, 0] == 1.0
    assert len(build_cannot_link(table, 1.0)) == 0


def test_hand_counted_lift_two():
    docs = [{"j", "k"}] * 2 + [{"k"}] * 3 + [set()] * 5
    table = compute_lift(Corpus(("j",), ("k",), docs))
    assert (table.n_docs, table.row_counts[0], table.col_counts[0]) == (10, 2, 5)
    assert table.lift[0, 0] == 2.0
    assert len(build_cannot_link(table, 1.0)) == 0


def test_never_cooccurring_pair_is_constrained():
    corpus = Corpus(("j",), ("k",), ({"j"}, {"k"}))
    table = compute_lift(corpus)
    assert table.lift[0, 0] == 0.0
    assert build_cannot_link(table, 1.0).pairs.tolist() == [[0, 0]]


def test_absent_term_has_undefined_lift():
    corpus = Corpus(("j", "j2"), ("k",), ({"j", "k"}, {"k"}))
    table = compute_lift(corpus)
    assert np.isnan(table.lift[1, 0])
    assert len(build_cannot_link(table, 1.0)) == 0
    assert build_cannot_link(table, 1.0, constrain_undefined=True).pairs.tolist() == [[1, 0]]


def test_presence_counting_ignores_repeats():
    rows, cols = ("a", "b"), ("x",)
    corpus = parse_corpus_lines(["a\ta\tx", "b"], rows, cols)
    table = compute_lift(corpus)
    assert table.joint_counts.tolist() == [[1], [0]]


def random_corpus(rng, n_rows=4, n_cols=3, n_docs=12):
    rows = tuple(f"r{i}" for i in range(n_rows))
    cols = tuple(f"c{i}" for i in range(n_cols))
    vocab = rows + cols
    docs = [{t for t in vocab if rng.random() < 0.35} for _ in range(n_docs)]
    return Corpus(rows, cols, docs)


def test_lift_matches_loop_count():
    rng = np.random.default_rng(0)
    corpus = random_corpus(rng)
    table = compute_lift(corpus)
    for (j, rt), (k, ct) in itertools.product(enumerate(corpus.vocab_rows),
                                              enumerate(corpus.vocab_cols)):
        nj = sum(rt in d for d in corpus.docs)
        nk = sum(ct in d for d in corpus.docs)
        njk = sum(rt in d and ct in d for d in corpus.docs)
        if nj and nk:
            assert table.lift[j, k] == corpus.n_docs * njk / (nj * nk)
        else:
            assert np.isnan(table.lift[j, k])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 5), st.floats(0.01, 5))
def test_alpha_monotone(seed, a1, a2):
    lo, hi = sorted((a1, a2))
    table = compute_lift(random_corpus(np.random.default_rng(seed)))
    small = set(map(tuple, build_cannot_link(table, lo).pairs.tolist()))
    large = set(map(tuple, build_cannot_link(table, hi).pairs.tolist()))
    assert small <= large


def test_lift_symmetric_under_vocab_swap():
    corpus = random_corpus(np.random.default_rng(3))
    a = compute_lift(corpus).lift
    b = compute_lift(corpus.swapped()).lift
    np.testing.assert_array_equal(np.nan_to_num(a, nan=-1), np.nan_to_num(b.T, nan=-1))


def test_corpus_errors():
    with pytest.raises(CorpusFormatError, match=":2:"):
        parse_corpus_lines(["a", "zzz"], ("a",), ("x",))
    with pytest.raises(CorpusFormatError):
        parse_corpus_lines([], ("a",), ("x",))
    with pytest.raises(CorpusFormatError, match="overlap"):
        Corpus(("a",), ("a",), ({"a"},))
    with pytest.raises(ValueError):
        build_cannot_link(compute_lift(toy_corpus()), 0.0)


def test_always_together_gives_lift_one():
    table = compute_lift(Corpus(("j",), ("k",), [{"j", "k"}] * 7))
    assert table.lift[0, 0] == 1.0
    assert len(build_cannot_link(table, 1.0)) == 0


def test_independent_terms_have_lift_near_one():
    rng = np.random.default_rng(12)
    n = 10_000
    rows, cols = ("a", "b"), ("x", "y")
    p = {"a": 0.3, "b": 0.6, "x": 0.2, "y": 0.5}
    docs = [{t for t in rows + cols if rng.random() < p[t]} for _ in range(n)]
    lift = compute_lift(Corpus(rows, cols, docs)).lift
    assert np.all(np.abs(lift - 1.0) < 0.2)
