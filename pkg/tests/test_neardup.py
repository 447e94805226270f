import random
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.feature_extraction.text import TfidfVectorizer

from oracles import dense_cosines
from subfreq.neardup import (
    DuplicateGraph,
    NearDuplicateRemover,
    SparseVector,
    cosine,
    eliminate,
    find_duplicates,
    report_rows,
    vectorize,
)


def random_corpus(rng, n_docs, vocab=60, planted=0):
    words = [f"w{i}" for i in range(vocab)]
    docs = {f"d{i:03d}": [rng.choice(words) for _ in range(rng.randint(5, 40))] for i in range(n_docs)}
    ids = sorted(docs)
    for k in range(planted):
        src = docs[ids[k]]
        docs[f"dup{k:02d}"] = list(src) + [src[0]]
    return docs


def test_identical_and_disjoint():
    v = vectorize({"a": ["x", "y", "y"], "b": ["x", "y", "y"], "c": ["p", "q"]})
    assert cosine(v["a"], v["b"]) == pytest.approx(1.0, abs=1e-12)
    assert cosine(v["a"], v["c"]) == 0.0


def test_vectorize_errors_and_norm():
    with pytest.raises(ValueError, match="doc7"):
        vectorize({"ok": ["a"], "doc7": []})
    with pytest.raises(ValueError):
        vectorize({})
    with pytest.raises(ValueError):
        SparseVector.from_entries({1: 0.0})
    v = vectorize({"a": ["x", "y", "y", "z"], "b": ["x"]})
    for vec in v.values():
        assert abs(vec.norm - np.sqrt(sum(w * w for w in vec.entries.values()))) <= 1e-9 * vec.norm
        assert all(w > 0 for w in vec.entries.values())


def test_ten_doc_matrix_matches_dense_and_sklearn():
    rng = random.Random(3)
    docs = random_corpus(rng, 10, vocab=15)
    vecs = vectorize(docs)
    dense = dense_cosines(docs)
    for (a, b), c in dense.items():
        assert abs(cosine(vecs[a], vecs[b]) - c) < 1e-9
    tf = TfidfVectorizer(analyzer=lambda d: d, lowercase=False, smooth_idf=True, norm="l2")
    ids = sorted(docs)
    X = tf.fit_transform([docs[i] for i in ids])
    S = (X @ X.T).toarray()
    for i, j in combinations(range(10), 2):
        assert abs(S[i, j] - dense[(ids[i], ids[j])]) < 1e-9


def test_planted_pair_single_edge():
    rng = random.Random(11)
    docs = random_corpus(rng, 30, vocab=200, planted=1)
    dense = dense_cosines(docs)
    expected = {p for p, c in dense.items() if c >= 0.95}
    g = find_duplicates(vectorize(docs))
    assert set(g.edges) == expected and len(expected) == 1


def test_threshold_one_and_validation():
    docs = {"a": ["x", "y"], "b": ["x", "z"], "c": ["q"]}
    assert find_duplicates(vectorize(docs), 1.0).edges == {}
    for bad in (0.0, -0.1, 1.01):
        with pytest.raises(ValueError):
            find_duplicates(vectorize(docs), bad)


def test_triangle():
    docs = {"a": ["x", "y"], "b": ["x", "y"], "c": ["x", "y"], "d": ["z"]}
    g = find_duplicates(vectorize(docs), 1.0)
    assert set(g.edges) == {("a", "b"), ("a", "c"), ("b", "c")}
    assert all(c == 1.0 for c in g.edges.values())


def test_elimination_rules():
    g = DuplicateGraph(("a", "b"), {("a", "b"): 0.97}, sizes={"a": 10, "b": 20})
    assert eliminate(g) == {"a"}
    g = DuplicateGraph(("a", "b"), {("a", "b"): 0.97}, sizes={"a": 20, "b": 20})
    assert eliminate(g) == {"a"}
    star = DuplicateGraph(("c", "l1", "l2", "l3"),
                          {("c", "l1"): 1.0, ("c", "l2"): 1.0, ("c", "l3"): 1.0},
                          sizes={"c": 100, "l1": 1, "l2": 1, "l3": 1})
    assert eliminate(star) == {"c"}
    assert report_rows(star, {"c"}) == [("c", "l1", 1.0)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.6))
def test_random_graph_elimination(seed, p):
    rng = random.Random(seed)
    nodes = tuple(f"n{i:02d}" for i in range(50))
    edges = {(a, b): 0.99 for a, b in combinations(nodes, 2) if rng.random() < p / 5}
    sizes = {n: rng.randint(1, 5) for n in nodes}
    removed = eliminate(DuplicateGraph(nodes, edges, 0.95, sizes))
    assert not [e for e in edges if e[0] not in removed and e[1] not in removed]
    # every removed node had an edge to something
    touched = {n for e in edges for n in e}
    assert removed <= touched
    assert removed == eliminate(DuplicateGraph(nodes, dict(edges), 0.95, dict(sizes)))


def test_exactness_and_no_pairs_after_removal():
    rng = random.Random(5)
    for trial in range(5):
        docs = random_corpus(rng, 60, vocab=25, planted=4)
        dense = dense_cosines(docs)
        g = find_duplicates(vectorize(docs), 0.8)
        assert set(g.edges) == {pr for pr, c in dense.items() if c >= 0.8}
        rest = {k: v for k, v in docs.items() if k not in eliminate(g)}
        kept_pairs = [pr for pr, c in dense.items() if c >= 0.8 and pr[0] in rest and pr[1] in rest]
        assert kept_pairs == []


def test_estimator_api():
    docs = {"a": ["x", "y", "z"], "b": ["x", "y", "z", "x"], "c": ["p", "q", "r"]}
    est = NearDuplicateRemover(threshold=0.9)
    assert est.get_params() == {"threshold": 0.9}
    out = est.fit_transform(docs)
    assert set(out) == {"b", "c"} and est.removed_ == {"a"}
    with pytest.raises(ValueError):
        NearDuplicateRemover(threshold=2).fit(docs)


def test_blocks_do_not_change_result():
    rng = random.Random(8)
    docs = random_corpus(rng, 40, vocab=20, planted=3)
    v = vectorize(docs)
    assert find_duplicates(v, 0.7, block_rows=7).edges == find_duplicates(v, 0.7).edges
